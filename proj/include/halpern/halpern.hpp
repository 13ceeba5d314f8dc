#pragma once

#include "halpern/certificates.hpp"
#include "halpern/error.hpp"
#include "halpern/iteration.hpp"
#include "halpern/operator.hpp"
#include "halpern/page.hpp"
#include "halpern/projections.hpp"
#include "halpern/random.hpp"
#include "halpern/schedule.hpp"
#include "halpern/solver.hpp"
#include "halpern/trace.hpp"
#include "halpern/wdro.hpp"
