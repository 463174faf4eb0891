#pragma once

// Everything except the HTTP service (include ccbo/service.hpp for that).

#include "ccbo/acquisition.hpp"
#include "ccbo/benchmark.hpp"
#include "ccbo/campaign.hpp"
#include "ccbo/csv.hpp"
#include "ccbo/design_space.hpp"
#include "ccbo/error.hpp"
#include "ccbo/gp_classification.hpp"
#include "ccbo/gp_regression.hpp"
#include "ccbo/kernel.hpp"
#include "ccbo/optimize.hpp"
#include "ccbo/simulator.hpp"
#include "ccbo/sobol.hpp"
#include "ccbo/stats.hpp"
#include "ccbo/strategy.hpp"
