#pragma once

// Umbrella header for the decentralized coded caching toolkit.

#include "dcc/combinatorics.hpp"
#include "dcc/errors.hpp"
#include "dcc/experiment.hpp"
#include "dcc/gp.hpp"
#include "dcc/gp_solver.hpp"
#include "dcc/gp_successive.hpp"
#include "dcc/model.hpp"
#include "dcc/rate.hpp"
#include "dcc/simulate.hpp"
#include "dcc/strategies.hpp"
