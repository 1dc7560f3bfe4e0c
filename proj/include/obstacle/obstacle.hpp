#pragma once

// Umbrella header: the whole library.

#include "obstacle/errors.hpp"
#include "obstacle/grid.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/complementarity.hpp"
#include "obstacle/vi_solver.hpp"
#include "obstacle/sensitivity.hpp"
#include "obstacle/stationarity.hpp"
#include "obstacle/structure.hpp"
#include "obstacle/ssc.hpp"
#include "obstacle/optimizer.hpp"
#include "obstacle/counterexamples.hpp"
#include "obstacle/expr.hpp"
#include "obstacle/config.hpp"
#include "obstacle/cli.hpp"
