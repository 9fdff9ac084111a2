#pragma once

// Umbrella header for the numerical core (no CLI).

#include "flexreg/errors.hpp"
#include "flexreg/experiments.hpp"
#include "flexreg/exponents.hpp"
#include "flexreg/global_search.hpp"
#include "flexreg/io.hpp"
#include "flexreg/operators.hpp"
#include "flexreg/penalty.hpp"
#include "flexreg/prox.hpp"
#include "flexreg/solver.hpp"
