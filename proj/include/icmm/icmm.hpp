#pragma once

// Umbrella header for the icmm library.

#include "icmm/cli.hpp"
#include "icmm/common.hpp"
#include "icmm/config.hpp"
#include "icmm/constraints.hpp"
#include "icmm/data.hpp"
#include "icmm/distributions.hpp"
#include "icmm/gibbs.hpp"
#include "icmm/io.hpp"
#include "icmm/linalg.hpp"
#include "icmm/rng.hpp"
#include "icmm/selection.hpp"
#include "icmm/summary.hpp"
