#pragma once

#include "fofr/errors.hpp"
#include "fofr/grid_fn.hpp"
#include "fofr/cov_ops.hpp"
#include "fofr/estimator.hpp"
#include "fofr/selection.hpp"
#include "fofr/stats.hpp"
#include "fofr/parallel.hpp"
#include "fofr/simulate.hpp"
#include "fofr/dataio.hpp"
#include "fofr/io.hpp"

#define FOFR_VERSION_STRING "0.1.0"
