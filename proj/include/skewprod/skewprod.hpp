#pragma once

#include "skewprod/errors.hpp"
#include "skewprod/parallel.hpp"
#include "skewprod/stats.hpp"
#include "skewprod/base_dynamics.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/potential.hpp"
#include "skewprod/grid_function.hpp"
#include "skewprod/transfer_operator.hpp"
#include "skewprod/cone_metric.hpp"
#include "skewprod/phi_potential.hpp"
#include "skewprod/rpf_measures.hpp"
#include "skewprod/word_combinatorics.hpp"
#include "skewprod/config.hpp"
#include "skewprod/checks.hpp"
