#pragma once

#include "lagflow/checks.hpp"
#include "lagflow/config.hpp"
#include "lagflow/diagnostics.hpp"
#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/experiment.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/grid.hpp"
#include "lagflow/legendre.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/parallel.hpp"
#include "lagflow/spectral_algebra.hpp"
#include "lagflow/state_io.hpp"
#include "lagflow/vec2.hpp"
