#pragma once

#include "hypo/audit.hpp"
#include "hypo/config.hpp"
#include "hypo/covariance.hpp"
#include "hypo/error.hpp"
#include "hypo/group_geometry.hpp"
#include "hypo/kernels.hpp"
#include "hypo/linalg.hpp"
#include "hypo/operator_core.hpp"
#include "hypo/quadrature.hpp"
#include "hypo/sde_sim.hpp"
#include "hypo/singular_integral.hpp"
#include "hypo/suites.hpp"
#include "hypo/testbed.hpp"
