#pragma once

#include "smooth_cbf/constraints.hpp"
#include "smooth_cbf/dynamics.hpp"
#include "smooth_cbf/errors.hpp"
#include "smooth_cbf/geometry.hpp"
#include "smooth_cbf/output.hpp"
#include "smooth_cbf/qp.hpp"
#include "smooth_cbf/scenario.hpp"
#include "smooth_cbf/scheduler.hpp"
#include "smooth_cbf/simulation.hpp"
