#pragma once

#include "rbfcpm/errors.hpp"
#include "rbfcpm/geometry.hpp"
#include "rbfcpm/grid_tube.hpp"
#include "rbfcpm/io.hpp"
#include "rbfcpm/operators.hpp"
#include "rbfcpm/parallel.hpp"
#include "rbfcpm/problems.hpp"
#include "rbfcpm/rbf_core.hpp"
#include "rbfcpm/surfaces.hpp"
#include "rbfcpm/timestepping.hpp"
#include "rbfcpm/trimesh.hpp"
