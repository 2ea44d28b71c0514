#pragma once

#include "perflod/config.hpp"
#include "perflod/dyadic.hpp"
#include "perflod/errors.hpp"
#include "perflod/experiment.hpp"
#include "perflod/fem.hpp"
#include "perflod/geometry.hpp"
#include "perflod/interp.hpp"
#include "perflod/lod.hpp"
#include "perflod/mesh.hpp"
#include "perflod/parallel.hpp"
#include "perflod/poincare.hpp"
