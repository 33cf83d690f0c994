#pragma once

#include "collar/errors.hpp"
#include "collar/geometry.hpp"
#include "collar/models.hpp"
#include "collar/solver.hpp"
#include "collar/barriers.hpp"
#include "collar/analysis.hpp"
#include "collar/io.hpp"
#include "collar/config.hpp"
#include "collar/experiments.hpp"
