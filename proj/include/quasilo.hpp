#pragma once

#include "quasilo/core.hpp"
#include "quasilo/geometry.hpp"
#include "quasilo/noise.hpp"
#include "quasilo/smallball.hpp"
#include "quasilo/esseen.hpp"
#include "quasilo/hyperplane.hpp"
#include "quasilo/gap.hpp"
#include "quasilo/io.hpp"
#include "quasilo/harness.hpp"
