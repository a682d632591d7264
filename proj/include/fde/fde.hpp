#pragma once

#include "fde/core.hpp"
#include "fde/fastconv.hpp"
#include "fde/problems.hpp"
#include "fde/solver.hpp"
#include "fde/stability.hpp"
#include "fde/starting.hpp"
#include "fde/weights.hpp"
