#pragma once

#include "rmstboost/boost.hpp"
#include "rmstboost/error.hpp"
#include "rmstboost/evaluate.hpp"
#include "rmstboost/io.hpp"
#include "rmstboost/matrix.hpp"
#include "rmstboost/parallel.hpp"
#include "rmstboost/random.hpp"
#include "rmstboost/simulate.hpp"
#include "rmstboost/survival.hpp"
#include "rmstboost/tree.hpp"
#include "rmstboost/value.hpp"
