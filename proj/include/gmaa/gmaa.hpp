#pragma once

#include "gmaa/cbg.hpp"
#include "gmaa/cbg_solver.hpp"
#include "gmaa/dpomdp.hpp"
#include "gmaa/errors.hpp"
#include "gmaa/heuristic_cache.hpp"
#include "gmaa/heuristics.hpp"
#include "gmaa/joint_index.hpp"
#include "gmaa/model.hpp"
#include "gmaa/policy.hpp"
#include "gmaa/random_model.hpp"
#include "gmaa/search.hpp"
