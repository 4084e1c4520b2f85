#pragma once

// Umbrella header: the whole library in one include.

#include "symga/errors.hpp"
#include "symga/rng.hpp"
#include "symga/game.hpp"
#include "symga/policy.hpp"
#include "symga/quantizer.hpp"
#include "symga/solver.hpp"
#include "symga/revision.hpp"
#include "symga/learner.hpp"
#include "symga/orchestrator.hpp"
#include "symga/io.hpp"
