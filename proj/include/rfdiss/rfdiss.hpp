#pragma once

#include "rfdiss/comparison.hpp"
#include "rfdiss/derivatives.hpp"
#include "rfdiss/dynamics.hpp"
#include "rfdiss/errors.hpp"
#include "rfdiss/history.hpp"
#include "rfdiss/iss.hpp"
#include "rfdiss/signals.hpp"
#include "rfdiss/solver.hpp"
#include "rfdiss/types.hpp"
