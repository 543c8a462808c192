#pragma once

#include "plr/blocking.hpp"
#include "plr/dgp.hpp"
#include "plr/errors.hpp"
#include "plr/estimator.hpp"
#include "plr/functions.hpp"
#include "plr/harness.hpp"
#include "plr/inference.hpp"
#include "plr/mlp.hpp"
#include "plr/orthogonality.hpp"
#include "plr/sieve.hpp"
