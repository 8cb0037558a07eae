#pragma once

#include "lqg/canonical.hpp"
#include "lqg/core.hpp"
#include "lqg/equilibrium.hpp"
#include "lqg/error.hpp"
#include "lqg/identification.hpp"
#include "lqg/market.hpp"
#include "lqg/outcome.hpp"
#include "lqg/variance.hpp"
