#pragma once

// Umbrella header.

#include "lurye/attractors.hpp"
#include "lurye/error.hpp"
#include "lurye/experiments.hpp"
#include "lurye/json_io.hpp"
#include "lurye/lp.hpp"
#include "lurye/lti.hpp"
#include "lurye/multipliers.hpp"
#include "lurye/nonlinearity.hpp"
#include "lurye/signals.hpp"
#include "lurye/simulation.hpp"
#include "lurye/stability.hpp"
