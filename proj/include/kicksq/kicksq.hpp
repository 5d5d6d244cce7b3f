#pragma once

#include "kicksq/config.hpp"
#include "kicksq/ensemble.hpp"
#include "kicksq/errors.hpp"
#include "kicksq/expm.hpp"
#include "kicksq/moments.hpp"
#include "kicksq/pulse.hpp"
#include "kicksq/scenario.hpp"
