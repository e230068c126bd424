#pragma once

// Umbrella header.

#include "dgp.hpp"
#include "dml.hpp"
#include "errors.hpp"
#include "learners.hpp"
#include "learners/tuning.hpp"
#include "panel_data.hpp"
#include "resampling.hpp"
#include "stats.hpp"
#include "transform.hpp"
