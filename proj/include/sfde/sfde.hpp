#pragma once

#include "sfde/contrast.hpp"
#include "sfde/delay_measure.hpp"
#include "sfde/errors.hpp"
#include "sfde/estimate.hpp"
#include "sfde/io.hpp"
#include "sfde/linalg.hpp"
#include "sfde/model.hpp"
#include "sfde/montecarlo.hpp"
#include "sfde/rng.hpp"
#include "sfde/simulate.hpp"
#include "sfde/stats.hpp"
