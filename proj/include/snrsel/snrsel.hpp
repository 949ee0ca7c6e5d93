#pragma once

// Umbrella header: SNR-based per-class feature selection over low-rank
// generative models, with a class-incremental minimum-distance classifier
// and a simulation/evaluation harness.

#include "snrsel/classifier.hpp"
#include "snrsel/data.hpp"
#include "snrsel/data_io.hpp"
#include "snrsel/error.hpp"
#include "snrsel/estimators.hpp"
#include "snrsel/experiments.hpp"
#include "snrsel/rng.hpp"
#include "snrsel/simulation.hpp"
#include "snrsel/snr.hpp"
#include "snrsel/types.hpp"
#include "snrsel/version.hpp"
