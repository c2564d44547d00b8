#pragma once

#include "ticl/alt_encoders.hpp"
#include "ticl/baselines.hpp"
#include "ticl/curation.hpp"
#include "ticl/inference.hpp"
#include "ticl/io.hpp"
#include "ticl/model.hpp"
#include "ticl/retrieval.hpp"
#include "ticl/synth.hpp"
#include "ticl/time_core.hpp"
#include "ticl/trainer.hpp"
