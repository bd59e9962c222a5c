#pragma once

// Umbrella header.

#include "fairpen/csv.hpp"
#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/io.hpp"
#include "fairpen/metrics.hpp"
#include "fairpen/model.hpp"
#include "fairpen/parallel.hpp"
#include "fairpen/penalty.hpp"
#include "fairpen/pipeline.hpp"
#include "fairpen/random.hpp"
#include "fairpen/synth.hpp"
#include "fairpen/trainer.hpp"
