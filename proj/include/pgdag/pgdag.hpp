#pragma once

#include "pgdag/checkpoint.hpp"
#include "pgdag/csv.hpp"
#include "pgdag/dataset.hpp"
#include "pgdag/error.hpp"
#include "pgdag/features.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/metrics.hpp"
#include "pgdag/pipeline.hpp"
#include "pgdag/policy.hpp"
#include "pgdag/prior_llm.hpp"
#include "pgdag/pruning.hpp"
#include "pgdag/rng.hpp"
#include "pgdag/scoring.hpp"
#include "pgdag/synth.hpp"
#include "pgdag/train.hpp"
