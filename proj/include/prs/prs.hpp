#pragma once

// Umbrella header for the replay-memory library.

#include "prs/curation.hpp"
#include "prs/experiment.hpp"
#include "prs/io.hpp"
#include "prs/metrics.hpp"
#include "prs/model.hpp"
#include "prs/partitioning.hpp"
#include "prs/replay_memory.hpp"
#include "prs/reservoir.hpp"
#include "prs/running_stats.hpp"
#include "prs/streamgen.hpp"
#include "prs/types.hpp"
