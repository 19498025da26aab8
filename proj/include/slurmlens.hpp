#pragma once

#include "slurmlens/config.hpp"
#include "slurmlens/dataset.hpp"
#include "slurmlens/error.hpp"
#include "slurmlens/evaluation.hpp"
#include "slurmlens/feature_ranking.hpp"
#include "slurmlens/graph_export.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/linear_models.hpp"
#include "slurmlens/stay_or_go.hpp"
#include "slurmlens/text.hpp"
