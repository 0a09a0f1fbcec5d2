#pragma once

#include "fdd/core.hpp"
#include "fdd/csv.hpp"
#include "fdd/scanner_sim.hpp"
#include "fdd/param_extract.hpp"
#include "fdd/clustering.hpp"
#include "fdd/fuzzy.hpp"
#include "fdd/prioritize.hpp"
#include "fdd/features.hpp"
#include "fdd/forest.hpp"
#include "fdd/rules.hpp"
#include "fdd/diagnosis.hpp"
#include "fdd/history.hpp"
#include "fdd/metrics.hpp"
#include "fdd/pipeline.hpp"
#include "fdd/evaluation.hpp"
#include "fdd/service.hpp"
