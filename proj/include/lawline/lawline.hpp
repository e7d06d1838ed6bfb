#pragma once

// Umbrella header.

#include "lawline/analysis.hpp"
#include "lawline/core.hpp"
#include "lawline/csv.hpp"
#include "lawline/errors.hpp"
#include "lawline/ingest.hpp"
#include "lawline/io_util.hpp"
#include "lawline/laws.hpp"
#include "lawline/nlls.hpp"
#include "lawline/parallel.hpp"
#include "lawline/report.hpp"
#include "lawline/rng.hpp"
#include "lawline/svg.hpp"
#include "lawline/synth.hpp"
