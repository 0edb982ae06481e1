#pragma once

// Umbrella header for the labelfuse library: EM-based annotation consensus,
// model-augmented meta-algorithms, reliability estimation, data-driven label
// thresholds, annotator simulation, metrics, and the experiment harness.

#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"
#include "labelfuse/rng.hpp"
#include "labelfuse/core.hpp"
#include "labelfuse/em.hpp"
#include "labelfuse/classifier.hpp"
#include "labelfuse/meta.hpp"
#include "labelfuse/threshold.hpp"
#include "labelfuse/simulate.hpp"
#include "labelfuse/metrics.hpp"
#include "labelfuse/synthetic.hpp"
#include "labelfuse/csv.hpp"
#include "labelfuse/experiment.hpp"
#include "labelfuse/report.hpp"
