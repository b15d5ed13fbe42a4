#pragma once

#include <optional>
#include <string>
#include <vector>

#include "combo/core.hpp"

namespace combo {

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Positive class = clean. Empty denominators give 0.
DetectionScores detection_prf(const std::vector<bool>& keep, const std::vector<bool>& truth_clean);

double top1_accuracy(const Labels& preds, const Labels& labels);

// Mean over rows of the L1 distance between corresponding rows.
double transition_error(const TransitionMatrix& estimate, const TransitionMatrix& truth);

enum class Phase { warmup, combo };
std::string to_string(Phase phase);

struct EpochMetrics {
  int epoch = 0;
  Phase phase = Phase::warmup;
  std::optional<DetectionScores> detection;  // absent without ground truth
  double test_acc = 0.0;
  std::size_t kept_count = 0;
  NoiseSourceMap ns_snapshot;
};

// One JSON object per line:
// {"epoch":..,"phase":..,"test_acc":..,"det_p":..,"det_r":..,"det_f1":..,"kept":..,"ns":{..}}
std::string epoch_log_line(const EpochMetrics& m);

}  // namespace combo
