#include "combo/evaluation.hpp"

#include <cmath>
#include <json.hpp>

namespace combo {

DetectionScores detection_prf(const std::vector<bool>& keep, const std::vector<bool>& truth_clean) {
  if (keep.size() != truth_clean.size()) throw ValidationError("detection_prf: vectors differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] && truth_clean[i]) ++tp;
    else if (keep[i]) ++fp;
    else if (truth_clean[i]) ++fn;
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  DetectionScores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

double top1_accuracy(const Labels& preds, const Labels& labels) {
  if (preds.size() != labels.size()) throw ValidationError("top1_accuracy: vectors differ in length");
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double transition_error(const TransitionMatrix& estimate, const TransitionMatrix& truth) {
  const Matrix& a = estimate.probs;
  const Matrix& b = truth.probs;
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0)
    throw ValidationError("transition_error: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) total += std::abs(a(i, j) - b(i, j));
  return total / static_cast<double>(a.rows());
}

std::string to_string(Phase phase) { return phase == Phase::warmup ? "warmup" : "combo"; }

std::string epoch_log_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["phase"] = to_string(m.phase);
  j["test_acc"] = m.test_acc;
  if (m.detection) {
    j["det_p"] = m.detection->precision;
    j["det_r"] = m.detection->recall;
    j["det_f1"] = m.detection->f1;
  } else {
    j["det_p"] = nullptr;
    j["det_r"] = nullptr;
    j["det_f1"] = nullptr;
  }
  j["kept"] = m.kept_count;
  nlohmann::ordered_json ns = nlohmann::ordered_json::object();
  for (int c = 0; c < m.ns_snapshot.num_classes(); ++c) {
    const auto& s = m.ns_snapshot.of(c);
    if (!s.empty()) ns[std::to_string(c)] = std::vector<int>(s.begin(), s.end());
  }
  j["ns"] = ns;
  return j.dump();
}

}  // namespace combo
