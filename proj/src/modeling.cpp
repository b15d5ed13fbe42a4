#include "combo/modeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace combo {

ConfusionMatrix build_confusion(const Labels& labels_a, const Labels& labels_b, int num_classes) {
  if (labels_a.size() != labels_b.size()) throw ValidationError("build_confusion: label vectors differ in length");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes * num_classes), 0);
  for (std::size_t t = 0; t < labels_a.size(); ++t) {
    const int a = labels_a[t];
    const int b = labels_b[t];
    if (a < 0 || b < 0 || a >= num_classes || b >= num_classes)
      throw ValidationError("build_confusion: label out of range at index " + std::to_string(t));
    ++cm.counts[static_cast<std::size_t>(a * num_classes + b)];
  }
  return cm;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ClusterState grow_clusters(const ModelOutputs& out, const Labels& labels, const GrowOptions& opts) {
  if (!(opts.alpha_pct > 0.0 && opts.alpha_pct < 100.0) || !(opts.beta_pct > 0.0 && opts.beta_pct < 100.0))
    throw ConfigError("cluster percentiles must lie in (0, 100)");
  const std::size_t n = out.size();
  if (labels.size() != n) throw ValidationError("grow_clusters: labels length differs from outputs");
  const int num_classes = static_cast<int>(out.probs.cols());
  const std::size_t h = out.features.cols();

  // Confidence in the predicted class.
  std::vector<double> conf(n);
  for (std::size_t i = 0; i < n; ++i) conf[i] = out.probs(i, static_cast<std::size_t>(out.preds[i]));

  ClusterState state;
  state.assignments.assign(n, -1);
  state.centroids = Matrix(static_cast<std::size_t>(num_classes), h);
  state.anchor_counts.assign(static_cast<std::size_t>(num_classes), 0);
  state.sizes.assign(static_cast<std::size_t>(num_classes), 0);

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  for (int k = 0; k < num_classes; ++k) {
    const auto& mine = members[static_cast<std::size_t>(k)];
    if (mine.empty()) throw ValidationError("empty class " + std::to_string(k));
    const auto kk = static_cast<std::size_t>(k);

    std::vector<std::size_t> anchors;
    std::vector<std::size_t> consistent;
    for (std::size_t i : mine)
      if (out.preds[i] == k) consistent.push_back(i);
    if (!consistent.empty()) {
      std::vector<double> scores;
      for (std::size_t i : consistent) scores.push_back(out.probs(i, kk));
      const double alpha = percentile(scores, opts.alpha_pct);
      for (std::size_t i : consistent)
        if (out.probs(i, kk) > alpha) anchors.push_back(i);
    }
    if (anchors.empty()) {
      std::vector<double> scores;
      for (std::size_t i : mine) scores.push_back(conf[i]);
      const double beta = percentile(scores, opts.beta_pct);
      for (std::size_t i : mine)
        if (conf[i] < beta) anchors.push_back(i);
    }
    if (anchors.empty()) {
      std::size_t least = mine.front();
      for (std::size_t i : mine)
        if (conf[i] < conf[least]) least = i;
      anchors.push_back(least);
    }

    auto centroid = state.centroids.row(kk);
    for (std::size_t i : anchors) {
      state.assignments[i] = k;
      auto f = out.features.row(i);
      for (std::size_t j = 0; j < h; ++j) centroid[j] += f[j];
    }
    for (double& v : centroid) v /= static_cast<double>(anchors.size());
    state.anchor_counts[kk] = static_cast<int>(anchors.size());
    state.sizes[kk] = static_cast<std::int64_t>(anchors.size());
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (state.assignments[i] < 0) rest.push_back(i);
  std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });

  for (std::size_t i : rest) {
    auto f = out.features.row(i);
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < num_classes; ++k) {
      auto c = state.centroids.row(static_cast<std::size_t>(k));
      double dist = 0.0;
      for (std::size_t j = 0; j < h; ++j) dist += (f[j] - c[j]) * (f[j] - c[j]);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    const auto kb = static_cast<std::size_t>(best);
    const auto m = static_cast<double>(state.sizes[kb]);
    auto c = state.centroids.row(kb);
    for (std::size_t j = 0; j < h; ++j) c[j] = (m * c[j] + f[j]) / (m + 1.0);
    ++state.sizes[kb];
    state.assignments[i] = best;
  }
  return state;
}

TransitionMatrix dualt_estimate(const Labels& labels, const ModelOutputs& out, double anchor_conf) {
  if (!(anchor_conf > 0.0 && anchor_conf < 1.0)) throw ConfigError("anchor_conf must lie in (0, 1)");
  const std::size_t n = out.size();
  if (labels.size() != n) throw ValidationError("dualt_estimate: labels length differs from outputs");
  const std::size_t k = out.probs.cols();

  // noisy_given_pred(l, j) = P(noisy = j | pred = l)
  Matrix noisy_given_pred(k, k);
  for (std::size_t i = 0; i < n; ++i)
    noisy_given_pred(static_cast<std::size_t>(out.preds[i]), static_cast<std::size_t>(labels[i])) += 1.0;
  for (std::size_t l = 0; l < k; ++l) {
    auto row = noisy_given_pred.row(l);
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    if (total == 0.0) {
      log_warn("dualt: no sample predicted as class " + std::to_string(l) + "; using a uniform row");
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(k));
    } else {
      for (double& v : row) v /= total;
    }
  }

  // pred_given_true(i, l) = P(pred = l | true = i)
  Matrix pred_given_true(k, k);
  for (std::size_t c = 0; c < k; ++c) {
    auto row = pred_given_true.row(c);
    std::size_t anchors = 0;
    std::size_t most_confident = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = out.probs(i, c);
      if (p > anchor_conf) {
        row[static_cast<std::size_t>(out.preds[i])] += 1.0;
        ++anchors;
      }
      if (p > out.probs(most_confident, c)) most_confident = i;
    }
    if (anchors > 0) {
      for (double& v : row) v /= static_cast<double>(anchors);
    } else {
      auto fallback = out.probs.row(most_confident);
      std::copy(fallback.begin(), fallback.end(), row.begin());
    }
  }

  TransitionMatrix t;
  t.probs = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double w = pred_given_true(i, l);
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) t.probs(i, j) += w * noisy_given_pred(l, j);
    }
  return t;
}

}  // namespace combo
