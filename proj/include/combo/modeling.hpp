#pragma once
// Noise modeling: confusion matrices from growing clusters and transition
// matrices from the dual (prediction-factored) estimator.

#include <cstdint>
#include <vector>

#include "combo/core.hpp"

namespace combo {

// counts[i][j] = |{t : a[t] = i and b[t] = j}|.
ConfusionMatrix build_confusion(const Labels& labels_a, const Labels& labels_b, int num_classes);

struct ClusterState {
  Labels assignments;                 // cluster id per sample
  Matrix centroids;                   // K x h, mean feature of each cluster
  std::vector<int> anchor_counts;     // initial anchors per class
  std::vector<std::int64_t> sizes;    // members per cluster
};

struct GrowOptions {
  double alpha_pct = 50.0;
  double beta_pct = 50.0;
};

// Linear-interpolation percentile (pct in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double pct);

// Seeds one cluster per class from confident prediction-label consistent
// samples (or, failing that, the least confident ones), then attaches the
// remaining samples in descending order of p(x, pred) to the nearest
// centroid, updating that centroid after every insertion.
ClusterState grow_clusters(const ModelOutputs& out, const Labels& labels, const GrowOptions& opts = {});

// T[i][j] = sum_l P(noisy = j | pred = l) * P(pred = l | true = i).
// The first factor is counted directly; the second comes from anchors with
// p(x, i) > anchor_conf, or from the prediction row of argmax_x p(x, i) when
// class i has none.
TransitionMatrix dualt_estimate(const Labels& labels, const ModelOutputs& out, double anchor_conf = 0.95);

}  // namespace combo
