#pragma once
// Noise-source identification: per-column 1-D Gaussian mixtures with BIC
// model selection over a noise matrix oriented rows = noisy labels,
// columns = predicted/true labels.

#include <cstdint>
#include <span>
#include <vector>

#include "combo/core.hpp"

namespace combo {

struct Gmm1d {
  int k = 0;
  std::vector<double> weights;
  std::vector<double> means;       // ascending
  std::vector<double> variances;
  double var_floor = 0.0;
  double loglik = 0.0;
  Matrix responsibilities;         // n x k, same component order as means

  // Index of the component with the largest responsibility for point i
  // (lowest index on ties).
  int component_of(std::size_t i) const;
};

struct GmmOptions {
  int n_init = 5;
  int max_iter = 500;
  double rel_tol = 1e-8;
};

// EM fit, best of n_init restarts by log-likelihood. Components are returned
// sorted by mean. Identical inputs with k > 1 give duplicated means at the
// variance floor.
Gmm1d fit_gmm_1d(std::span<const double> values, int k, std::uint64_t seed, const GmmOptions& opts = {});

// Mixture log-likelihood of `values` under the fitted parameters.
double gmm_loglik(const Gmm1d& g, std::span<const double> values);

// (3k - 1) ln(n) - 2 loglik; lower is better.
double bic_score(const Gmm1d& g, std::size_t n_points);

// Fits each candidate k and returns the one with the lowest BIC (first on ties).
int select_components(std::span<const double> values, std::span<const int> candidates, std::uint64_t seed);

struct ColumnAnalysis {
  int column = 0;
  bool skipped = false;      // no off-diagonal mass
  bool gap_rule = false;     // K < 4 fallback used
  int chosen_k = 0;          // 2 or 3 when fitted
  double bic2 = 0.0;
  double bic3 = 0.0;
  std::vector<int> flagged;  // rows j that receive column c as a source
};

// `oriented` is K x K with rows = noisy labels.
ColumnAnalysis analyze_column(const Matrix& oriented, int column, std::uint64_t seed);

NoiseSourceMap identify_sources_oriented(const Matrix& oriented, std::uint64_t seed = 0);
NoiseSourceMap identify_sources(const ConfusionMatrix& cm, std::uint64_t seed = 0);
// Analyzes the transpose, so columns index true labels.
NoiseSourceMap identify_sources(const TransitionMatrix& tm, std::uint64_t seed = 0);

}  // namespace combo
