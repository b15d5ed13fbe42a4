#include "combo/sourceid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "combo/modeling.hpp"
#include "combo/rng.hpp"

namespace combo {

int Gmm1d::component_of(std::size_t i) const {
  auto row = responsibilities.row(i);
  return static_cast<int>(argmax(row));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

// E-step: fills responsibilities, returns the log-likelihood.
double expectation(const std::vector<double>& weights, const std::vector<double>& means,
                   const std::vector<double>& vars, std::span<const double> x, Matrix& resp) {
  const std::size_t k = weights.size();
  std::vector<double> logp(k);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      logp[c] = weights[c] > 0.0 ? std::log(weights[c]) + log_normal(x[i], means[c], vars[c])
                                 : -std::numeric_limits<double>::infinity();
      best = std::max(best, logp[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(logp[c] - best);
    const double lse = best + std::log(sum);
    for (std::size_t c = 0; c < k; ++c) resp(i, c) = std::exp(logp[c] - lse);
    total += lse;
  }
  return total;
}

void maximization(std::span<const double> x, const Matrix& resp, double floor, std::vector<double>& weights,
                  std::vector<double>& means, std::vector<double>& vars) {
  const std::size_t k = weights.size();
  const auto n = static_cast<double>(x.size());
  for (std::size_t c = 0; c < k; ++c) {
    double mass = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mass += resp(i, c);
      first += resp(i, c) * x[i];
    }
    if (mass <= 0.0) {
      weights[c] = 0.0;
      vars[c] = floor;
      continue;
    }
    const double mean = first / mass;
    double second = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) second += resp(i, c) * (x[i] - mean) * (x[i] - mean);
    weights[c] = mass / n;
    means[c] = mean;
    vars[c] = std::max(second / mass, floor);
  }
}

struct Fit {
  std::vector<double> weights, means, vars;
  Matrix resp;
  double loglik = -std::numeric_limits<double>::infinity();
};

Fit run_em(std::span<const double> x, std::vector<double> init_means, double floor, double total_var,
           const GmmOptions& opts) {
  const std::size_t k = init_means.size();
  const std::size_t n = x.size();
  Fit fit;
  fit.weights.assign(k, 0.0);
  fit.means = init_means;
  fit.vars.assign(k, floor);
  fit.resp = Matrix(n, k);

  // Hard nearest-mean assignment, then one M-step, gives the starting point.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (std::abs(x[i] - init_means[c]) < std::abs(x[i] - init_means[best])) best = c;
    fit.resp(i, best) = 1.0;
  }
  maximization(x, fit.resp, floor, fit.weights, fit.means, fit.vars);
  for (std::size_t c = 0; c < k; ++c)
    if (fit.weights[c] == 0.0) {
      fit.weights[c] = 1.0 / static_cast<double>(n);
      fit.means[c] = init_means[c];
      fit.vars[c] = std::max(total_var, floor);
    }
  const double wsum = std::accumulate(fit.weights.begin(), fit.weights.end(), 0.0);
  for (double& w : fit.weights) w /= wsum;

  double prev = expectation(fit.weights, fit.means, fit.vars, x, fit.resp);
  for (int it = 0; it < opts.max_iter; ++it) {
    maximization(x, fit.resp, floor, fit.weights, fit.means, fit.vars);
    const double ll = expectation(fit.weights, fit.means, fit.vars, x, fit.resp);
    const double change = std::abs(ll - prev);
    prev = ll;
    if (change <= opts.rel_tol * std::max(std::abs(ll), 1e-12)) break;
  }
  fit.loglik = prev;
  return fit;
}

}  // namespace

Gmm1d fit_gmm_1d(std::span<const double> values, int k, std::uint64_t seed, const GmmOptions& opts) {
  if (k < 1 || values.size() < static_cast<std::size_t>(k)) throw ValidationError("fit_gmm_1d needs |values| >= k >= 1");
  const std::size_t n = values.size();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double total_var = 0.0;
  for (double v : values) total_var += (v - mean) * (v - mean);
  total_var /= static_cast<double>(n);
  const double floor = 1e-6 * total_var + 1e-12;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::vector<double> copy(sorted);
  auto quantile = [&](double q) { return percentile(copy, 100.0 * q); };

  Rng rng = make_rng(seed, {kStreamGmm, static_cast<std::uint64_t>(k)});
  Fit best;
  const int restarts = std::max(1, opts.n_init);
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> init(static_cast<std::size_t>(k));
    if (r == 0) {
      // Evenly spread quantiles.
      for (int c = 0; c < k; ++c) init[static_cast<std::size_t>(c)] = quantile((c + 0.5) / k);
    } else if (r == 1) {
      // Evenly spread over the value range.
      for (int c = 0; c < k; ++c)
        init[static_cast<std::size_t>(c)] = sorted.front() + (c + 0.5) / k * (sorted.back() - sorted.front());
    } else {
      // Random quantile levels.
      for (double& m : init) m = quantile(uniform01(rng));
      std::sort(init.begin(), init.end());
    }
    Fit fit = run_em(values, init, floor, total_var, opts);
    if (fit.loglik > best.loglik) best = std::move(fit);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return best.means[a] < best.means[b]; });

  Gmm1d g;
  g.k = k;
  g.var_floor = floor;
  g.loglik = best.loglik;
  g.responsibilities = Matrix(n, static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < order.size(); ++c) {
    g.weights.push_back(best.weights[order[c]]);
    g.means.push_back(best.means[order[c]]);
    g.variances.push_back(best.vars[order[c]]);
    for (std::size_t i = 0; i < n; ++i) g.responsibilities(i, c) = best.resp(i, order[c]);
  }
  return g;
}

double gmm_loglik(const Gmm1d& g, std::span<const double> values) {
  Matrix resp(values.size(), static_cast<std::size_t>(g.k));
  return expectation(g.weights, g.means, g.variances, values, resp);
}

double bic_score(const Gmm1d& g, std::size_t n_points) {
  return (3.0 * g.k - 1.0) * std::log(static_cast<double>(n_points)) - 2.0 * g.loglik;
}

int select_components(std::span<const double> values, std::span<const int> candidates, std::uint64_t seed) {
  int chosen = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k : candidates) {
    const double bic = bic_score(fit_gmm_1d(values, k, seed), values.size());
    if (bic < best) {
      best = bic;
      chosen = k;
    }
  }
  return chosen;
}

ColumnAnalysis analyze_column(const Matrix& oriented, int column, std::uint64_t seed) {
  const std::size_t k = oriented.rows();
  const auto c = static_cast<std::size_t>(column);
  ColumnAnalysis result;
  result.column = column;

  std::vector<double> values(k);
  double offdiag_mass = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    values[j] = oriented(j, c);
    if (j != c) offdiag_mass += std::abs(values[j]);
  }
  if (offdiag_mass == 0.0) {
    result.skipped = true;
    return result;
  }

  if (k < 4) {
    result.gap_rule = true;
    double mean = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != c) mean += values[j];
    mean /= static_cast<double>(k - 1);
    double var = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != c) var += (values[j] - mean) * (values[j] - mean);
    const double threshold = mean + 2.0 * std::sqrt(var / static_cast<double>(k - 1));
    for (std::size_t j = 0; j < k; ++j)
      if (j != c && values[j] > threshold) result.flagged.push_back(static_cast<int>(j));
    return result;
  }

  const std::uint64_t col_seed = derive_seed(seed, {kStreamGmm, c});
  const Gmm1d two = fit_gmm_1d(values, 2, col_seed);
  const Gmm1d three = fit_gmm_1d(values, 3, col_seed);
  result.bic2 = bic_score(two, k);
  result.bic3 = bic_score(three, k);
  if (result.bic3 < result.bic2) {
    result.chosen_k = 3;
    // Ascending means: 2 = top (true-label peak), 1 = mid (noisy labels).
    const bool diagonal_on_top = three.component_of(c) == 2;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == c) continue;
      const int comp = three.component_of(j);
      if (comp == 1 || (comp == 2 && !diagonal_on_top)) result.flagged.push_back(static_cast<int>(j));
    }
  } else {
    result.chosen_k = 2;
  }
  return result;
}

NoiseSourceMap identify_sources_oriented(const Matrix& oriented, std::uint64_t seed) {
  if (oriented.rows() != oriented.cols()) throw ValidationError("identify_sources needs a square matrix");
  const int k = static_cast<int>(oriented.rows());
  NoiseSourceMap ns(k);
  for (int c = 0; c < k; ++c)
    for (int j : analyze_column(oriented, c, seed).flagged) ns.add(j, c);
  return ns;
}

NoiseSourceMap identify_sources(const ConfusionMatrix& cm, std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(cm.num_classes);
  Matrix m(k, k);
  for (std::size_t i = 0; i < k * k; ++i) m.data()[i] = static_cast<double>(cm.counts[i]);
  return identify_sources_oriented(m, seed);
}

NoiseSourceMap identify_sources(const TransitionMatrix& tm, std::uint64_t seed) {
  return identify_sources_oriented(tm.probs.transposed(), seed);
}

}  // namespace combo
