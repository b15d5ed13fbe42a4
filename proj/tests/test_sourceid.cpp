#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include "combo/rng.hpp"
#include "combo/sourceid.hpp"

using namespace combo;

namespace {

std::vector<double> normal_draws(std::size_t n, double mean, double sd, std::uint64_t seed) {
  Rng rng = make_rng(seed, {kStreamTest});
  std::vector<double> v(n);
  for (double& x : v) x = mean + sd * standard_normal(rng);
  return v;
}

// Expected counts C[noisy][pred]: balanced classes, symmetric flips of rate r
// inside each pair, and a predictor with accuracy acc whose errors spread
// evenly over the other classes.
ConfusionMatrix planted_confusion(int k, int per_class, const std::vector<std::pair<int, int>>& pairs, double r,
                                  double acc) {
  std::vector<int> partner(static_cast<std::size_t>(k), -1);
  for (auto [a, b] : pairs) partner[static_cast<std::size_t>(a)] = b, partner[static_cast<std::size_t>(b)] = a;
  std::vector<double> expected(static_cast<std::size_t>(k * k), 0.0);
  for (int y = 0; y < k; ++y) {
    const int p = partner[static_cast<std::size_t>(y)];
    for (int noisy = 0; noisy < k; ++noisy) {
      double n = 0.0;
      if (noisy == y) n = p < 0 ? per_class : per_class * (1.0 - r);
      else if (noisy == p) n = per_class * r;
      for (int pred = 0; pred < k && n > 0.0; ++pred)
        expected[static_cast<std::size_t>(noisy * k + pred)] += n * (pred == y ? acc : (1.0 - acc) / (k - 1));
    }
  }
  ConfusionMatrix cm{k, {}};
  for (double e : expected) cm.counts.push_back(std::llround(e));
  return cm;
}

ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm{static_cast<int>(rows.size()), {}};
  for (const auto& r : rows) cm.counts.insert(cm.counts.end(), r.begin(), r.end());
  return cm;
}

}  // namespace

TEST_CASE("two separated points per cluster") {
  const std::vector<double> v{0, 0, 10, 10};
  const Gmm1d g = fit_gmm_1d(v, 2, 1);
  REQUIRE(g.k == 2);
  CHECK(g.means[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(g.means[1] == doctest::Approx(10.0));
  CHECK(g.weights[0] == doctest::Approx(0.5));
  CHECK(g.weights[1] == doctest::Approx(0.5));
  CHECK(g.component_of(0) == 0);
  CHECK(g.component_of(3) == 1);
}

TEST_CASE("single component recovers a standard normal") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto v = normal_draws(1000, 0.0, 1.0, seed);
    const Gmm1d g = fit_gmm_1d(v, 1, seed);
    CHECK(std::abs(g.means[0]) <= 0.1);
    CHECK(std::abs(g.variances[0] - 1.0) <= 0.2);
    CHECK(g.weights[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("fitted mixture invariants") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto v = normal_draws(60, 0.0, 1.0, seed);
    const auto w = normal_draws(40, 5.0, 0.5, seed + 100);
    std::copy(w.begin(), w.end(), std::back_inserter(v));
    for (int k = 1; k <= 4; ++k) {
      const Gmm1d g = fit_gmm_1d(v, k, seed);
      CHECK(std::accumulate(g.weights.begin(), g.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(g.var_floor > 0.0);
      for (int c = 0; c < k; ++c) {
        CHECK(g.weights[static_cast<std::size_t>(c)] >= 0.0);
        CHECK(g.variances[static_cast<std::size_t>(c)] >= g.var_floor);
        if (c > 0) CHECK(g.means[static_cast<std::size_t>(c)] >= g.means[static_cast<std::size_t>(c - 1)]);
      }
      CHECK(g.loglik == doctest::Approx(gmm_loglik(g, v)).epsilon(1e-9));
      CHECK(std::abs(g.loglik - gmm_loglik(g, v)) <= 1e-6);
      REQUIRE(g.responsibilities.rows() == v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        double s = 0.0;
        for (double r : g.responsibilities.row(i)) s += r;
        CHECK(s == doctest::Approx(1.0));
      }
    }
  }
}

TEST_CASE("a richer mixture never fits worse") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto v = normal_draws(150, 2.0, 3.0, seed);
    CHECK(fit_gmm_1d(v, 2, seed).loglik >= fit_gmm_1d(v, 1, seed).loglik - 1e-9);
  }
}

TEST_CASE("identical values sit at the variance floor") {
  const std::vector<double> v(8, 3.0);
  const Gmm1d g = fit_gmm_1d(v, 2, 0);
  CHECK(g.means[0] == doctest::Approx(3.0));
  CHECK(g.means[1] == doctest::Approx(3.0));
  CHECK(g.variances[0] == doctest::Approx(g.var_floor));
  CHECK(std::isfinite(g.loglik));
}

TEST_CASE("fits are deterministic per seed") {
  const auto v = normal_draws(50, 0.0, 2.0, 3);
  const Gmm1d a = fit_gmm_1d(v, 3, 17);
  const Gmm1d b = fit_gmm_1d(v, 3, 17);
  CHECK(a.means == b.means);
  CHECK(a.loglik == b.loglik);
}

TEST_CASE("gmm argument checks") {
  const std::vector<double> v{1, 2, 3};
  CHECK_THROWS_AS(fit_gmm_1d(v, 0, 0), ValidationError);
  CHECK_THROWS_AS(fit_gmm_1d(v, 4, 0), ValidationError);
  CHECK_THROWS_AS(fit_gmm_1d(std::vector<double>{}, 1, 0), ValidationError);
}

TEST_CASE("BIC formula") {
  Gmm1d g;
  g.k = 1;
  g.loglik = 0.0;
  CHECK(bic_score(g, 1) == doctest::Approx(0.0).scale(1.0));
  CHECK(bic_score(g, 20) == doctest::Approx(2.0 * std::log(20.0)));
  g.loglik = -10.0;
  CHECK(bic_score(g, 20) == doctest::Approx(2.0 * std::log(20.0) + 20.0));
}

TEST_CASE("a duplicated component keeps the likelihood and adds 3 ln n") {
  const auto v = normal_draws(100, 1.0, 2.0, 8);
  const Gmm1d one = fit_gmm_1d(v, 1, 0);
  Gmm1d two = one;
  two.k = 2;
  two.weights = {0.5, 0.5};
  two.means = {one.means[0], one.means[0]};
  two.variances = {one.variances[0], one.variances[0]};
  two.loglik = gmm_loglik(two, v);
  CHECK(two.loglik == doctest::Approx(one.loglik).epsilon(1e-12));
  CHECK(bic_score(two, v.size()) - bic_score(one, v.size()) == doctest::Approx(3.0 * std::log(100.0)));
}

TEST_CASE("BIC prefers two components for two separated groups") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_rng(seed, {kStreamTest, 2});
    std::vector<double> v(200);
    for (std::size_t i = 0; i < 200; ++i) v[i] = (i % 2 == 0 ? 0.0 : 8.0) + standard_normal(rng);
    wins += bic_score(fit_gmm_1d(v, 2, seed), 200) < bic_score(fit_gmm_1d(v, 3, seed), 200);
  }
  CHECK(wins >= 90);
  const int candidates[] = {1, 2, 3};
  CHECK(select_components(normal_draws(200, 0.0, 1.0, 4), candidates, 0) == 1);
}

TEST_CASE("no noise gives no sources") {
  ConfusionMatrix identity{6, std::vector<std::int64_t>(36, 0)};
  for (int i = 0; i < 6; ++i) identity.counts[static_cast<std::size_t>(i * 6 + i)] = 100;
  CHECK(identify_sources(identity).empty());
  CHECK(identify_sources(planted_confusion(10, 500, {}, 0.0, 0.97)).empty());
}

TEST_CASE("a planted pair is recovered and nothing else") {
  for (double acc : {0.95, 0.97, 0.99}) {
    const NoiseSourceMap ns = identify_sources(planted_confusion(10, 500, {{0, 1}}, 0.4, acc), 3);
    NoiseSourceMap expected(10);
    expected.add(0, 1);
    expected.add(1, 0);
    CHECK(ns == expected);
  }
}

TEST_CASE("a large off-diagonal count makes its column a source of that row") {
  std::vector<std::vector<std::int64_t>> rows(10, std::vector<std::int64_t>(10));
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = i == j ? 480 : 4;
  rows[9][1] = 180;
  rows[9][9] = 300;
  const NoiseSourceMap ns = identify_sources(from_rows(rows));
  CHECK(ns.of(9) == std::set<int>{1});
  for (int c = 0; c < 9; ++c) CHECK(ns.of(c).empty());
}

TEST_CASE("noise larger than the diagonal still marks the rows above it") {
  // Column 2: row 3 outweighs the diagonal; the diagonal lands in the middle.
  std::vector<std::vector<std::int64_t>> rows(6, std::vector<std::int64_t>(6, 2));
  for (int i = 0; i < 6; ++i) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 300;
  rows[2][2] = 150;
  rows[3][2] = 400;
  Matrix m(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) m(i, j) = static_cast<double>(rows[i][j]);
  const ColumnAnalysis col = analyze_column(m, 2, 0);
  CHECK(col.chosen_k == 3);
  CHECK(col.flagged == std::vector<int>{3});
}

TEST_CASE("transition matrices are analyzed through their transpose") {
  // T[i][j] = P(noisy=j | true=i): 30% of class 0 is labeled 1.
  TransitionMatrix t{Matrix(6, 6)};
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) t.probs(i, j) = i == j ? 0.95 : 0.01;
  t.probs(0, 0) = 0.66;
  t.probs(0, 1) = 0.30;
  const NoiseSourceMap ns = identify_sources(t);
  CHECK(ns.of(1) == std::set<int>{0});
  for (int c : {0, 2, 3, 4, 5}) CHECK(ns.of(c).empty());
}

TEST_CASE("columns without off-diagonal mass are skipped") {
  Matrix m(5, 5);
  for (std::size_t i = 0; i < 5; ++i) m(i, i) = 10.0;
  m(3, 0) = 4.0;
  const ColumnAnalysis col = analyze_column(m, 2, 0);
  CHECK(col.skipped);
  CHECK(col.flagged.empty());
}

TEST_CASE("small matrices use the gap rule") {
  Matrix m(3, 3);
  m(0, 0) = 50;
  m(1, 0) = 40;
  m(2, 0) = 1;
  m(1, 1) = m(2, 2) = 50;
  const ColumnAnalysis col = analyze_column(m, 0, 0);
  CHECK(col.gap_rule);
  CHECK(col.chosen_k == 0);
  // With two off-diagonal entries the threshold mean + 2 sd always exceeds
  // the larger one, so nothing is flagged.
  CHECK(col.flagged.empty());
  CHECK(identify_sources_oriented(m).empty());
}

TEST_CASE("identify_sources rejects non-square input") {
  CHECK_THROWS_AS(identify_sources_oriented(Matrix(3, 4)), ValidationError);
}
