#include "combo/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "combo/rng.hpp"
#include "combo/sourceid.hpp"

namespace combo {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (x == 0.0) continue;
    if (x < 0.0)
      for (double& y : v) y = -y;
    return;
  }
}

}  // namespace

std::vector<double> class_principal_direction(const Matrix& features, std::span<const std::size_t> members,
                                              double tol, int max_iter) {
  if (members.empty()) throw ValidationError("class_principal_direction needs at least one member");
  const std::size_t h = features.cols();
  Matrix gram(h, h);
  for (std::size_t i : members) {
    auto f = features.row(i);
    for (std::size_t a = 0; a < h; ++a) {
      if (f[a] == 0.0) continue;
      for (std::size_t b = 0; b < h; ++b) gram(a, b) += f[a] * f[b];
    }
  }

  // Iterate on G^(2^8), which has the same eigenvectors and a far wider gap
  // between the two leading eigenvalues. Frobenius rescaling keeps it finite.
  for (int s = 0; s < 8; ++s) {
    Matrix sq(h, h);
    for (std::size_t a = 0; a < h; ++a)
      for (std::size_t b = a; b < h; ++b) sq(a, b) = sq(b, a) = dot(gram.row(a), gram.row(b));
    const double fro = norm(sq.data());
    if (!(fro > 0.0) || !std::isfinite(fro)) break;
    for (double& x : sq.data()) x /= fro;
    gram = std::move(sq);
  }

  // Start from the column with the largest diagonal entry.
  std::size_t start = 0;
  for (std::size_t a = 1; a < h; ++a)
    if (gram(a, a) > gram(start, start)) start = a;
  if (gram(start, start) <= 0.0) throw ValidationError("degenerate gram");

  std::vector<double> v(h);
  for (std::size_t a = 0; a < h; ++a) v[a] = gram(a, start);
  double len = norm(v);
  for (double& x : v) x /= len;

  std::vector<double> next(h);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t a = 0; a < h; ++a) next[a] = dot(gram.row(a), v);
    len = norm(next);
    if (len == 0.0) throw ValidationError("degenerate gram");
    double diff_same = 0.0;
    double diff_flip = 0.0;
    for (std::size_t a = 0; a < h; ++a) {
      next[a] /= len;
      diff_same += (next[a] - v[a]) * (next[a] - v[a]);
      diff_flip += (next[a] + v[a]) * (next[a] + v[a]);
    }
    v.swap(next);
    if (std::sqrt(std::min(diff_same, diff_flip)) < tol) break;
  }
  fix_sign(v);
  return v;
}

ClassDirections class_directions(const Matrix& features, const Labels& labels, int num_classes) {
  ClassDirections out;
  out.dirs = Matrix(static_cast<std::size_t>(num_classes), features.cols());
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    try {
      const auto dir = class_principal_direction(features, members[c]);
      std::copy(dir.begin(), dir.end(), out.dirs.row(c).begin());
    } catch (const ValidationError&) {
      log_warn("class " + std::to_string(c) + " has only zero features; alignment direction left at zero");
    }
  }
  return out;
}

namespace {

double abs_cos(std::span<const double> f, std::span<const double> dir) {
  const double fn = norm(f);
  const double dn = norm(dir);
  if (fn == 0.0 || dn == 0.0) return 0.0;
  return std::min(1.0, std::abs(dot(f, dir)) / (fn * dn));
}

}  // namespace

std::vector<double> fine_alignments(const Matrix& features, const Labels& labels, const ClassDirections& dirs) {
  std::vector<double> a(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    a[i] = abs_cos(features.row(i), dirs.dirs.row(static_cast<std::size_t>(labels[i])));
  return a;
}

std::vector<double> fine_scores(const Matrix& features, const Labels& labels, const ClassDirections& dirs,
                                const NoiseSourceMap* ns) {
  std::vector<double> s = fine_alignments(features, labels, dirs);
  if (ns == nullptr) return s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& sources = ns->of(labels[i]);
    if (sources.empty()) continue;
    double strongest = -std::numeric_limits<double>::infinity();
    for (int c : sources)
      strongest = std::max(strongest, abs_cos(features.row(i), dirs.dirs.row(static_cast<std::size_t>(c))));
    s[i] -= strongest;
  }
  return s;
}

CleanVerdict fine_select(const Matrix& features, const Labels& labels, const ClassDirections& dirs,
                         const NoiseSourceMap* ns, std::uint64_t seed) {
  const std::vector<double> scores = fine_scores(features, labels, dirs, ns);
  const std::size_t n = labels.size();
  CleanVerdict verdict;
  verdict.p_clean.assign(n, 1.0);
  verdict.keep.assign(n, true);

  const auto num_classes = dirs.dirs.rows();
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& mine = members[c];
    if (mine.size() < 2) {
      if (!mine.empty()) log_info("fine: class " + std::to_string(c) + " has fewer than 2 samples; keeping them");
      continue;
    }
    std::vector<double> values;
    values.reserve(mine.size());
    for (std::size_t i : mine) values.push_back(scores[i]);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) continue;  // nothing to split

    const Gmm1d g = fit_gmm_1d(values, 2, derive_seed(seed, {kStreamGmm, c}));
    for (std::size_t t = 0; t < mine.size(); ++t) {
      const double p = g.responsibilities(t, 1);
      verdict.p_clean[mine[t]] = p;
      verdict.keep[mine[t]] = p > 0.5;
    }
  }
  return verdict;
}

namespace {

void check_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ValidationError("jsd: negative or non-finite probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("jsd: distribution does not sum to 1");
}

// x * log2(x / m) with 0 log 0 = 0.
double kl_term(double x, double m) { return x > 0.0 ? x * std::log2(x / m) : 0.0; }

}  // namespace

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("jsd: distributions differ in length");
  check_distribution(p);
  check_distribution(q);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    total += 0.5 * kl_term(p[i], m) + 0.5 * kl_term(q[i], m);
  }
  return std::clamp(total, 0.0, 1.0);
}

double jsd_onehot(std::span<const double> p, int c) {
  check_distribution(p);
  if (c < 0 || static_cast<std::size_t>(c) >= p.size()) throw ValidationError("jsd: class out of range");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = i == static_cast<std::size_t>(c) ? 1.0 : 0.0;
    const double m = 0.5 * (p[i] + q);
    total += 0.5 * kl_term(p[i], m) + 0.5 * kl_term(q, m);
  }
  return std::clamp(total, 0.0, 1.0);
}

bool unicon_keep(double d_label, std::optional<double> source_d, double tau, UniconRule rule) {
  if (!source_d) return d_label < tau;
  if (rule == UniconRule::retain) return d_label < *source_d;
  return d_label < tau && d_label < *source_d;
}

CleanVerdict unicon_select(const Matrix& probs, const Labels& labels, const NoiseSourceMap* ns, UniconRule rule) {
  const std::size_t n = labels.size();
  if (probs.rows() != n) throw ValidationError("unicon_select: probs rows differ from label count");
  const std::size_t k = probs.cols();

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = jsd_onehot(probs.row(i), labels[i]);

  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  std::vector<double> lo(k, std::numeric_limits<double>::infinity());
  std::vector<double> hi(k, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    sum[c] += d[i];
    ++count[c];
    lo[c] = std::min(lo[c], d[i]);
    hi[c] = std::max(hi[c], d[i]);
  }
  std::vector<double> tau(k, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c)
    if (count[c] > 0 && lo[c] != hi[c]) tau[c] = sum[c] / static_cast<double>(count[c]);

  CleanVerdict verdict;
  verdict.p_clean.resize(n);
  verdict.keep.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<double> source_d;
    if (ns != nullptr)
      for (int s : ns->of(labels[i])) {
        const double ds = jsd_onehot(probs.row(i), s);
        source_d = source_d ? std::min(*source_d, ds) : ds;
      }
    verdict.p_clean[i] = 1.0 - d[i];
    verdict.keep[i] = unicon_keep(d[i], source_d, tau[static_cast<std::size_t>(labels[i])], rule);
  }
  return verdict;
}

}  // namespace combo
