#include "combo/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "combo/rng.hpp"

namespace combo {

std::string to_string(NoiseKind kind) { return kind == NoiseKind::pairwise ? "pairwise" : "dominant"; }

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "pairwise") return NoiseKind::pairwise;
  if (text == "dominant") return NoiseKind::dominant;
  throw ConfigError("unknown noise kind: " + text);
}

void NoiseSpec::validate(int num_classes) const {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("noise ratio must lie in [0, 1)");
  std::set<int> used_a;
  std::set<int> used_b;
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= num_classes || b >= num_classes) throw ConfigError("noise pair class out of range");
    if (a == b) throw ConfigError("noise pair needs two distinct classes");
    if (kind == NoiseKind::pairwise) {
      // Couples must be disjoint: no class may appear in two pairs.
      if (!used_a.insert(a).second || !used_a.insert(b).second) throw ConfigError("pairwise couples must be disjoint");
    } else {
      if (!used_a.insert(a).second) throw ConfigError("dominant class listed twice");
      if (!used_b.insert(b).second) throw ConfigError("recessive class listed twice");
    }
  }
}

std::vector<std::pair<int, int>> default_pairs(NoiseKind kind, int num_classes) {
  std::vector<std::pair<int, int>> pairs;
  if (kind == NoiseKind::pairwise) {
    for (int a = 0; a + 1 < num_classes; a += 2) pairs.emplace_back(a, a + 1);
  } else {
    const int half = num_classes / 2;
    for (int a = 0; a < half; ++a) pairs.emplace_back(a, a + half);
  }
  return pairs;
}

namespace {

void normalize(std::span<double> v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
}

// Haar-ish random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
Matrix random_rotation(int dim, Rng& rng) {
  const auto d = static_cast<std::size_t>(dim);
  Matrix q(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    while (true) {
      for (std::size_t c = 0; c < d; ++c) q(r, c) = standard_normal(rng);
      for (std::size_t p = 0; p < r; ++p) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += q(r, c) * q(p, c);
        for (std::size_t c = 0; c < d; ++c) q(r, c) -= dot * q(p, c);
      }
      double norm = 0.0;
      for (double x : q.row(r)) norm += x * x;
      if (norm > 1e-12) break;
    }
    normalize(q.row(r));
  }
  return q;
}

}  // namespace

Matrix blob_centers(int num_classes, int dim, double separation, std::uint64_t seed) {
  if (num_classes < 2 || dim < 2 || !(separation > 0.0)) throw ConfigError("blob centers need K >= 2, d >= 2, separation > 0");
  Rng rng = make_rng(seed, {kStreamCenters});
  const auto k = static_cast<std::size_t>(num_classes);
  const auto d = static_cast<std::size_t>(dim);
  const std::size_t half = std::min((k + 1) / 2, d);

  Matrix unit(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    if (c < 2 * half) {
      unit(c, c % half) = c < half ? 1.0 : -1.0;
    } else {
      // More classes than orthoplex vertices: random directions.
      for (std::size_t j = 0; j < d; ++j) unit(c, j) = standard_normal(rng);
      normalize(unit.row(c));
    }
  }

  const Matrix rot = random_rotation(dim, rng);
  Matrix centers(k, d);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      for (std::size_t t = 0; t < d; ++t) v += rot(j, t) * unit(c, t);
      centers(c, j) = separation * v;
    }
  return centers;
}

Dataset sample_blobs(const Matrix& centers, const Labels& classes, std::uint64_t seed) {
  Rng rng = make_rng(seed, {kStreamSamples});
  const std::size_t d = centers.cols();
  Dataset ds;
  ds.num_classes = static_cast<int>(centers.rows());
  ds.features = Matrix(classes.size(), d);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto c = static_cast<std::size_t>(classes[i]);
    for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = centers(c, j) + standard_normal(rng);
  }
  ds.noisy_labels = classes;
  ds.true_labels = classes;
  return ds;
}

Dataset gen_blobs(int num_classes, int n_per_class, int dim, double separation, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  const Matrix centers = blob_centers(num_classes, dim, separation, seed);
  Labels classes;
  classes.reserve(static_cast<std::size_t>(num_classes * n_per_class));
  for (int c = 0; c < num_classes; ++c) classes.insert(classes.end(), static_cast<std::size_t>(n_per_class), c);
  Dataset ds = sample_blobs(centers, classes, seed);
  ds.validate();
  return ds;
}

Dataset inject_pairwise(const Dataset& ds, const NoiseSpec& spec) {
  if (spec.kind != NoiseKind::pairwise) throw ConfigError("inject_pairwise needs a pairwise noise spec");
  spec.validate(ds.num_classes);
  if (ds.true_labels && *ds.true_labels != ds.noisy_labels)
    throw ConfigError("inject_pairwise expects a clean dataset (true_labels == noisy_labels)");

  Dataset out = ds;
  out.true_labels = ds.noisy_labels;
  Rng rng = make_rng(spec.seed, {kStreamNoise});

  auto flip = [&](int from, int to) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.noisy_labels[i] == from) members.push_back(i);
    if (members.empty()) throw ConfigError("noise pair class " + std::to_string(from) + " has no samples");
    const auto count = static_cast<std::size_t>(std::floor(spec.ratio * static_cast<double>(members.size())));
    shuffle_range(members.begin(), members.end(), rng);
    for (std::size_t t = 0; t < count; ++t) out.noisy_labels[members[t]] = to;
  };
  for (auto [a, b] : spec.pairs) {
    flip(a, b);
    flip(b, a);
  }
  return out;
}

DominantComposition dominant_composition(int bucket, double ratio) {
  DominantComposition comp;
  comp.noisy = static_cast<int>(std::lround(ratio * bucket));
  comp.dominant_drawn = bucket - comp.noisy;
  comp.recessive_drawn = bucket + comp.noisy;
  return comp;
}

Dataset inject_dominant(int num_classes, int bucket, const NoiseSpec& spec, const BlobParams& blobs,
                        std::uint64_t seed) {
  if (spec.kind != NoiseKind::dominant) throw ConfigError("inject_dominant needs a dominant noise spec");
  if (bucket < 1) throw ConfigError("bucket must be >= 1");
  spec.validate(num_classes);
  const DominantComposition comp = dominant_composition(bucket, spec.ratio);

  // Per label bucket: the true class of each member, in order.
  std::vector<int> recessive_of(static_cast<std::size_t>(num_classes), -1);
  for (auto [dominant, recessive] : spec.pairs) recessive_of[static_cast<std::size_t>(dominant)] = recessive;

  Labels noisy;
  Labels truth;
  for (int c = 0; c < num_classes; ++c) {
    const int source = recessive_of[static_cast<std::size_t>(c)];
    const int clean = source >= 0 ? comp.dominant_drawn : bucket;
    noisy.insert(noisy.end(), static_cast<std::size_t>(bucket), c);
    truth.insert(truth.end(), static_cast<std::size_t>(clean), c);
    if (source >= 0) truth.insert(truth.end(), static_cast<std::size_t>(comp.noisy), source);
  }

  const Matrix centers = blob_centers(num_classes, blobs.dim, blobs.separation, seed);
  Dataset ds = sample_blobs(centers, truth, seed);
  ds.noisy_labels = std::move(noisy);
  ds.validate();
  return ds;
}

}  // namespace combo
