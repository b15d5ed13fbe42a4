#pragma once
// Planted Gaussian-blob datasets and synthetic pairwise/dominant label noise
// with known ground truth.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "combo/core.hpp"

namespace combo {

enum class NoiseKind { pairwise, dominant };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& text);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::pairwise;
  // pairwise: unordered couples (a, b); dominant: (dominant, recessive).
  std::vector<std::pair<int, int>> pairs;
  double ratio = 0.0;
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
};

// Pairs used when none are given: (0,1), (2,3), ... for pairwise noise and
// (k, k + K/2) for dominant noise.
std::vector<std::pair<int, int>> default_pairs(NoiseKind kind, int num_classes);

struct BlobParams {
  int dim = 16;
  double separation = 10.0;
};

// K unit-norm centers scaled by `separation`: orthoplex vertices (+e_0, +e_1,
// ..., then -e_0, -e_1, ...) under a random rotation drawn from `seed`.
Matrix blob_centers(int num_classes, int dim, double separation, std::uint64_t seed);

// One unit-variance isotropic sample per entry of `classes`, in that order.
// Labels (noisy and true) are the entries themselves.
Dataset sample_blobs(const Matrix& centers, const Labels& classes, std::uint64_t seed);

// Exactly balanced blobs, class-major order, true_labels == noisy_labels.
Dataset gen_blobs(int num_classes, int n_per_class, int dim, double separation, std::uint64_t seed);

// Relabels floor(r * |a|) samples of a as b and floor(r * |b|) of b as a for
// every pair. Features are untouched.
Dataset inject_pairwise(const Dataset& ds, const NoiseSpec& spec);

struct DominantComposition {
  int noisy = 0;            // recessive samples carrying the dominant label
  int dominant_drawn = 0;   // true-dominant samples
  int recessive_drawn = 0;  // true-recessive samples, clean and mislabeled
};

// noisy = round(r * bucket); dominant_drawn = bucket - noisy;
// recessive_drawn = bucket + noisy.
DominantComposition dominant_composition(int bucket, double ratio);

// Constructive dominant-noise dataset: every label bucket holds exactly
// `bucket` samples. Classes outside the pairs are drawn clean.
Dataset inject_dominant(int num_classes, int bucket, const NoiseSpec& spec, const BlobParams& blobs,
                        std::uint64_t seed);

}  // namespace combo
