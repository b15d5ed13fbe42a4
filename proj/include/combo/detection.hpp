#pragma once
// Clean-sample detection: eigenvector alignment (FINE, FINE+k) and
// Jensen-Shannon agreement (UNICON, UNICON+k).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "combo/core.hpp"

namespace combo {

// Row k: unit-norm dominant eigenvector of the class-k feature gram matrix.
struct ClassDirections {
  Matrix dirs;  // K x h
};

// Power iteration on G = sum f f^T over the members (applied to G^256 by
// repeated squaring, same eigenvectors). The sign is fixed so the
// first nonzero coordinate is positive. Throws on an all-zero gram.
std::vector<double> class_principal_direction(const Matrix& features, std::span<const std::size_t> members,
                                              double tol = 1e-10, int max_iter = 1000);

// Directions for every class, grouping samples by `labels`. A class without
// members (or with only zero features) gets a zero row.
ClassDirections class_directions(const Matrix& features, const Labels& labels, int num_classes);

// |cos(f(x_i), dirs[labels[i]])|; 0 for a zero feature vector.
std::vector<double> fine_alignments(const Matrix& features, const Labels& labels, const ClassDirections& dirs);

// Score per sample: alignment with the label direction, minus the largest
// alignment with any of its noise sources when `ns` lists some. A two-
// component GMM per class gives p_clean (higher-mean component).
std::vector<double> fine_scores(const Matrix& features, const Labels& labels, const ClassDirections& dirs,
                                const NoiseSourceMap* ns);
CleanVerdict fine_select(const Matrix& features, const Labels& labels, const ClassDirections& dirs,
                         const NoiseSourceMap* ns, std::uint64_t seed);

// Jensen-Shannon divergence, base-2, clamped to [0, 1].
double jsd(std::span<const double> p, std::span<const double> q);
// jsd(p, onehot(c)) without materializing the one-hot row.
double jsd_onehot(std::span<const double> p, int c);

enum class UniconRule {
  retain,  // keep whenever the label beats every noise source
  strict,  // additionally require d < class mean
};

// Keep decision for one sample. `source_d` is the smallest JSD to a noise
// source, or nullopt when the label has none.
bool unicon_keep(double d_label, std::optional<double> source_d, double tau, UniconRule rule);

CleanVerdict unicon_select(const Matrix& probs, const Labels& labels, const NoiseSourceMap* ns,
                           UniconRule rule = UniconRule::retain);

}  // namespace combo
