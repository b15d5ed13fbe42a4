#pragma once
// One-hidden-layer classifier, clean/noisy training strategies and the
// warm-up + periodic-refresh training loop.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "combo/core.hpp"
#include "combo/evaluation.hpp"
#include "combo/modeling.hpp"

namespace combo {

// softmax(W2^T relu(W1^T x + b1) + b2). Hidden activations are the sample
// features f(x).
struct Classifier {
  Matrix w1;               // d x h
  std::vector<double> b1;  // h
  Matrix w2;               // h x K
  std::vector<double> b2;  // K

  std::size_t in_dim() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }
  std::size_t num_classes() const { return w2.cols(); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Classifier init(int in_dim, int hidden, int num_classes, std::uint64_t seed);

  bool operator==(const Classifier&) const = default;
};

struct Gradients {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

// Mean soft-target cross-entropy over `rows`; fills `grads` when non-null.
double loss_and_gradients(const Classifier& model, const Matrix& x, const Matrix& targets,
                          std::span<const std::size_t> rows, Gradients* grads);

// Minibatch SGD on soft-target cross-entropy. Epoch e (counting from
// first_epoch) shuffles with a stream derived from (seed, e), so splitting a
// run into single-epoch calls reproduces it exactly. Throws on a non-finite
// loss.
void train_epochs(Classifier& model, const Matrix& x, const Matrix& targets, double lr, int batch, int epochs,
                  std::uint64_t seed, int first_epoch = 0);

// Probabilities, hidden features and lowest-index argmax predictions.
ModelOutputs predict(const Classifier& model, const Matrix& x);

Matrix one_hot(const Labels& labels, int num_classes);

struct MixedSamples {
  Matrix features;
  Matrix targets;
  std::vector<double> lambdas;  // mixing weight on the clean partner, >= 0.5
};

// One row per noisy sample. With clean partners: x = l x_clean + (1-l) x_noisy
// and the same mix of the clean one-hot label and the noisy sample's cluster
// pseudo-label, l = max(b, 1-b), b ~ Beta(alpha, alpha); clean partners come
// from a seeded permutation, recycled when there are fewer clean than noisy
// samples. Without clean samples the rows are the noisy samples with their
// pseudo-labels.
MixedSamples ssl_compose(const std::vector<std::size_t>& clean_idx, const std::vector<std::size_t>& noisy_idx,
                         const ClusterState& cluster, const Dataset& ds, double mixup_alpha, std::uint64_t seed);

enum class Estimation { cluster, dualt, none };
enum class Detection { fine, fine_k, unicon, unicon_k, none };
enum class TrainingMode { select, ssl };

std::string to_string(Estimation v);
std::string to_string(Detection v);
std::string to_string(TrainingMode v);
Estimation parse_estimation(const std::string& s);
Detection parse_detection(const std::string& s);
TrainingMode parse_training(const std::string& s);

inline bool uses_noise_sources(Detection d) { return d == Detection::fine_k || d == Detection::unicon_k; }

struct RunConfig {
  int total_epochs = 60;
  int warmup_epochs = 20;
  int update_freq = 10;
  double lr = 0.01;
  int batch = 128;
  Estimation estimation = Estimation::none;
  Detection detection = Detection::none;
  TrainingMode training = TrainingMode::select;
  double mixup_alpha = 4.0;
  std::uint64_t seed = 0;
  double alpha_pct = 50.0;
  double beta_pct = 50.0;
  double anchor_conf = 0.95;
  int hidden = 32;
  bool unicon_strict = false;

  // Throws ConfigError.
  void validate() const;
};

// Partition produced by one refresh of the training set.
struct Refresh {
  NoiseSourceMap ns;
  CleanVerdict verdict;
  std::optional<ClusterState> cluster;  // present when clusters were grown
};

// Estimation -> source identification -> detection on the full training set.
// Depends only on (cfg, model, train), so repeated refreshes of an unchanged
// model agree.
Refresh refresh_training_set(const RunConfig& cfg, const Classifier& model, const Dataset& train);

// Runs the full schedule and returns one metrics record per epoch.
std::vector<EpochMetrics> combo_run(const RunConfig& cfg, const Dataset& train, const Dataset& test,
                                    Classifier* final_model = nullptr);

}  // namespace combo
