#pragma once
// Shared data model for the noisy-label toolkit: datasets, classifier
// outputs, noise matrices, noise-source maps and clean verdicts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace combo {

using Labels = std::vector<int>;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Split { train, test };

struct Dataset {
  Matrix features;                      // n x d
  Labels noisy_labels;                  // observed labels
  std::optional<Labels> true_labels;    // hidden ground truth, when known
  int num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return noisy_labels.size(); }
  std::size_t dim() const { return features.cols(); }

  // Throws ValidationError when an invariant is violated.
  void validate() const;

  // m[i] = (noisy_labels[i] == true_labels[i]). Requires true_labels.
  std::vector<bool> clean_mask() const;

  bool operator==(const Dataset&) const = default;
};

// Per-sample penultimate features f(x), class probabilities p(x) and argmax
// predictions.
struct ModelOutputs {
  Matrix features;  // n x h
  Matrix probs;     // n x K
  Labels preds;

  std::size_t size() const { return preds.size(); }
};

// counts[i][j]: samples with noisy label i and predicted/cluster label j.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;

  std::int64_t operator()(int i, int j) const { return counts[static_cast<std::size_t>(i * num_classes + j)]; }
  std::int64_t total() const;
};

// probs(i, j) = P(noisy = j | true = i); rows are stochastic.
struct TransitionMatrix {
  Matrix probs;

  int num_classes() const { return static_cast<int>(probs.rows()); }
  void validate() const;
};

// sources[c]: classes that may be the true label of a sample labeled c.
struct NoiseSourceMap {
  std::vector<std::set<int>> sources;

  NoiseSourceMap() = default;
  explicit NoiseSourceMap(int num_classes) : sources(static_cast<std::size_t>(num_classes)) {}

  int num_classes() const { return static_cast<int>(sources.size()); }
  bool empty() const;
  const std::set<int>& of(int c) const { return sources[static_cast<std::size_t>(c)]; }
  void add(int labeled, int source);
  void validate() const;

  bool operator==(const NoiseSourceMap&) const = default;
};

struct CleanVerdict {
  std::vector<double> p_clean;
  std::vector<bool> keep;

  std::size_t kept() const;
};

// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

// Throws ValidationError naming the first offending row.
void validate_outputs(const ModelOutputs& out, int num_classes);

// CSV persistence. Header: f0,...,f{d-1},noisy_label[,true_label].
// When num_classes is absent it is inferred as max label + 1 (at least 2).
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<int> num_classes = std::nullopt,
                     Split split = Split::train);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Minimal leveled logging to stderr; silent below the configured level.
enum class LogLevel { quiet = 0, warn = 1, info = 2 };
void set_log_level(LogLevel level);
LogLevel log_level();
void log_warn(std::string_view message);
void log_info(std::string_view message);

}  // namespace combo
