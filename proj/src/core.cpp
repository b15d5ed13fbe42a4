#include "combo/core.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace combo {

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Dataset::validate() const {
  const std::size_t n = noisy_labels.size();
  if (num_classes < 2) throw ValidationError("dataset needs K >= 2, got " + std::to_string(num_classes));
  if (n < static_cast<std::size_t>(num_classes))
    throw ValidationError("dataset needs n >= K (n=" + std::to_string(n) + ", K=" + std::to_string(num_classes) + ")");
  if (features.cols() < 1) throw ValidationError("dataset needs d >= 1");
  if (features.rows() != n) throw ValidationError("feature rows do not match label count");
  auto check = [&](const Labels& labels, const char* what) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0 || labels[i] >= num_classes)
        throw ValidationError(std::string(what) + " out of range at sample " + std::to_string(i));
  };
  check(noisy_labels, "noisy label");
  if (true_labels) {
    if (true_labels->size() != n) throw ValidationError("true_labels length differs from noisy_labels");
    check(*true_labels, "true label");
  }
}

std::vector<bool> Dataset::clean_mask() const {
  if (!true_labels) throw ValidationError("clean mask requires true labels");
  std::vector<bool> mask(size());
  for (std::size_t i = 0; i < size(); ++i) mask[i] = noisy_labels[i] == (*true_labels)[i];
  return mask;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void TransitionMatrix::validate() const {
  if (probs.rows() != probs.cols()) throw ValidationError("transition matrix must be square");
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (double v : probs.row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("transition entry outside [0,1] in row " + std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("transition row " + std::to_string(i) + " does not sum to 1");
  }
}

bool NoiseSourceMap::empty() const {
  return std::all_of(sources.begin(), sources.end(), [](const auto& s) { return s.empty(); });
}

void NoiseSourceMap::add(int labeled, int source) {
  if (labeled == source) throw ValidationError("a class cannot be its own noise source");
  if (labeled < 0 || labeled >= num_classes() || source < 0 || source >= num_classes())
    throw ValidationError("noise source class out of range");
  sources[static_cast<std::size_t>(labeled)].insert(source);
}

void NoiseSourceMap::validate() const {
  const int k = num_classes();
  for (int c = 0; c < k; ++c)
    for (int s : of(c))
      if (s == c || s < 0 || s >= k) throw ValidationError("invalid noise source entry for class " + std::to_string(c));
}

std::size_t CleanVerdict::kept() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j)
    if (values[j] > values[best]) best = j;
  return best;
}

void validate_outputs(const ModelOutputs& out, int num_classes) {
  const std::size_t n = out.preds.size();
  if (out.probs.rows() != n || out.probs.cols() != static_cast<std::size_t>(num_classes))
    throw ValidationError("probs shape does not match n x K");
  if (!out.features.empty() && out.features.rows() != n) throw ValidationError("feature rows do not match n");
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.probs.row(i);
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw ValidationError("negative probability in row " + std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("probability row " + std::to_string(i) + " does not sum to 1");
    if (out.preds[i] != static_cast<int>(argmax(row)))
      throw ValidationError("prediction is not the lowest-index argmax in row " + std::to_string(i));
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, std::optional<int> num_classes, Split split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);

  std::size_t dim = 0;
  while (dim < header.size() && header[dim] == "f" + std::to_string(dim)) ++dim;
  const std::size_t rest = header.size() - dim;
  const bool has_true = rest == 2;
  if (dim == 0 || rest < 1 || rest > 2 || header[dim] != "noisy_label" || (has_true && header[dim + 1] != "true_label"))
    throw ParseError("malformed header" + at_line(1));

  std::vector<double> values;
  Labels noisy;
  Labels truth;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size())
      throw ParseError("inconsistent column count" + at_line(line_no));
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      if (!parse_number(cells[j], v) || !std::isfinite(v)) throw ParseError("malformed feature value" + at_line(line_no));
      values.push_back(v);
    }
    auto read_label = [&](std::string_view cell, Labels& into) {
      int v = 0;
      if (!parse_number(cell, v)) throw ParseError("malformed label" + at_line(line_no));
      if (v < 0 || (num_classes && v >= *num_classes)) throw ParseError("label out of range" + at_line(line_no));
      into.push_back(v);
    };
    read_label(cells[dim], noisy);
    if (has_true) read_label(cells[dim + 1], truth);
  }

  Dataset ds;
  ds.features = Matrix(noisy.size(), dim);
  ds.features.data() = std::move(values);
  int inferred = 2;
  for (int v : noisy) inferred = std::max(inferred, v + 1);
  for (int v : truth) inferred = std::max(inferred, v + 1);
  ds.num_classes = num_classes.value_or(inferred);
  ds.noisy_labels = std::move(noisy);
  if (has_true) ds.true_labels = std::move(truth);
  ds.split = split;
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ostringstream buf;
  const std::size_t d = ds.dim();
  for (std::size_t j = 0; j < d; ++j) buf << 'f' << j << ',';
  buf << "noisy_label";
  if (ds.true_labels) buf << ",true_label";
  buf << '\n';
  char cell[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(cell, sizeof cell, "%.9g", ds.features(i, j));
      buf << cell << ',';
    }
    buf << ds.noisy_labels[i];
    if (ds.true_labels) buf << ',' << (*ds.true_labels)[i];
    buf << '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
  out << buf.str();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {
std::atomic<int> g_log_level{static_cast<int>(LogLevel::warn)};
}

void set_log_level(LogLevel level) { g_log_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_log_level.load()); }

void log_warn(std::string_view message) {
  if (g_log_level >= static_cast<int>(LogLevel::warn)) std::cerr << "[warn] " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_log_level >= static_cast<int>(LogLevel::info)) std::cerr << "[info] " << message << '\n';
}

}  // namespace combo
