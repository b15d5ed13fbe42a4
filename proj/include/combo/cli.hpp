#pragma once
// Operational surface: dataset generation, single runs, sweeps over method
// combinations and report aggregation. Every command is a plain function so
// it can be driven in-process; run_cli() adds argument parsing and exit codes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "combo/evaluation.hpp"
#include "combo/synthesis.hpp"
#include "combo/training.hpp"

namespace combo::cli {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key=value` text with `#` comments; keys are the RunConfig field names.
RunConfig parse_run_config(std::string_view text);
std::string format_run_config(const RunConfig& cfg);
// 16 hex digits, FNV-1a over the canonical formatting.
std::string config_hash(const RunConfig& cfg);
RunConfig load_run_config(const fs::path& path);

struct GenerateOptions {
  NoiseKind kind = NoiseKind::pairwise;
  int num_classes = 10;
  int dim = 16;
  int per_class = 500;
  int test_per_class = 0;  // 0: per_class / 5 (bucket / 5 for dominant noise)
  double ratio = 0.4;
  int bucket = 500;
  double separation = 3.25;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> pairs;  // empty: default_pairs()
  fs::path out;
};

struct GeneratedData {
  Dataset train;
  Dataset test;
  NoiseSpec spec;
  std::string sidecar_json;
};

GeneratedData generate_data(const GenerateOptions& opts);
// Writes train.csv, test.csv and noise.json under opts.out.
GeneratedData cmd_generate(const GenerateOptions& opts);

struct RunSummary {
  std::string config_hash;
  RunConfig cfg;
  std::string status = "ok";
  double final_acc = 0.0;
  double best_acc = 0.0;
  std::optional<DetectionScores> final_detection;
};

RunSummary summarize(const RunConfig& cfg, const std::vector<EpochMetrics>& log);
std::string summary_csv_header();
std::string summary_csv_row(const RunSummary& s);

// Loads both datasets, sharing K = 1 + the largest label seen in either file.
std::pair<Dataset, Dataset> load_train_test(const fs::path& train, const fs::path& test);

// Writes <out_dir>/epochs.jsonl and appends a row to <out_dir>/summary.csv.
RunSummary cmd_run(const RunConfig& cfg, const fs::path& train, const fs::path& test, const fs::path& out_dir);

struct SweepSpec {
  RunConfig base;
  std::vector<Estimation> estimations{Estimation::none};
  std::vector<Detection> detections{Detection::none};
  std::vector<TrainingMode> trainings{TrainingMode::select};
  std::vector<std::uint64_t> seeds{0};
  fs::path train;
  fs::path test;
};

// Same key=value format; estimation/detection/training/seed accept
// comma-separated lists, train/test name the dataset files.
SweepSpec parse_sweep_spec(std::string_view text);

struct SweepCell {
  Estimation estimation;
  Detection detection;
  TrainingMode training;
};

// Grid cells in estimation-major order; cells that pair estimation=none with a
// knowledge-integrated detector are dropped with a notice.
std::vector<SweepCell> expand_sweep(const SweepSpec& spec);

struct CellReport {
  SweepCell cell;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double acc_mean = 0.0;
  double acc_std = 0.0;  // sample standard deviation, 0 for a single run
  std::optional<double> f1_mean;
};

std::vector<CellReport> aggregate(const std::vector<RunSummary>& runs);
std::string report_csv(const std::vector<CellReport>& cells);

// Runs every cell x seed (up to `jobs` at a time), writing per-run logs under
// <out_dir>/runs/, all run rows to <out_dir>/summary.csv and the aggregate to
// <out_dir>/sweep_summary.csv.
std::vector<CellReport> cmd_sweep(const SweepSpec& spec, const fs::path& out_dir, int jobs = 1);

// Aggregates summary.csv files written by run/sweep into one report.
std::vector<CellReport> cmd_report(const std::vector<fs::path>& summaries, const fs::path& out_file);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace combo::cli
