#include "combo/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "combo/rng.hpp"

namespace combo::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Calls fn(line_no, key, value) for every assignment line.
void for_each_assignment(std::string_view text,
                         const std::function<void(std::size_t, const std::string&, const std::string&)>& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (!content.empty()) {
      const auto eq = content.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key=value at line " + std::to_string(line_no));
      fn(line_no, trim(std::string_view(content).substr(0, eq)), trim(std::string_view(content).substr(eq + 1)));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + text + "'");
}

// Applies one RunConfig key; returns false for unknown keys.
bool apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "total_epochs") cfg.total_epochs = parse_value<int>(key, value);
  else if (key == "warmup_epochs") cfg.warmup_epochs = parse_value<int>(key, value);
  else if (key == "update_freq") cfg.update_freq = parse_value<int>(key, value);
  else if (key == "lr") cfg.lr = parse_value<double>(key, value);
  else if (key == "batch") cfg.batch = parse_value<int>(key, value);
  else if (key == "estimation") cfg.estimation = parse_estimation(value);
  else if (key == "detection") cfg.detection = parse_detection(value);
  else if (key == "training") cfg.training = parse_training(value);
  else if (key == "mixup_alpha") cfg.mixup_alpha = parse_value<double>(key, value);
  else if (key == "seed") cfg.seed = parse_value<std::uint64_t>(key, value);
  else if (key == "alpha_pct") cfg.alpha_pct = parse_value<double>(key, value);
  else if (key == "beta_pct") cfg.beta_pct = parse_value<double>(key, value);
  else if (key == "anchor_conf") cfg.anchor_conf = parse_value<double>(key, value);
  else if (key == "hidden") cfg.hidden = parse_value<int>(key, value);
  else if (key == "unicon_strict") cfg.unicon_strict = parse_bool(key, value);
  else return false;
  return true;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_stat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  for_each_assignment(text, [&](std::size_t line, const std::string& key, const std::string& value) {
    if (!apply_key(cfg, key, value)) throw ConfigError("unknown config key '" + key + "' at line " + std::to_string(line));
  });
  cfg.validate();
  return cfg;
}

std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream s;
  s << "total_epochs=" << cfg.total_epochs << '\n'
    << "warmup_epochs=" << cfg.warmup_epochs << '\n'
    << "update_freq=" << cfg.update_freq << '\n'
    << "lr=" << fmt_double(cfg.lr) << '\n'
    << "batch=" << cfg.batch << '\n'
    << "estimation=" << to_string(cfg.estimation) << '\n'
    << "detection=" << to_string(cfg.detection) << '\n'
    << "training=" << to_string(cfg.training) << '\n'
    << "mixup_alpha=" << fmt_double(cfg.mixup_alpha) << '\n'
    << "seed=" << cfg.seed << '\n'
    << "alpha_pct=" << fmt_double(cfg.alpha_pct) << '\n'
    << "beta_pct=" << fmt_double(cfg.beta_pct) << '\n'
    << "anchor_conf=" << fmt_double(cfg.anchor_conf) << '\n'
    << "hidden=" << cfg.hidden << '\n'
    << "unicon_strict=" << (cfg.unicon_strict ? "true" : "false") << '\n';
  return s.str();
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_run_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(read_file(path)); }

GeneratedData generate_data(const GenerateOptions& opts) {
  if (opts.num_classes < 2) throw UsageError("--k must be >= 2");
  if (opts.dim < 2) throw UsageError("--dim must be >= 2");
  if (!(opts.separation > 0.0)) throw UsageError("--sep must be > 0");

  GeneratedData g;
  g.spec.kind = opts.kind;
  g.spec.pairs = opts.pairs.empty() ? default_pairs(opts.kind, opts.num_classes) : opts.pairs;
  g.spec.ratio = opts.ratio;
  g.spec.seed = opts.seed;
  try {
    g.spec.validate(opts.num_classes);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  nlohmann::ordered_json side;
  side["kind"] = to_string(opts.kind);
  side["ratio"] = opts.ratio;
  side["seed"] = opts.seed;
  side["k"] = opts.num_classes;
  side["dim"] = opts.dim;
  side["separation"] = opts.separation;
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (auto [a, b] : g.spec.pairs) pairs.push_back({a, b});
  side["pairs"] = pairs;

  int test_per_class = opts.test_per_class;
  if (opts.kind == NoiseKind::pairwise) {
    if (opts.per_class < 1) throw UsageError("--per-class must be >= 1");
    if (test_per_class <= 0) test_per_class = std::max(1, opts.per_class / 5);
    const Dataset clean = gen_blobs(opts.num_classes, opts.per_class, opts.dim, opts.separation, opts.seed);
    g.train = inject_pairwise(clean, g.spec);
    side["per_class"] = opts.per_class;
    nlohmann::ordered_json flips = nlohmann::ordered_json::array();
    for (auto [a, b] : g.spec.pairs) {
      const auto count = static_cast<long>(std::floor(opts.ratio * opts.per_class));
      flips.push_back({{"from", a}, {"to", b}, {"count", count}});
      flips.push_back({{"from", b}, {"to", a}, {"count", count}});
    }
    side["flips"] = flips;
  } else {
    if (opts.bucket < 1) throw UsageError("--bucket must be >= 1");
    if (test_per_class <= 0) test_per_class = std::max(1, opts.bucket / 5);
    g.train = inject_dominant(opts.num_classes, opts.bucket, g.spec, {opts.dim, opts.separation}, opts.seed);
    const DominantComposition comp = dominant_composition(opts.bucket, opts.ratio);
    side["bucket"] = opts.bucket;
    nlohmann::ordered_json composition = nlohmann::ordered_json::array();
    for (auto [d, r] : g.spec.pairs)
      composition.push_back({{"dominant", d},
                             {"recessive", r},
                             {"dominant_drawn", comp.dominant_drawn},
                             {"recessive_drawn", comp.recessive_drawn},
                             {"mislabeled", comp.noisy}});
    side["composition"] = composition;
  }

  // Clean test set from the same class centers.
  Labels test_classes;
  for (int c = 0; c < opts.num_classes; ++c)
    test_classes.insert(test_classes.end(), static_cast<std::size_t>(test_per_class), c);
  g.test = sample_blobs(blob_centers(opts.num_classes, opts.dim, opts.separation, opts.seed), test_classes,
                        derive_seed(opts.seed, {kStreamTest}));
  g.test.split = Split::test;

  side["test_per_class"] = test_per_class;
  side["train_n"] = g.train.size();
  side["test_n"] = g.test.size();
  std::size_t noisy = 0;
  const auto mask = g.train.clean_mask();
  for (bool clean : mask) noisy += !clean;
  side["train_noisy"] = noisy;
  g.sidecar_json = side.dump(2) + "\n";
  return g;
}

GeneratedData cmd_generate(const GenerateOptions& opts) {
  if (opts.out.empty()) throw UsageError("--out is required");
  GeneratedData g = generate_data(opts);
  fs::create_directories(opts.out);
  save_dataset(g.train, opts.out / "train.csv");
  save_dataset(g.test, opts.out / "test.csv");
  write_file(opts.out / "noise.json", g.sidecar_json);
  return g;
}

RunSummary summarize(const RunConfig& cfg, const std::vector<EpochMetrics>& log) {
  RunSummary s;
  s.cfg = cfg;
  s.config_hash = config_hash(cfg);
  if (log.empty()) return s;
  s.final_acc = log.back().test_acc;
  for (const auto& m : log) s.best_acc = std::max(s.best_acc, m.test_acc);
  s.final_detection = log.back().detection;
  return s;
}

std::string summary_csv_header() {
  return "config_hash,estimation,detection,training,seed,status,final_acc,best_acc,final_p,final_r,final_f1\n";
}

std::string summary_csv_row(const RunSummary& s) {
  std::ostringstream row;
  row << s.config_hash << ',' << to_string(s.cfg.estimation) << ',' << to_string(s.cfg.detection) << ','
      << to_string(s.cfg.training) << ',' << s.cfg.seed << ',' << s.status << ',';
  if (s.status == "ok") {
    row << fmt_double(s.final_acc) << ',' << fmt_double(s.best_acc) << ',';
    if (s.final_detection)
      row << fmt_double(s.final_detection->precision) << ',' << fmt_double(s.final_detection->recall) << ','
          << fmt_double(s.final_detection->f1);
    else
      row << ",,";
  } else {
    row << ",,,,";
  }
  row << '\n';
  return row.str();
}

std::pair<Dataset, Dataset> load_train_test(const fs::path& train, const fs::path& test) {
  Dataset tr = load_dataset(train, std::nullopt, Split::train);
  Dataset te = load_dataset(test, std::nullopt, Split::test);
  const int k = std::max(tr.num_classes, te.num_classes);
  tr.num_classes = k;
  te.num_classes = k;
  tr.validate();
  te.validate();
  return {std::move(tr), std::move(te)};
}

namespace {

void append_summary(const fs::path& path, const std::string& rows) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  if (fresh) out << summary_csv_header();
  out << rows;
}

RunSummary run_one(const RunConfig& cfg, const Dataset& train, const Dataset& test, const fs::path& log_path) {
  const auto log = combo_run(cfg, train, test);
  std::string lines;
  for (const auto& m : log) lines += epoch_log_line(m) + "\n";
  write_file(log_path, lines);
  return summarize(cfg, log);
}

}  // namespace

RunSummary cmd_run(const RunConfig& cfg, const fs::path& train, const fs::path& test, const fs::path& out_dir) {
  cfg.validate();
  if (out_dir.empty()) throw UsageError("--out is required");
  auto [tr, te] = load_train_test(train, test);
  fs::create_directories(out_dir);
  RunSummary s = run_one(cfg, tr, te, out_dir / "epochs.jsonl");
  append_summary(out_dir / "summary.csv", summary_csv_row(s));
  return s;
}

SweepSpec parse_sweep_spec(std::string_view text) {
  SweepSpec spec;
  for_each_assignment(text, [&](std::size_t line, const std::string& key, const std::string& value) {
    if (key == "estimation") {
      spec.estimations.clear();
      for (const auto& v : split(value, ',')) spec.estimations.push_back(parse_estimation(v));
    } else if (key == "detection") {
      spec.detections.clear();
      for (const auto& v : split(value, ',')) spec.detections.push_back(parse_detection(v));
    } else if (key == "training") {
      spec.trainings.clear();
      for (const auto& v : split(value, ',')) spec.trainings.push_back(parse_training(v));
    } else if (key == "seed" || key == "seeds") {
      spec.seeds.clear();
      for (const auto& v : split(value, ',')) spec.seeds.push_back(parse_value<std::uint64_t>(key, v));
    } else if (key == "train") {
      spec.train = value;
    } else if (key == "test") {
      spec.test = value;
    } else if (!apply_key(spec.base, key, value)) {
      throw ConfigError("unknown sweep key '" + key + "' at line " + std::to_string(line));
    }
  });
  if (spec.estimations.empty() || spec.detections.empty() || spec.trainings.empty() || spec.seeds.empty())
    throw ConfigError("sweep grid has an empty axis");
  return spec;
}

std::vector<SweepCell> expand_sweep(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  for (Estimation e : spec.estimations)
    for (Detection d : spec.detections)
      for (TrainingMode t : spec.trainings) {
        if (e == Estimation::none && uses_noise_sources(d)) {
          log_warn("sweep: skipping " + to_string(e) + "/" + to_string(d) + "/" + to_string(t) +
                   " (knowledge-integrated detection needs an estimation method)");
          continue;
        }
        RunConfig cfg = spec.base;
        cfg.estimation = e;
        cfg.detection = d;
        cfg.training = t;
        cfg.validate();
        cells.push_back({e, d, t});
      }
  return cells;
}

std::vector<CellReport> aggregate(const std::vector<RunSummary>& runs) {
  std::vector<CellReport> reports;
  std::map<std::tuple<int, int, int>, std::size_t> index;
  std::vector<std::vector<const RunSummary*>> members;
  for (const auto& r : runs) {
    const auto key = std::make_tuple(static_cast<int>(r.cfg.estimation), static_cast<int>(r.cfg.detection),
                                     static_cast<int>(r.cfg.training));
    auto [it, inserted] = index.emplace(key, reports.size());
    if (inserted) {
      reports.push_back(CellReport{{r.cfg.estimation, r.cfg.detection, r.cfg.training}, 0, 0, 0.0, 0.0, std::nullopt});
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t c = 0; c < reports.size(); ++c) {
    CellReport& rep = reports[c];
    std::vector<double> accs, f1s;
    for (const RunSummary* r : members[c]) {
      ++rep.runs;
      if (r->status != "ok") {
        ++rep.failed;
        continue;
      }
      accs.push_back(r->final_acc);
      if (r->final_detection) f1s.push_back(r->final_detection->f1);
    }
    if (!accs.empty()) {
      double sum = 0.0;
      for (double a : accs) sum += a;
      rep.acc_mean = sum / static_cast<double>(accs.size());
      if (accs.size() > 1) {
        double ss = 0.0;
        for (double a : accs) ss += (a - rep.acc_mean) * (a - rep.acc_mean);
        rep.acc_std = std::sqrt(ss / static_cast<double>(accs.size() - 1));
      }
    }
    if (!f1s.empty()) {
      double sum = 0.0;
      for (double f : f1s) sum += f;
      rep.f1_mean = sum / static_cast<double>(f1s.size());
    }
  }
  return reports;
}

std::string report_csv(const std::vector<CellReport>& cells) {
  std::ostringstream s;
  s << "estimation,detection,training,acc_mean,acc_std,f1_mean,runs,status\n";
  for (const auto& c : cells) {
    s << to_string(c.cell.estimation) << ',' << to_string(c.cell.detection) << ',' << to_string(c.cell.training)
      << ',';
    if (c.failed < c.runs)
      s << fmt_stat(c.acc_mean) << ',' << fmt_stat(c.acc_std) << ',';
    else
      s << ",,";
    if (c.f1_mean) s << fmt_stat(*c.f1_mean);
    s << ',' << c.runs << ',' << (c.failed == 0 ? "ok" : "failed") << '\n';
  }
  return s.str();
}

std::vector<CellReport> cmd_sweep(const SweepSpec& spec, const fs::path& out_dir, int jobs) {
  if (out_dir.empty()) throw UsageError("--out is required");
  if (spec.train.empty() || spec.test.empty()) throw UsageError("sweep needs train and test datasets");
  const auto cells = expand_sweep(spec);
  auto [train, test] = load_train_test(spec.train, spec.test);
  fs::create_directories(out_dir / "runs");

  struct Job {
    RunConfig cfg;
    fs::path log_path;
  };
  std::vector<Job> work;
  for (const auto& cell : cells)
    for (std::uint64_t seed : spec.seeds) {
      RunConfig cfg = spec.base;
      cfg.estimation = cell.estimation;
      cfg.detection = cell.detection;
      cfg.training = cell.training;
      cfg.seed = seed;
      const std::string name = to_string(cell.estimation) + "_" + to_string(cell.detection) + "_" +
                               to_string(cell.training) + "_s" + std::to_string(seed) + ".jsonl";
      work.push_back({cfg, out_dir / "runs" / name});
    }

  auto execute = [&](const Job& job) {
    try {
      return run_one(job.cfg, train, test, job.log_path);
    } catch (const std::exception& e) {
      log_warn("sweep: run " + job.log_path.filename().string() + " failed: " + e.what());
      RunSummary failed;
      failed.cfg = job.cfg;
      failed.config_hash = config_hash(job.cfg);
      failed.status = "failed";
      return failed;
    }
  };

  std::vector<RunSummary> results(work.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < work.size(); start += width) {
    const std::size_t stop = std::min(work.size(), start + width);
    if (width == 1) {
      results[start] = execute(work[start]);
      continue;
    }
    std::vector<std::future<RunSummary>> pending;
    for (std::size_t i = start; i < stop; ++i) pending.push_back(std::async(std::launch::async, execute, std::cref(work[i])));
    for (std::size_t i = start; i < stop; ++i) results[i] = pending[i - start].get();
  }

  std::string rows = summary_csv_header();
  for (const auto& r : results) rows += summary_csv_row(r);
  write_file(out_dir / "summary.csv", rows);
  auto reports = aggregate(results);
  write_file(out_dir / "sweep_summary.csv", report_csv(reports));
  return reports;
}

namespace {

std::vector<RunSummary> read_summary_csv(const fs::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty summary file: " + path.string());
  const auto header = split(line, ',');
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("summary file lacks column '" + name + "': " + path.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_hash = column("config_hash"), c_est = column("estimation"), c_det = column("detection"),
                    c_tr = column("training"), c_seed = column("seed"), c_status = column("status"),
                    c_acc = column("final_acc"), c_best = column("best_acc"), c_p = column("final_p"),
                    c_r = column("final_r"), c_f1 = column("final_f1");

  std::vector<RunSummary> runs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ParseError("inconsistent column count at line " + std::to_string(line_no) + " of " + path.string());
    RunSummary r;
    r.config_hash = cells[c_hash];
    r.cfg.estimation = parse_estimation(cells[c_est]);
    r.cfg.detection = parse_detection(cells[c_det]);
    r.cfg.training = parse_training(cells[c_tr]);
    r.cfg.seed = parse_value<std::uint64_t>("seed", cells[c_seed]);
    r.status = cells[c_status];
    if (r.status == "ok") {
      r.final_acc = parse_value<double>("final_acc", cells[c_acc]);
      r.best_acc = parse_value<double>("best_acc", cells[c_best]);
      if (!cells[c_f1].empty())
        r.final_detection = DetectionScores{parse_value<double>("final_p", cells[c_p]),
                                            parse_value<double>("final_r", cells[c_r]),
                                            parse_value<double>("final_f1", cells[c_f1])};
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace

std::vector<CellReport> cmd_report(const std::vector<fs::path>& summaries, const fs::path& out_file) {
  if (summaries.empty()) throw UsageError("report needs at least one summary.csv");
  std::vector<RunSummary> runs;
  for (const auto& p : summaries) {
    auto more = read_summary_csv(p);
    runs.insert(runs.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  auto reports = aggregate(runs);
  if (!out_file.empty()) {
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    write_file(out_file, report_csv(reports));
  }
  return reports;
}

namespace {

std::pair<int, int> parse_pair(const std::string& text) {
  const auto parts = split(text, '-');
  if (parts.size() != 2) throw UsageError("pair must look like A-B, got '" + text + "'");
  try {
    return {std::stoi(parts[0]), std::stoi(parts[1])};
  } catch (const std::exception&) {
    throw UsageError("pair must look like A-B, got '" + text + "'");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise modeling, noise-source identification and clean-sample detection toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log refreshes and notices");

  GenerateOptions gen;
  std::string kind = "pairwise";
  std::vector<std::string> pair_texts;
  auto* generate = app.add_subcommand("generate", "Write planted blob datasets with synthetic label noise");
  generate->add_option("--kind", kind, "Noise type")->check(CLI::IsMember({"pairwise", "dominant"}));
  generate->add_option("--k", gen.num_classes, "Number of classes");
  generate->add_option("--dim", gen.dim, "Feature dimension");
  generate->add_option("--per-class", gen.per_class, "Training samples per class (pairwise)");
  generate->add_option("--test-per-class", gen.test_per_class, "Test samples per class (default: train/5)");
  generate->add_option("--ratio", gen.ratio, "Noise ratio within corrupted classes");
  generate->add_option("--bucket", gen.bucket, "Samples per label bucket (dominant)");
  generate->add_option("--sep", gen.separation, "Distance of class centers from the origin");
  generate->add_option("--pairs", pair_texts, "Noise pairs as A-B (default: built-in pairing)")->delimiter(',');
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--out", gen.out, "Output directory")->required();

  std::string config_path, train_path, test_path, out_path;
  std::optional<std::uint64_t> seed_override;
  auto* run = app.add_subcommand("run", "Train one configuration and log per-epoch metrics");
  run->add_option("--config", config_path, "key=value run configuration")->required();
  run->add_option("--train", train_path, "Training CSV")->required();
  run->add_option("--test", test_path, "Test CSV")->required();
  run->add_option("--out", out_path, "Output directory")->required();
  run->add_option("--seed", seed_override, "Override the configured seed");

  std::string sweep_path, sweep_train, sweep_test, sweep_out;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of method combinations over seeds");
  sweep->add_option("--config", sweep_path, "Sweep file")->required();
  sweep->add_option("--train", sweep_train, "Training CSV (overrides the sweep file)");
  sweep->add_option("--test", sweep_test, "Test CSV (overrides the sweep file)");
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Aggregate summary.csv files into per-combination statistics");
  report->add_option("inputs", report_inputs, "summary.csv files")->required();
  report->add_option("--out", report_out, "Report CSV (default: stdout)");

  std::vector<std::string> argv_store(args);
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitIo;
  }
  if (verbose) set_log_level(LogLevel::info);

  try {
    if (*generate) {
      gen.kind = parse_noise_kind(kind);
      for (const auto& p : pair_texts) gen.pairs.push_back(parse_pair(p));
      const GeneratedData g = cmd_generate(gen);
      out << "wrote " << (gen.out / "train.csv").string() << " (" << g.train.size() << " samples), "
          << (gen.out / "test.csv").string() << " (" << g.test.size() << " samples), "
          << (gen.out / "noise.json").string() << '\n';
    } else if (*run) {
      RunConfig cfg = load_run_config(config_path);
      if (seed_override) cfg.seed = *seed_override;
      const RunSummary s = cmd_run(cfg, train_path, test_path, out_path);
      out << summary_csv_header() << summary_csv_row(s);
    } else if (*sweep) {
      SweepSpec spec = parse_sweep_spec(read_file(sweep_path));
      if (!sweep_train.empty()) spec.train = sweep_train;
      if (!sweep_test.empty()) spec.test = sweep_test;
      out << report_csv(cmd_sweep(spec, sweep_out, jobs));
    } else if (*report) {
      std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
      out << report_csv(cmd_report(inputs, report_out));
    }
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace combo::cli
