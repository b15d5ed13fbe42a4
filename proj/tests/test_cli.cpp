#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "combo/cli.hpp"

using namespace combo;
using namespace combo::cli;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("combo_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "combo");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

GenerateOptions small_data(const fs::path& out) {
  GenerateOptions g;
  g.num_classes = 4;
  g.dim = 4;
  g.per_class = 40;
  g.ratio = 0.3;
  g.separation = 3.0;
  g.seed = 3;
  g.out = out;
  return g;
}

const char* kShortRun =
    "total_epochs=6\n"
    "warmup_epochs=2\n"
    "update_freq=2\n"
    "lr=0.05\n"
    "batch=16\n"
    "hidden=8\n";

}  // namespace

TEST_CASE("run configurations round-trip through text") {
  RunConfig cfg;
  cfg.total_epochs = 45;
  cfg.warmup_epochs = 7;
  cfg.lr = 0.0325;
  cfg.estimation = Estimation::dualt;
  cfg.detection = Detection::fine_k;
  cfg.training = TrainingMode::ssl;
  cfg.seed = 123456789012345ULL;
  cfg.anchor_conf = 0.9;
  cfg.unicon_strict = true;
  const RunConfig back = parse_run_config(format_run_config(cfg));
  CHECK(format_run_config(back) == format_run_config(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.lr == cfg.lr);
  CHECK(back.unicon_strict);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("config text accepts comments and blank lines") {
  const RunConfig cfg = parse_run_config("# schedule\n\n total_epochs = 30 \nwarmup_epochs=5  # short\ndetection=unicon\n");
  CHECK(cfg.total_epochs == 30);
  CHECK(cfg.warmup_epochs == 5);
  CHECK(cfg.detection == Detection::unicon);
  CHECK(cfg.lr == RunConfig{}.lr);
}

TEST_CASE("config hashes are stable and sensitive") {
  const RunConfig a;
  RunConfig b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("config errors name the problem") {
  try {
    parse_run_config("lr=0.1\nlearning_rate=0.2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "unknown config key 'learning_rate' at line 2");
  }
  CHECK_THROWS_AS(parse_run_config("lr\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("lr=fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("detection=coteaching\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("unicon_strict=maybe\n"), ConfigError);
}

TEST_CASE("generation is deterministic") {
  const fs::path a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
  cmd_generate(small_data(a));
  cmd_generate(small_data(b));
  for (const char* f : {"train.csv", "test.csv", "noise.json"}) CHECK(slurp(a / f) == slurp(b / f));
  GenerateOptions other = small_data(b);
  other.seed = 4;
  cmd_generate(other);
  CHECK(slurp(a / "train.csv") != slurp(b / "train.csv"));
}

TEST_CASE("generated files describe the planted noise") {
  const fs::path dir = fresh_dir("gen_side");
  const GeneratedData g = cmd_generate(small_data(dir));
  const auto side = nlohmann::json::parse(slurp(dir / "noise.json"));
  CHECK(side["kind"] == "pairwise");
  CHECK(side["train_n"] == 160);
  CHECK(side["test_n"] == 32);
  CHECK(side["train_noisy"] == 48);
  CHECK(side["flips"].size() == 4);
  CHECK(side["flips"][0]["count"] == 12);
  const Dataset train = load_dataset(dir / "train.csv");
  REQUIRE(train.true_labels.has_value());
  CHECK(train.noisy_labels == g.train.noisy_labels);
  const Dataset test = load_dataset(dir / "test.csv");
  CHECK(test.clean_mask() == std::vector<bool>(32, true));
}

TEST_CASE("dominant generation records its composition") {
  GenerateOptions g;
  g.kind = NoiseKind::dominant;
  g.num_classes = 4;
  g.dim = 4;
  g.bucket = 2500;
  g.ratio = 0.2;
  const GeneratedData d = generate_data(g);
  const auto side = nlohmann::json::parse(d.sidecar_json);
  REQUIRE(side["composition"].size() == 2);
  for (const auto& c : side["composition"]) {
    CHECK(c["dominant_drawn"] == 2000);
    CHECK(c["recessive_drawn"] == 3000);
    CHECK(c["mislabeled"] == 500);
  }
  CHECK(side["pairs"] == nlohmann::json::parse("[[0,2],[1,3]]"));
  CHECK(side["train_noisy"] == 1000);
  CHECK(side["test_per_class"] == 500);
}

TEST_CASE("generate rejects bad arguments with exit code 1") {
  const fs::path dir = fresh_dir("gen_bad");
  Outcome r = invoke({"generate", "--ratio", "1.0", "--out", dir.string()});
  CHECK(r.code == kExitIo);
  CHECK_FALSE(r.err.empty());
  r = invoke({"generate", "--k", "4", "--pairs", "0-9", "--out", dir.string()});
  CHECK(r.code == kExitIo);
  r = invoke({"generate", "--pairs", "zero-one", "--out", dir.string()});
  CHECK(r.code == kExitIo);
  r = invoke({"generate", "--kind", "uniform", "--out", dir.string()});
  CHECK(r.code == kExitIo);
  CHECK(invoke({"generate"}).code == kExitIo);
  CHECK(invoke({}).code == kExitIo);
  CHECK_FALSE(fs::exists(dir / "train.csv"));
}

TEST_CASE("run writes identical logs for identical inputs") {
  const fs::path dir = fresh_dir("run");
  cmd_generate(small_data(dir / "data"));
  spit(dir / "run.cfg", std::string(kShortRun) + "estimation=cluster\ndetection=unicon_k\ntraining=ssl\n");
  const std::vector<std::string> base{"run", "--config", (dir / "run.cfg").string(), "--train",
                                      (dir / "data/train.csv").string(), "--test", (dir / "data/test.csv").string()};
  auto with_out = [&](const std::string& name) {
    auto args = base;
    args.push_back("--out");
    args.push_back((dir / name).string());
    return invoke(args);
  };
  const Outcome a = with_out("a"), b = with_out("b");
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(a.out == b.out);
  const std::string log = slurp(dir / "a/epochs.jsonl");
  CHECK(log == slurp(dir / "b/epochs.jsonl"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 6);
  const std::string summary = slurp(dir / "a/summary.csv");
  CHECK(summary.rfind(summary_csv_header(), 0) == 0);

  // A second run into the same directory appends one row.
  REQUIRE(with_out("a").code == kExitOk);
  const std::string twice = slurp(dir / "a/summary.csv");
  CHECK(std::count(twice.begin(), twice.end(), '\n') == 3);
}

TEST_CASE("run reports missing files and bad configs") {
  const fs::path dir = fresh_dir("run_err");
  cmd_generate(small_data(dir / "data"));
  spit(dir / "ok.cfg", kShortRun);
  const std::string missing = (dir / "nowhere.csv").string();
  Outcome r = invoke({"run", "--config", (dir / "ok.cfg").string(), "--train", missing, "--test",
                   (dir / "data/test.csv").string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitIo);
  CHECK(r.err.find(missing) != std::string::npos);

  spit(dir / "bad.cfg", "lr=-1\n");
  r = invoke({"run", "--config", (dir / "bad.cfg").string(), "--train", (dir / "data/train.csv").string(), "--test",
           (dir / "data/test.csv").string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitConfig);

  spit(dir / "pruned.cfg", std::string(kShortRun) + "detection=fine_k\n");
  r = invoke({"run", "--config", (dir / "pruned.cfg").string(), "--train", (dir / "data/train.csv").string(), "--test",
           (dir / "data/test.csv").string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitConfig);
}

TEST_CASE("sweep grids skip source-aware detectors without estimation") {
  const SweepSpec spec = parse_sweep_spec(
      "estimation=cluster,none\ndetection=unicon,unicon_k\ntraining=select,ssl\nseeds=0,1\nlr=0.05\n");
  CHECK(spec.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(spec.base.lr == 0.05);
  const auto cells = expand_sweep(spec);
  CHECK(cells.size() == 6);
  for (const auto& c : cells) CHECK_FALSE((c.estimation == Estimation::none && uses_noise_sources(c.detection)));
  CHECK_THROWS_AS(parse_sweep_spec("detection=\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("detection=fine,sieve\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("epochs=3\n"), ConfigError);
}

TEST_CASE("sweeps aggregate over seeds") {
  const fs::path dir = fresh_dir("sweep");
  cmd_generate(small_data(dir / "data"));
  SweepSpec spec = parse_sweep_spec(std::string(kShortRun) +
                                    "estimation=cluster,none\ndetection=unicon,unicon_k\ntraining=select,ssl\n"
                                    "seeds=0,1,2\n");
  spec.train = dir / "data/train.csv";
  spec.test = dir / "data/test.csv";
  const auto reports = cmd_sweep(spec, dir / "out");
  REQUIRE(reports.size() == 6);
  CHECK(fs::exists(dir / "out/runs/cluster_unicon_k_ssl_s2.jsonl"));
  CHECK_FALSE(fs::exists(dir / "out/runs/none_unicon_k_ssl_s0.jsonl"));

  const auto from_disk = cmd_report({dir / "out/summary.csv"}, dir / "report.csv");
  REQUIRE(from_disk.size() == reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(reports[i].runs == 3);
    CHECK(reports[i].failed == 0);
    CHECK(from_disk[i].acc_mean == doctest::Approx(reports[i].acc_mean).epsilon(1e-9));
    CHECK(from_disk[i].acc_std == doctest::Approx(reports[i].acc_std).epsilon(1e-9));
  }
  CHECK(slurp(dir / "report.csv") == slurp(dir / "out/sweep_summary.csv"));

  // Recompute the first cell from the per-run logs.
  std::vector<double> finals;
  for (int s = 0; s < 3; ++s) {
    std::ifstream in(dir / ("out/runs/cluster_unicon_select_s" + std::to_string(s) + ".jsonl"));
    std::string line, last;
    while (std::getline(in, line)) last = line;
    finals.push_back(nlohmann::json::parse(last)["test_acc"].get<double>());
  }
  const double mean = (finals[0] + finals[1] + finals[2]) / 3.0;
  double ss = 0.0;
  for (double f : finals) ss += (f - mean) * (f - mean);
  REQUIRE(reports[0].cell.detection == Detection::unicon);
  REQUIRE(reports[0].cell.training == TrainingMode::select);
  CHECK(reports[0].acc_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(reports[0].acc_std == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-12));
}

TEST_CASE("a single seed has zero spread") {
  RunSummary a;
  a.config_hash = "x";
  a.final_acc = 0.7;
  const auto cells = aggregate({a});
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].runs == 1);
  CHECK(cells[0].acc_mean == 0.7);
  CHECK(cells[0].acc_std == 0.0);
  CHECK_FALSE(cells[0].f1_mean.has_value());
}

TEST_CASE("failed runs are reported, not averaged") {
  RunSummary ok, bad;
  ok.final_acc = 0.5;
  ok.final_detection = DetectionScores{0.8, 0.9, 0.85};
  bad.status = "failed";
  bad.final_acc = 0.0;
  const auto cells = aggregate({ok, bad});
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].runs == 2);
  CHECK(cells[0].failed == 1);
  CHECK(cells[0].acc_mean == 0.5);
  CHECK(report_csv(cells).find(",failed\n") != std::string::npos);
}

TEST_CASE("report merges several summary files") {
  const fs::path dir = fresh_dir("report");
  RunConfig cfg;
  auto row = [&](std::uint64_t seed, double acc) {
    cfg.seed = seed;
    RunSummary s;
    s.cfg = cfg;
    s.config_hash = config_hash(cfg);
    s.final_acc = s.best_acc = acc;
    return summary_csv_row(s);
  };
  spit(dir / "a.csv", summary_csv_header() + row(0, 0.6));
  spit(dir / "b.csv", summary_csv_header() + row(1, 0.8) + row(2, 0.7));
  const Outcome r = invoke({"report", (dir / "a.csv").string(), (dir / "b.csv").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("estimation,detection,training,acc_mean,acc_std,f1_mean,runs,status\n", 0) == 0);
  CHECK(r.out.find("none,none,select,0.7,0.1,,3,ok") != std::string::npos);
  spit(dir / "broken.csv", "estimation,seed\nnone,0\n");
  CHECK(invoke({"report", (dir / "broken.csv").string()}).code == kExitIo);
}
