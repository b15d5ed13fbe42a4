#include "combo/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "combo/detection.hpp"
#include "combo/rng.hpp"
#include "combo/sourceid.hpp"

namespace combo {

Classifier Classifier::init(int in_dim, int hidden, int num_classes, std::uint64_t seed) {
  if (in_dim < 1 || hidden < 1 || num_classes < 2) throw ConfigError("classifier needs d >= 1, h >= 1, K >= 2");
  Rng rng = make_rng(seed, {kStreamInit});
  auto fill = [&](std::vector<double>& v, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : v) x = (2.0 * uniform01(rng) - 1.0) * bound;
  };
  Classifier m;
  m.w1 = Matrix(static_cast<std::size_t>(in_dim), static_cast<std::size_t>(hidden));
  m.b1.resize(static_cast<std::size_t>(hidden));
  m.w2 = Matrix(static_cast<std::size_t>(hidden), static_cast<std::size_t>(num_classes));
  m.b2.resize(static_cast<std::size_t>(num_classes));
  fill(m.w1.data(), in_dim);
  fill(m.b1, in_dim);
  fill(m.w2.data(), hidden);
  fill(m.b2, hidden);
  return m;
}

namespace {

// Forward pass for one sample: hidden activations and softmax probabilities.
void forward(const Classifier& m, std::span<const double> x, std::span<double> hidden, std::span<double> probs) {
  const std::size_t d = m.in_dim(), h = m.hidden(), k = m.num_classes();
  for (std::size_t j = 0; j < h; ++j) hidden[j] = m.b1[j];
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto w = m.w1.row(i);
    for (std::size_t j = 0; j < h; ++j) hidden[j] += xi * w[j];
  }
  for (std::size_t j = 0; j < h; ++j) hidden[j] = std::max(0.0, hidden[j]);
  for (std::size_t c = 0; c < k; ++c) probs[c] = m.b2[c];
  for (std::size_t j = 0; j < h; ++j) {
    const double a = hidden[j];
    if (a == 0.0) continue;
    auto w = m.w2.row(j);
    for (std::size_t c = 0; c < k; ++c) probs[c] += a * w[c];
  }
  const double top = *std::max_element(probs.begin(), probs.end());
  double sum = 0.0;
  for (double& z : probs) {
    z = std::exp(z - top);
    sum += z;
  }
  for (double& z : probs) z /= sum;
}

void zero(Gradients& g, const Classifier& m) {
  g.w1 = Matrix(m.w1.rows(), m.w1.cols());
  g.b1.assign(m.b1.size(), 0.0);
  g.w2 = Matrix(m.w2.rows(), m.w2.cols());
  g.b2.assign(m.b2.size(), 0.0);
}

}  // namespace

double loss_and_gradients(const Classifier& model, const Matrix& x, const Matrix& targets,
                          std::span<const std::size_t> rows, Gradients* grads) {
  const std::size_t d = model.in_dim(), h = model.hidden(), k = model.num_classes();
  if (x.cols() != d || targets.cols() != k || targets.rows() != x.rows())
    throw ValidationError("loss_and_gradients: shape mismatch");
  if (grads) zero(*grads, model);
  if (rows.empty()) return 0.0;

  std::vector<double> hidden(h), probs(k), dlogit(k), dhidden(h);
  const double scale = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    auto xi = x.row(r);
    auto t = targets.row(r);
    forward(model, xi, hidden, probs);
    for (std::size_t c = 0; c < k; ++c)
      if (t[c] > 0.0) loss -= t[c] * std::log(std::max(probs[c], 1e-300));
    if (!grads) continue;

    double tsum = 0.0;
    for (std::size_t c = 0; c < k; ++c) tsum += t[c];
    for (std::size_t c = 0; c < k; ++c) dlogit[c] = (tsum * probs[c] - t[c]) * scale;
    for (std::size_t c = 0; c < k; ++c) grads->b2[c] += dlogit[c];
    for (std::size_t j = 0; j < h; ++j) {
      auto gw = grads->w2.row(j);
      auto w = model.w2.row(j);
      double back = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        gw[c] += hidden[j] * dlogit[c];
        back += w[c] * dlogit[c];
      }
      dhidden[j] = hidden[j] > 0.0 ? back : 0.0;
    }
    for (std::size_t j = 0; j < h; ++j) grads->b1[j] += dhidden[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double v = xi[i];
      if (v == 0.0) continue;
      auto gw = grads->w1.row(i);
      for (std::size_t j = 0; j < h; ++j) gw[j] += v * dhidden[j];
    }
  }
  return loss * scale;
}

void train_epochs(Classifier& model, const Matrix& x, const Matrix& targets, double lr, int batch, int epochs,
                  std::uint64_t seed, int first_epoch) {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  const std::size_t n = x.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double v : targets.row(i)) sum += v;
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("soft target row " + std::to_string(i) + " does not sum to 1");
  }

  std::vector<std::size_t> order(n);
  Gradients g;
  for (int e = 0; e < epochs; ++e) {
    const auto epoch_index = static_cast<std::uint64_t>(first_epoch + e);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, {kStreamShuffle, epoch_index});
    shuffle_range(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch));
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const double loss = loss_and_gradients(model, x, targets, rows, &g);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch_index + 1 << ", batch starting at " << start;
        throw std::runtime_error(msg.str());
      }
      auto step = [lr](std::vector<double>& p, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
      };
      step(model.w1.data(), g.w1.data());
      step(model.b1, g.b1);
      step(model.w2.data(), g.w2.data());
      step(model.b2, g.b2);
    }
  }
}

ModelOutputs predict(const Classifier& model, const Matrix& x) {
  const std::size_t n = x.rows();
  ModelOutputs out;
  out.features = Matrix(n, model.hidden());
  out.probs = Matrix(n, model.num_classes());
  out.preds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    forward(model, x.row(i), out.features.row(i), out.probs.row(i));
    out.preds[i] = static_cast<int>(argmax(out.probs.row(i)));
  }
  return out;
}

Matrix one_hot(const Labels& labels, int num_classes) {
  Matrix m(labels.size(), static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) m(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return m;
}

MixedSamples ssl_compose(const std::vector<std::size_t>& clean_idx, const std::vector<std::size_t>& noisy_idx,
                         const ClusterState& cluster, const Dataset& ds, double mixup_alpha, std::uint64_t seed) {
  if (!(mixup_alpha > 0.0)) throw ConfigError("mixup_alpha must be > 0");
  {
    std::vector<bool> seen(ds.size(), false);
    for (std::size_t i : clean_idx) {
      if (i >= ds.size()) throw ValidationError("ssl_compose: clean index out of range");
      seen[i] = true;
    }
    for (std::size_t i : noisy_idx) {
      if (i >= ds.size()) throw ValidationError("ssl_compose: noisy index out of range");
      if (seen[i]) throw ValidationError("ssl_compose: clean and noisy sets overlap");
    }
  }

  const std::size_t d = ds.dim();
  const auto k = static_cast<std::size_t>(ds.num_classes);
  MixedSamples out;
  out.features = Matrix(noisy_idx.size(), d);
  out.targets = Matrix(noisy_idx.size(), k);
  out.lambdas.reserve(noisy_idx.size());

  if (clean_idx.empty()) {
    if (!noisy_idx.empty()) log_info("ssl: no clean samples; training on pseudo-labels only");
    for (std::size_t t = 0; t < noisy_idx.size(); ++t) {
      const std::size_t i = noisy_idx[t];
      std::copy_n(ds.features.row(i).begin(), d, out.features.row(t).begin());
      out.targets(t, static_cast<std::size_t>(cluster.assignments[i])) = 1.0;
      out.lambdas.push_back(0.0);
    }
    return out;
  }

  Rng rng = make_rng(seed, {kStreamMixup});
  std::vector<std::size_t> partners(clean_idx);
  shuffle_range(partners.begin(), partners.end(), rng);
  for (std::size_t t = 0; t < noisy_idx.size(); ++t) {
    const std::size_t noisy = noisy_idx[t];
    const std::size_t clean = partners[t % partners.size()];
    const double b = beta_sample(rng, mixup_alpha, mixup_alpha);
    const double lam = std::max(b, 1.0 - b);
    auto xc = ds.features.row(clean);
    auto xn = ds.features.row(noisy);
    auto xo = out.features.row(t);
    for (std::size_t j = 0; j < d; ++j) xo[j] = lam * xc[j] + (1.0 - lam) * xn[j];
    out.targets(t, static_cast<std::size_t>(ds.noisy_labels[clean])) += lam;
    out.targets(t, static_cast<std::size_t>(cluster.assignments[noisy])) += 1.0 - lam;
    out.lambdas.push_back(lam);
  }
  return out;
}

std::string to_string(Estimation v) {
  switch (v) {
    case Estimation::cluster: return "cluster";
    case Estimation::dualt: return "dualt";
    case Estimation::none: return "none";
  }
  return "?";
}

std::string to_string(Detection v) {
  switch (v) {
    case Detection::fine: return "fine";
    case Detection::fine_k: return "fine_k";
    case Detection::unicon: return "unicon";
    case Detection::unicon_k: return "unicon_k";
    case Detection::none: return "none";
  }
  return "?";
}

std::string to_string(TrainingMode v) { return v == TrainingMode::select ? "select" : "ssl"; }

Estimation parse_estimation(const std::string& s) {
  if (s == "cluster") return Estimation::cluster;
  if (s == "dualt") return Estimation::dualt;
  if (s == "none") return Estimation::none;
  throw ConfigError("unknown estimation method: " + s);
}

Detection parse_detection(const std::string& s) {
  if (s == "fine") return Detection::fine;
  if (s == "fine_k") return Detection::fine_k;
  if (s == "unicon") return Detection::unicon;
  if (s == "unicon_k") return Detection::unicon_k;
  if (s == "none") return Detection::none;
  throw ConfigError("unknown detection method: " + s);
}

TrainingMode parse_training(const std::string& s) {
  if (s == "select") return TrainingMode::select;
  if (s == "ssl") return TrainingMode::ssl;
  throw ConfigError("unknown training method: " + s);
}

void RunConfig::validate() const {
  if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= total_epochs) throw ConfigError("warmup_epochs must lie in [0, total_epochs)");
  if (update_freq < 1) throw ConfigError("update_freq must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (!(mixup_alpha > 0.0)) throw ConfigError("mixup_alpha must be > 0");
  if (!(alpha_pct > 0.0 && alpha_pct < 100.0) || !(beta_pct > 0.0 && beta_pct < 100.0))
    throw ConfigError("alpha_pct and beta_pct must lie in (0, 100)");
  if (!(anchor_conf > 0.0 && anchor_conf < 1.0)) throw ConfigError("anchor_conf must lie in (0, 1)");
  if (estimation == Estimation::none && uses_noise_sources(detection))
    throw ConfigError("detection " + to_string(detection) + " needs noise sources; estimation must not be none");
}

Refresh refresh_training_set(const RunConfig& cfg, const Classifier& model, const Dataset& train) {
  const ModelOutputs out = predict(model, train.features);
  const int k = train.num_classes;
  const std::uint64_t seed = derive_seed(cfg.seed, {kStreamGmm});

  Refresh r;
  r.ns = NoiseSourceMap(k);
  if (cfg.estimation == Estimation::cluster || cfg.training == TrainingMode::ssl)
    r.cluster = grow_clusters(out, train.noisy_labels, {cfg.alpha_pct, cfg.beta_pct});
  if (cfg.estimation == Estimation::cluster) {
    r.ns = identify_sources(build_confusion(train.noisy_labels, r.cluster->assignments, k), seed);
  } else if (cfg.estimation == Estimation::dualt) {
    r.ns = identify_sources(dualt_estimate(train.noisy_labels, out, cfg.anchor_conf), seed);
  }

  const NoiseSourceMap* ns = uses_noise_sources(cfg.detection) ? &r.ns : nullptr;
  switch (cfg.detection) {
    case Detection::fine:
    case Detection::fine_k: {
      const ClassDirections dirs = class_directions(out.features, train.noisy_labels, k);
      r.verdict = fine_select(out.features, train.noisy_labels, dirs, ns, seed);
      break;
    }
    case Detection::unicon:
    case Detection::unicon_k:
      r.verdict = unicon_select(out.probs, train.noisy_labels, ns,
                                cfg.unicon_strict ? UniconRule::strict : UniconRule::retain);
      break;
    case Detection::none:
      r.verdict.p_clean.assign(train.size(), 1.0);
      r.verdict.keep.assign(train.size(), true);
      break;
  }
  return r;
}

namespace {

// Rows `idx` of `m`.
Matrix gather(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t t = 0; t < idx.size(); ++t) std::copy_n(m.row(idx[t]).begin(), m.cols(), out.row(t).begin());
  return out;
}

Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.data().size()));
  return out;
}

}  // namespace

std::vector<EpochMetrics> combo_run(const RunConfig& cfg, const Dataset& train, const Dataset& test,
                                    Classifier* final_model) {
  cfg.validate();
  train.validate();
  test.validate();
  if (train.dim() != test.dim() || train.num_classes != test.num_classes)
    throw ConfigError("train and test sets differ in dimension or class count");

  const int k = train.num_classes;
  Classifier model = Classifier::init(static_cast<int>(train.dim()), cfg.hidden, k, cfg.seed);
  const Matrix all_targets = one_hot(train.noisy_labels, k);
  const Labels& test_truth = test.true_labels ? *test.true_labels : test.noisy_labels;
  std::optional<std::vector<bool>> truth_clean;
  if (train.true_labels) truth_clean = train.clean_mask();

  std::vector<EpochMetrics> log;
  Refresh current;
  current.ns = NoiseSourceMap(k);
  current.verdict.keep.assign(train.size(), true);
  current.verdict.p_clean.assign(train.size(), 1.0);
  std::vector<std::size_t> clean_idx, noisy_idx;

  for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    if (epoch <= cfg.warmup_epochs) {
      m.phase = Phase::warmup;
      train_epochs(model, train.features, all_targets, cfg.lr, cfg.batch, 1, cfg.seed, epoch - 1);
    } else {
      m.phase = Phase::combo;
      if (epoch == cfg.warmup_epochs + 1 || (epoch - 1) % cfg.update_freq == 0) {
        current = refresh_training_set(cfg, model, train);
        clean_idx.clear();
        noisy_idx.clear();
        for (std::size_t i = 0; i < train.size(); ++i) (current.verdict.keep[i] ? clean_idx : noisy_idx).push_back(i);
        log_info("epoch " + std::to_string(epoch) + ": refreshed, kept " + std::to_string(clean_idx.size()) + "/" +
                 std::to_string(train.size()));
      }

      if (noisy_idx.empty()) {
        train_epochs(model, train.features, all_targets, cfg.lr, cfg.batch, 1, cfg.seed, epoch - 1);
      } else if (cfg.training == TrainingMode::select) {
        if (clean_idx.empty()) {
          log_warn("epoch " + std::to_string(epoch) + ": detector kept no samples; skipping the update");
        } else {
          train_epochs(model, gather(train.features, clean_idx), gather(all_targets, clean_idx), cfg.lr, cfg.batch, 1,
                       cfg.seed, epoch - 1);
        }
      } else {
        const MixedSamples mixed = ssl_compose(clean_idx, noisy_idx, *current.cluster, train, cfg.mixup_alpha,
                                               derive_seed(cfg.seed, {kStreamMixup, static_cast<std::uint64_t>(epoch)}));
        train_epochs(model, stack(gather(train.features, clean_idx), mixed.features),
                     stack(gather(all_targets, clean_idx), mixed.targets), cfg.lr, cfg.batch, 1, cfg.seed, epoch - 1);
      }
      m.kept_count = clean_idx.size();
    }
    if (m.phase == Phase::warmup) m.kept_count = train.size();
    m.ns_snapshot = current.ns;
    if (truth_clean) m.detection = detection_prf(m.phase == Phase::warmup ? std::vector<bool>(train.size(), true)
                                                                          : current.verdict.keep,
                                                 *truth_clean);
    m.test_acc = top1_accuracy(predict(model, test.features).preds, test_truth);
    log.push_back(std::move(m));
  }
  if (final_model) *final_model = std::move(model);
  return log;
}

}  // namespace combo
