#include "avianrisk/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avianrisk/csvio.hpp"
#include "avianrisk/error.hpp"
#include "avianrisk/metrics.hpp"
#include "avianrisk/rng.hpp"
#include "avianrisk/threading.hpp"

namespace avianrisk::train {
namespace {

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

std::vector<int> labels_of(const std::vector<features::Window>& windows) {
  std::vector<int> labels(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) labels[i] = windows[i].label;
  return labels;
}

void add_params(model::Parameters& into, model::Parameters& from) {
  auto dst = model::tensor_refs(into);
  auto src = model::tensor_refs(from);
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t k = 0; k < dst[i].size; ++k)
      dst[i].data[k] += src[i].data[k];
}

void zero_params(model::Parameters& p) {
  for (auto& ref : model::tensor_refs(p))
    std::fill(ref.data, ref.data + ref.size, 0.0);
}

} // namespace

void TrainConfig::validate() const {
  const auto fail = [](const std::string& msg) {
    throw InputError("train config: " + msg);
  };
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be positive");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
  if (!(pos_oversample_weight > 0.0)) fail("pos_oversample_weight must be positive");
}

double pos_weight(const std::vector<int>& labels) {
  std::size_t n_pos = 0;
  for (const int y : labels) n_pos += y ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw InputError("training labels contain a single class; "
                     "cannot compute pos_weight");
  return static_cast<double>(n_neg) / static_cast<double>(n_pos);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

BceResult bce_with_logits(double logit, int label, double pos_weight) {
  BceResult r;
  const double s = sigmoid(logit);
  if (label) {
    r.loss = pos_weight * softplus(-logit);
    r.dlogit = pos_weight * (s - 1.0);
  } else {
    r.loss = softplus(logit);
    r.dlogit = s;
  }
  return r;
}

std::vector<std::size_t> weighted_sampler(const std::vector<int>& labels,
                                          double weight, std::uint64_t seed) {
  std::vector<double> cum(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += labels[i] ? weight : 1.0;
    cum[i] = total;
  }
  rng::Rng rng(seed);
  std::vector<std::size_t> stream(labels.size());
  for (auto& idx : stream) {
    const double u = rng.uniform() * total;
    idx = static_cast<std::size_t>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (idx >= labels.size()) idx = labels.size() - 1;
  }
  return stream;
}

double clip_gradients(model::Parameters& grads, double max_norm) {
  double sumsq = 0.0;
  const auto refs = model::tensor_refs(grads);
  for (const auto& ref : refs) {
    for (std::size_t k = 0; k < ref.size; ++k) {
      const double g = ref.data[k];
      if (!std::isfinite(g))
        throw RuntimeFailure("non-finite gradient in tensor " + ref.name);
      sumsq += g * g;
    }
  }
  const double norm = std::sqrt(sumsq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& ref : refs)
      for (std::size_t k = 0; k < ref.size; ++k) ref.data[k] *= scale;
  }
  return norm;
}

AdamState make_adam_state(const model::ModelConfig& cfg) {
  return {model::make_parameters(cfg), model::make_parameters(cfg)};
}

void adamw_step(model::Parameters& params, const model::Parameters& grads,
                AdamState& state, const TrainConfig& cfg, int t) {
  auto p = model::tensor_refs(params);
  auto g = model::tensor_refs(const_cast<model::Parameters&>(grads));
  auto m = model::tensor_refs(state.m);
  auto v = model::tensor_refs(state.v);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i].size != p[i].size || g[i].shape != p[i].shape)
      throw InputError("gradient shape mismatch for tensor " + p[i].name);
    for (std::size_t k = 0; k < p[i].size; ++k) {
      const double grad = g[i].data[k];
      m[i].data[k] = cfg.beta1 * m[i].data[k] + (1.0 - cfg.beta1) * grad;
      v[i].data[k] = cfg.beta2 * v[i].data[k] + (1.0 - cfg.beta2) * grad * grad;
      const double m_hat = m[i].data[k] / bc1;
      const double v_hat = v[i].data[k] / bc2;
      p[i].data[k] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                                cfg.weight_decay * p[i].data[k]);
    }
  }
}

ThresholdSelection select_threshold(const std::vector<double>& scores,
                                    const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw InputError("threshold selection needs matching scores and labels");
  bool has_pos = false, has_neg = false;
  for (const int y : labels) (y ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw InputError("validation labels contain a single class; "
                     "cannot select a threshold");

  std::vector<double> candidates = scores;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  ThresholdSelection best;
  best.f1_at_threshold = -1.0;
  for (const double t : candidates) {
    const double f1 = metrics::f1_at(scores, labels, t).first;
    if (f1 > best.f1_at_threshold) {
      best.f1_at_threshold = f1;
      best.threshold = t;
    }
  }
  return best;
}

std::vector<double> score_windows(const std::vector<features::Window>& windows,
                                  const model::Checkpoint& ckpt) {
  std::vector<double> scores(windows.size(), 0.0);
  threading::parallel_shards([&](int shard) {
    for (std::size_t i = shard; i < windows.size();
         i += threading::kShards) {
      const auto out =
          model::forward(windows[i], ckpt.params, ckpt.config, ckpt.cell_vocab,
                         model::Mode::eval, nullptr, nullptr);
      scores[i] = sigmoid(out.window_logit);
    }
  });
  return scores;
}

namespace {

// Evaluation pass used inside the epoch loop: raw logits, shard-parallel.
std::vector<double> eval_logits(const std::vector<features::Window>& windows,
                                const model::Parameters& params,
                                const model::ModelConfig& cfg,
                                const model::CellVocab& vocab) {
  std::vector<double> logits(windows.size(), 0.0);
  threading::parallel_shards([&](int shard) {
    for (std::size_t i = shard; i < windows.size();
         i += threading::kShards) {
      const auto out = model::forward(windows[i], params, cfg, vocab,
                                      model::Mode::eval, nullptr, nullptr);
      logits[i] = out.window_logit;
    }
  });
  return logits;
}

} // namespace

FitResult fit(const std::vector<features::Window>& train_windows,
              const std::vector<features::Window>& val_windows,
              const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
              const features::FeatureStats& stats,
              const std::vector<std::string>& species_vocab,
              const std::string& checkpoint_path,
              const std::function<void(const model::EpochRecord&)>& on_epoch) {
  train_cfg.validate();
  if (train_windows.empty() || val_windows.empty())
    throw InputError("training needs non-empty train and val splits");

  const std::vector<int> train_labels = labels_of(train_windows);
  const std::vector<int> val_labels = labels_of(val_windows);
  const double pw = pos_weight(train_labels);
  {
    bool has_pos = false, has_neg = false;
    for (const int y : val_labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
      throw InputError("validation split contains a single class");
  }

  const model::CellVocab vocab = model::CellVocab::build(train_windows);
  model::ModelConfig cfg = model_cfg;
  cfg.n_species = static_cast<int>(species_vocab.size());
  cfg.cell_vocab = vocab.vocab_size();
  cfg.validate();

  model::Parameters params = model::init(cfg);
  AdamState adam = make_adam_state(cfg);

  std::vector<model::Parameters> shard_grads;
  std::vector<double> shard_loss(threading::kShards, 0.0);
  shard_grads.reserve(threading::kShards);
  for (int s = 0; s < threading::kShards; ++s)
    shard_grads.push_back(model::make_parameters(cfg));
  model::Parameters grads = model::make_parameters(cfg);

  std::vector<model::EpochRecord> history;
  double best_ap = -std::numeric_limits<double>::infinity();
  int step = 0;

  for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    const auto stream = weighted_sampler(
        train_labels, train_cfg.pos_oversample_weight,
        rng::mix(train_cfg.seed, static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    for (std::size_t batch_start = 0; batch_start < stream.size();
         batch_start += static_cast<std::size_t>(train_cfg.batch_size)) {
      const std::size_t batch_n =
          std::min(stream.size() - batch_start,
                   static_cast<std::size_t>(train_cfg.batch_size));
      const double inv_n = 1.0 / static_cast<double>(batch_n);

      for (int s = 0; s < threading::kShards; ++s) {
        zero_params(shard_grads[s]);
        shard_loss[s] = 0.0;
      }
      threading::parallel_shards([&](int shard) {
        model::ForwardCache cache;
        for (std::size_t p = shard; p < batch_n; p += threading::kShards) {
          const std::size_t pos = batch_start + p;
          const features::Window& w = train_windows[stream[pos]];
          // Dropout noise depends only on (seed, epoch, stream position), so
          // the run is reproducible for any thread count.
          rng::Rng drop_rng(rng::mix(train_cfg.seed,
                                     static_cast<std::uint64_t>(epoch),
                                     0x9e3779b97f4a7c15ULL + pos));
          const auto out = model::forward(w, params, cfg, vocab,
                                          model::Mode::train, &drop_rng, &cache);
          const auto bce = bce_with_logits(out.window_logit, w.label, pw);
          shard_loss[shard] += bce.loss;
          model::backward(cache, params, cfg, bce.dlogit * inv_n,
                          shard_grads[shard]);
        }
      });

      double batch_loss = 0.0;
      zero_params(grads);
      for (int s = 0; s < threading::kShards; ++s) {
        batch_loss += shard_loss[s];
        add_params(grads, shard_grads[s]);
      }
      if (!std::isfinite(batch_loss))
        throw RuntimeFailure("training diverged at epoch " +
                             std::to_string(epoch));
      loss_sum += batch_loss;

      clip_gradients(grads, train_cfg.clip_norm);
      adamw_step(params, grads, adam, train_cfg, ++step);
    }

    const auto val_logits = eval_logits(val_windows, params, cfg, vocab);
    double val_loss_sum = 0.0;
    std::vector<double> val_scores(val_logits.size());
    for (std::size_t i = 0; i < val_logits.size(); ++i) {
      val_loss_sum += bce_with_logits(val_logits[i], val_labels[i], pw).loss;
      val_scores[i] = sigmoid(val_logits[i]);
    }
    const auto report = metrics::evaluate(val_scores, val_labels, 0.5);

    model::EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(stream.size());
    rec.val_loss = val_loss_sum / static_cast<double>(val_logits.size());
    rec.val_acc = report.accuracy;
    rec.val_auc =
        report.auc ? *report.auc : std::numeric_limits<double>::quiet_NaN();
    rec.val_ap =
        report.ap ? *report.ap : std::numeric_limits<double>::quiet_NaN();
    history.push_back(rec);
    if (!std::isfinite(rec.val_loss))
      throw RuntimeFailure("training diverged at epoch " +
                           std::to_string(epoch));
    if (on_epoch) on_epoch(rec);

    if (std::isfinite(rec.val_ap) && rec.val_ap > best_ap) {
      best_ap = rec.val_ap;
      model::Checkpoint ckpt;
      ckpt.config = cfg;
      ckpt.params = params;
      ckpt.species_vocab = species_vocab;
      ckpt.cell_vocab = vocab;
      ckpt.stats = stats;
      ckpt.history = history;
      ckpt.threshold = 0.5;
      ckpt.best_epoch = epoch;
      ckpt.val_acc = rec.val_acc;
      ckpt.val_auc = rec.val_auc;
      ckpt.val_ap = rec.val_ap;
      model::save_checkpoint(ckpt, checkpoint_path);
    }
  }

  // Pick the operating threshold from the parameters as serialized, so a
  // later load scores the validation split identically.
  model::Checkpoint best = model::load_checkpoint(checkpoint_path);
  const auto scores = score_windows(val_windows, best);
  const auto sel = select_threshold(scores, val_labels);
  best.threshold = sel.threshold;
  best.history = history;
  model::save_checkpoint(best, checkpoint_path);
  return {std::move(best), std::move(history)};
}

void write_history_csv(const std::vector<model::EpochRecord>& history,
                       const std::string& path) {
  csvio::Writer out(path);
  out.write_row({"epoch", "train_loss", "val_loss", "val_acc", "val_auc",
                 "val_ap"});
  for (const auto& e : history) {
    const auto cell = [](double v) {
      return std::isfinite(v) ? csvio::format_double(v) : std::string();
    };
    out.write_row({std::to_string(e.epoch), cell(e.train_loss),
                   cell(e.val_loss), cell(e.val_acc), cell(e.val_auc),
                   cell(e.val_ap)});
  }
  out.close();
}

} // namespace avianrisk::train
