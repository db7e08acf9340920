#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "avianrisk/features.hpp"
#include "avianrisk/model.hpp"

namespace avianrisk::train {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 2e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;
  double pos_oversample_weight = 3.0;
  std::uint64_t seed = 0;

  // Throws InputError when a field is out of range.
  void validate() const;
};

// n_neg / n_pos over binary labels. Throws InputError when only one class
// is present.
double pos_weight(const std::vector<int>& labels);

struct BceResult {
  double loss = 0.0;
  double dlogit = 0.0;
};

// Weighted binary cross entropy on a raw logit, stable for large |logit|:
//   loss = w*y*softplus(-z) + (1-y)*softplus(z)
//   dloss/dz = w*y*(sigmoid(z) - 1) + (1-y)*sigmoid(z)
BceResult bce_with_logits(double logit, int label, double pos_weight);

double sigmoid(double z);

// One epoch of sample indices, drawn with replacement. Positives carry
// `weight`, negatives 1.0; the stream has exactly labels.size() entries and
// is a pure function of (labels, weight, seed).
std::vector<std::size_t> weighted_sampler(const std::vector<int>& labels,
                                          double weight, std::uint64_t seed);

// Global L2 clipping across all tensors. Returns the pre-clip norm. Throws
// RuntimeFailure naming the tensor when a gradient entry is not finite.
double clip_gradients(model::Parameters& grads, double max_norm);

struct AdamState {
  model::Parameters m;
  model::Parameters v;
};

AdamState make_adam_state(const model::ModelConfig& cfg);

// Decoupled weight-decay Adam update with bias correction; t counts steps
// from 1. Throws InputError on a shape mismatch between params and grads.
void adamw_step(model::Parameters& params, const model::Parameters& grads,
                AdamState& state, const TrainConfig& cfg, int t);

struct ThresholdSelection {
  double threshold = 0.5;
  double f1_at_threshold = 0.0;
};

// Scans the unique scores as candidate thresholds with the rule
// predict-positive when score >= t, and returns the candidate with the best
// F1 (ties broken toward the smallest threshold). Throws InputError when the
// labels are single-class.
ThresholdSelection select_threshold(const std::vector<double>& scores,
                                    const std::vector<int>& labels);

// Sigmoid scores for every window under a checkpoint's parameters, computed
// deterministically and in parallel.
std::vector<double> score_windows(const std::vector<features::Window>& windows,
                                  const model::Checkpoint& ckpt);

struct FitResult {
  model::Checkpoint best;
  std::vector<model::EpochRecord> history;
};

// Full optimization loop over pre-normalized windows. Each epoch draws a
// weighted-resampled index stream, takes AdamW steps on clipped mean-batch
// gradients, and evaluates the validation split; the checkpoint file at
// `checkpoint_path` is rewritten whenever validation AP strictly improves.
// After the last epoch the best checkpoint is reloaded, the decision
// threshold is selected on its validation scores, and the file is rewritten
// once more with that threshold. Throws RuntimeFailure naming the epoch if
// the loss stops being finite.
FitResult fit(const std::vector<features::Window>& train_windows,
              const std::vector<features::Window>& val_windows,
              const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
              const features::FeatureStats& stats,
              const std::vector<std::string>& species_vocab,
              const std::string& checkpoint_path,
              const std::function<void(const model::EpochRecord&)>& on_epoch = {});

void write_history_csv(const std::vector<model::EpochRecord>& history,
                       const std::string& path);

} // namespace avianrisk::train
