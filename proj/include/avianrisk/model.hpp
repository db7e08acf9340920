#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "avianrisk/features.hpp"
#include "avianrisk/rng.hpp"

// Pre-norm Transformer encoder for window classification. Forward and
// backward passes are written out by hand; gradients are exact and verified
// against central finite differences in the test suite.

namespace avianrisk::model {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ModelConfig {
  int d_model = 96;
  int n_layers = 6;
  int n_heads = 6;
  int d_ff = 384;
  double dropout_p = 0.15;
  int T_max = 60;
  int n_species = 1;
  int cell_vocab = 2; // sentinel + OOV + distinct train cells
  int d_cell = 32;
  bool aux_head_enabled = false;
  std::uint64_t seed = 0;

  void validate() const; // throws InputError
};

struct LayerParams {
  Vec ln1_scale, ln1_shift;
  Mat wq, wk, wv, wo; // each d_model x d_model, applied as row * W^T
  Vec bq, bk, bv, bo;
  Vec ln2_scale, ln2_shift;
  Mat w_up;   // d_ff x d_model
  Vec b_up;
  Mat w_down; // d_model x d_ff
  Vec b_down;
};

struct Parameters {
  Mat in_proj_w; // d_model x 14
  Vec in_proj_b;
  Mat cell_emb;    // cell_vocab x d_cell
  Mat cell_proj_w; // d_model x d_cell
  Vec cell_proj_b;
  Mat species_emb; // n_species x d_model
  Mat ctx_w1;      // d_model x 18
  Vec ctx_b1;
  Mat ctx_w2; // d_model x d_model
  Vec ctx_b2;
  std::vector<LayerParams> layers;
  Vec final_ln_scale, final_ln_shift;
  Vec head_w; // d_model
  Vec head_b; // 1
  Vec step_head_w; // d_model
  Vec step_head_b; // 1
};

// Zero-filled tensors with the shapes the config dictates.
Parameters make_parameters(const ModelConfig& cfg);

// Deterministic initialization from cfg.seed: fan-based uniform for linear
// weights, normal(0, 0.02) for embedding tables, 1/0 for layer norms, zero
// biases.
Parameters init(const ModelConfig& cfg);

struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::vector<int> shape;
  std::size_t size = 0;
};

// Every named tensor in a fixed, stable order; the order defines both the
// initialization draw sequence and the checkpoint layout.
std::vector<TensorRef> tensor_refs(Parameters& p);

// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same); row 0
// belongs to the [CTX] slot and is never added to it.
Mat positional_encoding(int n_pos, int d_model);

// Cell-id vocabulary learned from the train split. Row 0 is the sentinel for
// padded/unobserved steps, row 1 the out-of-vocabulary bucket, rows 2..
// the distinct train cells in sorted order.
struct CellVocab {
  static constexpr int kSentinelRow = 0;
  static constexpr int kOovRow = 1;

  std::vector<std::uint64_t> cells; // sorted, row i+2 holds cells[i]
  std::unordered_map<std::uint64_t, int> index;

  static CellVocab build(const std::vector<features::Window>& train_windows);
  static CellVocab from_cells(std::vector<std::uint64_t> sorted_cells);

  int row_of(geo::CellId c) const;
  int vocab_size() const { return static_cast<int>(cells.size()) + 2; }
};

enum class Mode { train, eval };

struct LayerCache {
  Mat x_in;      // S x d, sublayer input
  Mat y1;        // normalized input to attention
  Vec mu1, sig1; // per-row layer-norm stats
  Mat q, k, v;   // S x d
  std::vector<Mat> attn; // per head, S x S softmax rows
  Mat ctx_cat;   // S x d concatenated head outputs
  Mat drop1;     // dropout multiplier (empty in eval mode)
  Mat x_mid;     // after attention residual
  Mat y2;
  Vec mu2, sig2;
  Mat z_up; // S x d_ff pre-activation
  Mat u;    // gelu(z_up)
  Mat drop2;
};

struct ForwardCache {
  // Embedding-level context.
  Mat x_cont;             // T x 14 raw features
  Vec ctx;                // 18
  std::vector<int> cell_rows; // T
  int species_id = 0;
  Vec ctx_z1; // ctx MLP hidden pre-activation
  Vec ctx_h1; // gelu(ctx_z1)
  Mat x0;     // S x d embedded input
  std::vector<std::uint8_t> key_mask; // S, 1 = masked (padded)
  int readout_slot = 0;

  std::vector<LayerCache> layers;
  Mat x_final;   // S x d before final norm
  Mat y_final;   // normalized
  Vec mu_f, sig_f;
};

struct ForwardOutput {
  double window_logit = 0.0;
  std::optional<std::vector<double>> step_logits;
};

// Embeds one window: slot 0 = ctx MLP + species embedding (no positional
// encoding), slots 1..T = feature projection + projected cell embedding +
// species embedding + PE. Throws InputError for an out-of-vocabulary species.
Mat embed(const features::Window& w, const Parameters& p,
          const ModelConfig& cfg, const CellVocab& vocab,
          ForwardCache* cache);

// Full pass. Train mode draws inverted-dropout masks from rng; eval mode is
// deterministic and ignores rng. cache may be null when no backward pass is
// needed.
ForwardOutput forward(const features::Window& w, const Parameters& p,
                      const ModelConfig& cfg, const CellVocab& vocab,
                      Mode mode, rng::Rng* rng, ForwardCache* cache);

// Accumulates d(loss)/d(param) into grads for upstream d(loss)/d(logit).
void backward(const ForwardCache& cache, const Parameters& p,
              const ModelConfig& cfg, double d_logit, Parameters& grads);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double val_auc = 0.0;
  double val_ap = 0.0;
};

struct Checkpoint {
  ModelConfig config;
  Parameters params;
  std::vector<std::string> species_vocab;
  CellVocab cell_vocab;
  features::FeatureStats stats;
  std::vector<EpochRecord> history;
  double threshold = 0.5;
  int best_epoch = -1;
  double val_acc = 0.0, val_auc = 0.0, val_ap = 0.0;
};

// Binary container: "AVRK" magic, u32 format version, u32 JSON header length,
// JSON header (config, vocabularies, normalization stats, history, threshold,
// tensor manifest), then tensors as little-endian float32 in manifest order.
// Parameters are quantized to float32 on save; loading never loses further
// precision, so save -> load -> save is byte-stable.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace avianrisk::model
