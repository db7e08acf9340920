#include "avianrisk/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "avianrisk/error.hpp"
#include "avianrisk/hexgrid.hpp"

namespace avianrisk::model {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

constexpr double kLnEps = 1e-5;
constexpr double kMaskedScore = -1e30; // exp() underflows to exactly 0

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * phi;
}

// Row-wise layer norm; yhat is the normalized value before scale/shift.
void layer_norm_fwd(const Mat& x, Mat& yhat, Vec& mu, Vec& sig) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  yhat.resize(rows, cols);
  mu.resize(rows);
  sig.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double m = x.row(r).mean();
    const double var = (x.row(r).array() - m).square().mean();
    const double s = std::sqrt(var + kLnEps);
    mu(r) = m;
    sig(r) = s;
    yhat.row(r) = (x.row(r).array() - m) / s;
  }
}

Mat ln_apply(const Mat& yhat, const Vec& scale, const Vec& shift) {
  Mat out = yhat.array().rowwise() * scale.transpose().array();
  out.array().rowwise() += shift.transpose().array();
  return out;
}

// dout is w.r.t. the scaled output; returns dx and accumulates dscale/dshift.
Mat layer_norm_bwd(const Mat& dout, const Mat& yhat, const Vec& sig,
                   const Vec& scale, Vec& dscale, Vec& dshift) {
  dscale.noalias() += (dout.array() * yhat.array()).colwise().sum().matrix();
  dshift.noalias() += dout.colwise().sum();
  Mat dx(dout.rows(), dout.cols());
  for (Eigen::Index r = 0; r < dout.rows(); ++r) {
    const auto g = (dout.row(r).array() * scale.transpose().array()).eval();
    const double g_mean = g.mean();
    const double gy_mean = (g * yhat.row(r).array()).mean();
    dx.row(r) =
        ((g - g_mean - yhat.row(r).array() * gy_mean) / sig(r)).matrix();
  }
  return dx;
}

// out = X * W^T + b (rowwise).
Mat linear(const Mat& x, const Mat& w, const Vec& b) {
  Mat out = x * w.transpose();
  out.rowwise() += b.transpose();
  return out;
}

void linear_bwd(const Mat& dout, const Mat& x, const Mat& w, Mat& dw, Vec& db,
                Mat& dx_accum) {
  dw.noalias() += dout.transpose() * x;
  db.noalias() += dout.colwise().sum().transpose();
  dx_accum.noalias() += dout * w;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                 rng::Rng& rng) {
  Mat mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      mask(r, c) = rng.uniform() >= p ? keep_scale : 0.0;
  return mask;
}

} // namespace

void ModelConfig::validate() const {
  const auto fail = [](const std::string& msg) {
    throw InputError("model config: " + msg);
  };
  if (d_model <= 0) fail("d_model must be positive");
  if (n_heads <= 0 || d_model % n_heads != 0)
    fail("d_model must be divisible by n_heads");
  if (n_layers <= 0) fail("n_layers must be positive");
  if (d_ff <= 0) fail("d_ff must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (T_max <= 0) fail("T_max must be positive");
  if (n_species <= 0) fail("n_species must be positive");
  if (cell_vocab < 2) fail("cell_vocab must include sentinel and OOV rows");
  if (d_cell <= 0) fail("d_cell must be positive");
}

Parameters make_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model;
  Parameters p;
  p.in_proj_w = Mat::Zero(d, features::kStepDims);
  p.in_proj_b = Vec::Zero(d);
  p.cell_emb = Mat::Zero(cfg.cell_vocab, cfg.d_cell);
  p.cell_proj_w = Mat::Zero(d, cfg.d_cell);
  p.cell_proj_b = Vec::Zero(d);
  p.species_emb = Mat::Zero(cfg.n_species, d);
  p.ctx_w1 = Mat::Zero(d, features::kCtxDims);
  p.ctx_b1 = Vec::Zero(d);
  p.ctx_w2 = Mat::Zero(d, d);
  p.ctx_b2 = Vec::Zero(d);
  p.layers.resize(cfg.n_layers);
  for (auto& layer : p.layers) {
    layer.ln1_scale = Vec::Zero(d);
    layer.ln1_shift = Vec::Zero(d);
    layer.wq = Mat::Zero(d, d);
    layer.wk = Mat::Zero(d, d);
    layer.wv = Mat::Zero(d, d);
    layer.wo = Mat::Zero(d, d);
    layer.bq = Vec::Zero(d);
    layer.bk = Vec::Zero(d);
    layer.bv = Vec::Zero(d);
    layer.bo = Vec::Zero(d);
    layer.ln2_scale = Vec::Zero(d);
    layer.ln2_shift = Vec::Zero(d);
    layer.w_up = Mat::Zero(cfg.d_ff, d);
    layer.b_up = Vec::Zero(cfg.d_ff);
    layer.w_down = Mat::Zero(d, cfg.d_ff);
    layer.b_down = Vec::Zero(d);
  }
  p.final_ln_scale = Vec::Zero(d);
  p.final_ln_shift = Vec::Zero(d);
  p.head_w = Vec::Zero(d);
  p.head_b = Vec::Zero(1);
  p.step_head_w = Vec::Zero(d);
  p.step_head_b = Vec::Zero(1);
  return p;
}

std::vector<TensorRef> tensor_refs(Parameters& p) {
  std::vector<TensorRef> refs;
  const auto add_mat = [&](const std::string& name, Mat& m) {
    refs.push_back({name, m.data(),
                    {static_cast<int>(m.rows()), static_cast<int>(m.cols())},
                    static_cast<std::size_t>(m.size())});
  };
  const auto add_vec = [&](const std::string& name, Vec& v) {
    refs.push_back({name, v.data(), {static_cast<int>(v.size())},
                    static_cast<std::size_t>(v.size())});
  };
  add_mat("in_proj.w", p.in_proj_w);
  add_vec("in_proj.b", p.in_proj_b);
  add_mat("cell_emb", p.cell_emb);
  add_mat("cell_proj.w", p.cell_proj_w);
  add_vec("cell_proj.b", p.cell_proj_b);
  add_mat("species_emb", p.species_emb);
  add_mat("ctx_mlp.w1", p.ctx_w1);
  add_vec("ctx_mlp.b1", p.ctx_b1);
  add_mat("ctx_mlp.w2", p.ctx_w2);
  add_vec("ctx_mlp.b2", p.ctx_b2);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string prefix = "layers." + std::to_string(i) + ".";
    auto& l = p.layers[i];
    add_vec(prefix + "ln1.scale", l.ln1_scale);
    add_vec(prefix + "ln1.shift", l.ln1_shift);
    add_mat(prefix + "attn.wq", l.wq);
    add_vec(prefix + "attn.bq", l.bq);
    add_mat(prefix + "attn.wk", l.wk);
    add_vec(prefix + "attn.bk", l.bk);
    add_mat(prefix + "attn.wv", l.wv);
    add_vec(prefix + "attn.bv", l.bv);
    add_mat(prefix + "attn.wo", l.wo);
    add_vec(prefix + "attn.bo", l.bo);
    add_vec(prefix + "ln2.scale", l.ln2_scale);
    add_vec(prefix + "ln2.shift", l.ln2_shift);
    add_mat(prefix + "ff.w_up", l.w_up);
    add_vec(prefix + "ff.b_up", l.b_up);
    add_mat(prefix + "ff.w_down", l.w_down);
    add_vec(prefix + "ff.b_down", l.b_down);
  }
  add_vec("final_ln.scale", p.final_ln_scale);
  add_vec("final_ln.shift", p.final_ln_shift);
  add_vec("head.w", p.head_w);
  add_vec("head.b", p.head_b);
  add_vec("step_head.w", p.step_head_w);
  add_vec("step_head.b", p.step_head_b);
  return refs;
}

Parameters init(const ModelConfig& cfg) {
  Parameters p = make_parameters(cfg);
  rng::Rng rng(cfg.seed);

  // Fan-based bound for a weight of shape (fan_out, fan_in), gain 1.
  const auto uniform_fill = [&](Mat& w) {
    const double bound =
        std::sqrt(6.0 / (static_cast<double>(w.rows()) + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        w(r, c) = rng.uniform(-bound, bound);
  };
  const auto normal_fill = [&](Mat& w, double std) {
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        w(r, c) = rng.normal() * std;
  };
  const auto head_fill = [&](Vec& w) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(w.size()) + 1.0));
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w(i) = rng.uniform(-bound, bound);
  };

  uniform_fill(p.in_proj_w);
  normal_fill(p.cell_emb, 0.02);
  uniform_fill(p.cell_proj_w);
  normal_fill(p.species_emb, 0.02);
  uniform_fill(p.ctx_w1);
  uniform_fill(p.ctx_w2);
  for (auto& l : p.layers) {
    l.ln1_scale.setOnes();
    l.ln2_scale.setOnes();
    uniform_fill(l.wq);
    uniform_fill(l.wk);
    uniform_fill(l.wv);
    uniform_fill(l.wo);
    uniform_fill(l.w_up);
    uniform_fill(l.w_down);
  }
  p.final_ln_scale.setOnes();
  head_fill(p.head_w);
  head_fill(p.step_head_w);
  return p;
}

Mat positional_encoding(int n_pos, int d_model) {
  Mat pe(n_pos, d_model);
  for (int pos = 0; pos < n_pos; ++pos) {
    for (int i = 0; 2 * i < d_model; ++i) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(i) / d_model);
      const double angle = pos * freq;
      pe(pos, 2 * i) = std::sin(angle);
      if (2 * i + 1 < d_model) pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

CellVocab CellVocab::build(const std::vector<features::Window>& train_windows) {
  std::set<std::uint64_t> seen;
  for (const auto& w : train_windows)
    for (std::size_t t = 0; t < w.cells.size(); ++t)
      if (w.obs_mask[t] && w.cells[t].value) seen.insert(w.cells[t].value);
  return from_cells(std::vector<std::uint64_t>(seen.begin(), seen.end()));
}

CellVocab CellVocab::from_cells(std::vector<std::uint64_t> sorted_cells) {
  CellVocab v;
  v.cells = std::move(sorted_cells);
  for (std::size_t i = 0; i < v.cells.size(); ++i)
    v.index[v.cells[i]] = static_cast<int>(i) + 2;
  return v;
}

int CellVocab::row_of(geo::CellId c) const {
  if (c.value == 0) return kSentinelRow;
  const auto it = index.find(c.value);
  return it == index.end() ? kOovRow : it->second;
}

Mat embed(const features::Window& w, const Parameters& p,
          const ModelConfig& cfg, const CellVocab& vocab,
          ForwardCache* cache) {
  if (w.species_id < 0 || w.species_id >= cfg.n_species)
    throw InputError("species id " + std::to_string(w.species_id) +
                     " outside the closed vocabulary of " +
                     std::to_string(cfg.n_species));
  const int T = static_cast<int>(w.x_cont.size());
  if (T > cfg.T_max)
    throw InputError("window longer than T_max");
  const int S = T + 1;
  const int d = cfg.d_model;

  Vec ctx(features::kCtxDims);
  for (int i = 0; i < features::kCtxDims; ++i) ctx(i) = w.ctx[i];

  const Vec z1 = p.ctx_w1 * ctx + p.ctx_b1;
  Vec h1(d);
  for (int i = 0; i < d; ++i) h1(i) = gelu(z1(i));
  const Vec species = p.species_emb.row(w.species_id).transpose();

  Mat x0(S, d);
  x0.row(0) = (p.ctx_w2 * h1 + p.ctx_b2 + species).transpose();

  const Mat pe = positional_encoding(S, d);
  Mat x_cont(T, features::kStepDims);
  std::vector<int> cell_rows(T);
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < features::kStepDims; ++c) x_cont(t, c) = w.x_cont[t][c];
    cell_rows[t] = vocab.row_of(w.cells[t]);
    const Vec cell_vec = p.cell_emb.row(cell_rows[t]).transpose();
    x0.row(t + 1) = (p.in_proj_w * x_cont.row(t).transpose() + p.in_proj_b +
                     p.cell_proj_w * cell_vec + p.cell_proj_b + species)
                        .transpose() +
                    pe.row(t + 1);
  }

  if (cache) {
    cache->x_cont = std::move(x_cont);
    cache->ctx = std::move(ctx);
    cache->cell_rows = std::move(cell_rows);
    cache->species_id = w.species_id;
    cache->ctx_z1 = z1;
    cache->ctx_h1 = std::move(h1);
    cache->x0 = x0;
  }
  return x0;
}

ForwardOutput forward(const features::Window& w, const Parameters& p,
                      const ModelConfig& cfg, const CellVocab& vocab,
                      Mode mode, rng::Rng* rng, ForwardCache* cache) {
  const int T = static_cast<int>(w.x_cont.size());
  const int S = T + 1;
  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;
  const double qk_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = mode == Mode::train && cfg.dropout_p > 0.0;
  if (use_dropout && !rng)
    throw InputError("train-mode forward needs a dropout rng");

  // Readout position: the last step not marked as padding.
  int last_valid = -1;
  for (int t = 0; t < T; ++t)
    if (!w.pad_mask[t]) last_valid = t;
  if (last_valid < 0)
    throw InputError("window has no valid steps");
  const int readout_slot = last_valid + 1;

  std::vector<std::uint8_t> key_mask(S, 0);
  for (int t = 0; t < T; ++t) key_mask[t + 1] = w.pad_mask[t] ? 1 : 0;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.layers.clear();

  Mat x = embed(w, p, cfg, vocab, &c);
  c.key_mask = key_mask;
  c.readout_slot = readout_slot;

  c.layers.resize(cfg.n_layers);
  for (int li = 0; li < cfg.n_layers; ++li) {
    const LayerParams& lp = p.layers[li];
    LayerCache& lc = c.layers[li];
    lc.x_in = x;

    layer_norm_fwd(x, lc.y1, lc.mu1, lc.sig1);
    const Mat y1s = ln_apply(lc.y1, lp.ln1_scale, lp.ln1_shift);
    lc.q = linear(y1s, lp.wq, lp.bq);
    lc.k = linear(y1s, lp.wk, lp.bk);
    lc.v = linear(y1s, lp.wv, lp.bv);

    lc.attn.resize(nh);
    lc.ctx_cat.resize(S, d);
    for (int h = 0; h < nh; ++h) {
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const auto vh = lc.v.middleCols(h * dh, dh);
      Mat scores = qh * kh.transpose() * qk_scale;
      for (int j = 0; j < S; ++j)
        if (key_mask[j])
          scores.col(j).setConstant(kMaskedScore);
      Mat& a = lc.attn[h];
      a.resize(S, S);
      for (int i = 0; i < S; ++i) {
        const double m = scores.row(i).maxCoeff();
        a.row(i) = (scores.row(i).array() - m).exp();
        a.row(i) /= a.row(i).sum();
      }
      lc.ctx_cat.middleCols(h * dh, dh).noalias() = a * vh;
    }

    Mat attn_out = linear(lc.ctx_cat, lp.wo, lp.bo);
    if (use_dropout) {
      lc.drop1 = dropout_mask(S, d, cfg.dropout_p, *rng);
      attn_out.array() *= lc.drop1.array();
    }
    lc.x_mid = x + attn_out;

    layer_norm_fwd(lc.x_mid, lc.y2, lc.mu2, lc.sig2);
    const Mat y2s = ln_apply(lc.y2, lp.ln2_scale, lp.ln2_shift);
    lc.z_up = linear(y2s, lp.w_up, lp.b_up);
    lc.u = lc.z_up.unaryExpr([](double v) { return gelu(v); });
    Mat ff_out = linear(lc.u, lp.w_down, lp.b_down);
    if (use_dropout) {
      lc.drop2 = dropout_mask(S, d, cfg.dropout_p, *rng);
      ff_out.array() *= lc.drop2.array();
    }
    x = lc.x_mid + ff_out;
  }

  c.x_final = x;
  layer_norm_fwd(x, c.y_final, c.mu_f, c.sig_f);
  const Mat yfs = ln_apply(c.y_final, p.final_ln_scale, p.final_ln_shift);

  ForwardOutput out;
  out.window_logit = yfs.row(readout_slot).dot(p.head_w) + p.head_b(0);
  if (cfg.aux_head_enabled) {
    std::vector<double> step_logits(T, 0.0);
    for (int t = 0; t < T; ++t)
      step_logits[t] = yfs.row(t + 1).dot(p.step_head_w) + p.step_head_b(0);
    out.step_logits = std::move(step_logits);
  }
  return out;
}

void backward(const ForwardCache& c, const Parameters& p,
              const ModelConfig& cfg, double d_logit, Parameters& grads) {
  if (c.layers.size() != static_cast<std::size_t>(cfg.n_layers) ||
      c.x_final.size() == 0)
    throw InputError("backward called without a cached forward pass");

  const int S = static_cast<int>(c.x_final.rows());
  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;
  const double qk_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Head and final norm.
  Mat dyfs = Mat::Zero(S, d);
  dyfs.row(c.readout_slot) = d_logit * p.head_w.transpose();
  const Mat yfs = ln_apply(c.y_final, p.final_ln_scale, p.final_ln_shift);
  grads.head_w.noalias() += d_logit * yfs.row(c.readout_slot).transpose();
  grads.head_b(0) += d_logit;
  Mat dx = layer_norm_bwd(dyfs, c.y_final, c.sig_f, p.final_ln_scale,
                          grads.final_ln_scale, grads.final_ln_shift);

  for (int li = cfg.n_layers - 1; li >= 0; --li) {
    const LayerParams& lp = p.layers[li];
    const LayerCache& lc = c.layers[li];
    LayerParams& lg = grads.layers[li];

    // Feed-forward sublayer: x_out = x_mid + drop2 .* (W_down gelu(W_up y2s)).
    Mat dff = dx;
    if (lc.drop2.size()) dff.array() *= lc.drop2.array();
    const Mat y2s = ln_apply(lc.y2, lp.ln2_scale, lp.ln2_shift);
    Mat du = Mat::Zero(S, cfg.d_ff);
    linear_bwd(dff, lc.u, lp.w_down, lg.w_down, lg.b_down, du);
    const Mat dz =
        du.array() * lc.z_up.unaryExpr([](double v) { return gelu_grad(v); })
                         .array();
    Mat dy2s = Mat::Zero(S, d);
    linear_bwd(dz, y2s, lp.w_up, lg.w_up, lg.b_up, dy2s);
    Mat dx_mid = dx + layer_norm_bwd(dy2s, lc.y2, lc.sig2, lp.ln2_scale,
                                     lg.ln2_scale, lg.ln2_shift);

    // Attention sublayer: x_mid = x_in + drop1 .* (W_o concat(heads)).
    Mat dattn = dx_mid;
    if (lc.drop1.size()) dattn.array() *= lc.drop1.array();
    Mat dctx_cat = Mat::Zero(S, d);
    linear_bwd(dattn, lc.ctx_cat, lp.wo, lg.wo, lg.bo, dctx_cat);

    Mat dq(S, d), dk(S, d), dv(S, d);
    for (int h = 0; h < nh; ++h) {
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const auto vh = lc.v.middleCols(h * dh, dh);
      const Mat& a = lc.attn[h];
      const auto dctx_h = dctx_cat.middleCols(h * dh, dh);

      const Mat da = dctx_h * vh.transpose();
      dv.middleCols(h * dh, dh).noalias() = a.transpose() * dctx_h;

      // Softmax backward per row; masked keys have a = 0 and stay silent.
      Mat ds(S, S);
      for (int i = 0; i < S; ++i) {
        const double dot = a.row(i).dot(da.row(i));
        ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
      }
      dq.middleCols(h * dh, dh).noalias() = ds * kh * qk_scale;
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * qh * qk_scale;
    }

    const Mat y1s = ln_apply(lc.y1, lp.ln1_scale, lp.ln1_shift);
    Mat dy1s = Mat::Zero(S, d);
    linear_bwd(dq, y1s, lp.wq, lg.wq, lg.bq, dy1s);
    linear_bwd(dk, y1s, lp.wk, lg.wk, lg.bk, dy1s);
    linear_bwd(dv, y1s, lp.wv, lg.wv, lg.bv, dy1s);
    dx = dx_mid + layer_norm_bwd(dy1s, lc.y1, lc.sig1, lp.ln1_scale,
                                 lg.ln1_scale, lg.ln1_shift);
  }

  // Embedding backward. Species bias reaches every slot.
  const Vec species_grad = dx.colwise().sum().transpose();
  grads.species_emb.row(c.species_id) += species_grad.transpose();

  const Vec de0 = dx.row(0).transpose();
  grads.ctx_b2.noalias() += de0;
  grads.ctx_w2.noalias() += de0 * c.ctx_h1.transpose();
  Vec dh1 = p.ctx_w2.transpose() * de0;
  Vec dz1(d);
  for (int i = 0; i < d; ++i) dz1(i) = dh1(i) * gelu_grad(c.ctx_z1(i));
  grads.ctx_b1.noalias() += dz1;
  grads.ctx_w1.noalias() += dz1 * c.ctx.transpose();

  const int T = S - 1;
  for (int t = 0; t < T; ++t) {
    const Vec de = dx.row(t + 1).transpose();
    grads.in_proj_b.noalias() += de;
    grads.in_proj_w.noalias() += de * c.x_cont.row(t);
    grads.cell_proj_b.noalias() += de;
    const Vec cell_vec = p.cell_emb.row(c.cell_rows[t]).transpose();
    grads.cell_proj_w.noalias() += de * cell_vec.transpose();
    grads.cell_emb.row(c.cell_rows[t]).noalias() +=
        (p.cell_proj_w.transpose() * de).transpose();
  }
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'A', 'V', 'R', 'K'};

nlohmann::ordered_json config_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["d_model"] = cfg.d_model;
  j["n_layers"] = cfg.n_layers;
  j["n_heads"] = cfg.n_heads;
  j["d_ff"] = cfg.d_ff;
  j["dropout_p"] = cfg.dropout_p;
  j["T_max"] = cfg.T_max;
  j["n_species"] = cfg.n_species;
  j["cell_vocab"] = cfg.cell_vocab;
  j["d_cell"] = cfg.d_cell;
  j["aux_head_enabled"] = cfg.aux_head_enabled;
  j["seed"] = cfg.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.dropout_p = j.at("dropout_p").get<double>();
  cfg.T_max = j.at("T_max").get<int>();
  cfg.n_species = j.at("n_species").get<int>();
  cfg.cell_vocab = j.at("cell_vocab").get<int>();
  cfg.d_cell = j.at("d_cell").get<int>();
  cfg.aux_head_enabled = j.at("aux_head_enabled").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  Parameters& params = const_cast<Parameters&>(ckpt.params);
  const auto refs = tensor_refs(params);

  nlohmann::ordered_json header;
  header["config"] = config_json(ckpt.config);
  header["species_vocab"] = ckpt.species_vocab;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto c : ckpt.cell_vocab.cells)
    cells.push_back(hexgrid::cell_to_string(c));
  header["cell_vocab"] = std::move(cells);
  header["stats"] = nlohmann::ordered_json::parse(
      features::stats_to_json(ckpt.stats));
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& e : ckpt.history) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["val_loss"] = e.val_loss;
    r["val_acc"] = e.val_acc;
    r["val_auc"] = e.val_auc;
    r["val_ap"] = e.val_ap;
    hist.push_back(std::move(r));
  }
  header["history"] = std::move(hist);
  header["threshold"] = ckpt.threshold;
  header["best_epoch"] = ckpt.best_epoch;
  header["val_metrics"] = {{"acc", ckpt.val_acc},
                           {"auc", ckpt.val_auc},
                           {"ap", ckpt.val_ap}};
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto& ref : refs) {
    nlohmann::ordered_json t;
    t["name"] = ref.name;
    t["shape"] = ref.shape;
    manifest.push_back(std::move(t));
  }
  header["tensors"] = std::move(manifest);

  const std::string header_text = header.dump();
  std::string blob;
  blob.append(kMagic, 4);
  append_u32(blob, kCheckpointVersion);
  append_u32(blob, static_cast<std::uint32_t>(header_text.size()));
  blob += header_text;
  for (const auto& ref : refs) {
    for (std::size_t i = 0; i < ref.size; ++i) {
      const float f = static_cast<float>(ref.data[i]);
      char buf[4];
      std::memcpy(buf, &f, 4);
      blob.append(buf, 4);
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot open file for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  out.close();
  if (out.fail()) throw InputError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string blob = buf.str();

  if (blob.size() < 12 || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw InputError(path + ": not a checkpoint file");
  std::uint32_t version = 0, header_len = 0;
  std::memcpy(&version, blob.data() + 4, 4);
  std::memcpy(&header_len, blob.data() + 8, 4);
  if (version != kCheckpointVersion)
    throw InputError(path + ": unsupported checkpoint version " +
                     std::to_string(version));
  if (blob.size() < 12 + static_cast<std::size_t>(header_len))
    throw InputError(path + ": truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": bad checkpoint header: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.config.validate();
  ckpt.species_vocab =
      header.at("species_vocab").get<std::vector<std::string>>();
  std::vector<std::uint64_t> cells;
  for (const auto& c : header.at("cell_vocab"))
    cells.push_back(hexgrid::cell_from_string(c.get<std::string>()));
  ckpt.cell_vocab = CellVocab::from_cells(std::move(cells));
  ckpt.stats = features::stats_from_json(header.at("stats").dump());
  for (const auto& r : header.at("history")) {
    EpochRecord e;
    e.epoch = r.at("epoch").get<int>();
    e.train_loss = r.at("train_loss").get<double>();
    e.val_loss = r.at("val_loss").get<double>();
    e.val_acc = r.at("val_acc").get<double>();
    e.val_auc = r.at("val_auc").get<double>();
    e.val_ap = r.at("val_ap").get<double>();
    ckpt.history.push_back(e);
  }
  ckpt.threshold = header.at("threshold").get<double>();
  ckpt.best_epoch = header.at("best_epoch").get<int>();
  const auto& vm = header.at("val_metrics");
  ckpt.val_acc = vm.at("acc").get<double>();
  ckpt.val_auc = vm.at("auc").get<double>();
  ckpt.val_ap = vm.at("ap").get<double>();

  ckpt.params = make_parameters(ckpt.config);
  const auto refs = tensor_refs(ckpt.params);
  const auto& manifest = header.at("tensors");
  if (manifest.size() != refs.size())
    throw InputError(path + ": tensor manifest does not match the config");

  std::size_t offset = 12 + header_len;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != refs[i].name ||
        entry.at("shape").get<std::vector<int>>() != refs[i].shape)
      throw InputError(path + ": unexpected tensor " +
                       entry.at("name").get<std::string>());
    const std::size_t bytes = refs[i].size * 4;
    if (offset + bytes > blob.size())
      throw InputError(path + ": truncated tensor data");
    for (std::size_t k = 0; k < refs[i].size; ++k) {
      float f = 0.0f;
      std::memcpy(&f, blob.data() + offset + k * 4, 4);
      refs[i].data[k] = static_cast<double>(f);
    }
    offset += bytes;
  }
  if (offset != blob.size())
    throw InputError(path + ": trailing bytes after tensor data");
  return ckpt;
}

} // namespace avianrisk::model
