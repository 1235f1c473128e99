//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// SMILES sequence encoder: bidirectional GRU over one-hot tokens (no
// positional encoding), pre-LN Transformer blocks whose self-attention
// logits carry an additive key-position bias derived from the bond-level
// graph readout H_E, and mean pooling to the sequence vector H_S.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmsg/chem/smiles.hpp"
#include "mmsg/diff/autodiff.hpp"

namespace mmsg::seq {

using diff::Mat;
using diff::ParamStore;
using diff::Parameter;
using diff::Tape;
using diff::Var;

struct EmptySequence : std::runtime_error {
  EmptySequence() : std::runtime_error("token sequence is empty") {}
};

struct SequenceTooLong : std::runtime_error {
  SequenceTooLong(int n, int max_len)
      : std::runtime_error("sequence length " + std::to_string(n) +
                           " exceeds max_len " + std::to_string(max_len)) {}
};

struct SeqConfig {
  int vocab_size = 0;
  int gru_hidden = 64;
  int model_dim = 64;   // must equal the BMC hidden_dim for the Eq-15 sum
  int heads = 4;
  int layers = 2;
  int max_len = 256;
  int ffn_dim = 64;     // inner width of the per-block FFN

  void validate() const {
    if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
    if (gru_hidden < 1 || model_dim < 1 || heads < 1 || layers < 1 ||
        max_len < 1 || ffn_dim < 1)
      throw std::invalid_argument("sequence encoder dims must be positive");
    if (model_dim % heads != 0)
      throw std::invalid_argument("model_dim must be divisible by heads");
  }
};

struct TransformerLayerParams {
  Parameter *ln1_gain, *ln1_bias;
  Parameter *Wq, *Wk, *Wv, *Wo, *bo;
  Parameter *ln2_gain, *ln2_bias;
  Parameter *W1, *b1, *W2, *b2;
};

struct SeqParams {
  diff::GruParams gru_fwd;
  diff::GruParams gru_bwd;
  Parameter* W_proj = nullptr;  // model_dim x 2*gru_hidden
  Parameter* b_proj = nullptr;
  std::vector<TransformerLayerParams> layers;
  Parameter* W_bias = nullptr;  // (heads*max_len) x gnn_hidden
  Parameter* b_bias = nullptr;  // 1 x (heads*max_len)

  static SeqParams create(ParamStore& store, const SeqConfig& cfg,
                          int gnn_hidden, std::mt19937_64& rng) {
    cfg.validate();
    SeqParams p;
    const auto d = static_cast<Eigen::Index>(cfg.model_dim);
    const auto g = static_cast<Eigen::Index>(cfg.gru_hidden);
    p.gru_fwd = diff::GruParams::create(store, "seq.gru_fwd", cfg.vocab_size,
                                        g, rng);
    p.gru_bwd = diff::GruParams::create(store, "seq.gru_bwd", cfg.vocab_size,
                                        g, rng);
    p.W_proj = &store.create("seq.W_proj", d, 2 * g,
                             diff::Init::glorot_uniform, rng);
    p.b_proj = &store.create("seq.b_proj", 1, d, diff::Init::zeros, rng);
    for (int l = 0; l < cfg.layers; ++l) {
      std::string pre = "seq.layer" + std::to_string(l);
      TransformerLayerParams lp;
      lp.ln1_gain = &store.create(pre + ".ln1_gain", 1, d, diff::Init::zeros, rng);
      lp.ln1_gain->value.setOnes();
      lp.ln1_bias = &store.create(pre + ".ln1_bias", 1, d, diff::Init::zeros, rng);
      lp.Wq = &store.create(pre + ".Wq", d, d, diff::Init::glorot_uniform, rng);
      lp.Wk = &store.create(pre + ".Wk", d, d, diff::Init::glorot_uniform, rng);
      lp.Wv = &store.create(pre + ".Wv", d, d, diff::Init::glorot_uniform, rng);
      lp.Wo = &store.create(pre + ".Wo", d, d, diff::Init::glorot_uniform, rng);
      lp.bo = &store.create(pre + ".bo", 1, d, diff::Init::zeros, rng);
      lp.ln2_gain = &store.create(pre + ".ln2_gain", 1, d, diff::Init::zeros, rng);
      lp.ln2_gain->value.setOnes();
      lp.ln2_bias = &store.create(pre + ".ln2_bias", 1, d, diff::Init::zeros, rng);
      lp.W1 = &store.create(pre + ".W1", cfg.ffn_dim, d,
                            diff::Init::glorot_uniform, rng);
      lp.b1 = &store.create(pre + ".b1", 1, cfg.ffn_dim, diff::Init::zeros, rng);
      lp.W2 = &store.create(pre + ".W2", d, cfg.ffn_dim,
                            diff::Init::glorot_uniform, rng);
      lp.b2 = &store.create(pre + ".b2", 1, d, diff::Init::zeros, rng);
      p.layers.push_back(lp);
    }
    p.W_bias = &store.create("seq.W_bias",
                             static_cast<Eigen::Index>(cfg.heads) * cfg.max_len,
                             gnn_hidden, diff::Init::glorot_uniform, rng);
    p.b_bias = &store.create("seq.b_bias", 1,
                             static_cast<Eigen::Index>(cfg.heads) * cfg.max_len,
                             diff::Init::zeros, rng);
    return p;
  }
};

/// Bi-GRU over one-hot token rows; forward/backward states concatenated per
/// token and projected to model_dim. No positional encoding.
inline Var bigru_contextualize(Tape& t, const std::vector<int>& ids,
                               const SeqConfig& cfg, const SeqParams& p) {
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw EmptySequence();
  Mat onehot = Mat::Zero(n, cfg.vocab_size);
  for (int i = 0; i < n; ++i) {
    if (ids[static_cast<std::size_t>(i)] < 0 ||
        ids[static_cast<std::size_t>(i)] >= cfg.vocab_size)
      throw diff::IndexOutOfRange("token id");
    onehot(i, ids[static_cast<std::size_t>(i)]) = 1.0;
  }
  Var x = t.input(onehot);

  std::vector<Var> fwd(static_cast<std::size_t>(n));
  Var state = t.input(Mat::Zero(1, cfg.gru_hidden));
  for (int i = 0; i < n; ++i) {
    Var xi = t.gather_rows(x, {i});
    state = diff::gru_cell(t, xi, state, p.gru_fwd);
    fwd[static_cast<std::size_t>(i)] = state;
  }
  std::vector<Var> bwd(static_cast<std::size_t>(n));
  state = t.input(Mat::Zero(1, cfg.gru_hidden));
  for (int i = n - 1; i >= 0; --i) {
    Var xi = t.gather_rows(x, {i});
    state = diff::gru_cell(t, xi, state, p.gru_bwd);
    bwd[static_cast<std::size_t>(i)] = state;
  }
  std::vector<Var> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    rows[static_cast<std::size_t>(i)] =
        t.concat_cols(fwd[static_cast<std::size_t>(i)],
                      bwd[static_cast<std::size_t>(i)]);
  Var h = t.concat_rows(rows);
  return t.linear(h, *p.W_proj, p.b_proj);
}

/// Learned map H_E -> heads x max_len key-position bias, sliced to the
/// active length n. Invalid (unset) when H_E is not routed in.
struct AttentionBias {
  std::vector<Var> per_head;  // each 1 x n
  bool enabled = false;
};

inline AttentionBias bias_from_bonds(Tape& t, Var h_e, const SeqConfig& cfg,
                                     const SeqParams& p, int n) {
  if (n > cfg.max_len) throw SequenceTooLong(n, cfg.max_len);
  Var all = t.linear(h_e, *p.W_bias, p.b_bias);  // 1 x heads*max_len
  AttentionBias bias;
  bias.enabled = true;
  for (int h = 0; h < cfg.heads; ++h)
    bias.per_head.push_back(
        t.slice_cols(all, static_cast<Eigen::Index>(h) * cfg.max_len, n));
  return bias;
}

/// Multi-head self-attention with an optional additive key-position bias
/// broadcast over query rows.
inline Var biased_attention(Tape& t, Var h_s, const AttentionBias& bias,
                            const SeqConfig& cfg,
                            const TransformerLayerParams& lp) {
  const Eigen::Index d = cfg.model_dim;
  const Eigen::Index dk = d / cfg.heads;
  Var q = t.linear(h_s, *lp.Wq);
  Var k = t.linear(h_s, *lp.Wk);
  Var v = t.linear(h_s, *lp.Wv);
  std::vector<Var> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    Var qh = t.slice_cols(q, h * dk, dk);
    Var kh = t.slice_cols(k, h * dk, dk);
    Var vh = t.slice_cols(v, h * dk, dk);
    Var logits = t.scale(t.matmul(qh, t.transpose(kh)),
                         1.0 / std::sqrt(static_cast<double>(dk)));
    if (bias.enabled)
      logits = t.add_rowvec(logits, bias.per_head[static_cast<std::size_t>(h)]);
    Var attn = t.softmax_rows(logits);
    heads.push_back(t.matmul(attn, vh));
  }
  Var cat = heads[0];
  for (std::size_t i = 1; i < heads.size(); ++i)
    cat = t.concat_cols(cat, heads[i]);
  return t.linear(cat, *lp.Wo, lp.bo);
}

/// Pre-LN block: H' = MHA(LN(H)) + H, then H'' = FFN(LN(H')) + H'.
inline Var transformer_block(Tape& t, Var h_s, const AttentionBias& bias,
                             const SeqConfig& cfg,
                             const TransformerLayerParams& lp) {
  Var a = t.layer_norm(h_s, *lp.ln1_gain, *lp.ln1_bias);
  Var h1 = t.add(biased_attention(t, a, bias, cfg, lp), h_s);
  Var f = t.layer_norm(h1, *lp.ln2_gain, *lp.ln2_bias);
  Var ffn = t.linear(t.relu(t.linear(f, *lp.W1, lp.b1)), *lp.W2, lp.b2);
  return t.add(ffn, h1);
}

/// Arithmetic mean over token rows.
inline Var pool_tokens(Tape& t, Var h_s) {
  if (t.val(h_s).rows() == 0) throw EmptySequence();
  return t.mean_rows(h_s);
}

/// Full sequence encoder. The same bias feeds every layer.
inline Var encode_sequence(Tape& t, const std::vector<int>& ids,
                           const AttentionBias& bias, const SeqConfig& cfg,
                           const SeqParams& p) {
  if (static_cast<int>(ids.size()) > cfg.max_len)
    throw SequenceTooLong(static_cast<int>(ids.size()), cfg.max_len);
  Var h = bigru_contextualize(t, ids, cfg, p);
  for (const auto& lp : p.layers) h = transformer_block(t, h, bias, cfg, lp);
  return pool_tokens(t, h);
}

}  // namespace mmsg::seq
