//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Fusion model: BMC graph encoder + bond-biased sequence encoder,
// Y = FFN(H_S + H_V), with multi-task masked losses and a JSON checkpoint.
#pragma once

#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmsg/bmc.hpp"
#include "mmsg/seq.hpp"

namespace mmsg::model {

using diff::Mat;
using diff::ParamStore;
using diff::Parameter;
using diff::Tape;
using diff::Var;

enum class TaskType { classification, regression };

struct AllMasked : std::runtime_error {
  AllMasked() : std::runtime_error("every label in the batch is masked") {}
};

struct EmptyBatch : std::runtime_error {
  EmptyBatch() : std::runtime_error("empty batch") {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what)
      : std::runtime_error("checkpoint: " + what) {}
};

struct ModelConfig {
  bmc::BmcConfig bmc;
  int gru_hidden = 64;
  int heads = 4;
  int layers = 2;
  int max_len = 256;
  int ffn_hidden = 64;      // head FFN width and per-block FFN width
  int tasks = 1;
  TaskType task_type = TaskType::regression;
  bool bias_enabled = true;

  seq::SeqConfig seq_config(int vocab_size) const {
    seq::SeqConfig s;
    s.vocab_size = vocab_size;
    s.gru_hidden = gru_hidden;
    s.model_dim = bmc.hidden_dim;  // Eq-15 sum requires equal dims
    s.heads = heads;
    s.layers = layers;
    s.max_len = max_len;
    s.ffn_dim = ffn_hidden;
    return s;
  }

  void validate(int vocab_size) const {
    bmc.validate();
    seq_config(vocab_size).validate();
    if (tasks < 1) throw std::invalid_argument("task count must be >= 1");
    if (ffn_hidden < 1) throw std::invalid_argument("ffn_hidden must be >= 1");
  }
};

struct MmsgModel {
  ModelConfig config;
  chem::TokenDictionary dict;
  ParamStore store;
  bmc::BmcParams bmc_params;
  seq::SeqParams seq_params;
  Parameter *head_W1, *head_b1, *head_W2, *head_b2, *head_W3, *head_b3;

  MmsgModel(ModelConfig cfg, chem::TokenDictionary d, std::uint64_t seed)
      : config(cfg), dict(std::move(d)) {
    config.validate(dict.size());
    std::mt19937_64 rng(seed);
    bmc_params = bmc::BmcParams::create(store, config.bmc, rng);
    seq_params = seq::SeqParams::create(store, config.seq_config(dict.size()),
                                        config.bmc.hidden_dim, rng);
    const auto d_model = static_cast<Eigen::Index>(config.bmc.hidden_dim);
    const auto f = static_cast<Eigen::Index>(config.ffn_hidden);
    head_W1 = &store.create("head.W1", f, d_model, diff::Init::glorot_uniform, rng);
    head_b1 = &store.create("head.b1", 1, f, diff::Init::zeros, rng);
    head_W2 = &store.create("head.W2", f, f, diff::Init::glorot_uniform, rng);
    head_b2 = &store.create("head.b2", 1, f, diff::Init::zeros, rng);
    head_W3 = &store.create("head.W3", config.tasks, f,
                            diff::Init::glorot_uniform, rng);
    head_b3 = &store.create("head.b3", 1, config.tasks, diff::Init::zeros, rng);
  }

  MmsgModel(const MmsgModel&) = delete;
  MmsgModel& operator=(const MmsgModel&) = delete;
};

/// A molecule pre-parsed for both branches.
struct MolInput {
  bmc::FeaturizedGraph graph;
  std::vector<int> token_ids;

  static MolInput from_smiles(const std::string& smiles,
                              const chem::TokenDictionary& dict) {
    MolInput in;
    in.graph = bmc::featurize_graph(chem::parse(smiles));
    in.token_ids = chem::tokenize(smiles, dict).ids;
    return in;
  }
};

struct ForwardOutputs {
  Var prediction;  // 1 x tasks, raw logits / values
  Var fused;       // 1 x hidden, H_S + H_V
};

/// Y = FFN(H_S + H_V). H_E feeds the attention bias when bias_enabled.
inline ForwardOutputs forward(Tape& t, MmsgModel& m, const MolInput& in) {
  auto seq_cfg = m.config.seq_config(m.dict.size());
  auto g = bmc::bmc_forward(t, in.graph, m.config.bmc, m.bmc_params);
  seq::AttentionBias bias;  // disabled unless routed
  if (m.config.bias_enabled)
    bias = seq::bias_from_bonds(t, g.H_E, seq_cfg, m.seq_params,
                                static_cast<int>(in.token_ids.size()));
  Var h_s = seq::encode_sequence(t, in.token_ids, bias, seq_cfg, m.seq_params);
  Var fused = t.add(h_s, g.H_V);
  Var h1 = t.relu(t.linear(fused, *m.head_W1, m.head_b1));
  Var h2 = t.relu(t.linear(h1, *m.head_W2, m.head_b2));
  ForwardOutputs out;
  out.fused = fused;
  out.prediction = t.linear(h2, *m.head_W3, m.head_b3);
  return out;
}

inline std::vector<double> predict(MmsgModel& m, const MolInput& in) {
  Tape t;
  auto out = forward(t, m, in);
  const Mat& v = t.val(out.prediction);
  return {v.data(), v.data() + v.size()};
}

inline std::vector<double> predict(MmsgModel& m, const std::string& smiles) {
  return predict(m, MolInput::from_smiles(smiles, m.dict));
}

/// Pre-head fused vector H_S + H_V for external projection tools.
inline std::vector<double> export_embedding(MmsgModel& m,
                                            const std::string& smiles) {
  Tape t;
  auto out = forward(t, m, MolInput::from_smiles(smiles, m.dict));
  const Mat& v = t.val(out.fused);
  return {v.data(), v.data() + v.size()};
}

// ---------------------------------------------------------------------------
// Plain (non-autodiff) losses for evaluation paths
// ---------------------------------------------------------------------------

inline double masked_bce_loss(const Mat& logits, const Mat& labels,
                              const Mat& mask) {
  double count = mask.sum();
  if (count < 0.5) throw AllMasked();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (mask(i, j) == 0.0) continue;
      double z = logits(i, j);
      total += std::max(z, 0.0) - z * labels(i, j) +
               std::log1p(std::exp(-std::abs(z)));
    }
  return total / count;
}

inline double mse_loss(const std::vector<double>& preds,
                       const std::vector<double>& targets) {
  if (preds.size() != targets.size())
    throw diff::ShapeMismatch("mse_loss lengths");
  if (preds.empty()) throw EmptyBatch();
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

inline double rmse(const std::vector<double>& preds,
                   const std::vector<double>& targets) {
  return std::sqrt(mse_loss(preds, targets));
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"hidden_dim", c.bmc.hidden_dim},
          {"depth", c.bmc.depth},
          {"gru_hidden", c.gru_hidden},
          {"heads", c.heads},
          {"layers", c.layers},
          {"max_len", c.max_len},
          {"ffn_hidden", c.ffn_hidden},
          {"tasks", c.tasks},
          {"task_type",
           c.task_type == TaskType::classification ? "classification"
                                                   : "regression"},
          {"bias_enabled", c.bias_enabled}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.bmc.hidden_dim = j.at("hidden_dim").get<int>();
  c.bmc.depth = j.at("depth").get<int>();
  c.gru_hidden = j.at("gru_hidden").get<int>();
  c.heads = j.at("heads").get<int>();
  c.layers = j.at("layers").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.ffn_hidden = j.at("ffn_hidden").get<int>();
  c.tasks = j.at("tasks").get<int>();
  c.task_type = j.at("task_type").get<std::string>() == "classification"
                    ? TaskType::classification
                    : TaskType::regression;
  c.bias_enabled = j.at("bias_enabled").get<bool>();
  return c;
}

inline void save_checkpoint(MmsgModel& m, const std::string& path) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(m.config);
  j["dictionary"] = m.dict.tokens();
  nlohmann::json params = nlohmann::json::object();
  for (Parameter* p : m.store.all()) {
    nlohmann::json pj;
    pj["shape"] = {p->value.rows(), p->value.cols()};
    std::vector<double> vals(p->value.data(), p->value.data() + p->value.size());
    pj["values"] = vals;
    params[p->name] = pj;
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot open for write: " + path);
  out << j.dump();
}

inline std::unique_ptr<MmsgModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw CheckpointError("unsupported version");
  ModelConfig cfg = config_from_json(j.at("config"));
  chem::TokenDictionary dict;
  auto tokens = j.at("dictionary").get<std::vector<std::string>>();
  for (std::size_t i = 2; i < tokens.size(); ++i) dict.add(tokens[i]);
  auto model = std::make_unique<MmsgModel>(cfg, std::move(dict), 0);
  const auto& params = j.at("params");
  for (Parameter* p : model->store.all()) {
    if (!params.contains(p->name))
      throw CheckpointError("missing parameter " + p->name);
    const auto& pj = params.at(p->name);
    auto shape = pj.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() ||
        shape[1] != p->value.cols())
      throw CheckpointError("shape mismatch for " + p->name);
    auto vals = pj.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(vals.size()) != p->value.size())
      throw CheckpointError("value count mismatch for " + p->name);
    std::copy(vals.begin(), vals.end(), p->value.data());
  }
  return model;
}

}  // namespace mmsg::model
