//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: build-vocab | split | train | eval | predict |
// embed | gradcheck. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 check failure.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mmsg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

// ---------------------------------------------------------------------------
// RunConfig: flat JSON, unknown keys are errors
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string dataset;
  std::string dataset_name;  // defaults to the dataset file stem
  std::string task_type = "regression";
  std::string split = "random";
  std::string output_dir = ".";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  bool bias_enabled = true;
  int hidden_dim = 64;
  int depth = 2;
  int gru_hidden = 64;
  int heads = 4;
  int layers = 2;
  int max_len = 256;
  int ffn_hidden = 64;
  int batch_size = 50;
  int epochs = 30;
  int warmup_epochs = 5;
  double init_lr = 1e-4;
  double max_lr = 1e-3;
  double final_lr = 1e-4;
};

json run_config_to_json(const RunConfig& c) {
  return json{{"dataset", c.dataset},
              {"dataset_name", c.dataset_name},
              {"task_type", c.task_type},
              {"split", c.split},
              {"output_dir", c.output_dir},
              {"seeds", c.seeds},
              {"bias_enabled", c.bias_enabled},
              {"hidden_dim", c.hidden_dim},
              {"depth", c.depth},
              {"gru_hidden", c.gru_hidden},
              {"heads", c.heads},
              {"layers", c.layers},
              {"max_len", c.max_len},
              {"ffn_hidden", c.ffn_hidden},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"warmup_epochs", c.warmup_epochs},
              {"init_lr", c.init_lr},
              {"max_lr", c.max_lr},
              {"final_lr", c.final_lr}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  const json defaults = run_config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key))
      throw std::invalid_argument("unknown config key: " + key);
    (void)value;
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("dataset", c.dataset);
  get("dataset_name", c.dataset_name);
  get("task_type", c.task_type);
  get("split", c.split);
  get("output_dir", c.output_dir);
  get("seeds", c.seeds);
  get("bias_enabled", c.bias_enabled);
  get("hidden_dim", c.hidden_dim);
  get("depth", c.depth);
  get("gru_hidden", c.gru_hidden);
  get("heads", c.heads);
  get("layers", c.layers);
  get("max_len", c.max_len);
  get("ffn_hidden", c.ffn_hidden);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("warmup_epochs", c.warmup_epochs);
  get("init_lr", c.init_lr);
  get("max_lr", c.max_lr);
  get("final_lr", c.final_lr);
  if (c.dataset.empty())
    throw std::invalid_argument("config is missing required key: dataset");
  if (c.task_type != "regression" && c.task_type != "classification")
    throw std::invalid_argument("task_type must be regression|classification");
  if (c.split != "random" && c.split != "scaffold")
    throw std::invalid_argument("split must be random|scaffold");
  if (c.dataset_name.empty())
    c.dataset_name = fs::path(c.dataset).stem().string();
  return c;
}

// Out-of-range hyperparameters are accepted but flagged.
void warn_out_of_range(const RunConfig& c) {
  auto warn_if = [](bool bad, const std::string& what) {
    if (bad)
      std::cerr << "warning: " << what
                << " is outside the published tuning range\n";
  };
  auto not_in = [](auto v, std::initializer_list<decltype(v)> range) {
    for (auto x : range)
      if (x == v) return false;
    return true;
  };
  warn_if(not_in(c.batch_size, {50, 64, 128}), "batch_size");
  warn_if(not_in(c.warmup_epochs, {5, 10}), "warmup_epochs");
  warn_if(not_in(c.epochs, {50, 100}), "epochs");
  warn_if(not_in(c.depth, {2, 5}), "depth");
  warn_if(not_in(c.layers, {6, 12}), "layers");
  warn_if(not_in(c.heads, {16, 32}), "heads");
  warn_if(not_in(c.hidden_dim, {128, 256, 300}), "hidden_dim");
  warn_if(not_in(c.gru_hidden, {128, 256, 300}), "gru_hidden");
  warn_if(not_in(c.ffn_hidden, {128, 256, 300}), "ffn_hidden");
  warn_if(not_in(c.init_lr, {1e-3, 1e-4, 1e-5}), "init_lr");
  warn_if(not_in(c.max_lr, {2e-3, 2e-4, 2e-5}), "max_lr");
  warn_if(not_in(c.final_lr, {1e-3, 1e-4, 1e-5}), "final_lr");
}

mmsg::model::ModelConfig model_config(const RunConfig& c, int tasks) {
  mmsg::model::ModelConfig m;
  m.bmc.hidden_dim = c.hidden_dim;
  m.bmc.depth = c.depth;
  m.gru_hidden = c.gru_hidden;
  m.heads = c.heads;
  m.layers = c.layers;
  m.max_len = c.max_len;
  m.ffn_hidden = c.ffn_hidden;
  m.tasks = tasks;
  m.task_type = c.task_type == "classification"
                    ? mmsg::model::TaskType::classification
                    : mmsg::model::TaskType::regression;
  m.bias_enabled = c.bias_enabled;
  return m;
}

mmsg::train::TrainConfig train_config(const RunConfig& c) {
  mmsg::train::TrainConfig t;
  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.warmup_epochs = c.warmup_epochs;
  t.init_lr = c.init_lr;
  t.max_lr = c.max_lr;
  t.final_lr = c.final_lr;
  return t;
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

std::vector<std::string> read_smiles_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mmsg::data::IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw mmsg::data::IoError("file is empty: " + path);
  auto header = mmsg::data::detail::split_csv_record(line);
  int col = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (mmsg::data::detail::lower(header[i]) == "smiles") {
      col = static_cast<int>(i);
      break;
    }
  if (col < 0) throw mmsg::data::MissingSmilesColumn();
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    if (mmsg::data::detail::is_blank(line)) continue;
    auto fields = mmsg::data::detail::split_csv_record(line);
    if (static_cast<std::size_t>(col) < fields.size())
      out.push_back(fields[static_cast<std::size_t>(col)]);
  }
  return out;
}

// Plain SMILES list: one per line, or the smiles column of a CSV.
std::vector<std::string> read_smiles_input(const std::string& path) {
  std::istream* in = &std::cin;
  std::ifstream file;
  if (!path.empty() && path != "-") {
    file.open(path);
    if (!file) throw mmsg::data::IoError("cannot open: " + path);
    in = &file;
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(*in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (!lines.empty() &&
      mmsg::data::detail::lower(lines.front()).find("smiles") == 0)
    lines.erase(lines.begin());
  return lines;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<int> json_index_list(const json& j, const char* key) {
  return j.at(key).get<std::vector<int>>();
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_build_vocab(const std::string& data_path, const std::string& out_path) {
  auto smiles = read_smiles_column(data_path);
  auto dict = mmsg::chem::TokenDictionary::build(smiles);
  std::ofstream out(out_path);
  if (!out) throw mmsg::data::IoError("cannot write: " + out_path);
  for (const auto& tok : dict.tokens()) out << tok << "\n";
  std::cerr << "wrote " << dict.size() << " tokens to " << out_path << "\n";
  return kExitOk;
}

int cmd_split(const std::string& data_path, const std::string& kind,
              std::uint64_t seed, const std::string& out_path) {
  auto smiles = read_smiles_column(data_path);
  std::vector<std::string> usable;
  for (const auto& s : smiles) {
    try {
      (void)mmsg::chem::parse(s);
      usable.push_back(s);
    } catch (const std::exception&) {
    }
  }
  mmsg::train::SplitAssignment split =
      kind == "scaffold"
          ? mmsg::train::scaffold_split(usable, {}, seed)
          : mmsg::train::random_split(static_cast<int>(usable.size()), {},
                                      seed);
  json j{{"train", split.train}, {"val", split.val}, {"test", split.test}};
  std::ofstream out(out_path);
  if (!out) throw mmsg::data::IoError("cannot write: " + out_path);
  out << j.dump(2) << "\n";
  if (split.degenerate)
    std::cerr << "warning: degenerate split (empty val or test subset)\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw mmsg::data::IoError("cannot open config: " + config_path);
  json cfg_json;
  in >> cfg_json;
  RunConfig cfg = run_config_from_json(cfg_json);
  warn_out_of_range(cfg);

  auto task_type = cfg.task_type == "classification"
                       ? mmsg::model::TaskType::classification
                       : mmsg::model::TaskType::regression;
  auto table = mmsg::data::load_csv(cfg.dataset, task_type);
  std::cerr << "rows_in=" << table.rows_in
            << " rows_used=" << table.size()
            << " rows_dropped=" << table.rows_dropped << "\n";

  auto dict = mmsg::chem::TokenDictionary::build(table.smiles);
  std::vector<mmsg::model::MolInput> inputs;
  for (const auto& s : table.smiles)
    inputs.push_back(mmsg::model::MolInput::from_smiles(s, dict));

  auto mcfg = model_config(cfg, table.tasks());
  auto make_model = [&](std::uint64_t seed) {
    return std::make_unique<mmsg::model::MmsgModel>(mcfg, dict, seed);
  };
  auto kind = cfg.split == "scaffold" ? mmsg::train::SplitKind::scaffold
                                      : mmsg::train::SplitKind::random;
  std::vector<std::unique_ptr<mmsg::model::MmsgModel>> models;
  auto report = mmsg::train::run_experiment(table, inputs, kind,
                                            train_config(cfg), cfg.seeds,
                                            make_model, &models);

  fs::create_directories(cfg.output_dir);
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    std::string ckpt = cfg.output_dir + "/" + cfg.dataset_name + "-" +
                       cfg.split + "-" + std::to_string(cfg.seeds[i]) +
                       ".ckpt";
    mmsg::model::save_checkpoint(*models[i], ckpt);
    std::cerr << "wrote " << ckpt << "\n";
  }

  json rj{{"metric", report.metric},
          {"per_seed", report.per_seed},
          {"mean", report.mean},
          {"std", report.stddev},
          {"config", run_config_to_json(cfg)}};
  std::string report_path = cfg.output_dir + "/" + cfg.dataset_name + "-" +
                            cfg.split + "-report.json";
  std::ofstream out(report_path);
  if (!out) throw mmsg::data::IoError("cannot write: " + report_path);
  out << rj.dump(2) << "\n";
  std::cout << report_path << "\n";
  std::cerr << report.metric << " mean=" << report.mean
            << " std=" << report.stddev << " ("
            << report.wall_clock_seconds << "s)\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split_file, const std::string& subset) {
  auto m = mmsg::model::load_checkpoint(ckpt_path);
  auto table = mmsg::data::load_csv(data_path, m->config.task_type);
  std::vector<mmsg::model::MolInput> inputs;
  for (const auto& s : table.smiles)
    inputs.push_back(mmsg::model::MolInput::from_smiles(s, m->dict));
  std::vector<int> indices;
  if (split_file.empty()) {
    indices.resize(static_cast<std::size_t>(table.size()));
    std::iota(indices.begin(), indices.end(), 0);
  } else {
    std::ifstream in(split_file);
    if (!in) throw mmsg::data::IoError("cannot open split: " + split_file);
    json j;
    in >> j;
    indices = json_index_list(j, subset.c_str());
  }
  double metric = mmsg::train::evaluate(*m, table, inputs, indices);
  const char* name = m->config.task_type ==
                             mmsg::model::TaskType::classification
                         ? "roc-auc"
                         : "rmse";
  std::cout << name << " " << metric << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input_path,
                const std::string& out_path) {
  auto m = mmsg::model::load_checkpoint(ckpt_path);
  auto smiles = read_smiles_input(input_path);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw mmsg::data::IoError("cannot write: " + out_path);
    out = &file;
  }
  *out << "smiles";
  for (int t = 0; t < m->config.tasks; ++t) *out << ",task" << t;
  *out << "\n";
  const bool cls =
      m->config.task_type == mmsg::model::TaskType::classification;
  out->precision(17);
  for (const auto& s : smiles) {
    auto p = mmsg::model::predict(*m, s);
    *out << s;
    for (double v : p) *out << "," << (cls ? sigmoid(v) : v);
    *out << "\n";
  }
  return kExitOk;
}

int cmd_embed(const std::string& ckpt_path, const std::string& input_path,
              const std::string& out_path) {
  auto m = mmsg::model::load_checkpoint(ckpt_path);
  auto smiles = read_smiles_input(input_path);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw mmsg::data::IoError("cannot write: " + out_path);
    out = &file;
  }
  *out << "smiles";
  for (int j = 0; j < m->config.bmc.hidden_dim; ++j) *out << ",e" << j;
  *out << "\n";
  out->precision(17);
  for (const auto& s : smiles) {
    auto e = mmsg::model::export_embedding(*m, s);
    *out << s;
    for (double v : e) *out << "," << v;
    *out << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  mmsg::model::ModelConfig cfg;
  cfg.bmc.hidden_dim = 8;
  cfg.bmc.depth = 2;
  cfg.gru_hidden = 8;
  cfg.heads = 1;
  cfg.layers = 1;
  cfg.max_len = 32;
  cfg.ffn_hidden = 8;
  cfg.tasks = 1;
  cfg.task_type = mmsg::model::TaskType::regression;
  auto dict = mmsg::chem::TokenDictionary::build({"CCO"});
  mmsg::model::MmsgModel m(cfg, dict, seed);
  auto in = mmsg::model::MolInput::from_smiles("CCO", m.dict);
  mmsg::diff::Mat target(1, 1);
  target << 0.5;
  auto loss_fn = [&](bool with_grad) {
    mmsg::diff::Tape t;
    auto out = mmsg::model::forward(t, m, in);
    auto loss = t.mse(out.prediction, target);
    if (with_grad) {
      m.store.zero_grads();
      t.backward(loss);
    }
    return t.val(loss)(0, 0);
  };
  mmsg::diff::GradCheckOptions opt;
  opt.step = 1e-5;
  opt.max_coords_per_param = 4;
  opt.seed = seed;
  double rel = mmsg::diff::grad_check(loss_fn, m.store.all(), opt);
  std::cout << "max relative error: " << rel << "\n";
  return rel < 1e-4 ? kExitOk : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MMSG molecular representation toolkit"};
  app.require_subcommand(1);

  std::string data_path, out_path, kind = "random", config_path;
  std::string ckpt_path, input_path, split_file, subset = "test";
  std::uint64_t seed = 0;

  auto* vocab = app.add_subcommand("build-vocab", "write a token dictionary");
  vocab->add_option("--data", data_path, "input CSV")->required();
  vocab->add_option("--out", out_path, "output token list")->required();

  auto* split = app.add_subcommand("split", "write split index lists");
  split->add_option("--data", data_path, "input CSV")->required();
  split->add_option("--kind", kind, "random|scaffold")
      ->check(CLI::IsMember({"random", "scaffold"}));
  split->add_option("--seed", seed, "rng seed");
  split->add_option("--out", out_path, "output JSON")->required();

  auto* train = app.add_subcommand("train", "train per the run config");
  train->add_option("--config", config_path, "run config JSON")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_path, "dataset CSV")->required();
  eval->add_option("--split-file", split_file, "split JSON (optional)");
  eval->add_option("--subset", subset, "train|val|test");

  auto* predict = app.add_subcommand("predict", "per-task predictions CSV");
  predict->add_option("--checkpoint", ckpt_path, "checkpoint file")
      ->required();
  predict->add_option("--input", input_path, "SMILES file or - for stdin");
  predict->add_option("--out", out_path, "output CSV or - for stdout");

  auto* embed = app.add_subcommand("embed", "fused embedding vectors CSV");
  embed->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  embed->add_option("--input", input_path, "SMILES file or - for stdin");
  embed->add_option("--out", out_path, "output CSV or - for stdout");

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--seed", seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (vocab->parsed()) return cmd_build_vocab(data_path, out_path);
    if (split->parsed()) return cmd_split(data_path, kind, seed, out_path);
    if (train->parsed()) return cmd_train(config_path);
    if (eval->parsed())
      return cmd_eval(ckpt_path, data_path, split_file, subset);
    if (predict->parsed()) return cmd_predict(ckpt_path, input_path, out_path);
    if (embed->parsed()) return cmd_embed(ckpt_path, input_path, out_path);
    if (gradcheck->parsed()) return cmd_gradcheck(seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
