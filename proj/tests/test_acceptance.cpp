//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion.
//
#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "mmsg/train.hpp"

using namespace mmsg;
using diff::Mat;

namespace {

void report_line(int criterion, bool pass, const std::string& what) {
  std::cout << "[criterion " << criterion << "] " << (pass ? "PASS" : "FAIL")
            << " - " << what << std::endl;
}

std::string data_file(const char* name) {
  return std::string(MMSG_DATA_DIR) + "/" + name;
}

// ---------------------------------------------------------------------------
// independent straight-line transcription of the message passing updates
// (shared by criteria 2 and 3)
// ---------------------------------------------------------------------------

Mat ref_gru_step(const Mat& x, const Mat& h, const diff::GruParams& p) {
  auto sig = [](const Mat& m) {
    return (1.0 / (1.0 + (-m.array()).exp())).matrix();
  };
  Mat z = sig(x * p.Wz->value.transpose() + h * p.Uz->value.transpose() +
              p.bz->value);
  Mat r = sig(x * p.Wr->value.transpose() + h * p.Ur->value.transpose() +
              p.br->value);
  Mat hc = (x * p.Wh->value.transpose() +
            r.cwiseProduct(h) * p.Uh->value.transpose() + p.bh->value)
               .array()
               .tanh()
               .matrix();
  return h + z.cwiseProduct(hc - h);
}

Mat ref_agg_edges(const Mat& h_e, const std::vector<int>& target, int n) {
  Mat out = Mat::Zero(n, h_e.cols());
  for (int v = 0; v < n; ++v) {
    bool any = false;
    Eigen::RowVectorXd mx = Eigen::RowVectorXd::Zero(h_e.cols());
    Eigen::RowVectorXd sm = Eigen::RowVectorXd::Zero(h_e.cols());
    for (std::size_t e = 0; e < target.size(); ++e) {
      if (target[e] != v) continue;
      Eigen::RowVectorXd row = h_e.row(static_cast<Eigen::Index>(e));
      if (!any)
        mx = row;
      else
        mx = mx.cwiseMax(row);
      sm += row;
      any = true;
    }
    if (any) out.row(v) = mx.cwiseProduct(sm);
  }
  return out;
}

Mat ref_agg_nodes(const Mat& h_v, const std::vector<int>& src,
                  const std::vector<int>& tgt) {
  Mat out(static_cast<Eigen::Index>(src.size()), h_v.cols());
  for (std::size_t e = 0; e < src.size(); ++e)
    out.row(static_cast<Eigen::Index>(e)) =
        0.5 * (h_v.row(src[e]) + h_v.row(tgt[e]));
  return out;
}

struct RefHiddens {
  Mat node, edge;
};

RefHiddens ref_bmc_hiddens(const bmc::FeaturizedGraph& g,
                           const bmc::BmcConfig& cfg,
                           const bmc::BmcParams& p) {
  Mat proj_v = g.x_v * p.W_in_v->value.transpose();
  Mat proj_e = g.x_e * p.W_in_e->value.transpose();
  Mat h_v = proj_v, h_e = proj_e;
  for (int step = 0; step < cfg.depth - 1; ++step) {
    Mat m_v = ref_agg_edges(h_e, g.target, g.atom_count);
    Mat p_v = m_v + h_v;
    Mat m_e = ref_agg_nodes(h_v, g.source, g.target);
    Mat p_e = m_e + h_e;
    Mat p_sub(g.edge_count, h_e.cols());
    for (int e = 0; e < g.edge_count; ++e)
      p_sub.row(e) = p_v.row(g.source[static_cast<std::size_t>(e)]) -
                     p_e.row(g.rev[static_cast<std::size_t>(e)]);
    h_e = (proj_e + p_sub * p.W_e->value.transpose()).cwiseMax(0.0);
    h_v = (proj_v + p_v * p.W_v->value.transpose()).cwiseMax(0.0);
  }
  RefHiddens out;
  out.node = ref_agg_edges(h_e, g.target, g.atom_count) + h_v + proj_v;
  out.edge = ref_agg_nodes(h_v, g.source, g.target) + h_e + proj_e;
  return out;
}

bmc::FeaturizedGraph permute_atoms(const bmc::FeaturizedGraph& g,
                                   const std::vector<int>& perm) {
  bmc::FeaturizedGraph out = g;
  for (int v = 0; v < g.atom_count; ++v)
    out.x_v.row(perm[static_cast<std::size_t>(v)]) = g.x_v.row(v);
  for (int e = 0; e < g.edge_count; ++e) {
    out.source[static_cast<std::size_t>(e)] =
        perm[static_cast<std::size_t>(g.source[static_cast<std::size_t>(e)])];
    out.target[static_cast<std::size_t>(e)] =
        perm[static_cast<std::size_t>(g.target[static_cast<std::size_t>(e)])];
  }
  return out;
}

model::ModelConfig standard_config(model::TaskType type) {
  model::ModelConfig cfg;
  cfg.bmc.hidden_dim = 64;
  cfg.bmc.depth = 2;
  cfg.gru_hidden = 64;
  cfg.heads = 4;
  cfg.layers = 2;
  cfg.max_len = 256;
  cfg.ffn_hidden = 64;
  cfg.tasks = 1;
  cfg.task_type = type;
  return cfg;
}

std::vector<model::MolInput> featurize_all(const data::DatasetTable& t,
                                           const chem::TokenDictionary& dict) {
  std::vector<model::MolInput> out;
  for (const auto& s : t.smiles)
    out.push_back(model::MolInput::from_smiles(s, dict));
  return out;
}

double roc_auc_pairwise(const std::vector<double>& scores,
                        const std::vector<int>& labels) {
  long long concordant2 = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        concordant2 += 2;
      else if (scores[i] == scores[j])
        concordant2 += 1;
    }
  }
  return static_cast<double>(concordant2) / (2.0 * static_cast<double>(pairs));
}

}  // namespace

// ---------------------------------------------------------------------------
// 1. gradient fidelity
// ---------------------------------------------------------------------------

TEST(Acceptance, C01GradientFidelity) {
  auto start = std::chrono::steady_clock::now();
  model::ModelConfig cfg;
  cfg.bmc.hidden_dim = 8;
  cfg.bmc.depth = 2;
  cfg.gru_hidden = 8;
  cfg.heads = 1;
  cfg.layers = 1;
  cfg.max_len = 32;
  cfg.ffn_hidden = 8;
  cfg.tasks = 1;
  cfg.task_type = model::TaskType::regression;
  auto dict = chem::TokenDictionary::build({"CCO"});
  model::MmsgModel m(cfg, dict, 20260824);
  auto in = model::MolInput::from_smiles("CCO", m.dict);  // 3 heavy atoms
  Mat target(1, 1);
  target << 0.5;
  auto loss_fn = [&](bool with_grad) {
    diff::Tape t;
    auto out = model::forward(t, m, in);
    auto loss = t.mse(out.prediction, target);
    if (with_grad) {
      m.store.zero_grads();
      t.backward(loss);
    }
    return t.val(loss)(0, 0);
  };
  double rel = diff::grad_check(loss_fn, m.store.all(), {1e-5, 4, 0});
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  bool pass = rel < 1e-4 && secs < 60.0;
  report_line(1, pass,
              "end-to-end gradient check, max rel err " + std::to_string(rel) +
                  " in " + std::to_string(secs) + "s");
  EXPECT_LT(rel, 1e-4);
  EXPECT_LT(secs, 60.0);
}

// ---------------------------------------------------------------------------
// 2. message passing oracle equivalence
// ---------------------------------------------------------------------------

TEST(Acceptance, C02GraphEncoderOracle) {
  double worst = 0.0;
  for (const char* smiles : {"CC", "CCCO"}) {
    for (int depth : {1, 2}) {
      bmc::BmcConfig cfg{8, depth};
      std::mt19937_64 rng(7);
      diff::ParamStore store;
      auto params = bmc::BmcParams::create(store, cfg, rng);
      auto g = bmc::featurize_graph(chem::parse(smiles));
      diff::Tape t;
      auto out = bmc::bmc_forward(t, g, cfg, params);
      auto ref = ref_bmc_hiddens(g, cfg, params);
      worst = std::max(
          worst, (t.val(out.node_hidden) - ref.node).cwiseAbs().maxCoeff());
      worst = std::max(
          worst, (t.val(out.edge_hidden) - ref.edge).cwiseAbs().maxCoeff());
    }
  }
  bool pass = worst < 1e-12;
  report_line(2, pass,
              "graph encoder matches straight-line transcription, max abs diff " +
                  std::to_string(worst));
  EXPECT_LT(worst, 1e-12);
}

// ---------------------------------------------------------------------------
// 3. equivariance under atom permutation
// ---------------------------------------------------------------------------

TEST(Acceptance, C03Equivariance) {
  auto table = data::load_csv(data_file("esol.csv"),
                              model::TaskType::regression);
  bmc::BmcConfig cfg{16, 3};
  std::mt19937_64 rng(13);
  diff::ParamStore store;
  auto params = bmc::BmcParams::create(store, cfg, rng);

  std::mt19937_64 pick(99);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto& smiles =
        table.smiles[pick() % static_cast<std::uint64_t>(table.size())];
    auto g = bmc::featurize_graph(chem::parse(smiles));
    std::vector<int> perm(static_cast<std::size_t>(g.atom_count));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = g.atom_count - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[pick() % static_cast<std::uint64_t>(i + 1)]);
    auto gp = permute_atoms(g, perm);

    diff::Tape t1, t2;
    auto o1 = bmc::bmc_forward(t1, g, cfg, params);
    auto o2 = bmc::bmc_forward(t2, gp, cfg, params);
    for (int v = 0; v < g.atom_count; ++v)
      worst = std::max(worst,
                       (t1.val(o1.node_hidden).row(v) -
                        t2.val(o2.node_hidden).row(perm[static_cast<std::size_t>(v)]))
                           .cwiseAbs()
                           .maxCoeff());
    worst = std::max(worst, (t1.val(o1.edge_hidden) - t2.val(o2.edge_hidden))
                                .cwiseAbs()
                                .maxCoeff());
  }
  bool pass = worst < 1e-9;
  report_line(3, pass,
              "pre-readout hiddens equivariant over 50 molecules, max abs diff " +
                  std::to_string(worst));
  EXPECT_LT(worst, 1e-9);
}

// ---------------------------------------------------------------------------
// 4. zero-bias identity + softmax normalization
// ---------------------------------------------------------------------------

TEST(Acceptance, C04ZeroBiasIdentity) {
  seq::SeqConfig cfg;
  cfg.vocab_size = 12;
  cfg.gru_hidden = 8;
  cfg.model_dim = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.max_len = 32;
  cfg.ffn_dim = 8;
  std::mt19937_64 rng(31);
  diff::ParamStore store;
  auto p = seq::SeqParams::create(store, cfg, 8, rng);
  Mat saved_w = p.W_bias->value;
  Mat saved_b = p.b_bias->value;

  std::mt19937_64 gen(41);
  bool bitwise_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(gen() % 20);
    std::vector<int> ids;
    for (int i = 0; i < n; ++i)
      ids.push_back(static_cast<int>(gen() % cfg.vocab_size));

    p.W_bias->value.setZero();
    p.b_bias->value.setZero();
    diff::Tape t1;
    seq::AttentionBias zeroed = seq::bias_from_bonds(
        t1, t1.input(Mat::Random(1, 8)), cfg, p, n);
    diff::Var h1 = seq::encode_sequence(t1, ids, zeroed, cfg, p);

    diff::Tape t2;
    seq::AttentionBias off;
    diff::Var h2 = seq::encode_sequence(t2, ids, off, cfg, p);

    if ((t1.val(h1) - t2.val(h2)).cwiseAbs().maxCoeff() != 0.0)
      bitwise_ok = false;
    p.W_bias->value = saved_w;
    p.b_bias->value = saved_b;
  }

  // softmax rows sum to 1 under random finite biases
  double worst_sum = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(gen() % 20);
    diff::Tape t;
    Mat logits = Mat::Random(n, n) * 5.0;
    Mat bias = Mat::Random(1, n) * 5.0;
    diff::Var s = t.softmax_rows(t.add_rowvec(t.input(logits), t.input(bias)));
    for (int i = 0; i < n; ++i)
      worst_sum = std::max(worst_sum, std::abs(t.val(s).row(i).sum() - 1.0));
  }
  bool pass = bitwise_ok && worst_sum < 1e-12;
  report_line(4, pass,
              std::string("zero-bias bitwise identity ") +
                  (bitwise_ok ? "holds" : "fails") +
                  ", softmax row-sum max error " + std::to_string(worst_sum));
  EXPECT_TRUE(bitwise_ok);
  EXPECT_LT(worst_sum, 1e-12);
}

// ---------------------------------------------------------------------------
// 5. featurization shape and content
// ---------------------------------------------------------------------------

TEST(Acceptance, C05Featurization) {
  bool shapes_ok = true;
  long atoms = 0, bonds = 0;
  for (const char* file : {"esol.csv", "bbbp.csv"}) {
    auto table = data::load_csv(
        data_file(file), std::string(file) == "bbbp.csv"
                             ? model::TaskType::classification
                             : model::TaskType::regression);
    for (const auto& s : table.smiles) {
      auto g = chem::parse(s);
      for (int v = 0; v < g.atom_count(); ++v) {
        if (featurize::atom_features(g, v).size() != 127) shapes_ok = false;
        ++atoms;
      }
      for (const auto& e : g.directed_edges) {
        if (featurize::bond_features(e.bond).size() != 12) shapes_ok = false;
        ++bonds;
      }
    }
  }
  auto benzene = chem::parse("c1ccccc1");
  bool benzene_ok = true;
  for (const auto& e : benzene.directed_edges) {
    if (e.bond.order != chem::BondOrder::aromatic || !e.bond.in_ring ||
        !e.bond.conjugated)
      benzene_ok = false;
  }
  bool pass = shapes_ok && benzene_ok;
  report_line(5, pass,
              "127/12 feature vectors over " + std::to_string(atoms) +
                  " atoms, " + std::to_string(bonds) +
                  " directed bonds; benzene bonds aromatic/in-ring/conjugated");
  EXPECT_TRUE(shapes_ok);
  EXPECT_TRUE(benzene_ok);
}

// ---------------------------------------------------------------------------
// 6. metric oracle
// ---------------------------------------------------------------------------

TEST(Acceptance, C06MetricOracle) {
  double hand = train::roc_auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0});
  bool hand_ok = hand == 0.75;

  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  int exact = 0, total = 0;
  while (total < 1000) {
    int n = 2 + static_cast<int>(rng() % 199);
    std::vector<double> scores;
    std::vector<int> labels;
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      // quantize half the time so ties occur
      double s = score(rng);
      if (rng() % 2) s = std::floor(s * 10.0) / 10.0;
      scores.push_back(s);
      int l = static_cast<int>(rng() % 2);
      labels.push_back(l);
      pos = pos || l;
      neg = neg || !l;
    }
    if (!pos || !neg) continue;
    ++total;
    if (train::roc_auc(scores, labels) == roc_auc_pairwise(scores, labels))
      ++exact;
  }
  bool pass = hand_ok && exact == total;
  report_line(6, pass,
              "roc-auc equals pairwise enumeration on " +
                  std::to_string(exact) + "/" + std::to_string(total) +
                  " instances; hand case = " + std::to_string(hand));
  EXPECT_TRUE(hand_ok);
  EXPECT_EQ(exact, total);
}

// ---------------------------------------------------------------------------
// 7. split protocol
// ---------------------------------------------------------------------------

TEST(Acceptance, C07SplitProtocol) {
  auto table = data::load_csv(data_file("esol.csv"),
                              model::TaskType::regression);
  const int n = table.size();

  auto rs = train::random_split(n, {}, 0);
  std::set<int> all;
  for (const auto* part : {&rs.train, &rs.val, &rs.test})
    for (int i : *part) all.insert(i);
  bool random_ok = static_cast<int>(all.size()) == n &&
                   static_cast<int>(rs.val.size()) == n / 10 &&
                   static_cast<int>(rs.test.size()) == n / 10;

  auto ss = train::scaffold_split(table.smiles, {}, 0);
  std::set<int> all2;
  for (const auto* part : {&ss.train, &ss.val, &ss.test})
    for (int i : *part) all2.insert(i);
  bool scaffold_cover = static_cast<int>(all2.size()) == n;

  // co-location: molecules sharing a scaffold key never straddle subsets
  std::vector<int> where(static_cast<std::size_t>(n), -1);
  for (int i : ss.train) where[static_cast<std::size_t>(i)] = 0;
  for (int i : ss.val) where[static_cast<std::size_t>(i)] = 1;
  for (int i : ss.test) where[static_cast<std::size_t>(i)] = 2;
  std::map<std::string, std::set<int>> by_key;
  for (int i = 0; i < n; ++i)
    by_key[chem::murcko_scaffold(
               chem::parse(table.smiles[static_cast<std::size_t>(i)]))]
        .insert(where[static_cast<std::size_t>(i)]);
  bool coloc = true;
  for (const auto& [key, subsets] : by_key)
    if (subsets.size() != 1) coloc = false;

  // group-size granularity: each subset within the largest group of target
  double largest_group = 0;
  for (const auto& [key, subsets] : by_key) (void)subsets;
  std::map<std::string, int> sizes;
  for (int i = 0; i < n; ++i)
    ++sizes[chem::murcko_scaffold(
        chem::parse(table.smiles[static_cast<std::size_t>(i)]))];
  for (const auto& [k, c] : sizes)
    largest_group = std::max(largest_group, static_cast<double>(c));
  bool ratios_ok =
      std::abs(static_cast<double>(ss.val.size()) - 0.1 * n) <=
          largest_group &&
      std::abs(static_cast<double>(ss.test.size()) - 0.1 * n) <= largest_group;

  bool pass = random_ok && scaffold_cover && coloc && ratios_ok;
  report_line(7, pass,
              "splits partition at 0.8/0.1/0.1 (random " +
                  std::to_string(rs.train.size()) + "/" +
                  std::to_string(rs.val.size()) + "/" +
                  std::to_string(rs.test.size()) +
                  "); scaffold co-location holds");
  EXPECT_TRUE(random_ok);
  EXPECT_TRUE(scaffold_cover);
  EXPECT_TRUE(coloc);
  EXPECT_TRUE(ratios_ok);
}

// ---------------------------------------------------------------------------
// 8. capacity check
// ---------------------------------------------------------------------------

TEST(Acceptance, C08Capacity) {
  auto start = std::chrono::steady_clock::now();

  // 50 ESOL molecules, 300 optimization steps (batch = all 50)
  auto esol = data::load_csv(data_file("esol.csv"),
                             model::TaskType::regression);
  data::DatasetTable sub;
  sub.task_type = esol.task_type;
  sub.task_names = esol.task_names;
  sub.smiles.assign(esol.smiles.begin(), esol.smiles.begin() + 50);
  sub.labels = esol.labels.topRows(50);
  sub.mask = esol.mask.topRows(50);
  auto dict = chem::TokenDictionary::build(sub.smiles);
  auto inputs = featurize_all(sub, dict);
  std::vector<int> idx(50);
  std::iota(idx.begin(), idx.end(), 0);

  model::MmsgModel reg(standard_config(model::TaskType::regression), dict, 0);
  train::TrainConfig tc;
  tc.batch_size = 50;   // one step per epoch
  tc.epochs = 300;      // = 300 steps
  tc.warmup_epochs = 30;
  tc.init_lr = 1e-4;
  tc.max_lr = 2e-3;
  tc.final_lr = 1e-4;
  tc.seed = 0;
  train::train_model(reg, sub, inputs, idx, idx, tc);
  double train_rmse = train::evaluate(reg, sub, inputs, idx);

  // classification analog on 50 BBBP molecules
  auto bbbp = data::load_csv(data_file("bbbp.csv"),
                             model::TaskType::classification);
  data::DatasetTable csub;
  csub.task_type = bbbp.task_type;
  csub.task_names = bbbp.task_names;
  csub.smiles.assign(bbbp.smiles.begin(), bbbp.smiles.begin() + 50);
  csub.labels = bbbp.labels.topRows(50);
  csub.mask = bbbp.mask.topRows(50);
  auto cdict = chem::TokenDictionary::build(csub.smiles);
  auto cinputs = featurize_all(csub, cdict);

  model::MmsgModel cls(standard_config(model::TaskType::classification),
                       cdict, 0);
  train::train_model(cls, csub, cinputs, idx, {}, tc);
  Mat logits(50, 1);
  for (int i = 0; i < 50; ++i)
    logits(i, 0) = model::predict(cls, cinputs[static_cast<std::size_t>(i)])[0];
  double bce = model::masked_bce_loss(logits, csub.labels, csub.mask);

  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  bool pass = train_rmse < 0.15 && bce < 0.05 && secs < 300.0;
  report_line(8, pass,
              "capacity: train RMSE " + std::to_string(train_rmse) +
                  " (<0.15), BCE " + std::to_string(bce) + " (<0.05), " +
                  std::to_string(secs) + "s (<300)");
  EXPECT_LT(train_rmse, 0.15);
  EXPECT_LT(bce, 0.05);
  EXPECT_LT(secs, 300.0);
}

// ---------------------------------------------------------------------------
// 9. desk-scale generalization
// ---------------------------------------------------------------------------

TEST(Acceptance, C09Generalization) {
  auto start = std::chrono::steady_clock::now();
  auto table = data::load_csv(data_file("esol.csv"),
                              model::TaskType::regression);
  auto dict = chem::TokenDictionary::build(table.smiles);
  auto inputs = featurize_all(table, dict);

  auto cfg = standard_config(model::TaskType::regression);
  train::TrainConfig tc;
  tc.batch_size = 50;
  tc.epochs = 30;
  tc.warmup_epochs = 5;
  tc.init_lr = 1e-4;
  tc.max_lr = 1e-3;
  tc.final_lr = 1e-4;

  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  auto make_model = [&](std::uint64_t seed) {
    return std::make_unique<model::MmsgModel>(cfg, dict, seed);
  };
  auto report = train::run_experiment(table, inputs, train::SplitKind::random,
                                      tc, seeds, make_model);

  // worst-case train-label std across the five seeds' splits
  double limit = 1e18;
  for (auto seed : seeds) {
    auto split = train::random_split(table.size(), {}, seed);
    double sum = 0.0;
    for (int i : split.train) sum += table.labels(i, 0);
    double mean = sum / static_cast<double>(split.train.size());
    double var = 0.0;
    for (int i : split.train) {
      double d = table.labels(i, 0) - mean;
      var += d * d;
    }
    limit = std::min(limit, 0.75 * std::sqrt(var / static_cast<double>(
                                                       split.train.size())));
  }

  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  std::ostringstream per_seed;
  for (double v : report.per_seed) per_seed << " " << v;
  bool pass = report.mean < limit && secs < 1800.0;
  report_line(9, pass,
              "five-seed test RMSE mean " + std::to_string(report.mean) +
                  " +/- " + std::to_string(report.stddev) + " (limit " +
                  std::to_string(limit) + "), per-seed" + per_seed.str() +
                  ", " + std::to_string(secs) + "s (<1800)");
  EXPECT_LT(report.mean, limit);
  EXPECT_EQ(report.per_seed.size(), 5u);
  EXPECT_LT(secs, 1800.0);
}

// ---------------------------------------------------------------------------
// 10. ablation wiring
// ---------------------------------------------------------------------------

TEST(Acceptance, C10AblationWiring) {
  auto dict = chem::TokenDictionary::build(
      {"CCO", "c1ccccc1", "CC(=O)OC", "N#CCCl"});
  auto cfg_off = standard_config(model::TaskType::regression);
  cfg_off.bmc.hidden_dim = 16;
  cfg_off.gru_hidden = 16;
  cfg_off.ffn_hidden = 16;
  cfg_off.heads = 2;
  cfg_off.bias_enabled = false;
  auto cfg_zero = cfg_off;
  cfg_zero.bias_enabled = true;

  model::MmsgModel off(cfg_off, dict, 3);
  model::MmsgModel zeroed(cfg_zero, dict, 3);
  zeroed.seq_params.W_bias->value.setZero();
  zeroed.seq_params.b_bias->value.setZero();

  bool pass = true;
  for (const char* s : {"CCO", "c1ccccc1", "CC(=O)OC"}) {
    auto a = model::predict(off, s);
    auto b = model::predict(zeroed, s);
    if (a != b) pass = false;
  }
  report_line(10, pass,
              "bias_enabled=false bitwise equals zeroed bias projection");
  EXPECT_TRUE(pass);
}

// ---------------------------------------------------------------------------
// 11. determinism of report files
// ---------------------------------------------------------------------------

TEST(Acceptance, C11Determinism) {
  auto esol = data::load_csv(data_file("esol.csv"),
                             model::TaskType::regression);
  data::DatasetTable sub;
  sub.task_type = esol.task_type;
  sub.task_names = esol.task_names;
  sub.smiles.assign(esol.smiles.begin(), esol.smiles.begin() + 60);
  sub.labels = esol.labels.topRows(60);
  sub.mask = esol.mask.topRows(60);
  auto dict = chem::TokenDictionary::build(sub.smiles);
  auto inputs = featurize_all(sub, dict);

  auto cfg = standard_config(model::TaskType::regression);
  cfg.bmc.hidden_dim = 16;
  cfg.gru_hidden = 16;
  cfg.ffn_hidden = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  train::TrainConfig tc;
  tc.batch_size = 20;
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  std::vector<std::uint64_t> seeds = {0, 1};
  auto make_model = [&](std::uint64_t seed) {
    return std::make_unique<model::MmsgModel>(cfg, dict, seed);
  };

  std::vector<std::string> files;
  for (int run = 0; run < 2; ++run) {
    auto report = train::run_experiment(sub, inputs,
                                        train::SplitKind::random, tc, seeds,
                                        make_model);
    nlohmann::json j{{"metric", report.metric},
                     {"per_seed", report.per_seed},
                     {"mean", report.mean},
                     {"std", report.stddev}};
    auto path = (std::filesystem::temp_directory_path() /
                 ("mmsg_accept_report_" + std::to_string(run) + ".json"))
                    .string();
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    files.push_back(path);
  }
  std::ifstream a(files[0]), b(files[1]);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  bool pass = !sa.str().empty() && sa.str() == sb.str();
  for (const auto& f : files) std::remove(f.c_str());
  report_line(11, pass, "repeated runs emit bitwise-identical report files");
  EXPECT_TRUE(pass);
}
