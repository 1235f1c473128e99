//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Optimization loop (Adam + Noam warmup/decay schedule), rank-based ROC-AUC
// and RMSE metrics, random and scaffold dataset splits, and the five-seed
// experiment protocol.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <future>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mmsg/data.hpp"
#include "mmsg/model.hpp"

namespace mmsg::train {

using diff::Mat;
using diff::Parameter;

struct InvalidSchedule : std::runtime_error {
  explicit InvalidSchedule(const std::string& what)
      : std::runtime_error("invalid schedule: " + what) {}
};

struct SingleClass : std::runtime_error {
  SingleClass()
      : std::runtime_error("ROC-AUC needs at least one positive and one "
                           "negative label") {}
};

struct DatasetTooSmall : std::runtime_error {
  explicit DatasetTooSmall(int n)
      : std::runtime_error("dataset too small to split: n = " +
                           std::to_string(n)) {}
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct TrainConfig {
  int batch_size = 50;
  int epochs = 30;
  int warmup_epochs = 5;
  double init_lr = 1e-4;
  double max_lr = 1e-3;
  double final_lr = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(init_lr > 0.0) || init_lr > max_lr)
      throw InvalidSchedule("need 0 < init_lr <= max_lr");
    if (final_lr > max_lr) throw InvalidSchedule("need final_lr <= max_lr");
    if (warmup_epochs >= epochs)
      throw InvalidSchedule("need warmup_epochs < epochs");
    if (batch_size < 1) throw InvalidSchedule("batch_size must be >= 1");
  }
};

/// Linear ramp init->max over the warmup steps, then exponential decay that
/// hits final_lr exactly at total_steps.
inline double noam_lr(long step, const TrainConfig& cfg, long steps_per_epoch,
                      long total_steps) {
  cfg.validate();
  if (step < 0) throw InvalidSchedule("negative step");
  long warmup_steps = static_cast<long>(cfg.warmup_epochs) * steps_per_epoch;
  if (warmup_steps >= total_steps)
    throw InvalidSchedule("warmup covers the whole run");
  if (step <= warmup_steps) {
    if (warmup_steps == 0) return cfg.max_lr;
    return cfg.init_lr + (cfg.max_lr - cfg.init_lr) *
                             static_cast<double>(step) /
                             static_cast<double>(warmup_steps);
  }
  double gamma = std::pow(cfg.final_lr / cfg.max_lr,
                          1.0 / static_cast<double>(total_steps - warmup_steps));
  return cfg.max_lr * std::pow(gamma, static_cast<double>(step - warmup_steps));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(const std::vector<Parameter*>& params) {
    for (auto* p : params) {
      m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
};

inline void adam_step(const std::vector<Parameter*>& params, AdamState& state,
                      double lr) {
  if (params.size() != state.m.size())
    throw diff::ShapeMismatch("adam state size");
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter* p = params[i];
    if (p->grad.rows() != state.m[i].rows() ||
        p->grad.cols() != state.m[i].cols())
      throw diff::ShapeMismatch("adam grad shape for " + p->name);
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * p->grad;
    state.v[i] = state.beta2 * state.v[i] +
                 (1.0 - state.beta2) * p->grad.cwiseProduct(p->grad);
    Mat mhat = state.m[i] / bc1;
    Mat vhat = state.v[i] / bc2;
    p->value.array() -=
        lr * mhat.array() / (vhat.array().sqrt() + state.eps);
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Rank-statistic ROC-AUC: P(score_pos > score_neg) + 0.5 P(tie).
/// Computed as an exact ratio of integers so it matches pairwise
/// enumeration bit for bit.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw diff::ShapeMismatch("roc_auc lengths");
  const std::size_t n = scores.size();
  long pos = 0, neg = 0;
  for (int l : labels) (l != 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw SingleClass();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // twice the sum of average ranks of positives, as an integer
  long long twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    long long lo = static_cast<long long>(i) + 1;
    long long hi = static_cast<long long>(j) + 1;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) twice_rank_sum += lo + hi;
    i = j + 1;
  }
  long long numer = twice_rank_sum - static_cast<long long>(pos) * (pos + 1);
  return static_cast<double>(numer) /
         (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

enum class SplitKind { random, scaffold };

struct SplitAssignment {
  std::vector<int> train, val, test;
  SplitKind kind = SplitKind::random;
  std::uint64_t seed = 0;
  bool degenerate = false;  // val or test ended up empty
};

struct Ratios {
  double train = 0.8, val = 0.1, test = 0.1;
};

inline SplitAssignment random_split(int n, const Ratios& r,
                                    std::uint64_t seed) {
  if (n < 10) throw DatasetTooSmall(n);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
  int n_val = static_cast<int>(std::floor(r.val * n));
  int n_test = static_cast<int>(std::floor(r.test * n));
  int n_train = n - n_val - n_test;
  SplitAssignment s;
  s.kind = SplitKind::random;
  s.seed = seed;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

/// Largest-first greedy: groups sorted by size descending (key ties), each
/// assigned to the subset furthest below its target count. Molecules with
/// equal scaffold keys never straddle subsets.
inline SplitAssignment scaffold_split(const std::vector<std::string>& smiles,
                                      const Ratios& r, std::uint64_t seed) {
  const int n = static_cast<int>(smiles.size());
  if (n < 10) throw DatasetTooSmall(n);
  std::map<std::string, std::vector<int>> groups;
  for (int i = 0; i < n; ++i)
    groups[chem::murcko_scaffold(chem::parse(smiles[static_cast<std::size_t>(i)]))]
        .push_back(i);

  std::vector<std::pair<std::string, std::vector<int>>> ordered(groups.begin(),
                                                                groups.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second.size() != b.second.size())
      return a.second.size() > b.second.size();
    return a.first < b.first;
  });

  SplitAssignment s;
  s.kind = SplitKind::scaffold;
  s.seed = seed;
  double targets[3] = {r.train * n, r.val * n, r.test * n};
  std::vector<int>* subsets[3] = {&s.train, &s.val, &s.test};
  for (const auto& [key, members] : ordered) {
    int best = 0;
    double best_deficit = -1e18;
    for (int k = 0; k < 3; ++k) {
      double deficit = targets[k] - static_cast<double>(subsets[k]->size());
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = k;
      }
    }
    for (int m : members) subsets[best]->push_back(m);
  }
  s.degenerate = s.val.empty() || s.test.empty();
  return s;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline int worker_threads() {
  if (const char* env = std::getenv("MMSG_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Evaluate a model on a subset: mean ROC-AUC over scorable tasks for
/// classification, RMSE over unmasked cells for regression.
inline double evaluate(model::MmsgModel& m, const data::DatasetTable& table,
                       const std::vector<model::MolInput>& inputs,
                       const std::vector<int>& indices) {
  const int tasks = table.tasks();
  Mat preds(static_cast<Eigen::Index>(indices.size()), tasks);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto out = model::predict(m, inputs[static_cast<std::size_t>(indices[i])]);
    for (int j = 0; j < tasks; ++j)
      preds(static_cast<Eigen::Index>(i), j) = out[static_cast<std::size_t>(j)];
  }
  if (table.task_type == model::TaskType::classification) {
    double total = 0.0;
    int scorable = 0;
    for (int j = 0; j < tasks; ++j) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (std::size_t i = 0; i < indices.size(); ++i) {
        int row = indices[i];
        if (table.mask(row, j) == 0.0) continue;
        scores.push_back(preds(static_cast<Eigen::Index>(i), j));
        labels.push_back(table.labels(row, j) > 0.5 ? 1 : 0);
      }
      bool has_pos = false, has_neg = false;
      for (int l : labels) (l ? has_pos : has_neg) = true;
      if (!has_pos || !has_neg) continue;
      total += roc_auc(scores, labels);
      ++scorable;
    }
    if (scorable == 0) throw SingleClass();
    return total / scorable;
  }
  std::vector<double> p, t;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int row = indices[i];
    for (int j = 0; j < tasks; ++j) {
      if (table.mask(row, j) == 0.0) continue;
      p.push_back(preds(static_cast<Eigen::Index>(i), j));
      t.push_back(table.labels(row, j));
    }
  }
  return model::rmse(p, t);
}

struct TrainResult {
  double best_val_metric = 0.0;
  int best_epoch = -1;
  std::vector<double> val_history;
  std::vector<double> train_loss_history;
};

/// Train in place; the model is left holding the weights of the epoch with
/// the best validation metric. Gradients are accumulated molecule by
/// molecule within a batch (mathematically a mean-loss mini batch).
inline TrainResult train_model(model::MmsgModel& m,
                               const data::DatasetTable& table,
                               const std::vector<model::MolInput>& inputs,
                               const std::vector<int>& train_idx,
                               const std::vector<int>& val_idx,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (train_idx.empty()) throw model::EmptyBatch();
  auto params = m.store.all();
  AdamState adam(params);
  const long steps_per_epoch =
      (static_cast<long>(train_idx.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  const long total_steps = steps_per_epoch * cfg.epochs;
  const bool higher_better =
      table.task_type == model::TaskType::classification;

  TrainResult result;
  result.best_val_metric = higher_better ? -1e18 : 1e18;
  std::vector<Mat> best_params;
  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  std::vector<int> order = train_idx;
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    long counted = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::size_t end = std::min(at + cfg.batch_size, order.size());
      m.store.zero_grads();
      int used = 0;
      for (std::size_t i = at; i < end; ++i) {
        int row = order[i];
        Mat mask = table.mask.row(row);
        if (mask.sum() < 0.5) continue;  // fully unlabeled molecule
        diff::Tape tape;
        auto out = model::forward(tape, m, inputs[static_cast<std::size_t>(row)]);
        diff::Var loss;
        if (table.task_type == model::TaskType::classification) {
          loss = tape.masked_bce_with_logits(out.prediction,
                                             table.labels.row(row), mask);
        } else {
          // masked MSE over the row
          diff::Var diff_v = tape.sub(
              out.prediction, tape.input(table.labels.row(row)));
          diff::Var masked = tape.mul(diff_v, tape.input(mask));
          loss = tape.scale(tape.sum_all(tape.mul(masked, masked)),
                            1.0 / mask.sum());
        }
        tape.backward(loss);
        epoch_loss += tape.val(loss)(0, 0);
        ++counted;
        ++used;
      }
      if (used == 0) continue;
      for (auto* p : params) p->grad /= static_cast<double>(used);
      adam_step(params, adam, noam_lr(step, cfg, steps_per_epoch, total_steps));
      ++step;
    }
    result.train_loss_history.push_back(
        counted ? epoch_loss / static_cast<double>(counted) : 0.0);

    double val_metric;
    if (!val_idx.empty()) {
      val_metric = evaluate(m, table, inputs, val_idx);
    } else {
      val_metric = result.train_loss_history.back();
      if (higher_better) val_metric = -val_metric;
    }
    result.val_history.push_back(val_metric);
    bool improved = higher_better ? val_metric > result.best_val_metric
                                  : val_metric < result.best_val_metric;
    if (improved) {
      result.best_val_metric = val_metric;
      result.best_epoch = epoch;
      best_params.clear();
      for (auto* p : params) best_params.push_back(p->value);
    }
  }
  if (!best_params.empty())
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i]->value = best_params[i];
  return result;
}

// ---------------------------------------------------------------------------
// Experiment protocol
// ---------------------------------------------------------------------------

struct ExperimentReport {
  std::string metric;  // "roc-auc" or "rmse"
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
  double mean = 0.0;
  double stddev = 0.0;  // population convention
  double wall_clock_seconds = 0.0;
};

inline void finalize_report(ExperimentReport& r) {
  double sum = std::accumulate(r.per_seed.begin(), r.per_seed.end(), 0.0);
  r.mean = sum / static_cast<double>(r.per_seed.size());
  double var = 0.0;
  for (double v : r.per_seed) var += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(var / static_cast<double>(r.per_seed.size()));
}

/// Per seed: split, train with validation tracking, evaluate the
/// best-validation weights on test. Seeds may run on parallel threads.
template <typename ModelFactory>
inline ExperimentReport run_experiment(
    const data::DatasetTable& table,
    const std::vector<model::MolInput>& inputs, SplitKind kind,
    const TrainConfig& base_cfg, const std::vector<std::uint64_t>& seeds,
    ModelFactory make_model,
    std::vector<std::unique_ptr<model::MmsgModel>>* out_models = nullptr) {
  auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.metric = table.task_type == model::TaskType::classification
                      ? "roc-auc"
                      : "rmse";
  report.seeds = seeds;
  report.per_seed.resize(seeds.size());
  if (out_models) out_models->resize(seeds.size());

  auto run_one = [&](std::size_t si) {
    std::uint64_t seed = seeds[si];
    SplitAssignment split =
        kind == SplitKind::random
            ? random_split(table.size(), {}, seed)
            : scaffold_split(table.smiles, {}, seed);
    auto m = make_model(seed);
    TrainConfig cfg = base_cfg;
    cfg.seed = seed;
    train_model(*m, table, inputs, split.train, split.val, cfg);
    report.per_seed[si] = evaluate(*m, table, inputs, split.test);
    if (out_models) (*out_models)[si] = std::move(m);
  };

  int threads = std::min<int>(worker_threads(), static_cast<int>(seeds.size()));
  if (threads <= 1) {
    for (std::size_t si = 0; si < seeds.size(); ++si) run_one(si);
  } else {
    std::vector<std::future<void>> futs;
    std::size_t next = 0;
    while (next < seeds.size()) {
      while (static_cast<int>(futs.size()) < threads && next < seeds.size())
        futs.push_back(std::async(std::launch::async, run_one, next++));
      for (auto& f : futs) f.get();
      futs.clear();
    }
  }
  finalize_report(report);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace mmsg::train
