//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Bidirectional Message Communication GNN: iterative node/edge message
// passing over paired directed edges with reverse-message subtraction,
// skip-connected updates, a final gathering pass, and GRU readouts.
#pragma once

#include <stdexcept>
#include <vector>

#include "mmsg/chem/smiles.hpp"
#include "mmsg/diff/autodiff.hpp"
#include "mmsg/featurize.hpp"

namespace mmsg::bmc {

using diff::Mat;
using diff::ParamStore;
using diff::Parameter;
using diff::Tape;
using diff::Var;

struct BmcConfig {
  int hidden_dim = 64;
  int depth = 2;

  void validate() const {
    if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  }
};

struct BmcParams {
  Parameter* W_in_v = nullptr;  // hidden x 127 input projection
  Parameter* W_in_e = nullptr;  // hidden x 12 input projection
  Parameter* W_v = nullptr;     // hidden x hidden, shared across steps
  Parameter* W_e = nullptr;
  diff::GruParams gru_v;        // node readout
  diff::GruParams gru_e;        // edge readout

  static BmcParams create(ParamStore& store, const BmcConfig& cfg,
                          std::mt19937_64& rng) {
    cfg.validate();
    BmcParams p;
    const auto h = static_cast<Eigen::Index>(cfg.hidden_dim);
    p.W_in_v = &store.create("bmc.W_in_v", h, featurize::kAtomFeatureDim,
                             diff::Init::glorot_uniform, rng);
    p.W_in_e = &store.create("bmc.W_in_e", h, featurize::kBondFeatureDim,
                             diff::Init::glorot_uniform, rng);
    p.W_v = &store.create("bmc.W_v", h, h, diff::Init::glorot_uniform, rng);
    p.W_e = &store.create("bmc.W_e", h, h, diff::Init::glorot_uniform, rng);
    p.gru_v = diff::GruParams::create(store, "bmc.readout_v", h, h, rng);
    p.gru_e = diff::GruParams::create(store, "bmc.readout_e", h, h, rng);
    return p;
  }
};

/// A MolGraph with its attribute matrices and flat index vectors,
/// ready to feed the message passing loop.
struct FeaturizedGraph {
  Mat x_v;                  // n x 127
  Mat x_e;                  // 2m x 12
  std::vector<int> source;  // per directed edge
  std::vector<int> target;
  std::vector<int> rev;
  int atom_count = 0;
  int edge_count = 0;
};

inline FeaturizedGraph featurize_graph(const chem::MolGraph& g) {
  FeaturizedGraph fg;
  fg.atom_count = g.atom_count();
  fg.edge_count = g.edge_count();
  fg.x_v.resize(fg.atom_count, featurize::kAtomFeatureDim);
  for (int v = 0; v < fg.atom_count; ++v) {
    auto feats = featurize::atom_features(g, v);
    for (int j = 0; j < featurize::kAtomFeatureDim; ++j)
      fg.x_v(v, j) = feats[static_cast<std::size_t>(j)];
  }
  fg.x_e.resize(fg.edge_count, featurize::kBondFeatureDim);
  for (int e = 0; e < fg.edge_count; ++e) {
    const auto& de = g.directed_edges[static_cast<std::size_t>(e)];
    auto feats = featurize::bond_features(de.bond);
    for (int j = 0; j < featurize::kBondFeatureDim; ++j)
      fg.x_e(e, j) = feats[static_cast<std::size_t>(j)];
    fg.source.push_back(de.source);
    fg.target.push_back(de.target);
    fg.rev.push_back(g.rev[static_cast<std::size_t>(e)]);
  }
  return fg;
}

/// MAX(h) ⊙ SUM(h) over incoming directed edges; zero rows for atoms
/// with no incoming edges.
inline Var aggregate_edges_to_nodes(Tape& t, Var edge_hidden,
                                    const std::vector<int>& target,
                                    int atom_count) {
  Var mx = t.segment_reduce(edge_hidden, target, atom_count,
                            diff::SegmentMode::max);
  Var sm = t.segment_reduce(edge_hidden, target, atom_count,
                            diff::SegmentMode::sum);
  return t.mul(mx, sm);
}

/// MEAN of the two endpoint hiddens for every directed edge.
inline Var aggregate_nodes_to_edges(Tape& t, Var node_hidden,
                                    const std::vector<int>& source,
                                    const std::vector<int>& target) {
  return t.scale(t.add(t.gather_rows(node_hidden, source),
                       t.gather_rows(node_hidden, target)),
                 0.5);
}

/// GRU over the rows in canonical order, per-step outputs summed.
/// Empty input yields the zero vector.
inline Var gru_readout(Tape& t, Var rows, const diff::GruParams& gru,
                       int hidden_dim) {
  const Eigen::Index n = t.val(rows).rows();
  if (n == 0) return t.input(Mat::Zero(1, hidden_dim));
  Var state = t.input(Mat::Zero(1, hidden_dim));
  Var acc{};
  for (Eigen::Index i = 0; i < n; ++i) {
    Var x = t.gather_rows(rows, {static_cast<int>(i)});
    state = diff::gru_cell(t, x, state, gru);
    acc = acc.valid() ? t.add(acc, state) : state;
  }
  return acc;
}

struct BmcOutputs {
  Var node_hidden;  // n x hidden, final h_v^T
  Var edge_hidden;  // 2m x hidden, final h_e^T
  Var H_V;          // 1 x hidden
  Var H_E;          // 1 x hidden
};

/// Full BMC forward pass: depth-1 communication iterations, one gathering
/// pass that re-injects projected raw attributes, then GRU readouts.
inline BmcOutputs bmc_forward(Tape& t, const FeaturizedGraph& g,
                              const BmcConfig& cfg, const BmcParams& params) {
  cfg.validate();
  Var xv = t.input(g.x_v);
  Var xe = t.input(g.x_e);
  Var proj_v = t.linear(xv, *params.W_in_v);
  Var proj_e = t.linear(xe, *params.W_in_e);
  Var h_v0 = proj_v;
  Var h_e0 = proj_e;
  Var h_v = h_v0;
  Var h_e = h_e0;

  for (int step = 0; step < cfg.depth - 1; ++step) {
    Var m_v = aggregate_edges_to_nodes(t, h_e, g.target, g.atom_count);
    Var p_v = t.add(m_v, h_v);
    Var m_e = aggregate_nodes_to_edges(t, h_v, g.source, g.target);
    Var p_e = t.add(m_e, h_e);
    // reverse reads use this iteration's pre-subtraction values
    Var p_e_sub = t.sub(t.gather_rows(p_v, g.source), t.gather_rows(p_e, g.rev));
    h_e = t.relu(t.add(h_e0, t.linear(p_e_sub, *params.W_e)));
    h_v = t.relu(t.add(h_v0, t.linear(p_v, *params.W_v)));
  }

  // gathering pass: additive three-argument communicate
  Var m_vT = aggregate_edges_to_nodes(t, h_e, g.target, g.atom_count);
  Var m_eT = aggregate_nodes_to_edges(t, h_v, g.source, g.target);
  Var h_vT = t.add(t.add(m_vT, h_v), proj_v);
  Var h_eT = t.add(t.add(m_eT, h_e), proj_e);

  BmcOutputs out;
  out.node_hidden = h_vT;
  out.edge_hidden = h_eT;
  out.H_V = gru_readout(t, h_vT, params.gru_v, cfg.hidden_dim);
  out.H_E = gru_readout(t, h_eT, params.gru_e, cfg.hidden_dim);
  return out;
}

}  // namespace mmsg::bmc
