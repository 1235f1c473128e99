//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-width atom (127) and bond (12) attribute vectors.
#pragma once

#include <vector>

#include "mmsg/chem/smiles.hpp"

namespace mmsg::featurize {

inline constexpr int kAtomTypeSize = 100;
inline constexpr int kDegreeSize = 6;
inline constexpr int kChargeSize = 5;
inline constexpr int kChiralitySize = 4;
inline constexpr int kHCountSize = 5;
inline constexpr int kHybridizationSize = 5;
inline constexpr int kAtomFeatureDim = kAtomTypeSize + kDegreeSize +
                                       kChargeSize + kChiralitySize +
                                       kHCountSize + kHybridizationSize + 1 + 1;
inline constexpr int kBondTypeSize = 4;
inline constexpr int kStereoSize = 6;
inline constexpr int kBondFeatureDim = kBondTypeSize + kStereoSize + 1 + 1;

static_assert(kAtomFeatureDim == 127);
static_assert(kBondFeatureDim == 12);

/// Atom-type slot: atomic number - 1 for Z in 1..99, else the overflow slot.
inline int atom_type_index(const std::string& element) {
  auto z = chem::atomic_number(element);
  if (!z) throw chem::UnknownElement(element);
  return (*z >= 1 && *z <= 99) ? *z - 1 : kAtomTypeSize - 1;
}

enum class Hybridization { sp, sp2, sp3, sp3d, sp3d2 };

/// Heuristic perception from incident bond orders and heavy degree.
inline Hybridization hybridization(const chem::MolGraph& g, int atom_index) {
  int heavy_degree = g.degree(atom_index);
  if (heavy_degree == 5) return Hybridization::sp3d;
  if (heavy_degree >= 6) return Hybridization::sp3d2;
  int doubles = 0, triples = 0;
  bool aromatic = g.atoms[static_cast<std::size_t>(atom_index)].aromatic;
  for (int e : g.incoming[static_cast<std::size_t>(atom_index)]) {
    const auto& bond = g.directed_edges[static_cast<std::size_t>(e)].bond;
    if (bond.order == chem::BondOrder::double_) ++doubles;
    if (bond.order == chem::BondOrder::triple) ++triples;
    if (bond.order == chem::BondOrder::aromatic) aromatic = true;
  }
  if (triples > 0 || doubles >= 2) return Hybridization::sp;
  if (doubles == 1 || aromatic) return Hybridization::sp2;
  return Hybridization::sp3;
}

inline std::vector<double> atom_features(const chem::MolGraph& g,
                                         int atom_index) {
  const chem::Atom& atom = g.atoms[static_cast<std::size_t>(atom_index)];
  std::vector<double> v(kAtomFeatureDim, 0.0);
  int off = 0;

  v[static_cast<std::size_t>(off + atom_type_index(atom.element))] = 1.0;
  off += kAtomTypeSize;

  int degree = std::min(g.degree(atom_index), kDegreeSize - 1);
  v[static_cast<std::size_t>(off + degree)] = 1.0;
  off += kDegreeSize;

  // formal charge block covers {-2,-1,0,+1,+2}, overflow to nearest extreme
  int charge = std::clamp(atom.formal_charge, -2, 2);
  v[static_cast<std::size_t>(off + charge + 2)] = 1.0;
  off += kChargeSize;

  v[static_cast<std::size_t>(off + static_cast<int>(atom.chirality))] = 1.0;
  off += kChiralitySize;

  int h = atom.explicit_h ? *atom.explicit_h
                          : g.implicit_h[static_cast<std::size_t>(atom_index)];
  v[static_cast<std::size_t>(off + std::min(h, kHCountSize - 1))] = 1.0;
  off += kHCountSize;

  v[static_cast<std::size_t>(off + static_cast<int>(hybridization(g, atom_index)))] = 1.0;
  off += kHybridizationSize;

  v[static_cast<std::size_t>(off++)] = atom.aromatic ? 1.0 : 0.0;
  v[static_cast<std::size_t>(off++)] = chem::atomic_mass(atom.element) / 100.0;
  return v;
}

inline std::vector<double> bond_features(const chem::Bond& bond) {
  std::vector<double> v(kBondFeatureDim, 0.0);
  v[static_cast<std::size_t>(static_cast<int>(bond.order))] = 1.0;
  v[static_cast<std::size_t>(kBondTypeSize + static_cast<int>(bond.stereo))] = 1.0;
  v[kBondTypeSize + kStereoSize] = bond.in_ring ? 1.0 : 0.0;
  v[kBondTypeSize + kStereoSize + 1] = bond.conjugated ? 1.0 : 0.0;
  return v;
}

}  // namespace mmsg::featurize
