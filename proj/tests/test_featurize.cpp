//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include "mmsg/featurize.hpp"

using namespace mmsg;
using namespace mmsg::featurize;

namespace {

int count_ones_in(const std::vector<double>& v, int off, int len) {
  int c = 0;
  for (int i = off; i < off + len; ++i)
    if (v[static_cast<std::size_t>(i)] == 1.0) ++c;
  return c;
}

}  // namespace

TEST(AtomFeatures, Dimensions) {
  EXPECT_EQ(kAtomFeatureDim, 127);
  EXPECT_EQ(kBondFeatureDim, 12);
  auto g = chem::parse("CCO");
  EXPECT_EQ(atom_features(g, 0).size(), 127u);
}

TEST(AtomFeatures, AtomTypeSlot) {
  EXPECT_EQ(atom_type_index("C"), 5);   // Z=6
  EXPECT_EQ(atom_type_index("H"), 0);
  EXPECT_EQ(atom_type_index("Cl"), 16);
  EXPECT_EQ(atom_type_index("Es"), 98);  // Z=99 is the last dedicated slot
  EXPECT_EQ(atom_type_index("Fm"), 99);  // Z=100 overflows
  EXPECT_EQ(atom_type_index("Og"), 99);
  EXPECT_THROW(atom_type_index("Xx"), chem::UnknownElement);
}

TEST(AtomFeatures, EthanolCarbonBlocks) {
  auto g = chem::parse("CCO");
  auto v = atom_features(g, 0);  // terminal CH3
  // one-hot in the atom type block at C's slot
  EXPECT_EQ(v[5], 1.0);
  EXPECT_EQ(count_ones_in(v, 0, 100), 1);
  // degree 1
  EXPECT_EQ(v[100 + 1], 1.0);
  EXPECT_EQ(count_ones_in(v, 100, 6), 1);
  // neutral charge -> middle slot
  EXPECT_EQ(v[106 + 2], 1.0);
  // no chirality
  EXPECT_EQ(v[111 + 0], 1.0);
  // 3 hydrogens
  EXPECT_EQ(v[115 + 3], 1.0);
  // sp3
  EXPECT_EQ(v[120 + static_cast<int>(Hybridization::sp3)], 1.0);
  // not aromatic
  EXPECT_EQ(v[125], 0.0);
  // mass / 100
  EXPECT_NEAR(v[126], 12.011 / 100.0, 1e-12);
}

TEST(AtomFeatures, EverySegmentIsOneHot) {
  for (const char* s : {"CCO", "c1ccccc1", "C[C@H](N)C(=O)O", "O=S(=O)(O)O",
                        "[NH4+].[Cl-]", "F/C=C/F", "N#Cc1ccccc1"}) {
    auto g = chem::parse(s);
    for (int a = 0; a < g.atom_count(); ++a) {
      auto v = atom_features(g, a);
      EXPECT_EQ(count_ones_in(v, 0, 100), 1) << s;
      EXPECT_EQ(count_ones_in(v, 100, 6), 1) << s;
      EXPECT_EQ(count_ones_in(v, 106, 5), 1) << s;
      EXPECT_EQ(count_ones_in(v, 111, 4), 1) << s;
      EXPECT_EQ(count_ones_in(v, 115, 5), 1) << s;
      EXPECT_EQ(count_ones_in(v, 120, 5), 1) << s;
    }
  }
}

TEST(AtomFeatures, ChargeClampsToExtremes) {
  auto g = chem::parse("[O-2].[Ti+4]");
  auto o = atom_features(g, 0);
  EXPECT_EQ(o[106 + 0], 1.0);  // -2 slot
  auto ti = atom_features(g, 1);
  EXPECT_EQ(ti[106 + 4], 1.0);  // +4 clamps to the +2 slot
}

TEST(AtomFeatures, HydrogenCountClamps) {
  auto g = chem::parse("[SiH4]C");  // explicit H4 fits the last slot exactly
  auto v = atom_features(g, 0);
  EXPECT_EQ(v[115 + 4], 1.0);
}

TEST(Hybridization, Heuristic) {
  auto alkyne = chem::parse("C#C");
  EXPECT_EQ(hybridization(alkyne, 0), Hybridization::sp);
  auto allene = chem::parse("C=C=C");
  EXPECT_EQ(hybridization(allene, 1), Hybridization::sp);  // two doubles
  auto alkene = chem::parse("C=C");
  EXPECT_EQ(hybridization(alkene, 0), Hybridization::sp2);
  auto benzene = chem::parse("c1ccccc1");
  EXPECT_EQ(hybridization(benzene, 0), Hybridization::sp2);
  auto alkane = chem::parse("CC");
  EXPECT_EQ(hybridization(alkane, 0), Hybridization::sp3);
  auto pcl5 = chem::parse("ClP(Cl)(Cl)(Cl)Cl");
  EXPECT_EQ(hybridization(pcl5, 1), Hybridization::sp3d);
  auto sf6 = chem::parse("FS(F)(F)(F)(F)F");
  EXPECT_EQ(hybridization(sf6, 1), Hybridization::sp3d2);
}

TEST(BondFeatures, BenzeneBond) {
  auto g = chem::parse("c1ccccc1");
  auto v = bond_features(g.directed_edges[0].bond);
  ASSERT_EQ(v.size(), 12u);
  // aromatic type slot
  EXPECT_EQ(v[static_cast<int>(chem::BondOrder::aromatic)], 1.0);
  // stereo none
  EXPECT_EQ(v[4 + 0], 1.0);
  // in ring, conjugated
  EXPECT_EQ(v[10], 1.0);
  EXPECT_EQ(v[11], 1.0);
}

TEST(BondFeatures, StereoSlot) {
  auto g = chem::parse("F/C=C/F");
  bool saw = false;
  for (int e = 0; e < g.edge_count(); e += 2) {
    const auto& b = g.directed_edges[static_cast<std::size_t>(e)].bond;
    if (b.order != chem::BondOrder::double_) continue;
    auto v = bond_features(b);
    EXPECT_EQ(v[4 + static_cast<int>(chem::BondStereo::E)], 1.0);
    EXPECT_EQ(v[1], 1.0);  // double
    saw = true;
  }
  EXPECT_TRUE(saw);
}

TEST(BondFeatures, PlainSingleBond) {
  auto g = chem::parse("CC");
  auto v = bond_features(g.directed_edges[0].bond);
  EXPECT_EQ(v[0], 1.0);   // single
  EXPECT_EQ(v[4], 1.0);   // stereo none
  EXPECT_EQ(v[10], 0.0);  // acyclic
  EXPECT_EQ(v[11], 0.0);  // not conjugated
  int ones = 0;
  for (double x : v) ones += x == 1.0;
  EXPECT_EQ(ones, 2);
}

TEST(BondFeatures, PairedDirectedEdgesShareFeatures) {
  auto g = chem::parse("CC(=O)Oc1ccccc1C(=O)O");
  for (int e = 0; e < g.edge_count(); ++e) {
    auto a = bond_features(g.directed_edges[static_cast<std::size_t>(e)].bond);
    auto b = bond_features(
        g.directed_edges[static_cast<std::size_t>(g.rev[static_cast<std::size_t>(e)])]
            .bond);
    EXPECT_EQ(a, b);
  }
}
