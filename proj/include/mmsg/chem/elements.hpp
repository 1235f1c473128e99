//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmsg::chem {

struct UnknownElement : std::runtime_error {
  explicit UnknownElement(const std::string& symbol)
      : std::runtime_error("unknown element symbol: " + symbol) {}
};

namespace detail {

inline constexpr std::array<std::string_view, 118> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

// Standard atomic weights (most stable isotope for the radioactives).
inline constexpr std::array<double, 118> kMasses = {
    1.008,   4.0026,  6.94,    9.0122,  10.81,   12.011,  14.007,  15.999,
    18.998,  20.180,  22.990,  24.305,  26.982,  28.085,  30.974,  32.06,
    35.45,   39.948,  39.098,  40.078,  44.956,  47.867,  50.942,  51.996,
    54.938,  55.845,  58.933,  58.693,  63.546,  65.38,   69.723,  72.630,
    74.922,  78.971,  79.904,  83.798,  85.468,  87.62,   88.906,  91.224,
    92.906,  95.95,   98.0,    101.07,  102.91,  106.42,  107.87,  112.41,
    114.82,  118.71,  121.76,  127.60,  126.90,  131.29,  132.91,  137.33,
    138.91,  140.12,  140.91,  144.24,  145.0,   150.36,  151.96,  157.25,
    158.93,  162.50,  164.93,  167.26,  168.93,  173.05,  174.97,  178.49,
    180.95,  183.84,  186.21,  190.23,  192.22,  195.08,  196.97,  200.59,
    204.38,  207.2,   208.98,  209.0,   210.0,   222.0,   223.0,   226.0,
    227.0,   232.04,  231.04,  238.03,  237.0,   244.0,   243.0,   247.0,
    247.0,   251.0,   252.0,   257.0,   258.0,   259.0,   266.0,   267.0,
    268.0,   269.0,   270.0,   277.0,   278.0,   281.0,   282.0,   285.0,
    286.0,   289.0,   290.0,   293.0,   294.0,   294.0};

inline const std::unordered_map<std::string, int>& symbol_to_z_map() {
  static const std::unordered_map<std::string, int> map = [] {
    std::unordered_map<std::string, int> m;
    for (std::size_t i = 0; i < kSymbols.size(); ++i)
      m.emplace(std::string(kSymbols[i]), static_cast<int>(i) + 1);
    return m;
  }();
  return map;
}

}  // namespace detail

/// Atomic number for a (case-sensitive) element symbol, or nullopt.
inline std::optional<int> atomic_number(const std::string& symbol) {
  const auto& m = detail::symbol_to_z_map();
  auto it = m.find(symbol);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

inline bool is_valid_element(const std::string& symbol) {
  return atomic_number(symbol).has_value();
}

/// Standard atomic mass; throws UnknownElement.
inline double atomic_mass(const std::string& symbol) {
  auto z = atomic_number(symbol);
  if (!z) throw UnknownElement(symbol);
  return detail::kMasses[static_cast<std::size_t>(*z - 1)];
}

inline std::string element_symbol(int z) {
  if (z < 1 || z > 118) throw UnknownElement("Z=" + std::to_string(z));
  return std::string(detail::kSymbols[static_cast<std::size_t>(z - 1)]);
}

/// Allowed valences for the SMILES organic subset, in increasing order.
/// Empty span means the element is not in the organic subset.
inline const std::vector<int>& organic_valences(const std::string& symbol) {
  static const std::unordered_map<std::string, std::vector<int>> table = {
      {"B", {3}},  {"C", {4}},     {"N", {3, 5}},  {"O", {2}},
      {"P", {3, 5}}, {"S", {2, 4, 6}}, {"F", {1}}, {"Cl", {1}},
      {"Br", {1}}, {"I", {1}}};
  static const std::vector<int> empty;
  auto it = table.find(symbol);
  return it == table.end() ? empty : it->second;
}

inline bool is_organic_subset(const std::string& symbol) {
  return !organic_valences(symbol).empty();
}

}  // namespace mmsg::chem
