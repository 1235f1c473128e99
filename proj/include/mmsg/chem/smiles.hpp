//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// SMILES tokenizer, token dictionary, and molecular graph parser.
// The graph is stored as paired directed edges so that directed
// message passing can subtract reverse-edge contributions.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmsg/chem/elements.hpp"

namespace mmsg::chem {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct TokenizeError : std::runtime_error {
  std::size_t position;
  TokenizeError(std::size_t pos, const std::string& what)
      : std::runtime_error("tokenize error at position " +
                           std::to_string(pos) + ": " + what),
        position(pos) {}
};

struct UnknownToken : std::runtime_error {
  std::size_t position;
  UnknownToken(std::size_t pos, const std::string& text)
      : std::runtime_error("unknown token '" + text + "' at position " +
                           std::to_string(pos)),
        position(pos) {}
};

struct EmptyCorpus : std::runtime_error {
  EmptyCorpus() : std::runtime_error("token dictionary corpus is empty") {}
};

struct UnclosedRing : std::runtime_error {
  int ring_number;
  explicit UnclosedRing(int n)
      : std::runtime_error("unclosed ring bond " + std::to_string(n)),
        ring_number(n) {}
};

struct UnbalancedParentheses : std::runtime_error {
  UnbalancedParentheses()
      : std::runtime_error("unbalanced parentheses in SMILES") {}
};

struct ValenceError : std::runtime_error {
  int atom_index;
  ValenceError(int atom, const std::string& what)
      : std::runtime_error("valence error on atom " + std::to_string(atom) +
                           ": " + what),
        atom_index(atom) {}
};

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

enum class TokenKind {
  atom,
  bracket_atom,
  bond,
  ring_closure,
  branch_open,
  branch_close,
  dot
};

struct Token {
  std::string text;
  TokenKind kind;
};

namespace detail {

inline bool is_organic_start(char c) {
  switch (c) {
    case 'B': case 'C': case 'N': case 'O': case 'P': case 'S':
    case 'F': case 'I':
    case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
      return true;
    default:
      return false;
  }
}

inline bool is_bond_char(char c) {
  return c == '-' || c == '=' || c == '#' || c == '$' || c == ':' ||
         c == '/' || c == '\\';
}

// Validates the inside of a bracket atom: [isotope]symbol[@|@@][Hn][+/-n][:map]
inline void validate_bracket(const std::string& body, std::size_t pos) {
  std::size_t i = 0;
  auto fail = [&](const std::string& what) { throw TokenizeError(pos, what); };
  while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
    ++i;  // isotope
  if (i >= body.size()) fail("bracket atom missing element symbol");
  std::string sym;
  if (std::isupper(static_cast<unsigned char>(body[i]))) {
    sym += body[i++];
    if (i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) {
      // Greedy two-letter match, falling back to one letter (e.g. [Sc] vs [CH4]).
      std::string two = sym + body[i];
      if (is_valid_element(two)) {
        sym = two;
        ++i;
      }
    }
  } else if (std::islower(static_cast<unsigned char>(body[i]))) {
    sym += body[i++];
    if (i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) {
      std::string two = sym + body[i];
      std::string cap = two;
      cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
      if (is_valid_element(cap)) {
        sym = two;
        ++i;
      }
    }
    std::string cap = sym;
    cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
    if (!is_valid_element(cap)) fail("invalid aromatic element '" + sym + "'");
    sym = cap;
  } else {
    fail("bad character in bracket atom");
  }
  if (!is_valid_element(sym)) fail("invalid element '" + sym + "'");
  if (i < body.size() && body[i] == '@') {
    ++i;
    if (i < body.size() && body[i] == '@') ++i;
    // Named chirality classes (@TH1, @AL1, ...) map to "other".
    while (i < body.size() &&
           (std::isupper(static_cast<unsigned char>(body[i])) ||
            std::isdigit(static_cast<unsigned char>(body[i])))) {
      if (body[i] == 'H' &&
          (i + 1 >= body.size() ||
           !std::isupper(static_cast<unsigned char>(body[i + 1]))))
        break;  // that H is the hydrogen-count marker
      ++i;
    }
  }
  if (i < body.size() && body[i] == 'H') {
    ++i;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
      ++i;
  }
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    char sign = body[i++];
    while (i < body.size() && body[i] == sign) ++i;  // ++ / -- forms
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
      ++i;
  }
  if (i < body.size() && body[i] == ':') {
    ++i;
    if (i >= body.size()) fail("bracket atom map missing digits");
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
      ++i;
  }
  if (i != body.size()) fail("trailing characters in bracket atom");
}

}  // namespace detail

/// Split a SMILES string into tokens. Concatenating the token texts in
/// order reconstructs the input exactly.
inline std::vector<Token> tokenize_smiles(const std::string& smiles) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = smiles.size();
  if (n == 0) throw TokenizeError(0, "empty SMILES");
  while (i < n) {
    char c = smiles[i];
    if (c == '[') {
      auto close = smiles.find(']', i);
      if (close == std::string::npos)
        throw TokenizeError(i, "unterminated bracket atom");
      std::string body = smiles.substr(i + 1, close - i - 1);
      detail::validate_bracket(body, i);
      out.push_back({smiles.substr(i, close - i + 1), TokenKind::bracket_atom});
      i = close + 1;
    } else if (c == 'C' && i + 1 < n && smiles[i + 1] == 'l') {
      out.push_back({"Cl", TokenKind::atom});
      i += 2;
    } else if (c == 'B' && i + 1 < n && smiles[i + 1] == 'r') {
      out.push_back({"Br", TokenKind::atom});
      i += 2;
    } else if (detail::is_organic_start(c)) {
      out.push_back({std::string(1, c), TokenKind::atom});
      ++i;
    } else if (detail::is_bond_char(c)) {
      out.push_back({std::string(1, c), TokenKind::bond});
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      out.push_back({std::string(1, c), TokenKind::ring_closure});
      ++i;
    } else if (c == '%') {
      if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(smiles[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(smiles[i + 2])))
        throw TokenizeError(i, "'%' ring closure needs two digits");
      out.push_back({smiles.substr(i, 3), TokenKind::ring_closure});
      i += 3;
    } else if (c == '(') {
      out.push_back({"(", TokenKind::branch_open});
      ++i;
    } else if (c == ')') {
      out.push_back({")", TokenKind::branch_close});
      ++i;
    } else if (c == '.') {
      out.push_back({".", TokenKind::dot});
      ++i;
    } else {
      throw TokenizeError(i, std::string("unexpected character '") + c + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token dictionary / sequences
// ---------------------------------------------------------------------------

class TokenDictionary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  TokenDictionary() {
    add("<pad>");
    add("<unk>");
  }

  /// Builds a dictionary from every token appearing in the corpus,
  /// in first-appearance order.
  static TokenDictionary build(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw EmptyCorpus();
    TokenDictionary dict;
    for (const auto& s : corpus)
      for (const auto& tok : tokenize_smiles(s)) dict.add(tok.text);
    return dict;
  }

  int add(const std::string& text) {
    auto it = index_.find(text);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(text);
    index_.emplace(text, id);
    return id;
  }

  std::optional<int> lookup(const std::string& text) const {
    auto it = index_.find(text);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  int length() const { return static_cast<int>(ids.size()); }
};

/// Indexes a SMILES string against a dictionary. Unknown tokens become UNK
/// when allow_unk, otherwise raise UnknownToken.
inline TokenSequence tokenize(const std::string& smiles,
                              const TokenDictionary& dict,
                              bool allow_unk = true) {
  TokenSequence seq;
  std::size_t pos = 0;
  for (const auto& tok : tokenize_smiles(smiles)) {
    auto id = dict.lookup(tok.text);
    if (!id) {
      if (!allow_unk) throw UnknownToken(pos, tok.text);
      seq.ids.push_back(TokenDictionary::kUnkId);
    } else {
      seq.ids.push_back(*id);
    }
    pos += tok.text.size();
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Molecular graph
// ---------------------------------------------------------------------------

enum class Chirality { unspecified, CW, CCW, other };
enum class BondOrder { single, double_, triple, aromatic };
enum class BondStereo { none, any, E, Z, cis, trans };

struct Atom {
  std::string element;
  int formal_charge = 0;
  std::optional<int> explicit_h;  // present iff from a bracket token
  bool aromatic = false;
  Chirality chirality = Chirality::unspecified;
  std::optional<int> isotope;
};

struct Bond {
  BondOrder order = BondOrder::single;
  BondStereo stereo = BondStereo::none;
  bool in_ring = false;
  bool conjugated = false;
};

struct DirectedEdge {
  int source = -1;
  int target = -1;
  Bond bond;
};

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<DirectedEdge> directed_edges;
  std::vector<int> rev;                     // edge id -> reverse edge id
  std::vector<std::vector<int>> incoming;   // atom -> incoming edge ids
  std::vector<int> implicit_h;              // per atom

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int edge_count() const { return static_cast<int>(directed_edges.size()); }

  /// Heavy-atom degree (incoming directed edge count).
  int degree(int atom) const {
    return static_cast<int>(incoming[static_cast<std::size_t>(atom)].size());
  }
};

/// Implicit hydrogen count from the organic-subset valence rules.
/// Aromatic bonds count 1.5 toward the order sum, floored after summation.
inline int implicit_hydrogen_count(const Atom& atom, double bonded_order_sum,
                                   int atom_index = -1) {
  if (atom.explicit_h) return *atom.explicit_h;
  const auto& valences = organic_valences(atom.element);
  if (valences.empty()) return 0;  // bare bracket-less exotic never happens
  int sum = static_cast<int>(bonded_order_sum);
  // An aromatic atom spends one valence slot on the delocalized system even
  // when the floored sum does not show it (e.g. one aromatic bond = 1.5 -> 1).
  if (atom.formal_charge != 0) {
    // Charge shifts the effective valence for N/O-like centers.
    int v = valences.front() + atom.formal_charge *
                                   ((atom.element == "N" || atom.element == "P")
                                        ? 1
                                        : -1);
    return std::max(0, v - sum);
  }
  for (int v : valences)
    if (sum <= v) return v - sum;
  throw ValenceError(atom_index, "bond order sum " + std::to_string(sum) +
                                     " exceeds max valence of " + atom.element);
}

namespace detail {

struct ParsedBracket {
  Atom atom;
};

inline ParsedBracket parse_bracket_atom(const std::string& token) {
  // token includes the surrounding [].
  std::string body = token.substr(1, token.size() - 2);
  ParsedBracket pb;
  std::size_t i = 0;
  if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
    int iso = 0;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
      iso = iso * 10 + (body[i++] - '0');
    pb.atom.isotope = iso;
  }
  if (std::isupper(static_cast<unsigned char>(body[i]))) {
    std::string sym(1, body[i++]);
    if (i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) {
      std::string two = sym + body[i];
      if (is_valid_element(two)) {
        sym = two;
        ++i;
      }
    }
    pb.atom.element = sym;
  } else {
    std::string sym(1, body[i++]);
    if (i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) {
      std::string two = sym + body[i];
      std::string cap = two;
      cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
      if (is_valid_element(cap)) {
        sym = two;
        ++i;
      }
    }
    sym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
    pb.atom.element = sym;
    pb.atom.aromatic = true;
  }
  if (i < body.size() && body[i] == '@') {
    ++i;
    if (i < body.size() && body[i] == '@') {
      pb.atom.chirality = Chirality::CW;
      ++i;
    } else if (i < body.size() &&
               std::isupper(static_cast<unsigned char>(body[i])) &&
               !(body[i] == 'H' &&
                 (i + 1 >= body.size() ||
                  !std::isupper(static_cast<unsigned char>(body[i + 1]))))) {
      pb.atom.chirality = Chirality::other;
      while (i < body.size() &&
             (std::isupper(static_cast<unsigned char>(body[i])) ||
              std::isdigit(static_cast<unsigned char>(body[i])))) {
        if (body[i] == 'H' &&
            (i + 1 >= body.size() ||
             !std::isupper(static_cast<unsigned char>(body[i + 1]))))
          break;
        ++i;
      }
    } else {
      pb.atom.chirality = Chirality::CCW;
    }
  }
  pb.atom.explicit_h = 0;
  if (i < body.size() && body[i] == 'H') {
    ++i;
    int h = 1;
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      h = 0;
      while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
        h = h * 10 + (body[i++] - '0');
    }
    pb.atom.explicit_h = h;
  }
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    char sign = body[i++];
    int mag = 1;
    while (i < body.size() && body[i] == sign) {
      ++mag;
      ++i;
    }
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      mag = 0;
      while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
        mag = mag * 10 + (body[i++] - '0');
    }
    pb.atom.formal_charge = sign == '+' ? mag : -mag;
  }
  // atom map, if any, is parsed and discarded
  return pb;
}

// Directional slash recorded on a single bond, as written source->target.
enum class SlashDir { none, up, down };

}  // namespace detail

/// Parse a SMILES string into a directed molecular graph.
inline MolGraph parse(const std::string& smiles) {
  auto tokens = tokenize_smiles(smiles);
  MolGraph g;
  struct UndirectedBond {
    int a, b;
    BondOrder order;
    bool explicit_order;
    detail::SlashDir slash;  // as written a->b
    bool in_ring = false;
    bool conjugated = false;
    BondStereo stereo = BondStereo::none;
  };
  std::vector<UndirectedBond> bonds;

  std::vector<int> atom_stack;  // previous-atom stack for branches
  int prev_atom = -1;
  std::optional<char> pending_bond;
  // ring number -> (atom index, pending bond char or 0)
  std::map<int, std::pair<int, char>> open_rings;

  auto bond_from_char = [](char c) -> BondOrder {
    switch (c) {
      case '=': return BondOrder::double_;
      case '#': return BondOrder::triple;
      case '$': return BondOrder::triple;  // quadruple unsupported; treat as triple
      case ':': return BondOrder::aromatic;
      default: return BondOrder::single;
    }
  };

  auto add_bond = [&](int a, int b, std::optional<char> sym) {
    UndirectedBond ub;
    ub.a = a;
    ub.b = b;
    ub.slash = detail::SlashDir::none;
    if (sym) {
      ub.order = bond_from_char(*sym);
      ub.explicit_order = true;
      if (*sym == '/') ub.slash = detail::SlashDir::up;
      if (*sym == '\\') ub.slash = detail::SlashDir::down;
    } else {
      bool both_aromatic = g.atoms[static_cast<std::size_t>(a)].aromatic &&
                           g.atoms[static_cast<std::size_t>(b)].aromatic;
      ub.order = both_aromatic ? BondOrder::aromatic : BondOrder::single;
      ub.explicit_order = false;
    }
    bonds.push_back(ub);
  };

  auto new_atom = [&](Atom atom) {
    g.atoms.push_back(std::move(atom));
    int idx = g.atom_count() - 1;
    if (prev_atom >= 0) {
      add_bond(prev_atom, idx, pending_bond);
    } else if (pending_bond) {
      throw TokenizeError(0, "bond symbol with no preceding atom");
    }
    pending_bond.reset();
    prev_atom = idx;
  };

  for (const auto& tok : tokens) {
    switch (tok.kind) {
      case TokenKind::atom: {
        Atom a;
        a.element = tok.text;
        if (std::islower(static_cast<unsigned char>(tok.text[0]))) {
          a.aromatic = true;
          a.element[0] = static_cast<char>(
              std::toupper(static_cast<unsigned char>(a.element[0])));
        }
        new_atom(std::move(a));
        break;
      }
      case TokenKind::bracket_atom:
        new_atom(detail::parse_bracket_atom(tok.text).atom);
        break;
      case TokenKind::bond:
        if (pending_bond) throw TokenizeError(0, "two consecutive bond symbols");
        pending_bond = tok.text[0];
        break;
      case TokenKind::ring_closure: {
        if (prev_atom < 0)
          throw TokenizeError(0, "ring closure before any atom");
        int num = tok.text[0] == '%' ? std::stoi(tok.text.substr(1))
                                     : tok.text[0] - '0';
        auto it = open_rings.find(num);
        if (it == open_rings.end()) {
          open_rings[num] = {prev_atom, pending_bond.value_or('\0')};
          pending_bond.reset();
        } else {
          int other = it->second.first;
          char sym_open = it->second.second;
          char sym_close = pending_bond.value_or('\0');
          open_rings.erase(it);
          pending_bond.reset();
          std::optional<char> sym;
          if (sym_open != '\0')
            sym = sym_open;
          else if (sym_close != '\0')
            sym = sym_close;
          add_bond(other, prev_atom, sym);
        }
        break;
      }
      case TokenKind::branch_open:
        if (prev_atom < 0) throw UnbalancedParentheses();
        atom_stack.push_back(prev_atom);
        break;
      case TokenKind::branch_close:
        if (atom_stack.empty()) throw UnbalancedParentheses();
        prev_atom = atom_stack.back();
        atom_stack.pop_back();
        break;
      case TokenKind::dot:
        prev_atom = -1;
        pending_bond.reset();
        break;
    }
  }
  if (!atom_stack.empty()) throw UnbalancedParentheses();
  if (!open_rings.empty()) throw UnclosedRing(open_rings.begin()->first);
  if (g.atoms.empty()) throw TokenizeError(0, "SMILES contains no atoms");

  const int n = g.atom_count();
  const int m = static_cast<int>(bonds.size());

  // Ring membership: a bond is in a ring iff it is not a bridge.
  {
    std::vector<std::vector<std::pair<int, int>>> adj(
        static_cast<std::size_t>(n));  // (neighbor, bond id)
    for (int b = 0; b < m; ++b) {
      adj[static_cast<std::size_t>(bonds[static_cast<std::size_t>(b)].a)]
          .push_back({bonds[static_cast<std::size_t>(b)].b, b});
      adj[static_cast<std::size_t>(bonds[static_cast<std::size_t>(b)].b)]
          .push_back({bonds[static_cast<std::size_t>(b)].a, b});
    }
    std::vector<int> disc(static_cast<std::size_t>(n), -1),
        low(static_cast<std::size_t>(n), 0);
    int timer = 0;
    // Iterative bridge DFS.
    struct Frame {
      int v;
      int parent_bond;
      std::size_t next_child;
    };
    for (int start = 0; start < n; ++start) {
      if (disc[static_cast<std::size_t>(start)] != -1) continue;
      std::vector<Frame> stack{{start, -1, 0}};
      disc[static_cast<std::size_t>(start)] =
          low[static_cast<std::size_t>(start)] = timer++;
      while (!stack.empty()) {
        Frame& f = stack.back();
        auto& edges = adj[static_cast<std::size_t>(f.v)];
        if (f.next_child < edges.size()) {
          auto [to, bid] = edges[f.next_child++];
          if (bid == f.parent_bond) continue;
          if (disc[static_cast<std::size_t>(to)] != -1) {
            // back edge: always on a cycle
            bonds[static_cast<std::size_t>(bid)].in_ring = true;
            low[static_cast<std::size_t>(f.v)] =
                std::min(low[static_cast<std::size_t>(f.v)],
                         disc[static_cast<std::size_t>(to)]);
          } else {
            disc[static_cast<std::size_t>(to)] =
                low[static_cast<std::size_t>(to)] = timer++;
            stack.push_back({to, bid, 0});
          }
        } else {
          int v = f.v;
          int pb = f.parent_bond;
          stack.pop_back();
          if (!stack.empty()) {
            int u = stack.back().v;
            low[static_cast<std::size_t>(u)] =
                std::min(low[static_cast<std::size_t>(u)],
                         low[static_cast<std::size_t>(v)]);
            if (low[static_cast<std::size_t>(v)] >
                disc[static_cast<std::size_t>(u)]) {
              // pb is a bridge
            } else {
              bonds[static_cast<std::size_t>(pb)].in_ring = true;
            }
          }
        }
      }
    }
  }

  // Aromatic bonds outside rings (e.g. the implicit biphenyl linker)
  // demote to single; declared aromaticity is only trusted inside rings.
  for (auto& b : bonds)
    if (b.order == BondOrder::aromatic && !b.in_ring)
      b.order = BondOrder::single;

  // E/Z assignment from slash pairs around double bonds.
  {
    // For each atom, incident directional bonds with orientation away from it.
    auto slash_away = [&](const UndirectedBond& b, int from) -> int {
      // +1 up, -1 down, oriented from `from` to the other end
      int s = b.slash == detail::SlashDir::up ? 1 : -1;
      return b.a == from ? s : -s;
    };
    for (auto& db : bonds) {
      if (db.order != BondOrder::double_) continue;
      int sa = 0, sb = 0;
      for (const auto& b : bonds) {
        if (b.slash == detail::SlashDir::none) continue;
        if (b.a == db.a || b.b == db.a) {
          if (!(b.a == db.a && b.b == db.b) && !(b.a == db.b && b.b == db.a))
            sa = slash_away(b, db.a);
        }
        if (b.a == db.b || b.b == db.b) {
          if (!(b.a == db.a && b.b == db.b) && !(b.a == db.b && b.b == db.a))
            sb = slash_away(b, db.b);
        }
      }
      if (sa != 0 && sb != 0)
        db.stereo = (sa == sb) ? BondStereo::Z : BondStereo::E;
    }
  }

  // Conjugation: aromatic, or both endpoints touch another multiple/aromatic bond.
  {
    std::vector<bool> has_multi(static_cast<std::size_t>(n), false);
    auto is_multi = [](BondOrder o) {
      return o == BondOrder::double_ || o == BondOrder::triple ||
             o == BondOrder::aromatic;
    };
    for (auto& db : bonds) {
      if (db.order == BondOrder::aromatic) {
        db.conjugated = true;
        continue;
      }
      auto endpoint_ok = [&](int atom) {
        for (const auto& b : bonds) {
          if (&b == &db) continue;
          if ((b.a == atom || b.b == atom) && is_multi(b.order)) return true;
        }
        return false;
      };
      db.conjugated = endpoint_ok(db.a) && endpoint_ok(db.b);
    }
  }

  // Materialize paired directed edges.
  g.incoming.assign(static_cast<std::size_t>(n), {});
  for (const auto& ub : bonds) {
    Bond bond;
    bond.order = ub.order;
    bond.stereo = ub.stereo;
    bond.in_ring = ub.in_ring;
    bond.conjugated = ub.conjugated;
    int fwd = g.edge_count();
    g.directed_edges.push_back({ub.a, ub.b, bond});
    g.directed_edges.push_back({ub.b, ub.a, bond});
    g.rev.push_back(fwd + 1);
    g.rev.push_back(fwd);
    g.incoming[static_cast<std::size_t>(ub.b)].push_back(fwd);
    g.incoming[static_cast<std::size_t>(ub.a)].push_back(fwd + 1);
  }

  // Implicit hydrogens.
  g.implicit_h.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    double sum = 0.0;
    for (const auto& ub : bonds) {
      if (ub.a != v && ub.b != v) continue;
      switch (ub.order) {
        case BondOrder::single: sum += 1.0; break;
        case BondOrder::double_: sum += 2.0; break;
        case BondOrder::triple: sum += 3.0; break;
        case BondOrder::aromatic: sum += 1.5; break;
      }
    }
    g.implicit_h[static_cast<std::size_t>(v)] =
        implicit_hydrogen_count(g.atoms[static_cast<std::size_t>(v)], sum, v);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Murcko scaffold
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/// Canonical key of the molecule's ring-and-linker framework: iteratively
/// delete terminal atoms, then Weisfeiler-Lehman hash the remainder.
/// Acyclic molecules get the empty key.
inline std::string murcko_scaffold(const MolGraph& g) {
  const int n = g.atom_count();
  struct SBond {
    int a, b;
    BondOrder order;
  };
  std::vector<SBond> bonds;
  for (int e = 0; e < g.edge_count(); e += 2)
    bonds.push_back({g.directed_edges[static_cast<std::size_t>(e)].source,
                     g.directed_edges[static_cast<std::size_t>(e)].target,
                     g.directed_edges[static_cast<std::size_t>(e)].bond.order});

  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (const auto& b : bonds) {
      if (!alive[static_cast<std::size_t>(b.a)] ||
          !alive[static_cast<std::size_t>(b.b)])
        continue;
      ++deg[static_cast<std::size_t>(b.a)];
      ++deg[static_cast<std::size_t>(b.b)];
    }
    for (int v = 0; v < n; ++v) {
      if (alive[static_cast<std::size_t>(v)] &&
          deg[static_cast<std::size_t>(v)] <= 1) {
        // Keep isolated ring remnants: degree-0 atoms only die when acyclic,
        // which is exactly the terminal-deletion fixpoint anyway.
        alive[static_cast<std::size_t>(v)] = false;
        changed = true;
      }
    }
  }

  std::vector<int> kept;
  for (int v = 0; v < n; ++v)
    if (alive[static_cast<std::size_t>(v)]) kept.push_back(v);
  if (kept.empty()) return "";

  std::unordered_map<int, int> remap;
  for (std::size_t i = 0; i < kept.size(); ++i)
    remap[kept[i]] = static_cast<int>(i);

  struct Nbr {
    int to;
    int order;
  };
  std::vector<std::vector<Nbr>> adj(kept.size());
  for (const auto& b : bonds) {
    if (!alive[static_cast<std::size_t>(b.a)] ||
        !alive[static_cast<std::size_t>(b.b)])
      continue;
    int o = static_cast<int>(b.order);
    adj[static_cast<std::size_t>(remap[b.a])].push_back({remap[b.b], o});
    adj[static_cast<std::size_t>(remap[b.b])].push_back({remap[b.a], o});
  }

  std::vector<std::uint64_t> h(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const Atom& a = g.atoms[static_cast<std::size_t>(kept[i])];
    h[i] = detail::hash_combine(detail::hash_string(a.element),
                                a.aromatic ? 0x61726fULL : 0ULL);
  }
  const std::size_t rounds = kept.size();
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<std::uint64_t> next(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      std::vector<std::uint64_t> nb;
      for (const auto& e : adj[i])
        nb.push_back(detail::hash_combine(
            static_cast<std::uint64_t>(e.order) + 1,
            h[static_cast<std::size_t>(e.to)]));
      std::sort(nb.begin(), nb.end());
      std::uint64_t acc = h[i];
      for (auto v : nb) acc = detail::hash_combine(acc, v);
      next[i] = acc;
    }
    h = std::move(next);
  }
  std::sort(h.begin(), h.end());
  std::uint64_t digest = static_cast<std::uint64_t>(kept.size());
  for (auto v : h) digest = detail::hash_combine(digest, v);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return std::string(buf);
}

}  // namespace mmsg::chem
