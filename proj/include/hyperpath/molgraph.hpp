#pragma once

// Labeled molecular graphs: MGF text I/O, element counting and a
// permutation-invariant canonical key used to deduplicate molecules.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace hyperpath {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline constexpr std::array<std::string_view, 118> kElementSymbols = {
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

inline std::vector<std::string> split_statements(std::string_view text,
                                                 std::vector<std::size_t>& line_of) {
  std::vector<std::string> out;
  std::size_t line = 1;
  std::string current;
  auto flush = [&] {
    auto first = current.find_first_not_of(" \t\r");
    if (first != std::string::npos) {
      auto last = current.find_last_not_of(" \t\r");
      out.push_back(current.substr(first, last - first + 1));
      line_of.push_back(line);
    }
    current.clear();
  };
  bool comment = false;
  for (char c : text) {
    if (c == '\n') {
      flush();
      comment = false;
      ++line;
    } else if (comment) {
      continue;
    } else if (c == '#') {
      comment = true;
    } else if (c == ';') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

inline std::vector<std::string> tokenize(const std::string& statement) {
  std::istringstream in(statement);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

inline std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Atomic number wrapper; 0 is reserved for "no element".
class Element {
 public:
  constexpr Element() = default;
  constexpr explicit Element(std::uint8_t atomic_number) : z_(atomic_number) {}

  static std::optional<Element> from_symbol(std::string_view symbol) {
    for (std::size_t i = 0; i < detail::kElementSymbols.size(); ++i)
      if (detail::kElementSymbols[i] == symbol)
        return Element(static_cast<std::uint8_t>(i + 1));
    return std::nullopt;
  }

  std::string_view symbol() const {
    return z_ == 0 ? std::string_view("?") : detail::kElementSymbols[z_ - 1];
  }
  constexpr std::uint8_t atomic_number() const { return z_; }

  friend constexpr auto operator<=>(Element, Element) = default;

 private:
  std::uint8_t z_ = 0;
};

namespace elements {
inline constexpr Element H{1};
inline constexpr Element C{6};
inline constexpr Element N{7};
inline constexpr Element O{8};
}  // namespace elements

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

inline char bond_order_char(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return '1';
    case BondOrder::Double: return '2';
    case BondOrder::Triple: return '3';
    case BondOrder::Aromatic: return 'a';
  }
  return '?';
}

inline std::optional<BondOrder> parse_bond_order(std::string_view s) {
  if (s == "1") return BondOrder::Single;
  if (s == "2") return BondOrder::Double;
  if (s == "3") return BondOrder::Triple;
  if (s == "a") return BondOrder::Aromatic;
  return std::nullopt;
}

/// Bond order doubled so that aromatic bonds (1.5) stay integral.
inline int twice_valence(BondOrder order) {
  return order == BondOrder::Aromatic ? 3 : 2 * static_cast<int>(order);
}

struct Atom {
  int id = 0;
  Element element;
  int charge = 0;
};

/// Bond between two atom indices (positions in MolecularGraph::atoms()).
struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  BondOrder order = BondOrder::Single;
};

/// Simple undirected graph with labeled atoms and bonds. Hydrogens are
/// ordinary vertices. Immutable once built.
class MolecularGraph {
 public:
  MolecularGraph() = default;

  /// Throws std::invalid_argument on duplicate atom ids, self loops, dangling
  /// endpoints or parallel bonds. Bond endpoints are atom ids.
  MolecularGraph(std::vector<Atom> atoms,
                 const std::vector<std::tuple<int, int, BondOrder>>& bonds)
      : atoms_(std::move(atoms)) {
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!index.emplace(atoms_[i].id, i).second)
        throw std::invalid_argument("duplicate atom id " + std::to_string(atoms_[i].id));
    }
    adjacency_.resize(atoms_.size());
    for (const auto& [ida, idb, order] : bonds) {
      auto ia = index.find(ida);
      auto ib = index.find(idb);
      if (ia == index.end() || ib == index.end())
        throw std::invalid_argument("bond " + std::to_string(ida) + "-" +
                                    std::to_string(idb) + " references a missing atom");
      add_bond(ia->second, ib->second, order);
    }
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  std::size_t atom_count() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  /// (neighbor index, bond index) pairs.
  const std::vector<std::pair<std::size_t, std::size_t>>& neighbors(std::size_t atom) const {
    return adjacency_[atom];
  }

  std::optional<BondOrder> bond_between(std::size_t a, std::size_t b) const {
    for (const auto& [n, bond] : adjacency_[a])
      if (n == b) return bonds_[bond].order;
    return std::nullopt;
  }

  int twice_valence_of(std::size_t atom) const {
    int total = 0;
    for (const auto& [n, bond] : adjacency_[atom]) total += twice_valence(bonds_[bond].order);
    return total;
  }

  /// Builds a graph from atoms and index-based bonds; used by rewriting.
  static MolecularGraph from_indices(std::vector<Atom> atoms, const std::vector<Bond>& bonds) {
    MolecularGraph g;
    g.atoms_ = std::move(atoms);
    g.adjacency_.resize(g.atoms_.size());
    for (const auto& b : bonds) g.add_bond(b.a, b.b, b.order);
    return g;
  }

 private:
  void add_bond(std::size_t a, std::size_t b, BondOrder order) {
    if (a == b) throw std::invalid_argument("bond endpoints must be distinct");
    for (const auto& [n, bond] : adjacency_[a])
      if (n == b) throw std::invalid_argument("parallel bond between atoms " +
                                              std::to_string(atoms_[a].id) + " and " +
                                              std::to_string(atoms_[b].id));
    bonds_.push_back({a, b, order});
    adjacency_[a].emplace_back(b, bonds_.size() - 1);
    adjacency_[b].emplace_back(a, bonds_.size() - 1);
  }

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency_;
};

struct CanonicalForm {
  std::string key;
  friend auto operator<=>(const CanonicalForm&, const CanonicalForm&) = default;
};

namespace detail {

inline MolecularGraph parse_molecule_statements(const std::vector<std::string>& statements,
                                                const std::vector<std::size_t>& lines) {
  std::vector<Atom> atoms;
  std::vector<std::tuple<int, int, BondOrder>> bonds;
  std::map<int, std::size_t> seen;
  for (std::size_t s = 0; s < statements.size(); ++s) {
    auto tokens = tokenize(statements[s]);
    std::size_t line = lines[s];
    if (tokens[0] == "atom") {
      if (tokens.size() != 3 && tokens.size() != 4)
        throw ParseError(line, "expected 'atom <id> <element> [charge]'");
      auto id = parse_int(tokens[1]);
      if (!id) throw ParseError(line, "atom id is not an integer: " + tokens[1]);
      auto el = Element::from_symbol(tokens[2]);
      if (!el) throw ParseError(line, "unknown element symbol: " + tokens[2]);
      int charge = 0;
      if (tokens.size() == 4) {
        auto c = parse_int(tokens[3]);
        if (!c) throw ParseError(line, "charge is not an integer: " + tokens[3]);
        charge = static_cast<int>(*c);
      }
      if (!seen.emplace(static_cast<int>(*id), line).second)
        throw ParseError(line, "duplicate atom id " + tokens[1]);
      atoms.push_back({static_cast<int>(*id), *el, charge});
    } else if (tokens[0] == "bond") {
      if (tokens.size() != 4) throw ParseError(line, "expected 'bond <id1> <id2> <order>'");
      auto a = parse_int(tokens[1]);
      auto b = parse_int(tokens[2]);
      if (!a || !b) throw ParseError(line, "bond endpoints must be integers");
      auto order = parse_bond_order(tokens[3]);
      if (!order) throw ParseError(line, "bond order must be 1, 2, 3 or a: " + tokens[3]);
      bonds.emplace_back(static_cast<int>(*a), static_cast<int>(*b), *order);
    } else {
      throw ParseError(line, "unknown statement '" + tokens[0] + "'");
    }
  }
  // Endpoint checks happen after all atoms are known so atoms may follow bonds.
  std::size_t bond_index = 0;
  for (std::size_t s = 0; s < statements.size(); ++s) {
    if (statements[s].rfind("bond", 0) != 0) continue;
    const auto& [a, b, order] = bonds[bond_index++];
    if (!seen.contains(a) || !seen.contains(b))
      throw ParseError(lines[s], "dangling bond endpoint " +
                                     std::to_string(seen.contains(a) ? b : a));
    if (a == b) throw ParseError(lines[s], "bond endpoints must be distinct");
  }
  try {
    return MolecularGraph(std::move(atoms), bonds);
  } catch (const std::invalid_argument& e) {
    throw ParseError(lines.empty() ? 0 : lines.back(), e.what());
  }
}

}  // namespace detail

/// Parses one molecule in MGF. Statements are separated by newlines or ';'.
inline MolecularGraph parse_molecule(std::string_view text) {
  std::vector<std::size_t> lines;
  auto statements = detail::split_statements(text, lines);
  for (std::size_t i = 0; i < statements.size(); ++i)
    if (statements[i] == "---") throw ParseError(lines[i], "unexpected '---' in single-molecule text");
  return detail::parse_molecule_statements(statements, lines);
}

/// Parses a file that may hold several molecules separated by '---' lines.
inline std::vector<MolecularGraph> parse_molecules(std::string_view text) {
  std::vector<std::size_t> lines;
  auto statements = detail::split_statements(text, lines);
  std::vector<MolecularGraph> out;
  std::vector<std::string> block;
  std::vector<std::size_t> block_lines;
  auto flush = [&] {
    if (!block.empty()) out.push_back(detail::parse_molecule_statements(block, block_lines));
    block.clear();
    block_lines.clear();
  };
  for (std::size_t i = 0; i < statements.size(); ++i) {
    if (statements[i] == "---") {
      flush();
    } else {
      block.push_back(statements[i]);
      block_lines.push_back(lines[i]);
    }
  }
  flush();
  return out;
}

inline std::string serialize_molecule(const MolecularGraph& g) {
  std::string out;
  for (const auto& atom : g.atoms()) {
    out += "atom " + std::to_string(atom.id) + " " + std::string(atom.element.symbol());
    if (atom.charge != 0) out += " " + std::to_string(atom.charge);
    out += "\n";
  }
  for (const auto& bond : g.bonds()) {
    out += "bond " + std::to_string(g.atoms()[bond.a].id) + " " +
           std::to_string(g.atoms()[bond.b].id) + " " + bond_order_char(bond.order) + "\n";
  }
  return out;
}

inline std::map<std::string, int> element_counts(const MolecularGraph& g) {
  std::map<std::string, int> counts;
  for (const auto& atom : g.atoms()) ++counts[std::string(atom.element.symbol())];
  return counts;
}

/// Molecular formula in Hill order (C, H, then alphabetical).
inline std::string formula(const MolecularGraph& g) {
  auto counts = element_counts(g);
  std::string out;
  auto emit = [&](const std::string& el) {
    auto it = counts.find(el);
    if (it == counts.end()) return;
    out += el;
    if (it->second > 1) out += std::to_string(it->second);
    counts.erase(it);
  };
  if (counts.contains("C")) {
    emit("C");
    emit("H");
  }
  while (!counts.empty()) emit(counts.begin()->first);
  return out;
}

namespace detail {

// Ranks atoms by signature; equal signatures share a rank. Ranks are dense
// and ordered by signature, so they do not depend on atom numbering.
template <typename Signature>
std::vector<int> rank_by(const std::vector<Signature>& sig) {
  std::vector<Signature> sorted = sig;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> ranks(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i)
    ranks[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), sig[i]) -
                                sorted.begin());
  return ranks;
}

inline int class_count(const std::vector<int>& colors) {
  return colors.empty() ? 0 : *std::max_element(colors.begin(), colors.end()) + 1;
}

inline std::vector<int> refine(const MolecularGraph& g, std::vector<int> colors) {
  const std::size_t n = g.atom_count();
  int classes = class_count(colors);
  while (true) {
    std::vector<std::pair<int, std::vector<std::pair<int, int>>>> sig(n);
    for (std::size_t i = 0; i < n; ++i) {
      sig[i].first = colors[i];
      for (const auto& [nb, bond] : g.neighbors(i))
        sig[i].second.emplace_back(colors[nb], static_cast<int>(g.bonds()[bond].order));
      std::sort(sig[i].second.begin(), sig[i].second.end());
    }
    auto next = rank_by(sig);
    int next_classes = class_count(next);
    if (next_classes == classes) return next;
    colors = std::move(next);
    classes = next_classes;
  }
}

inline std::string encode(const MolecularGraph& g, const std::vector<int>& position) {
  const std::size_t n = g.atom_count();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[position[i]] = i;
  std::string key;
  for (std::size_t p = 0; p < n; ++p) {
    const auto& atom = g.atoms()[order[p]];
    key += atom.element.symbol();
    if (atom.charge != 0) key += (atom.charge > 0 ? "+" : "") + std::to_string(atom.charge);
    key += ' ';
  }
  std::vector<std::tuple<int, int, char>> edges;
  for (const auto& b : g.bonds()) {
    int pa = position[b.a], pb = position[b.b];
    if (pa > pb) std::swap(pa, pb);
    edges.emplace_back(pa, pb, bond_order_char(b.order));
  }
  std::sort(edges.begin(), edges.end());
  key += '|';
  for (const auto& [a, b, o] : edges)
    key += std::to_string(a) + '-' + std::to_string(b) + o + ' ';
  return key;
}

inline void search_canonical(const MolecularGraph& g, const std::vector<int>& colors,
                             std::optional<std::string>& best) {
  const std::size_t n = g.atom_count();
  const int classes = class_count(colors);
  if (static_cast<std::size_t>(classes) == n) {
    std::string key = encode(g, colors);
    if (!best || key < *best) best = std::move(key);
    return;
  }
  // Smallest non-singleton cell; ties go to the lowest color.
  std::vector<int> size(classes, 0);
  for (int c : colors) ++size[c];
  int target = -1;
  for (int c = 0; c < classes; ++c)
    if (size[c] > 1 && (target < 0 || size[c] < size[target])) target = c;
  // Swapping twins (same color, same neighbors with the same bond orders) is
  // an automorphism of the colored graph, so only one of them is branched on.
  auto neighborhood = [&](std::size_t v, std::size_t other) {
    std::vector<std::pair<std::size_t, int>> out;
    for (const auto& [nb, bond] : g.neighbors(v))
      if (nb != other) out.emplace_back(nb, static_cast<int>(g.bonds()[bond].order));
    std::sort(out.begin(), out.end());
    return out;
  };
  std::vector<std::size_t> tried;
  for (std::size_t v = 0; v < n; ++v) {
    if (colors[v] != target) continue;
    bool twin = std::any_of(tried.begin(), tried.end(), [&](std::size_t u) {
      return neighborhood(u, v) == neighborhood(v, u);
    });
    if (twin) continue;
    tried.push_back(v);
    std::vector<std::pair<int, int>> split(n);
    for (std::size_t i = 0; i < n; ++i) split[i] = {colors[i], (colors[i] == target && i != v) ? 1 : 0};
    search_canonical(g, refine(g, rank_by(split)), best);
  }
}

}  // namespace detail

/// Color refinement followed by exhaustive individualization of the
/// smallest remaining cell; the lexicographically smallest leaf encoding
/// is the key.
inline CanonicalForm canonical_form(const MolecularGraph& g) {
  const std::size_t n = g.atom_count();
  if (n == 0) return {"|"};
  std::vector<std::pair<int, int>> initial(n);
  for (std::size_t i = 0; i < n; ++i)
    initial[i] = {g.atoms()[i].element.atomic_number(), g.atoms()[i].charge};
  auto colors = detail::refine(g, detail::rank_by(initial));
  std::optional<std::string> best;
  detail::search_canonical(g, colors, best);
  return {*best};
}

/// Connected components as lists of atom indices, each sorted ascending and
/// ordered by their smallest member.
inline std::vector<std::vector<std::size_t>> connected_components(const MolecularGraph& g) {
  const std::size_t n = g.atom_count();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> members{s};
    comp[s] = static_cast<int>(out.size());
    for (std::size_t k = 0; k < members.size(); ++k)
      for (const auto& [nb, bond] : g.neighbors(members[k]))
        if (comp[nb] < 0) {
          comp[nb] = comp[s];
          members.push_back(nb);
        }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

/// Induced subgraph on the given atom indices; atom ids renumbered from 1.
inline MolecularGraph induced_subgraph(const MolecularGraph& g, const std::vector<std::size_t>& atoms) {
  std::vector<int> local(g.atom_count(), -1);
  std::vector<Atom> out_atoms;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    local[atoms[i]] = static_cast<int>(i);
    Atom a = g.atoms()[atoms[i]];
    a.id = static_cast<int>(i) + 1;
    out_atoms.push_back(a);
  }
  std::vector<Bond> bonds;
  for (const auto& b : g.bonds())
    if (local[b.a] >= 0 && local[b.b] >= 0)
      bonds.push_back({static_cast<std::size_t>(local[b.a]), static_cast<std::size_t>(local[b.b]), b.order});
  return MolecularGraph::from_indices(std::move(out_atoms), bonds);
}

}  // namespace hyperpath
