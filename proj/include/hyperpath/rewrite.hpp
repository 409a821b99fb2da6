#pragma once

// Double-pushout rewriting of molecular graphs with bond-changing rules,
// and breadth-first generation of a reaction network from seed molecules.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "hyperpath/molgraph.hpp"
#include "hyperpath/netcore.hpp"

namespace hyperpath {

struct PatternVertex {
  int id = 0;
  std::string label;  // element symbol or label-class name
};

/// Edge between two vertex indices of the pattern.
struct PatternEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  BondOrder order = BondOrder::Single;
};

struct PatternGraph {
  std::vector<PatternVertex> vertices;
  std::vector<PatternEdge> edges;

  std::optional<std::size_t> find(int id) const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].id == id) return i;
    return std::nullopt;
  }

  /// Edges keyed by the unordered pair of vertex ids.
  std::map<std::pair<int, int>, BondOrder> edge_map() const {
    std::map<std::pair<int, int>, BondOrder> out;
    for (const auto& e : edges) {
      int a = vertices[e.a].id, b = vertices[e.b].id;
      out[{std::min(a, b), std::max(a, b)}] = e.order;
    }
    return out;
  }
};

/// Rule whose three graphs share one vertex set; only bonds change.
struct Rule {
  std::string name;
  PatternGraph left;
  PatternGraph context;
  PatternGraph right;
  std::map<std::string, std::vector<Element>> label_classes;
  bool reversible = false;
};

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void validate_pattern(const PatternGraph& g, const std::string& where) {
  std::set<int> ids;
  for (const auto& v : g.vertices)
    if (!ids.insert(v.id).second) throw RuleError(where + ": duplicate vertex id " + std::to_string(v.id));
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& e : g.edges) {
    if (e.a == e.b) throw RuleError(where + ": self loop");
    if (!pairs.insert({std::min(e.a, e.b), std::max(e.a, e.b)}).second)
      throw RuleError(where + ": parallel edge");
  }
}

inline bool label_is_element(const std::string& label) { return Element::from_symbol(label).has_value(); }

}  // namespace detail

/// Checks the structural invariants of a rule; throws RuleError.
inline void validate_rule(const Rule& rule) {
  const std::string who = "rule '" + rule.name + "'";
  detail::validate_pattern(rule.left, who + " left");
  detail::validate_pattern(rule.context, who + " context");
  detail::validate_pattern(rule.right, who + " right");
  auto vertex_labels = [](const PatternGraph& g) {
    std::map<int, std::string> out;
    for (const auto& v : g.vertices) out[v.id] = v.label;
    return out;
  };
  auto lv = vertex_labels(rule.left);
  if (vertex_labels(rule.context) != lv)
    throw RuleError(who + ": context vertices must equal left vertices");
  if (vertex_labels(rule.right) != lv)
    throw RuleError(who + ": right vertices must equal left vertices");
  auto le = rule.left.edge_map(), ke = rule.context.edge_map(), re = rule.right.edge_map();
  for (const auto& [pair, order] : ke) {
    auto l = le.find(pair), r = re.find(pair);
    if (l == le.end() || r == re.end() || l->second != order || r->second != order)
      throw RuleError(who + ": context is not a common subgraph of left and right");
  }
  for (const auto& [id, label] : lv)
    if (!detail::label_is_element(label) && !rule.label_classes.contains(label))
      throw RuleError(who + ": unknown label class '" + label + "'");
}

namespace detail {

inline PatternGraph parse_pattern(const std::vector<std::pair<std::string, std::size_t>>& lines) {
  PatternGraph g;
  std::vector<std::tuple<int, int, BondOrder, std::size_t>> bonds;
  for (const auto& [text, line] : lines) {
    auto tokens = tokenize(text);
    if (tokens[0] == "atom") {
      if (tokens.size() != 3) throw ParseError(line, "expected 'atom <id> <label>'");
      auto id = parse_int(tokens[1]);
      if (!id) throw ParseError(line, "pattern id is not an integer");
      g.vertices.push_back({static_cast<int>(*id), tokens[2]});
    } else if (tokens[0] == "bond") {
      if (tokens.size() != 4) throw ParseError(line, "expected 'bond <id1> <id2> <order>'");
      auto a = parse_int(tokens[1]), b = parse_int(tokens[2]);
      auto order = parse_bond_order(tokens[3]);
      if (!a || !b || !order) throw ParseError(line, "malformed bond");
      bonds.emplace_back(static_cast<int>(*a), static_cast<int>(*b), *order, line);
    } else {
      throw ParseError(line, "unknown pattern statement '" + tokens[0] + "'");
    }
  }
  for (const auto& [a, b, order, line] : bonds) {
    auto ia = g.find(a), ib = g.find(b);
    if (!ia || !ib) throw ParseError(line, "bond references a vertex absent from this graph");
    g.edges.push_back({*ia, *ib, order});
  }
  return g;
}

}  // namespace detail

/// Parses every rule in a rule-DSL document.
///
///   rule <name>
///   classes: X = {N,O}; Y = {N,O}
///   left:    atom/bond lines with pattern ids
///   context: ...
///   right:   ...
///   reversible
inline std::vector<Rule> parse_rules(std::string_view text) {
  std::vector<std::size_t> lines;
  auto statements = detail::split_statements(text, lines);
  std::vector<Rule> rules;
  enum class Section { None, Left, Context, Right } section = Section::None;
  std::vector<std::pair<std::string, std::size_t>> left, context, right;
  bool have_rule = false;
  std::size_t rule_line = 0;
  Rule current;

  auto finish = [&] {
    if (!have_rule) return;
    try {
      current.left = detail::parse_pattern(left);
      current.context = detail::parse_pattern(context);
      current.right = detail::parse_pattern(right);
      validate_rule(current);
    } catch (const RuleError& e) {
      throw RuleError("line " + std::to_string(rule_line) + ": " + e.what());
    }
    rules.push_back(std::move(current));
    current = Rule{};
    left.clear();
    context.clear();
    right.clear();
    section = Section::None;
  };

  for (std::size_t i = 0; i < statements.size(); ++i) {
    const auto& st = statements[i];
    std::size_t line = lines[i];
    auto tokens = detail::tokenize(st);
    if (tokens[0] == "rule") {
      finish();
      if (tokens.size() != 2) throw ParseError(line, "expected 'rule <name>'");
      current.name = tokens[1];
      have_rule = true;
      rule_line = line;
      continue;
    }
    if (!have_rule) throw ParseError(line, "statement before the first 'rule'");
    // "classes: X = {N,O}"; further "Y = {...}" definitions may follow after ';'.
    std::string def = st.rfind("classes:", 0) == 0 ? st.substr(8) : std::string();
    if (def.empty() && section == Section::None && tokens.size() >= 2 && tokens[1] == "=") def = st;
    if (!def.empty()) {
      auto eq = def.find('=');
      auto open = def.find('{'), close = def.find('}');
      if (eq == std::string::npos || open == std::string::npos || close == std::string::npos || close < open)
        throw ParseError(line, "expected 'classes: <name> = {El,El,...}'");
      auto name = detail::tokenize(def.substr(0, eq));
      if (name.size() != 1) throw ParseError(line, "malformed class name");
      std::string list = def.substr(open + 1, close - open - 1);
      std::replace(list.begin(), list.end(), ',', ' ');
      std::vector<Element> members;
      for (const auto& sym : detail::tokenize(list)) {
        auto el = Element::from_symbol(sym);
        if (!el) throw ParseError(line, "unknown element in class: " + sym);
        members.push_back(*el);
      }
      if (members.empty()) throw ParseError(line, "empty label class");
      current.label_classes[name[0]] = members;
      continue;
    }
    if (st == "left:") { section = Section::Left; continue; }
    if (st == "context:") { section = Section::Context; continue; }
    if (st == "right:") { section = Section::Right; continue; }
    if (st == "reversible") { current.reversible = true; section = Section::None; continue; }
    switch (section) {
      case Section::Left: left.emplace_back(st, line); break;
      case Section::Context: context.emplace_back(st, line); break;
      case Section::Right: right.emplace_back(st, line); break;
      case Section::None: throw ParseError(line, "unexpected statement '" + st + "'");
    }
  }
  finish();
  return rules;
}

/// Parses a document holding exactly one rule.
inline Rule parse_rule(std::string_view text) {
  auto rules = parse_rules(text);
  if (rules.size() != 1) throw ParseError(1, "expected exactly one rule, found " + std::to_string(rules.size()));
  return std::move(rules.front());
}

inline Rule reverse_rule(const Rule& rule) {
  Rule r = rule;
  r.name = rule.name + "_rev";
  std::swap(r.left, r.right);
  return r;
}

// ---------------------------------------------------------------------------
// Matching

struct HostAtom {
  std::size_t copy = 0;  // position in the host multiset
  std::size_t atom = 0;  // atom index inside that molecule

  friend auto operator<=>(const HostAtom&, const HostAtom&) = default;
};

struct Match {
  /// Image of each left vertex, indexed like rule.left.vertices.
  std::vector<HostAtom> assignment;
  std::map<std::string, Element> class_binding;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> pattern_components(const PatternGraph& g) {
  const std::size_t n = g.vertices.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : g.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> members{s};
    comp[s] = static_cast<int>(out.size());
    for (std::size_t k = 0; k < members.size(); ++k)
      for (auto nb : adj[members[k]])
        if (comp[nb] < 0) {
          comp[nb] = comp[s];
          members.push_back(nb);
        }
    out.push_back(std::move(members));
  }
  return out;
}

class Matcher {
 public:
  Matcher(const Rule& rule, const std::vector<MolecularGraph>& host)
      : rule_(rule), host_(host), components_(pattern_components(rule.left)) {
    const std::size_t n = rule.left.vertices.size();
    pattern_adj_.resize(n);
    for (const auto& e : rule.left.edges) {
      pattern_adj_[e.a].emplace_back(e.b, e.order);
      pattern_adj_[e.b].emplace_back(e.a, e.order);
    }
  }

  std::vector<Match> run() {
    matches_.clear();
    if (host_.empty() || rule_.left.vertices.empty()) return {};
    const std::size_t copies = host_.size();
    if (components_.size() < copies) return {};
    // Assign components to host copies so that every copy is used.
    std::vector<std::size_t> target(components_.size(), 0);
    std::function<void(std::size_t)> assign = [&](std::size_t c) {
      if (c == components_.size()) {
        std::vector<bool> used(copies, false);
        for (auto t : target) used[t] = true;
        if (std::all_of(used.begin(), used.end(), [](bool b) { return b; })) search(target);
        return;
      }
      for (std::size_t t = 0; t < copies; ++t) {
        target[c] = t;
        assign(c + 1);
      }
    };
    assign(0);
    return std::move(matches_);
  }

 private:
  bool compatible(std::size_t pv, const Atom& atom, std::map<std::string, Element>& binding,
                  bool& bound_here) const {
    bound_here = false;
    // A class name takes precedence over an element symbol of the same
    // spelling (the conventional "Y" class vs. yttrium).
    const auto& label = rule_.left.vertices[pv].label;
    auto cls = rule_.label_classes.find(label);
    if (cls == rule_.label_classes.end()) return Element::from_symbol(label) == atom.element;
    if (auto it = binding.find(label); it != binding.end()) return it->second == atom.element;
    const auto& members = cls->second;
    if (std::find(members.begin(), members.end(), atom.element) == members.end()) return false;
    binding[label] = atom.element;
    bound_here = true;
    return true;
  }

  // Vertex order within a component: rarest label first, then always a
  // vertex adjacent to one already placed.
  std::vector<std::size_t> order_component(const std::vector<std::size_t>& comp, std::size_t copy) const {
    const auto& g = host_[copy];
    auto candidates = [&](std::size_t pv) {
      std::size_t count = 0;
      std::map<std::string, Element> scratch;
      bool b = false;
      for (const auto& atom : g.atoms()) {
        auto tmp = scratch;
        if (compatible(pv, atom, tmp, b)) ++count;
      }
      return count;
    };
    std::vector<std::size_t> order;
    std::set<std::size_t> placed;
    std::size_t start = *std::min_element(comp.begin(), comp.end(), [&](std::size_t a, std::size_t b) {
      auto ca = candidates(a), cb = candidates(b);
      return ca != cb ? ca < cb : a < b;
    });
    order.push_back(start);
    placed.insert(start);
    while (order.size() < comp.size()) {
      std::optional<std::size_t> next;
      for (auto pv : comp) {
        if (placed.contains(pv)) continue;
        bool adjacent = std::any_of(pattern_adj_[pv].begin(), pattern_adj_[pv].end(),
                                    [&](const auto& nb) { return placed.contains(nb.first); });
        if (!adjacent) continue;
        if (!next || candidates(pv) < candidates(*next)) next = pv;
      }
      order.push_back(*next);
      placed.insert(*next);
    }
    return order;
  }

  void search(const std::vector<std::size_t>& target) {
    std::vector<std::pair<std::size_t, std::size_t>> plan;  // (pattern vertex, copy)
    for (std::size_t c = 0; c < components_.size(); ++c)
      for (auto pv : order_component(components_[c], target[c])) plan.emplace_back(pv, target[c]);
    std::vector<std::optional<HostAtom>> assignment(rule_.left.vertices.size());
    std::set<HostAtom> used;
    std::map<std::string, Element> binding;
    extend(plan, 0, assignment, used, binding);
  }

  void extend(const std::vector<std::pair<std::size_t, std::size_t>>& plan, std::size_t depth,
              std::vector<std::optional<HostAtom>>& assignment, std::set<HostAtom>& used,
              std::map<std::string, Element>& binding) {
    if (depth == plan.size()) {
      Match m;
      for (const auto& a : assignment) m.assignment.push_back(*a);
      m.class_binding = binding;
      matches_.push_back(std::move(m));
      return;
    }
    const auto [pv, copy] = plan[depth];
    const auto& g = host_[copy];
    // Candidate atoms: neighbors of an already placed pattern neighbor, or all.
    std::vector<std::size_t> candidates;
    std::optional<std::size_t> anchor;
    for (const auto& [nb, order] : pattern_adj_[pv])
      if (assignment[nb]) {
        anchor = nb;
        break;
      }
    if (anchor) {
      for (const auto& [hn, bond] : g.neighbors(assignment[*anchor]->atom)) candidates.push_back(hn);
      std::sort(candidates.begin(), candidates.end());
    } else {
      candidates.resize(g.atom_count());
      std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    }
    for (auto atom : candidates) {
      HostAtom image{copy, atom};
      if (used.contains(image)) continue;
      bool bound_here = false;
      if (!compatible(pv, g.atoms()[atom], binding, bound_here)) continue;
      bool edges_ok = true;
      for (const auto& [nb, order] : pattern_adj_[pv]) {
        if (!assignment[nb]) continue;
        if (assignment[nb]->copy != copy || g.bond_between(atom, assignment[nb]->atom) != order) {
          edges_ok = false;
          break;
        }
      }
      if (edges_ok) {
        assignment[pv] = image;
        used.insert(image);
        extend(plan, depth + 1, assignment, used, binding);
        used.erase(image);
        assignment[pv].reset();
      }
      if (bound_here) binding.erase(rule_.left.vertices[pv].label);
    }
  }

  const Rule& rule_;
  const std::vector<MolecularGraph>& host_;
  std::vector<std::vector<std::size_t>> components_;
  std::vector<std::vector<std::pair<std::size_t, BondOrder>>> pattern_adj_;
  std::vector<Match> matches_;
};

}  // namespace detail

/// All injective, label-compatible monomorphisms of the rule's left graph
/// into the host molecules, where each left component lies inside one host
/// copy and every copy receives at least one component. Order is
/// deterministic.
inline std::vector<Match> find_matches(const Rule& rule, const std::vector<MolecularGraph>& host) {
  return detail::Matcher(rule, host).run();
}

inline std::size_t component_count(const Rule& rule) {
  return detail::pattern_components(rule.left).size();
}

// ---------------------------------------------------------------------------
// Rule application

struct DerivationRecord {
  std::string rule;
  std::map<std::string, Element> class_binding;
  std::vector<CanonicalForm> reactants;  // sorted
  std::vector<CanonicalForm> products;   // sorted
  /// Reactant atom (copy, atom) -> product atom (product index, atom).
  std::map<HostAtom, HostAtom> atom_map;
};

struct Derivation {
  std::vector<MolecularGraph> products;
  DerivationRecord record;
};

/// Maximum total bond order per element, doubled. Elements not listed are
/// not capped.
inline int twice_valence_cap(Element el) {
  switch (el.atomic_number()) {
    case 1: return 2;
    case 6: return 8;
    case 7: return 6;
    case 8: return 4;
    default: return -1;
  }
}

enum class RejectReason { InvalidMatch, EdgeCollision, ValenceExceeded };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::InvalidMatch: return "match does not fit the host";
    case RejectReason::EdgeCollision: return "rule adds a bond that already exists";
    case RejectReason::ValenceExceeded: return "product exceeds the valence cap";
  }
  return "";
}

/// Rewrites the matched host: bonds in left minus context are removed,
/// bonds in right minus context are added, and the result is split into
/// connected product molecules.
inline std::variant<Derivation, RejectReason> try_apply_rule(const Rule& rule, const Match& match,
                                                             const std::vector<MolecularGraph>& host) {
  if (match.assignment.size() != rule.left.vertices.size()) return RejectReason::InvalidMatch;
  // Disjoint union of the host copies.
  std::vector<std::size_t> offset(host.size() + 1, 0);
  for (std::size_t c = 0; c < host.size(); ++c) offset[c + 1] = offset[c] + host[c].atom_count();
  std::vector<Atom> atoms;
  std::map<std::pair<std::size_t, std::size_t>, BondOrder> bonds;
  for (std::size_t c = 0; c < host.size(); ++c) {
    for (const auto& a : host[c].atoms()) atoms.push_back(a);
    for (const auto& b : host[c].bonds()) {
      auto x = offset[c] + b.a, y = offset[c] + b.b;
      bonds[{std::min(x, y), std::max(x, y)}] = b.order;
    }
  }
  auto image = [&](int pattern_id) {
    auto i = *rule.left.find(pattern_id);
    const auto& h = match.assignment[i];
    return offset[h.copy] + h.atom;
  };
  auto key = [](std::size_t x, std::size_t y) { return std::make_pair(std::min(x, y), std::max(x, y)); };

  const auto left = rule.left.edge_map(), context = rule.context.edge_map(), right = rule.right.edge_map();
  for (const auto& [pair, order] : left) {
    auto it = bonds.find(key(image(pair.first), image(pair.second)));
    if (it == bonds.end() || it->second != order) return RejectReason::InvalidMatch;
  }
  for (const auto& [pair, order] : left)
    if (!context.contains(pair)) bonds.erase(key(image(pair.first), image(pair.second)));
  for (const auto& [pair, order] : right) {
    if (context.contains(pair)) continue;
    if (!bonds.emplace(key(image(pair.first), image(pair.second)), order).second)
      return RejectReason::EdgeCollision;
  }

  std::vector<Bond> bond_list;
  for (const auto& [pair, order] : bonds) bond_list.push_back({pair.first, pair.second, order});
  auto merged = MolecularGraph::from_indices(atoms, bond_list);
  for (std::size_t i = 0; i < merged.atom_count(); ++i) {
    int cap = twice_valence_cap(merged.atoms()[i].element);
    if (cap >= 0 && merged.twice_valence_of(i) > cap) return RejectReason::ValenceExceeded;
  }

  Derivation d;
  d.record.rule = rule.name;
  d.record.class_binding = match.class_binding;
  std::vector<std::pair<std::size_t, std::size_t>> where(merged.atom_count());
  auto comps = connected_components(merged);
  for (std::size_t p = 0; p < comps.size(); ++p) {
    for (std::size_t k = 0; k < comps[p].size(); ++k) where[comps[p][k]] = {p, k};
    d.products.push_back(induced_subgraph(merged, comps[p]));
  }
  for (std::size_t c = 0; c < host.size(); ++c)
    for (std::size_t a = 0; a < host[c].atom_count(); ++a) {
      auto [p, k] = where[offset[c] + a];
      d.record.atom_map[{c, a}] = {p, k};
    }
  for (const auto& g : host) d.record.reactants.push_back(canonical_form(g));
  for (const auto& g : d.products) d.record.products.push_back(canonical_form(g));
  std::sort(d.record.reactants.begin(), d.record.reactants.end());
  std::sort(d.record.products.begin(), d.record.products.end());
  return d;
}

class RewriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Derivation apply_rule(const Rule& rule, const Match& match, const std::vector<MolecularGraph>& host) {
  auto result = try_apply_rule(rule, match, host);
  if (auto* reason = std::get_if<RejectReason>(&result))
    throw RewriteError("derivation rejected: " + std::string(to_string(*reason)));
  return std::get<Derivation>(std::move(result));
}

// ---------------------------------------------------------------------------
// Network expansion

/// Ring perception by shortest cycle through each bond.
inline bool right_predicate_no_small_rings(const MolecularGraph& g, int max_forbidden_ring) {
  for (const auto& bond : g.bonds()) {
    // Shortest path from a to b avoiding this bond, plus the bond itself.
    std::vector<int> dist(g.atom_count(), -1);
    std::vector<std::size_t> queue{bond.a};
    dist[bond.a] = 0;
    for (std::size_t k = 0; k < queue.size(); ++k) {
      auto u = queue[k];
      if (dist[u] + 1 >= max_forbidden_ring) break;
      for (const auto& [nb, bi] : g.neighbors(u)) {
        const auto& other = g.bonds()[bi];
        if ((other.a == bond.a && other.b == bond.b) || (other.a == bond.b && other.b == bond.a)) continue;
        if (dist[nb] >= 0) continue;
        dist[nb] = dist[u] + 1;
        queue.push_back(nb);
      }
    }
    if (dist[bond.b] >= 0 && dist[bond.b] + 1 <= max_forbidden_ring) return false;
  }
  return true;
}

/// Rejects allene / ketene style centres: an atom carrying two or more
/// double bonds.
inline bool right_predicate_no_cumulated_double_bonds(const MolecularGraph& g) {
  std::vector<int> doubles(g.atom_count(), 0);
  for (const auto& bond : g.bonds()) {
    if (bond.order != BondOrder::Double) continue;
    if (++doubles[bond.a] > 1 || ++doubles[bond.b] > 1) return false;
  }
  return true;
}

/// Named product filter: "no-rings-le=N" or "no-cumulated-double-bonds".
struct RightPredicate {
  std::string name;
  std::function<bool(const MolecularGraph&)> accepts;
};

inline RightPredicate parse_right_predicate(const std::string& text) {
  const std::string prefix = "no-rings-le=";
  if (text.rfind(prefix, 0) == 0) {
    auto n = detail::parse_int(text.substr(prefix.size()));
    if (!n || *n < 3) throw InputError("ring size in '" + text + "' must be an integer >= 3");
    int limit = static_cast<int>(*n);
    return {text, [limit](const MolecularGraph& g) { return right_predicate_no_small_rings(g, limit); }};
  }
  if (text == "no-cumulated-double-bonds") return {text, right_predicate_no_cumulated_double_bonds};
  throw InputError("unknown filter '" + text + "'");
}

struct ExpansionConfig {
  std::vector<MolecularGraph> seed_molecules;
  std::map<std::string, int> max_element_counts;
  int max_iterations = 1;
  std::vector<std::string> right_predicates;
  int threads = 1;
};

struct IterationStats {
  int iteration = 0;
  std::size_t molecules = 0;
  std::size_t reactions = 0;
};

struct ExpansionResult {
  Hypergraph network;
  std::vector<DerivationRecord> derivations;  // one per edge id
  std::vector<IterationStats> iterations;
};

inline bool within_element_limits(const MolecularGraph& g, const std::map<std::string, int>& limits) {
  for (const auto& [el, count] : element_counts(g)) {
    auto it = limits.find(el);
    if (it != limits.end() && count > it->second) return false;
  }
  return true;
}

namespace detail {

// Multisets of size k over [0, n), as nondecreasing index vectors.
inline void for_each_multiset(std::size_t n, std::size_t k,
                              const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> pick(k, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t from) {
    if (pos == k) {
      visit(pick);
      return;
    }
    for (std::size_t i = from; i < n; ++i) {
      pick[pos] = i;
      rec(pos + 1, i);
    }
  };
  rec(0, 0);
}

}  // namespace detail

/// Applies every rule (and the reverse of each reversible rule) to every
/// multiset of current molecules, one breadth-first stratum per iteration.
/// New molecules become available to the next iteration only.
/// Matching runs on `config.threads` workers; results are committed in the
/// same order as a single-threaded run, so the network is identical.
inline ExpansionResult expand_network(const ExpansionConfig& config, const std::vector<Rule>& rules) {
  if (config.max_iterations < 0) throw InputError("max_iterations must be >= 0");
  if (config.seed_molecules.empty()) throw InputError("expansion needs at least one seed molecule");
  if (config.threads < 1) throw InputError("threads must be >= 1");
  std::vector<RightPredicate> predicates;
  for (const auto& p : config.right_predicates) predicates.push_back(parse_right_predicate(p));

  std::vector<Rule> all_rules;
  for (const auto& r : rules) {
    all_rules.push_back(r);
    if (r.reversible) all_rules.push_back(reverse_rule(r));
  }

  ExpansionResult result;
  auto& net = result.network;
  for (const auto& seed : config.seed_molecules) net.add_molecule(seed);

  struct Task {
    const Rule* rule;
    std::vector<std::size_t> pick;
  };

  for (int it = 1; it <= config.max_iterations; ++it) {
    const std::size_t frozen = net.vertex_count();
    const std::size_t edges_before = net.edge_count();
    std::vector<MolecularGraph> current;
    for (std::size_t v = 0; v < frozen; ++v) current.push_back(net.vertices()[v].graph);

    std::vector<Task> tasks;
    for (const auto& rule : all_rules) {
      const std::size_t max_copies = component_count(rule);
      for (std::size_t copies = 1; copies <= max_copies; ++copies)
        detail::for_each_multiset(frozen, copies,
                                  [&](const std::vector<std::size_t>& pick) { tasks.push_back({&rule, pick}); });
    }

    auto run_task = [&](const Task& task) {
      std::vector<Derivation> out;
      std::vector<MolecularGraph> host;
      for (auto v : task.pick) host.push_back(current[v]);
      for (const auto& match : find_matches(*task.rule, host)) {
        auto outcome = try_apply_rule(*task.rule, match, host);
        auto* d = std::get_if<Derivation>(&outcome);
        if (!d) continue;
        if (d->record.reactants == d->record.products) continue;
        bool ok = true;
        for (const auto& p : d->products) {
          if (!within_element_limits(p, config.max_element_counts)) ok = false;
          for (const auto& pred : predicates)
            if (!pred.accepts(p)) ok = false;
        }
        if (ok) out.push_back(std::move(*d));
      }
      return out;
    };

    std::vector<std::vector<Derivation>> found(tasks.size());
    if (config.threads == 1) {
      for (std::size_t t = 0; t < tasks.size(); ++t) found[t] = run_task(tasks[t]);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      auto worker = [&] {
        try {
          for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) found[t] = run_task(tasks[t]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      };
      std::vector<std::thread> pool;
      for (int k = 0; k < config.threads; ++k) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
      if (failure) std::rethrow_exception(failure);
    }

    for (std::size_t t = 0; t < tasks.size(); ++t) {
      for (auto& d : found[t]) {
        Bag reactants, products;
        for (auto v : tasks[t].pick) ++reactants[VertexId{static_cast<std::uint32_t>(v)}];
        for (const auto& p : d.products) ++products[net.add_molecule(p)];
        auto before = net.edge_count();
        net.add_reaction(reactants, products);
        if (net.edge_count() > before) result.derivations.push_back(std::move(d.record));
      }
    }
    result.iterations.push_back({it, net.vertex_count(), net.edge_count()});
    if (net.vertex_count() == frozen && net.edge_count() == edges_before) break;
  }
  return result;
}

}  // namespace hyperpath
