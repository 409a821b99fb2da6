#pragma once

// Directed multi-hypergraph of molecules and reactions, integer hyperflows
// over it, and its JSON / DOT representations.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperpath/molgraph.hpp"

namespace hyperpath {

enum class VertexId : std::uint32_t {};
enum class EdgeId : std::uint32_t {};

constexpr std::uint32_t index(VertexId v) { return static_cast<std::uint32_t>(v); }
constexpr std::uint32_t index(EdgeId e) { return static_cast<std::uint32_t>(e); }

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stoichiometric bag: vertex -> positive multiplicity.
using Bag = std::map<VertexId, int>;

struct Vertex {
  VertexId id{};
  CanonicalForm key;
  MolecularGraph graph;
  std::string name;
};

struct Hyperedge {
  EdgeId id{};
  Bag reactants;
  Bag products;
  std::optional<EdgeId> reverse_of;
};

class Hypergraph {
 public:
  /// Returns the existing vertex when a molecule with the same canonical
  /// key is already present.
  VertexId add_molecule(const MolecularGraph& g, std::string name = {}) {
    auto key = canonical_form(g);
    if (auto it = by_key_.find(key.key); it != by_key_.end()) return it->second;
    return push_vertex(std::move(key), g, std::move(name));
  }

  /// Vertex without molecular content, identified by its name alone.
  VertexId add_abstract_vertex(const std::string& name) {
    CanonicalForm key{"@" + name};
    if (auto it = by_key_.find(key.key); it != by_key_.end()) return it->second;
    return push_vertex(std::move(key), MolecularGraph{}, name);
  }

  /// Adding an identical (reactants, products) pair again returns the
  /// existing edge. Reverse pairs are cross-linked.
  EdgeId add_reaction(const Bag& reactants, const Bag& products) {
    if (reactants.empty() && products.empty()) throw InputError("empty reaction");
    for (const auto* bag : {&reactants, &products})
      for (const auto& [v, mult] : *bag) {
        if (index(v) >= vertices_.size())
          throw InputError("reaction references unknown vertex " + std::to_string(index(v)));
        if (mult <= 0) throw InputError("stoichiometric multiplicity must be positive");
      }
    if (auto it = by_bags_.find({reactants, products}); it != by_bags_.end()) return it->second;
    EdgeId id{static_cast<std::uint32_t>(edges_.size())};
    Hyperedge edge{id, reactants, products, std::nullopt};
    if (auto rev = by_bags_.find({products, reactants}); rev != by_bags_.end()) {
      edge.reverse_of = rev->second;
      if (!edges_[index(rev->second)].reverse_of) edges_[index(rev->second)].reverse_of = id;
    }
    edges_.push_back(std::move(edge));
    by_bags_.emplace(std::make_pair(reactants, products), id);
    return id;
  }

  std::optional<EdgeId> find_reaction(const Bag& reactants, const Bag& products) const {
    auto it = by_bags_.find({reactants, products});
    if (it == by_bags_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<VertexId> find_vertex(const CanonicalForm& key) const {
    auto it = by_key_.find(key.key);
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  /// Looks a vertex up by display name first, then by decimal id.
  std::optional<VertexId> resolve_vertex(const std::string& token) const {
    for (const auto& v : vertices_)
      if (!v.name.empty() && v.name == token) return v.id;
    if (auto n = detail::parse_int(token); n && *n >= 0 && static_cast<std::size_t>(*n) < vertices_.size())
      return VertexId{static_cast<std::uint32_t>(*n)};
    return std::nullopt;
  }

  void set_name(VertexId v, std::string name) { vertices_.at(index(v)).name = std::move(name); }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  const Vertex& vertex(VertexId v) const { return vertices_.at(index(v)); }
  const Hyperedge& edge(EdgeId e) const { return edges_.at(index(e)); }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::string label(VertexId v) const {
    const auto& vx = vertex(v);
    if (!vx.name.empty()) return vx.name;
    return "v" + std::to_string(index(v));
  }

 private:
  VertexId push_vertex(CanonicalForm key, const MolecularGraph& g, std::string name) {
    VertexId id{static_cast<std::uint32_t>(vertices_.size())};
    by_key_.emplace(key.key, id);
    vertices_.push_back({id, std::move(key), g, std::move(name)});
    return id;
  }

  std::vector<Vertex> vertices_;
  std::vector<Hyperedge> edges_;
  std::map<std::string, VertexId> by_key_;
  std::map<std::pair<Bag, Bag>, EdgeId> by_bags_;
};

// ---------------------------------------------------------------------------
// Hyperflows

enum class FlowKind : std::uint8_t { Reaction, Inflow, Outflow };

/// A real hyperedge, or the inflow / outflow half-edge of a vertex.
struct FlowKey {
  FlowKind kind = FlowKind::Reaction;
  std::uint32_t id = 0;

  static FlowKey reaction(EdgeId e) { return {FlowKind::Reaction, index(e)}; }
  static FlowKey inflow(VertexId v) { return {FlowKind::Inflow, index(v)}; }
  static FlowKey outflow(VertexId v) { return {FlowKind::Outflow, index(v)}; }

  bool is_half_edge() const { return kind != FlowKind::Reaction; }

  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

inline std::string to_string(FlowKey k) {
  switch (k.kind) {
    case FlowKind::Reaction: return "f_" + std::to_string(k.id);
    case FlowKind::Inflow: return "in_" + std::to_string(k.id);
    case FlowKind::Outflow: return "out_" + std::to_string(k.id);
  }
  return {};
}

struct Hyperflow {
  std::map<FlowKey, long long> flow;

  long long operator[](FlowKey k) const {
    auto it = flow.find(k);
    return it == flow.end() ? 0 : it->second;
  }
};

using Support = std::set<EdgeId>;

/// Net production of every vertex under f (zero everywhere iff f conserves).
inline std::vector<long long> vertex_balance(const Hypergraph& h, const Hyperflow& f) {
  std::vector<long long> balance(h.vertex_count(), 0);
  for (const auto& [key, value] : f.flow) {
    if (value < 0) throw InputError("negative flow on " + to_string(key));
    switch (key.kind) {
      case FlowKind::Reaction: {
        if (key.id >= h.edge_count()) throw InputError("unknown edge " + std::to_string(key.id));
        const auto& e = h.edges()[key.id];
        for (const auto& [v, m] : e.reactants) balance[index(v)] -= m * value;
        for (const auto& [v, m] : e.products) balance[index(v)] += m * value;
        break;
      }
      case FlowKind::Inflow:
      case FlowKind::Outflow:
        if (key.id >= h.vertex_count()) throw InputError("unknown vertex " + std::to_string(key.id));
        balance[key.id] += key.kind == FlowKind::Inflow ? value : -value;
        break;
    }
  }
  return balance;
}

inline bool check_conservation(const Hypergraph& h, const Hyperflow& f) {
  for (long long b : vertex_balance(h, f))
    if (b != 0) return false;
  return true;
}

inline Support support(const Hyperflow& f) {
  Support s;
  for (const auto& [key, value] : f.flow)
    if (key.kind == FlowKind::Reaction && value >= 1) s.insert(EdgeId{key.id});
  return s;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json bag_to_json(const Bag& bag) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [v, m] : bag) j[std::to_string(index(v))] = m;
  return j;
}

inline nlohmann::json to_json(const Hypergraph& h) {
  nlohmann::json vertices = nlohmann::json::array();
  for (const auto& v : h.vertices()) {
    nlohmann::json jv = {{"id", index(v.id)}, {"key", v.key.key}, {"mgf", serialize_molecule(v.graph)}};
    if (!v.name.empty()) jv["name"] = v.name;
    vertices.push_back(std::move(jv));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : h.edges()) {
    edges.push_back({{"id", index(e.id)},
                     {"reactants", bag_to_json(e.reactants)},
                     {"products", bag_to_json(e.products)},
                     {"reverse_of", e.reverse_of ? nlohmann::json(index(*e.reverse_of)) : nlohmann::json()}});
  }
  return {{"vertices", std::move(vertices)}, {"edges", std::move(edges)}};
}

/// Vertex and edge ids in the document must be dense and in order, so ids
/// survive a round trip unchanged.
inline Hypergraph hypergraph_from_json(const nlohmann::json& j) {
  Hypergraph h;
  try {
    const auto& vertices = j.at("vertices");
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const auto& jv = vertices[i];
      if (jv.at("id").get<std::size_t>() != i) throw InputError("vertex ids must be dense and ordered");
      std::string name = jv.value("name", std::string());
      std::string mgf = jv.value("mgf", std::string());
      VertexId id{};
      if (mgf.find("atom") == std::string::npos) {
        if (name.empty()) name = "v" + std::to_string(i);
        id = h.add_abstract_vertex(name);
      } else {
        id = h.add_molecule(parse_molecule(mgf), name);
      }
      if (index(id) != i) throw InputError("duplicate vertex at index " + std::to_string(i));
    }
    const auto& edges = j.at("edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& je = edges[i];
      if (je.at("id").get<std::size_t>() != i) throw InputError("edge ids must be dense and ordered");
      auto read_bag = [&](const nlohmann::json& jb) {
        Bag bag;
        for (const auto& [k, m] : jb.items()) {
          auto vid = detail::parse_int(k);
          if (!vid || *vid < 0) throw InputError("bad vertex id '" + k + "'");
          bag[VertexId{static_cast<std::uint32_t>(*vid)}] = m.get<int>();
        }
        return bag;
      };
      auto id = h.add_reaction(read_bag(je.at("reactants")), read_bag(je.at("products")));
      if (index(id) != i) throw InputError("duplicate edge at index " + std::to_string(i));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed hypergraph JSON: ") + e.what());
  } catch (const ParseError& e) {
    throw InputError(std::string("malformed vertex MGF: ") + e.what());
  }
  return h;
}

// ---------------------------------------------------------------------------
// DOT

/// Circles for molecules, boxes for hyperedges, one arrow per unit of
/// multiplicity. Edges in the flow's support are bold and labeled with
/// their flow; half-edge flows become dangling arrows.
inline std::string to_dot(const Hypergraph& h, const Hyperflow* flow = nullptr) {
  std::ostringstream out;
  Support bold = flow ? support(*flow) : Support{};
  out << "digraph hypergraph {\n  rankdir=LR;\n";
  for (const auto& v : h.vertices()) {
    std::string text = v.name.empty() ? (v.graph.empty() ? h.label(v.id) : formula(v.graph)) : v.name;
    out << "  v" << index(v.id) << " [shape=circle, label=\"" << text << "\"];\n";
  }
  for (const auto& e : h.edges()) {
    bool on = bold.contains(e.id);
    std::string style = on ? ", penwidth=3" : "";
    std::string text = "e" + std::to_string(index(e.id));
    if (on) text += "\\n" + std::to_string((*flow)[FlowKey::reaction(e.id)]);
    out << "  e" << index(e.id) << " [shape=box, label=\"" << text << "\"" << style << "];\n";
    for (const auto& [v, m] : e.reactants)
      for (int k = 0; k < m; ++k)
        out << "  v" << index(v) << " -> e" << index(e.id) << (on ? " [penwidth=3]" : "") << ";\n";
    for (const auto& [v, m] : e.products)
      for (int k = 0; k < m; ++k)
        out << "  e" << index(e.id) << " -> v" << index(v) << (on ? " [penwidth=3]" : "") << ";\n";
  }
  if (flow) {
    for (const auto& [key, value] : flow->flow) {
      if (!key.is_half_edge() || value == 0) continue;
      std::string node = to_string(key);
      out << "  " << node << " [shape=point];\n";
      if (key.kind == FlowKind::Inflow)
        out << "  " << node << " -> v" << key.id << " [label=\"" << value << "\"];\n";
      else
        out << "  v" << key.id << " -> " << node << " [label=\"" << value << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace hyperpath
