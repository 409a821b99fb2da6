#pragma once

// Pathway queries as integer linear programs: flow conservation, big-M
// indicator linking, query bounds and support-elimination cuts. Also the
// LP relaxation and an LP-file writer.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperpath/kinetics.hpp"
#include "hyperpath/netcore.hpp"

namespace hyperpath {

struct FlowBounds {
  long long min = 0;
  long long max = 0;
};

struct PathwayQuery {
  std::map<VertexId, FlowBounds> sources;    // inflow bounds
  std::map<VertexId, FlowBounds> targets;    // outflow bounds
  std::map<VertexId, long long> byproducts;  // outflow in [0, max]
  std::set<EdgeId> forbidden_edges;
  long long flow_cap = 10;
  // flux-mode demo: maximize the outflow of one target instead of the
  // energy objective
  std::optional<VertexId> maximize_outflow;
  std::optional<long long> inflow_total_max;
};

inline void validate_query(const PathwayQuery& q, const Hypergraph& h) {
  auto check_vertex = [&](VertexId v) {
    if (index(v) >= h.vertex_count()) throw InputError("query references unknown vertex " + std::to_string(index(v)));
  };
  auto check_bounds = [](const FlowBounds& b, const std::string& what) {
    if (b.min < 0 || b.max < b.min) throw InputError("bad bounds for " + what);
  };
  for (const auto& [v, b] : q.sources) {
    check_vertex(v);
    check_bounds(b, "source " + std::to_string(index(v)));
  }
  for (const auto& [v, b] : q.targets) {
    check_vertex(v);
    check_bounds(b, "target " + std::to_string(index(v)));
  }
  for (const auto& [v, m] : q.byproducts) {
    check_vertex(v);
    if (m < 0) throw InputError("negative by-product bound for vertex " + std::to_string(index(v)));
    if (q.targets.contains(v))
      throw InputError("vertex " + std::to_string(index(v)) + " is both target and by-product");
  }
  for (auto e : q.forbidden_edges)
    if (index(e) >= h.edge_count()) throw InputError("query forbids unknown edge " + std::to_string(index(e)));
  if (q.flow_cap < 1) throw InputError("flow cap must be a positive integer");
  if (q.maximize_outflow && !q.targets.contains(*q.maximize_outflow) && !q.byproducts.contains(*q.maximize_outflow))
    throw InputError("maximize_outflow vertex must be a target or by-product");
  if (q.inflow_total_max && *q.inflow_total_max < 0) throw InputError("negative inflow_total max");
}

/// Vertex keys are names or decimal ids; edge ids may carry an 'e' prefix.
inline PathwayQuery query_from_json(const nlohmann::json& j, const Hypergraph& h) {
  PathwayQuery q;
  auto vertex = [&](const std::string& token) {
    auto v = h.resolve_vertex(token);
    if (!v) throw InputError("query references unknown vertex '" + token + "'");
    return *v;
  };
  auto bounds = [](const nlohmann::json& jb) {
    FlowBounds b;
    if (jb.is_number_integer()) {
      b.min = b.max = jb.get<long long>();
    } else {
      b.min = jb.value("min", 0LL);
      b.max = jb.at("max").get<long long>();
    }
    return b;
  };
  try {
    if (!j.is_object()) throw InputError("query must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      static const std::set<std::string> known{"sources",   "targets",          "byproducts",   "forbidden_edges",
                                               "flow_cap",  "maximize_outflow", "inflow_total"};
      if (!known.contains(key)) throw InputError("unknown query field '" + key + "'");
    }
    if (j.contains("sources"))
      for (const auto& [k, jb] : j.at("sources").items()) q.sources[vertex(k)] = bounds(jb);
    if (j.contains("targets"))
      for (const auto& [k, jb] : j.at("targets").items()) q.targets[vertex(k)] = bounds(jb);
    if (j.contains("byproducts"))
      for (const auto& [k, jm] : j.at("byproducts").items()) q.byproducts[vertex(k)] = jm.get<long long>();
    if (j.contains("forbidden_edges"))
      for (const auto& je : j.at("forbidden_edges")) {
        std::string token = je.is_string() ? je.get<std::string>() : std::to_string(je.get<long long>());
        if (!token.empty() && token[0] == 'e') token.erase(0, 1);
        auto id = detail::parse_int(token);
        if (!id || *id < 0 || static_cast<std::size_t>(*id) >= h.edge_count())
          throw InputError("query forbids unknown edge '" + token + "'");
        q.forbidden_edges.insert(EdgeId{static_cast<std::uint32_t>(*id)});
      }
    q.flow_cap = j.value("flow_cap", q.flow_cap);
    if (j.contains("maximize_outflow")) q.maximize_outflow = vertex(j.at("maximize_outflow").get<std::string>());
    if (j.contains("inflow_total")) q.inflow_total_max = j.at("inflow_total").at("max").get<long long>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed query JSON: ") + e.what());
  }
  validate_query(q, h);
  return q;
}

// ---------------------------------------------------------------------------
// Model

enum class VarKind : std::uint8_t { Flow, Indicator, Inflow, Outflow };
enum class RowKind : std::uint8_t { Conservation, Linking, Query, Cut };
enum class RowSense : std::uint8_t { Le, Ge, Eq };
enum class ObjectiveSense : std::uint8_t { Minimize, Maximize };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Flow;
  std::uint32_t ref = 0;  // edge id or vertex id
  double lb = 0;
  double ub = 0;
  bool integer = true;
};

struct Term {
  std::size_t var = 0;
  double coef = 0;
};

struct Row {
  std::string name;
  RowKind kind = RowKind::Conservation;
  std::vector<Term> terms;
  RowSense sense = RowSense::Eq;
  double rhs = 0;
};

struct IlpModel {
  std::vector<Variable> vars;
  std::vector<Row> rows;
  std::vector<double> cost;  // one per variable
  ObjectiveSense sense = ObjectiveSense::Minimize;
  long long flow_cap = 0;
  std::size_t cut_count = 0;

  std::map<FlowKey, std::size_t> flow_var;
  std::map<EdgeId, std::size_t> indicator_var;

  std::size_t count(RowKind kind) const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.kind == kind;
    return n;
  }

  std::optional<std::size_t> find(FlowKey k) const {
    auto it = flow_var.find(k);
    if (it == flow_var.end()) return std::nullopt;
    return it->second;
  }

  bool maximizing() const { return sense == ObjectiveSense::Maximize; }

  std::size_t add_var(Variable v, double c = 0) {
    vars.push_back(std::move(v));
    cost.push_back(c);
    return vars.size() - 1;
  }
};

/// Same data, integrality ignored by the LP solver.
using LpModel = IlpModel;

/// Variables: f_e and z_e for every edge (interleaved, by edge id), then
/// in_v / out_v for query vertices by vertex id. Rows: conservation per
/// vertex, two linking rows per edge, query rows.
inline IlpModel build_model(const Hypergraph& h, const WeightModel& weights, const PathwayQuery& q) {
  validate_query(q, h);
  IlpModel m;
  m.flow_cap = q.flow_cap;
  m.sense = q.maximize_outflow ? ObjectiveSense::Maximize : ObjectiveSense::Minimize;
  const double cap = static_cast<double>(q.flow_cap);

  for (const auto& e : h.edges()) {
    auto w = weights.coeff.find(e.id);
    if (w == weights.coeff.end()) throw InputError("no weight for edge " + std::to_string(index(e.id)));
    bool banned = q.forbidden_edges.contains(e.id);
    auto id = std::to_string(index(e.id));
    auto f = m.add_var({"f_" + id, VarKind::Flow, index(e.id), 0, banned ? 0 : cap, true},
                       q.maximize_outflow ? 0.0 : w->second);
    auto z = m.add_var({"z_" + id, VarKind::Indicator, index(e.id), 0, banned ? 0.0 : 1.0, true});
    m.flow_var[FlowKey::reaction(e.id)] = f;
    m.indicator_var[e.id] = z;
  }
  for (const auto& v : h.vertices()) {
    auto id = std::to_string(index(v.id));
    if (auto s = q.sources.find(v.id); s != q.sources.end()) {
      auto x = m.add_var({"in_" + id, VarKind::Inflow, index(v.id), static_cast<double>(s->second.min),
                          static_cast<double>(s->second.max), true});
      m.flow_var[FlowKey::inflow(v.id)] = x;
    }
    std::optional<FlowBounds> out;
    if (auto t = q.targets.find(v.id); t != q.targets.end()) out = t->second;
    if (auto b = q.byproducts.find(v.id); b != q.byproducts.end()) out = FlowBounds{0, b->second};
    if (out) {
      double c = q.maximize_outflow == v.id ? 1.0 : 0.0;
      auto x = m.add_var({"out_" + id, VarKind::Outflow, index(v.id), static_cast<double>(out->min),
                          static_cast<double>(out->max), true},
                         c);
      m.flow_var[FlowKey::outflow(v.id)] = x;
    }
  }

  // conservation: production - consumption + inflow - outflow = 0
  std::vector<std::map<std::size_t, double>> balance(h.vertex_count());
  for (const auto& e : h.edges()) {
    auto f = m.flow_var.at(FlowKey::reaction(e.id));
    for (const auto& [v, mult] : e.reactants) balance[index(v)][f] -= mult;
    for (const auto& [v, mult] : e.products) balance[index(v)][f] += mult;
  }
  for (const auto& v : h.vertices()) {
    auto& terms = balance[index(v.id)];
    if (auto x = m.find(FlowKey::inflow(v.id))) terms[*x] += 1;
    if (auto x = m.find(FlowKey::outflow(v.id))) terms[*x] -= 1;
    Row row{"cons_" + std::to_string(index(v.id)), RowKind::Conservation, {}, RowSense::Eq, 0};
    for (const auto& [var, coef] : terms)
      if (coef != 0) row.terms.push_back({var, coef});
    m.rows.push_back(std::move(row));
  }

  for (const auto& e : h.edges()) {
    auto f = m.flow_var.at(FlowKey::reaction(e.id));
    auto z = m.indicator_var.at(e.id);
    auto id = std::to_string(index(e.id));
    m.rows.push_back({"link_hi_" + id, RowKind::Linking, {{f, 1}, {z, -cap}}, RowSense::Le, 0});
    m.rows.push_back({"link_lo_" + id, RowKind::Linking, {{z, 1}, {f, -1}}, RowSense::Le, 0});
  }

  if (q.inflow_total_max) {
    Row row{"total_inflow", RowKind::Query, {}, RowSense::Le, static_cast<double>(*q.inflow_total_max)};
    for (const auto& [v, b] : q.sources) row.terms.push_back({m.flow_var.at(FlowKey::inflow(v)), 1});
    m.rows.push_back(std::move(row));
  }
  return m;
}

/// sum_{e in S} z_e <= |S| - 1
inline IlpModel add_cut(const IlpModel& model, const Support& s) {
  if (s.empty()) throw InputError("cannot cut an empty support");
  IlpModel m = model;
  Row row{"cut_" + std::to_string(m.cut_count + 1), RowKind::Cut, {}, RowSense::Le, static_cast<double>(s.size()) - 1};
  for (auto e : s) {
    auto it = m.indicator_var.find(e);
    if (it == m.indicator_var.end()) throw InputError("cut references edge " + std::to_string(index(e)) + " without indicator");
    row.terms.push_back({it->second, 1});
  }
  m.rows.push_back(std::move(row));
  ++m.cut_count;
  return m;
}

/// Continuous flows only: indicators, linking rows and cuts are dropped.
inline LpModel relax(const IlpModel& model) {
  LpModel lp;
  lp.sense = model.sense;
  lp.flow_cap = model.flow_cap;
  std::vector<std::optional<std::size_t>> remap(model.vars.size());
  for (std::size_t i = 0; i < model.vars.size(); ++i) {
    if (model.vars[i].kind == VarKind::Indicator) continue;
    Variable v = model.vars[i];
    v.integer = false;
    remap[i] = lp.add_var(std::move(v), model.cost[i]);
  }
  for (const auto& [key, i] : model.flow_var) lp.flow_var[key] = *remap[i];
  for (const auto& row : model.rows) {
    if (row.kind == RowKind::Linking || row.kind == RowKind::Cut) continue;
    Row r = row;
    for (auto& t : r.terms) t.var = *remap[t.var];
    lp.rows.push_back(std::move(r));
  }
  return lp;
}

// ---------------------------------------------------------------------------
// LP file

namespace detail {

inline std::string format_number(double x) {
  if (x == 0) return "0";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

// " + 3 x - 2 y", wrapped so no line gets too long
inline void write_terms(std::ostream& out, const std::vector<Term>& terms, const IlpModel& m, bool skip_zero) {
  std::size_t width = 0;
  bool first = true;
  for (const auto& t : terms) {
    if (skip_zero && t.coef == 0) continue;
    std::string piece = t.coef < 0 ? "- " : (first ? "" : "+ ");
    piece += format_number(std::abs(t.coef)) + " " + m.vars[t.var].name;
    if (width > 200) {
      out << "\n   ";
      width = 0;
    }
    out << " " << piece;
    width += piece.size() + 1;
    first = false;
  }
}

}  // namespace detail

/// CPLEX LP dialect. Rows without terms are omitted.
inline std::string export_lp_text(const IlpModel& m) {
  std::ostringstream out;
  out << "\\ hyperpath pathway query\n";
  out << (m.maximizing() ? "Maximize\n" : "Minimize\n");
  out << " obj:";
  std::vector<Term> objective;
  for (std::size_t i = 0; i < m.vars.size(); ++i)
    if (m.cost[i] != 0) objective.push_back({i, m.cost[i]});
  if (objective.empty() && !m.vars.empty()) objective.push_back({0, 0});
  detail::write_terms(out, objective, m, false);
  out << "\nSubject To\n";
  for (const auto& row : m.rows) {
    if (row.terms.empty()) continue;
    out << " " << row.name << ":";
    detail::write_terms(out, row.terms, m, true);
    const char* op = row.sense == RowSense::Le ? " <= " : row.sense == RowSense::Ge ? " >= " : " = ";
    out << op << detail::format_number(row.rhs) << "\n";
  }
  out << "Bounds\n";
  for (const auto& v : m.vars) {
    if (v.kind == VarKind::Indicator && v.ub == 1) continue;
    if (v.lb == v.ub)
      out << " " << v.name << " = " << detail::format_number(v.lb) << "\n";
    else
      out << " " << detail::format_number(v.lb) << " <= " << v.name << " <= " << detail::format_number(v.ub) << "\n";
  }
  std::vector<std::string> generals, binaries;
  for (const auto& v : m.vars) {
    if (!v.integer) continue;
    // pinned indicators stay general integers so the Bounds line holds
    if (v.kind == VarKind::Indicator && v.ub == 1)
      binaries.push_back(v.name);
    else
      generals.push_back(v.name);
  }
  auto list = [&](const char* head, const std::vector<std::string>& names) {
    if (names.empty()) return;
    out << head << "\n";
    for (std::size_t i = 0; i < names.size(); ++i) out << (i % 10 == 0 ? (i ? "\n " : " ") : " ") << names[i];
    out << "\n";
  };
  list("Generals", generals);
  list("Binaries", binaries);
  out << "End\n";
  return out.str();
}

}  // namespace hyperpath
