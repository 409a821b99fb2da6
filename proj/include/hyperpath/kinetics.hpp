#pragma once

// Energy barriers per reaction, Eyring rates, normalized reaction
// probabilities and the per-edge objective weights derived from them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hyperpath/netcore.hpp"

namespace hyperpath {

struct Thermo {
  static constexpr double R = 8.314462618;       // J / (mol K)
  static constexpr double kB = 1.380649e-23;     // J / K
  static constexpr double h = 6.62607015e-34;    // J s

  double T = 298.15;

  double RT() const { return R * T; }

  void validate() const {
    if (!(T > 0) || !std::isfinite(T)) throw InputError("temperature must be positive and finite");
  }
};

/// Barriers in J/mol, keyed by edge.
struct BarrierTable {
  std::map<EdgeId, double> g;
  std::vector<std::string> warnings;

  double at(EdgeId e) const {
    auto it = g.find(e);
    if (it == g.end()) throw InputError("no barrier for edge " + std::to_string(index(e)));
    return it->second;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Builds a table from kJ/mol values and checks it against h.
inline BarrierTable barrier_table_from_kj(const std::map<EdgeId, double>& kj, const Hypergraph& h) {
  BarrierTable t;
  for (const auto& [e, value] : kj) {
    if (index(e) >= h.edge_count()) throw InputError("barrier for unknown edge " + std::to_string(index(e)));
    if (!std::isfinite(value)) throw InputError("non-finite barrier for edge " + std::to_string(index(e)));
    if (value < 0)
      t.warnings.push_back("negative barrier " + std::to_string(value) + " kJ/mol for edge " +
                           std::to_string(index(e)));
    t.g[e] = value * 1000.0;
  }
  for (const auto& e : h.edges())
    if (!t.g.contains(e.id)) throw InputError("missing barrier for edge " + std::to_string(index(e.id)));
  return t;
}

/// CSV with header `edge_id,barrier_kj_per_mol`. Blank lines and lines
/// starting with '#' are skipped.
inline BarrierTable load_barriers(std::string_view csv, const Hypergraph& h) {
  std::map<EdgeId, double> kj;
  std::istringstream in{std::string(csv)};
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    auto comma = text.find(',');
    if (comma == std::string::npos)
      throw InputError("barriers line " + std::to_string(lineno) + ": expected two comma-separated columns");
    auto id_text = detail::trim(std::string_view(text).substr(0, comma));
    auto value_text = detail::trim(std::string_view(text).substr(comma + 1));
    if (!header) {
      if (id_text != "edge_id" || value_text != "barrier_kj_per_mol")
        throw InputError("barriers: header must be 'edge_id,barrier_kj_per_mol'");
      header = true;
      continue;
    }
    if (!id_text.empty() && id_text[0] == 'e') id_text.erase(0, 1);
    auto id = detail::parse_int(id_text);
    if (!id || *id < 0)
      throw InputError("barriers line " + std::to_string(lineno) + ": bad edge id '" + id_text + "'");
    auto value = detail::parse_double(value_text);
    if (!value)
      throw InputError("barriers line " + std::to_string(lineno) + ": non-numeric barrier '" + value_text + "'");
    EdgeId e{static_cast<std::uint32_t>(*id)};
    if (kj.contains(e)) throw InputError("barriers: duplicate row for edge " + std::to_string(*id));
    kj[e] = *value;
  }
  if (!header) throw InputError("barriers: empty file");
  return barrier_table_from_kj(kj, h);
}

inline double rate_constant(double g, const Thermo& thermo) {
  return thermo.kB * thermo.T / thermo.h * std::exp(-g / thermo.RT());
}

struct WeightModel {
  double logD = 0;
  double RT = 0;
  std::map<EdgeId, double> coeff;  // J/mol
};

/// log(sum_i exp(-G_i / RT)) with the usual max shift.
inline double log_partition(const BarrierTable& table, const Thermo& thermo) {
  if (table.g.empty()) throw InputError("log partition of an empty barrier table");
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& [e, g] : table.g) top = std::max(top, -g / thermo.RT());
  double sum = 0;
  for (const auto& [e, g] : table.g) sum += std::exp(-g / thermo.RT() - top);
  return top + std::log(sum);
}

inline double reaction_probability(EdgeId e, const BarrierTable& table, const Thermo& thermo) {
  thermo.validate();
  return std::exp(-table.at(e) / thermo.RT() - log_partition(table, thermo));
}

inline std::map<EdgeId, double> reaction_probabilities(const BarrierTable& table, const Thermo& thermo) {
  thermo.validate();
  double logD = log_partition(table, thermo);
  std::map<EdgeId, double> p;
  for (const auto& [e, g] : table.g) p[e] = std::exp(-g / thermo.RT() - logD);
  return p;
}

inline WeightModel objective_coefficients(const BarrierTable& table, const Thermo& thermo, const Hypergraph& h) {
  thermo.validate();
  for (const auto& e : h.edges())
    if (!table.g.contains(e.id)) throw InputError("missing barrier for edge " + std::to_string(index(e.id)));
  WeightModel m;
  m.RT = thermo.RT();
  if (h.edge_count() == 0) return m;
  // only edges of h enter D
  BarrierTable own;
  for (const auto& e : h.edges()) own.g[e.id] = table.at(e.id);
  m.logD = log_partition(own, thermo);
  for (const auto& [e, g] : own.g) m.coeff[e] = g + m.RT * m.logD;
  return m;
}

/// Sum of f_e * c_e over real edges, in J/mol.
inline double pathway_score(const Hyperflow& f, const WeightModel& model) {
  double score = 0;
  for (const auto& [key, value] : f.flow) {
    if (key.kind != FlowKind::Reaction || value == 0) continue;
    auto it = model.coeff.find(EdgeId{key.id});
    if (it == model.coeff.end()) throw InputError("no weight for edge " + std::to_string(key.id));
    score += static_cast<double>(value) * it->second;
  }
  return score;
}

}  // namespace hyperpath
