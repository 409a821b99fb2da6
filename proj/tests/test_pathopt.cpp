#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "hyperpath/pathopt.hpp"
#include "hyperpath/solve.hpp"
#include "testing.hpp"

using namespace hyperpath;
using namespace testing_support;

namespace {

EdgeId eid(std::uint32_t i) { return EdgeId{i}; }

struct Fixture {
  Hypergraph h;
  WeightModel w;
  PathwayQuery q;
};

Fixture worked_example() {
  Fixture f;
  f.h = load_network("worked_example/network.json");
  f.w = objective_coefficients(load_barriers(data("worked_example/barriers_uniform.csv"), f.h), Thermo{}, f.h);
  f.q = query_from_json(nlohmann::json::parse(data("worked_example/query.json")), f.h);
  return f;
}

Fixture flux_demo() {
  Fixture f;
  f.h = load_network("flux_demo/network.json");
  f.w = objective_coefficients(load_barriers(data("flux_demo/barriers.csv"), f.h), Thermo{}, f.h);
  f.q = query_from_json(nlohmann::json::parse(data("flux_demo/query.json")), f.h);
  return f;
}

// Row check with exact arithmetic on small integers.
bool row_holds(const Row& r, const std::vector<double>& x) {
  double lhs = 0;
  for (const auto& t : r.terms) lhs += t.coef * x[t.var];
  switch (r.sense) {
    case RowSense::Le: return lhs <= r.rhs + 1e-9;
    case RowSense::Ge: return lhs >= r.rhs - 1e-9;
    case RowSense::Eq: return std::abs(lhs - r.rhs) <= 1e-9;
  }
  return false;
}

bool assignment_feasible(const IlpModel& m, const std::vector<double>& x) {
  for (std::size_t j = 0; j < m.vars.size(); ++j)
    if (x[j] < m.vars[j].lb || x[j] > m.vars[j].ub) return false;
  for (const auto& r : m.rows)
    if (!row_holds(r, x)) return false;
  return true;
}

// Full model assignment for given edge flows: z from f, half-edges from
// the vertex balances (sources absorb deficits, outputs take surpluses).
std::vector<double> complete(const IlpModel& m, const Hypergraph& h, const std::vector<long long>& f) {
  std::vector<double> x(m.vars.size(), 0);
  std::vector<long long> bal(h.vertex_count(), 0);
  for (std::size_t e = 0; e < f.size(); ++e) {
    x[m.flow_var.at(FlowKey::reaction(eid(static_cast<std::uint32_t>(e))))] = static_cast<double>(f[e]);
    x[m.indicator_var.at(eid(static_cast<std::uint32_t>(e)))] = f[e] > 0 ? 1 : 0;
    for (const auto& [v, k] : h.edges()[e].reactants) bal[index(v)] -= k * f[e];
    for (const auto& [v, k] : h.edges()[e].products) bal[index(v)] += k * f[e];
  }
  for (std::size_t v = 0; v < h.vertex_count(); ++v) {
    VertexId id{static_cast<std::uint32_t>(v)};
    if (bal[v] < 0)
      if (auto j = m.find(FlowKey::inflow(id))) x[*j] = static_cast<double>(-bal[v]);
    if (bal[v] > 0)
      if (auto j = m.find(FlowKey::outflow(id))) x[*j] = static_cast<double>(bal[v]);
  }
  return x;
}

std::vector<long long> flows_on(const Hypergraph& h, const std::set<std::uint32_t>& edges) {
  std::vector<long long> f(h.edge_count(), 0);
  for (auto e : edges) f[e] = 1;
  return f;
}

}  // namespace

TEST(BuildModel, WorkedExampleShape) {
  auto fx = worked_example();
  auto m = build_model(fx.h, fx.w, fx.q);
  // f and z per edge, inflow for v0 and v2, outflow for v9 and v1
  EXPECT_EQ(m.vars.size(), 2 * 20u + 4u);
  EXPECT_EQ(m.count(RowKind::Conservation), 12u);
  EXPECT_EQ(m.count(RowKind::Linking), 40u);
  EXPECT_EQ(m.count(RowKind::Query), 0u);
  EXPECT_FALSE(m.find(FlowKey::inflow(VertexId{5})).has_value());
  for (const auto& v : m.vars) EXPECT_TRUE(v.integer);
}

TEST(BuildModel, ContainsSamplePathOne) {
  auto fx = worked_example();
  auto m = build_model(fx.h, fx.w, fx.q);
  auto x = complete(m, fx.h, flows_on(fx.h, {0, 8, 12, 14}));
  EXPECT_TRUE(assignment_feasible(m, x));
  EXPECT_EQ(x[*m.find(FlowKey::outflow(VertexId{9}))], 1);
  EXPECT_EQ(x[*m.find(FlowKey::inflow(VertexId{0}))], 1);
}

TEST(BuildModel, ContainsSamplePathTwo) {
  auto fx = worked_example();
  auto m = build_model(fx.h, fx.w, fx.q);
  EXPECT_TRUE(assignment_feasible(m, complete(m, fx.h, flows_on(fx.h, {0, 3, 10, 12, 14}))));
}

TEST(BuildModel, ForbiddenEdgeRoutesAround) {
  auto fx = worked_example();
  fx.q.forbidden_edges.insert(eid(8));
  auto m = build_model(fx.h, fx.w, fx.q);
  EXPECT_EQ(m.vars[m.flow_var.at(FlowKey::reaction(eid(8)))].ub, 0);
  EXPECT_EQ(m.vars[m.indicator_var.at(eid(8))].ub, 0);
  EXPECT_FALSE(assignment_feasible(m, complete(m, fx.h, flows_on(fx.h, {0, 8, 12, 14}))));

  auto oracle = oracle_solve(fx.h, fx.w, fx.q);
  ASSERT_TRUE(oracle.objective.has_value());
  Support path2{eid(0), eid(3), eid(10), eid(12), eid(14)};
  EXPECT_TRUE(oracle.optimal_supports.contains(path2));
  auto s = branch_and_bound(m);
  ASSERT_EQ(s.status, IlpStatus::Optimal);
  EXPECT_EQ(s.support, path2);
  EXPECT_NEAR(s.objective, *oracle.objective, 1e-6);
}

TEST(BuildModel, EmptyQueryOnlyZeroFlow) {
  auto fx = flux_demo();
  PathwayQuery empty;
  auto m = build_model(fx.h, fx.w, empty);
  auto oracle = oracle_solve(fx.h, fx.w, empty);
  EXPECT_EQ(oracle.feasible, 1u);
  ASSERT_EQ(oracle.feasible_flows.size(), 1u);
  for (auto v : oracle.feasible_flows[0]) EXPECT_EQ(v, 0);
  // and in the model itself: no non-zero single-edge flow is feasible
  for (std::size_t e = 0; e < fx.h.edge_count(); ++e) {
    std::vector<long long> f(fx.h.edge_count(), 0);
    f[e] = 1;
    EXPECT_FALSE(assignment_feasible(m, complete(m, fx.h, f)));
  }
  EXPECT_TRUE(assignment_feasible(m, complete(m, fx.h, std::vector<long long>(fx.h.edge_count(), 0))));
}

TEST(BuildModel, Errors) {
  auto fx = worked_example();
  PathwayQuery q = fx.q;
  q.targets[VertexId{99}] = {1, 1};
  EXPECT_THROW(build_model(fx.h, fx.w, q), InputError);
  q = fx.q;
  q.forbidden_edges.insert(eid(99));
  EXPECT_THROW(build_model(fx.h, fx.w, q), InputError);
  q = fx.q;
  q.sources.begin()->second = {3, 1};
  EXPECT_THROW(build_model(fx.h, fx.w, q), InputError);
  WeightModel partial = fx.w;
  partial.coeff.erase(eid(3));
  EXPECT_THROW(build_model(fx.h, partial, fx.q), InputError);
}

TEST(QueryJson, Errors) {
  auto h = load_network("worked_example/network.json");
  EXPECT_THROW(query_from_json(nlohmann::json::parse(R"({"targets":{"nope":1}})"), h), InputError);
  EXPECT_THROW(query_from_json(nlohmann::json::parse(R"({"forbidden_edges":["e77"]})"), h), InputError);
  EXPECT_THROW(query_from_json(nlohmann::json::parse(R"({"targets":{"v9":{"min":2,"max":1}}})"), h), InputError);
  EXPECT_THROW(query_from_json(nlohmann::json::parse(R"({"colour":"red"})"), h), InputError);
  EXPECT_THROW(query_from_json(nlohmann::json::parse(R"({"targets":{"v9":1},"byproducts":{"v9":1}})"), h),
               InputError);
  auto q = query_from_json(nlohmann::json::parse(R"({"targets":{"9":1},"forbidden_edges":["e3",4]})"), h);
  EXPECT_EQ(q.targets.at(VertexId{9}).min, 1);
  EXPECT_EQ(q.forbidden_edges, (std::set<EdgeId>{eid(3), eid(4)}));
}

TEST(AddCut, Singleton) {
  auto fx = worked_example();
  auto m = add_cut(build_model(fx.h, fx.w, fx.q), {eid(0)});
  ASSERT_EQ(m.count(RowKind::Cut), 1u);
  const auto& row = m.rows.back();
  ASSERT_EQ(row.terms.size(), 1u);
  EXPECT_EQ(row.terms[0].var, m.indicator_var.at(eid(0)));
  EXPECT_EQ(row.sense, RowSense::Le);
  EXPECT_EQ(row.rhs, 0);
  // e1 feeds every pathway to v9 here
  EXPECT_FALSE(assignment_feasible(m, complete(m, fx.h, flows_on(fx.h, {0, 8, 12, 14}))));
}

TEST(AddCut, Pair) {
  auto fx = worked_example();
  auto base = build_model(fx.h, fx.w, fx.q);
  auto m = add_cut(base, {eid(8), eid(12)});
  EXPECT_EQ(m.rows.back().rhs, 1);
  EXPECT_FALSE(assignment_feasible(m, complete(m, fx.h, flows_on(fx.h, {0, 8, 12, 14}))));
  EXPECT_TRUE(assignment_feasible(m, complete(m, fx.h, flows_on(fx.h, {0, 3, 10, 12, 14}))));
  auto s = branch_and_bound(m);
  ASSERT_EQ(s.status, IlpStatus::Optimal);
  EXPECT_FALSE(s.support.contains(eid(8)) && s.support.contains(eid(12)));
}

TEST(AddCut, CountsAndErrors) {
  auto fx = worked_example();
  auto m = build_model(fx.h, fx.w, fx.q);
  for (std::uint32_t k = 0; k < 4; ++k) m = add_cut(m, {eid(k)});
  EXPECT_EQ(m.count(RowKind::Cut), 4u);
  EXPECT_EQ(m.cut_count, 4u);
  EXPECT_THROW(add_cut(m, {}), InputError);
  EXPECT_THROW(add_cut(m, {eid(500)}), InputError);
}

TEST(Relax, DropsIntegrality) {
  auto fx = worked_example();
  auto m = add_cut(build_model(fx.h, fx.w, fx.q), {eid(0), eid(1)});
  auto lp = relax(m);
  EXPECT_EQ(lp.count(RowKind::Linking), 0u);
  EXPECT_EQ(lp.count(RowKind::Cut), 0u);
  EXPECT_EQ(lp.count(RowKind::Conservation), 12u);
  for (const auto& v : lp.vars) {
    EXPECT_FALSE(v.integer);
    EXPECT_NE(v.kind, VarKind::Indicator);
  }
}

TEST(Relax, FluxDemo) {
  auto fx = flux_demo();
  auto lp = simplex_solve(relax(build_model(fx.h, fx.w, fx.q)));
  ASSERT_EQ(lp.status, LpStatus::Optimal);
  EXPECT_NEAR(lp.objective, 1.5, 1e-9);
}

TEST(Relax, IntegralOptimumMatches) {
  // a -> b -> c, one unit to c: the LP vertex is already integral
  Hypergraph h;
  for (const char* n : {"a", "b", "c"}) h.add_abstract_vertex(n);
  h.add_reaction({{VertexId{0}, 1}}, {{VertexId{1}, 1}});
  h.add_reaction({{VertexId{1}, 1}}, {{VertexId{2}, 1}});
  auto w = objective_coefficients(barrier_table_from_kj({{eid(0), 10}, {eid(1), 30}}, h), Thermo{}, h);
  PathwayQuery q;
  q.sources[VertexId{0}] = {0, 5};
  q.targets[VertexId{2}] = {1, 1};
  auto m = build_model(h, w, q);
  auto lp = simplex_solve(relax(m));
  auto ilp = branch_and_bound(m);
  ASSERT_EQ(lp.status, LpStatus::Optimal);
  EXPECT_NEAR(lp.objective, ilp.objective, 1e-6);
}

TEST(ExportLp, SingleEdge) {
  Hypergraph h;
  h.add_abstract_vertex("a");
  h.add_abstract_vertex("b");
  h.add_abstract_vertex("idle");
  h.add_reaction({{VertexId{0}, 1}}, {{VertexId{1}, 2}});
  auto w = objective_coefficients(barrier_table_from_kj({{eid(0), 12.5}}, h), Thermo{}, h);
  PathwayQuery q;
  q.sources[VertexId{0}] = {0, 1};
  q.targets[VertexId{1}] = {2, 2};
  auto text = export_lp_text(build_model(h, w, q));
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count(" cons_"), 2u);
  EXPECT_EQ(count(" link_hi_0:"), 1u);
  EXPECT_EQ(count(" link_lo_0:"), 1u);
  // sections in order
  std::vector<std::string> sections{"Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End"};
  std::size_t at = 0;
  for (const auto& s : sections) {
    auto p = text.find("\n" + s + "\n", at == 0 ? 0 : at);
    if (s == "Minimize") p = text.find(s + "\n");
    ASSERT_NE(p, std::string::npos) << s;
    EXPECT_GE(p, at) << s;
    at = p;
  }
  std::regex names(R"(\b(f|z)_0\b)");
  EXPECT_TRUE(std::regex_search(text, names));
  EXPECT_NE(text.find("in_0"), std::string::npos);
  EXPECT_NE(text.find("out_1"), std::string::npos);
  EXPECT_EQ(text.find("in_2"), std::string::npos);
}

TEST(ExportLp, Deterministic) {
  auto fx = worked_example();
  auto m = add_cut(build_model(fx.h, fx.w, fx.q), {eid(0), eid(8)});
  EXPECT_EQ(export_lp_text(m), export_lp_text(m));
  EXPECT_EQ(export_lp_text(m), export_lp_text(add_cut(build_model(fx.h, fx.w, fx.q), {eid(0), eid(8)})));
  auto fd = flux_demo();
  auto text = export_lp_text(build_model(fd.h, fd.w, fd.q));
  EXPECT_EQ(text.rfind("\\ hyperpath", 0), 0u);
  EXPECT_NE(text.find("Maximize"), std::string::npos);
  EXPECT_NE(text.find(" total_inflow:"), std::string::npos);
}

TEST(ExportLp, RowOrder) {
  auto fx = worked_example();
  auto text = export_lp_text(add_cut(build_model(fx.h, fx.w, fx.q), {eid(3)}));
  auto cons = text.find(" cons_0:"), link = text.find(" link_hi_0:"), cut = text.find(" cut_1:");
  ASSERT_NE(cons, std::string::npos);
  ASSERT_NE(link, std::string::npos);
  ASSERT_NE(cut, std::string::npos);
  EXPECT_LT(cons, link);
  EXPECT_LT(link, cut);
  EXPECT_LT(text.find(" link_hi_2:"), text.find(" link_hi_10:"));
}

TEST(PathoptProperty, LinkingSoundness) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = random_instance(rng, 6, 6, 1 + static_cast<long long>(rng() % 3));
    auto w = objective_coefficients(inst.barriers, Thermo{}, inst.h);
    auto m = build_model(inst.h, w, inst.query);
    // only linking rows mention z
    for (const auto& r : m.rows)
      for (const auto& t : r.terms)
        if (m.vars[t.var].kind == VarKind::Indicator) {
          EXPECT_EQ(r.kind, RowKind::Linking);
        }
    for (const auto& e : inst.h.edges()) {
      auto f = m.flow_var.at(FlowKey::reaction(e.id));
      auto z = m.indicator_var.at(e.id);
      std::vector<const Row*> rows;
      for (const auto& r : m.rows)
        if (r.kind == RowKind::Linking)
          for (const auto& t : r.terms)
            if (t.var == z) rows.push_back(&r);
      ASSERT_EQ(rows.size(), 2u);
      for (long long fv = 0; fv <= inst.query.flow_cap; ++fv)
        for (int zv = 0; zv <= 1; ++zv) {
          std::vector<double> x(m.vars.size(), 0);
          x[f] = static_cast<double>(fv);
          x[z] = zv;
          bool ok = row_holds(*rows[0], x) && row_holds(*rows[1], x);
          EXPECT_EQ(ok, zv == (fv >= 1 ? 1 : 0)) << "f=" << fv << " z=" << zv;
        }
    }
    // every oracle-feasible flow completes to a feasible model point
    auto oracle = oracle_solve(inst.h, w, inst.query);
    for (const auto& fl : oracle.feasible_flows) EXPECT_TRUE(assignment_feasible(m, complete(m, inst.h, fl)));
  }
}

TEST(PathoptProperty, CutSemantics) {
  std::mt19937 rng(43);
  int checked = 0;
  for (int trial = 0; trial < 80; ++trial) {
    auto inst = random_instance(rng);
    auto w = objective_coefficients(inst.barriers, Thermo{}, inst.h);
    auto oracle = oracle_solve(inst.h, w, inst.query);
    if (oracle.feasible_flows.empty()) continue;
    const auto& chosen = oracle.feasible_flows[rng() % oracle.feasible_flows.size()];
    Support s;
    for (std::size_t e = 0; e < chosen.size(); ++e)
      if (chosen[e]) s.insert(eid(static_cast<std::uint32_t>(e)));
    if (s.empty()) continue;
    ++checked;
    auto base = build_model(inst.h, w, inst.query);
    auto cut = add_cut(base, s);
    for (const auto& fl : oracle.feasible_flows) {
      Support t;
      for (std::size_t e = 0; e < fl.size(); ++e)
        if (fl[e]) t.insert(eid(static_cast<std::uint32_t>(e)));
      bool superset = std::includes(t.begin(), t.end(), s.begin(), s.end());
      auto x = complete(cut, inst.h, fl);
      EXPECT_EQ(assignment_feasible(cut, x), !superset && assignment_feasible(base, x));
    }
    auto after = oracle_solve(inst.h, w, inst.query, {s});
    auto bf = brute_force(cut);
    ASSERT_EQ(after.objective.has_value(), bf.status == IlpStatus::Optimal);
    if (after.objective) {
      EXPECT_NEAR(bf.objective, *after.objective, 1e-6);
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(PathoptProperty, ModelDeterminism) {
  std::mt19937 a(47), b(47);
  for (int trial = 0; trial < 20; ++trial) {
    auto ia = random_instance(a), ib = random_instance(b);
    auto ma = build_model(ia.h, objective_coefficients(ia.barriers, Thermo{}, ia.h), ia.query);
    auto mb = build_model(ib.h, objective_coefficients(ib.barriers, Thermo{}, ib.h), ib.query);
    EXPECT_EQ(export_lp_text(ma), export_lp_text(mb));
  }
}
