#include <gtest/gtest.h>

#include <random>

#include "hyperpath/pathopt.hpp"
#include "hyperpath/solve.hpp"
#include "testing.hpp"

using namespace hyperpath;
using namespace testing_support;

namespace {

EdgeId eid(std::uint32_t i) { return EdgeId{i}; }

IlpModel fixture_model(const std::string& dir, std::optional<long long> cap = std::nullopt) {
  auto h = load_network(dir + "/network.json");
  auto barriers = data(dir + (dir == "flux_demo" ? "/barriers.csv" : "/barriers_uniform.csv"));
  auto w = objective_coefficients(load_barriers(barriers, h), Thermo{}, h);
  auto q = query_from_json(nlohmann::json::parse(data(dir + "/query.json")), h);
  if (cap) q.flow_cap = *cap;
  return build_model(h, w, q);
}

// Net production per vertex, computed here rather than by the library.
bool conserves(const Hypergraph& h, const Hyperflow& f) {
  std::vector<long long> bal(h.vertex_count(), 0);
  for (const auto& [k, v] : f.flow) {
    if (k.kind == FlowKind::Reaction) {
      for (const auto& [x, m] : h.edges()[k.id].reactants) bal[index(x)] -= m * v;
      for (const auto& [x, m] : h.edges()[k.id].products) bal[index(x)] += m * v;
    } else {
      bal[k.id] += k.kind == FlowKind::Inflow ? v : -v;
    }
  }
  return std::all_of(bal.begin(), bal.end(), [](long long b) { return b == 0; });
}

bool linked(const IlpSolution& s) {
  for (const auto& [e, z] : s.indicator)
    if ((z == 1) != (s.flow[FlowKey::reaction(e)] >= 1)) return false;
  return true;
}

LpModel toy_lp(std::vector<std::tuple<std::vector<double>, RowSense, double>> rows, std::vector<double> cost,
               double ub = 10) {
  LpModel lp;
  for (std::size_t j = 0; j < cost.size(); ++j)
    lp.add_var({"x" + std::to_string(j), VarKind::Flow, static_cast<std::uint32_t>(j), 0, ub, false}, cost[j]);
  for (auto& [coefs, sense, rhs] : rows) {
    Row r{"r" + std::to_string(lp.rows.size()), RowKind::Query, {}, sense, rhs};
    for (std::size_t j = 0; j < coefs.size(); ++j)
      if (coefs[j] != 0) r.terms.push_back({j, coefs[j]});
    lp.rows.push_back(r);
  }
  return lp;
}

}  // namespace

TEST(Simplex, FluxDemoRelaxation) {
  auto lp = simplex_solve(relax(fixture_model("flux_demo")));
  ASSERT_EQ(lp.status, LpStatus::Optimal);
  EXPECT_NEAR(lp.objective, 1.5, 1e-9);
}

TEST(Simplex, InfeasibleToy) {
  auto lp = toy_lp({{{1}, RowSense::Ge, 2}, {{1}, RowSense::Le, 1}}, {1});
  EXPECT_EQ(simplex_solve(lp).status, LpStatus::Infeasible);
}

TEST(Simplex, SmallOptimum) {
  // min -x0 - x1, x0 + 2 x1 <= 4, 3 x0 + x1 <= 6: vertex (1.6, 1.2)
  auto lp = toy_lp({{{1, 2}, RowSense::Le, 4}, {{3, 1}, RowSense::Le, 6}}, {-1, -1});
  auto s = simplex_solve(lp);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.values[0], 1.6, 1e-9);
  EXPECT_NEAR(s.values[1], 1.2, 1e-9);
  EXPECT_NEAR(s.objective, -2.8, 1e-9);
}

TEST(Simplex, EqualityAndBounds) {
  // x0 + x1 = 3 with x0 <= 1 (variable bound), minimize x1
  LpModel lp = toy_lp({{{1, 1}, RowSense::Eq, 3}}, {0, 1});
  lp.vars[0].ub = 1;
  auto s = simplex_solve(lp);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.values[1], 2, 1e-9);
}

TEST(Simplex, DegenerateCyclingExample) {
  // a classic instance on which textbook Dantzig pricing cycles
  auto lp = toy_lp({{{0.25, -8, -1, 9}, RowSense::Le, 0}, {{0.5, -12, -0.5, 3}, RowSense::Le, 0}, {{0, 0, 1, 0}, RowSense::Le, 1}},
                   {-0.75, 20, -0.5, 6}, 1e6);
  auto s = simplex_solve(lp);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.objective, -1.25, 1e-9);
}

TEST(Simplex, RowsSatisfiedAtOptimum) {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng);
    auto lp = relax(build_model(inst.h, objective_coefficients(inst.barriers, Thermo{}, inst.h), inst.query));
    auto s = simplex_solve(lp);
    if (s.status != LpStatus::Optimal) continue;
    for (const auto& r : lp.rows) {
      double lhs = 0;
      for (const auto& t : r.terms) lhs += t.coef * s.values[t.var];
      if (r.sense != RowSense::Ge) {
        EXPECT_LE(lhs, r.rhs + 1e-9);
      }
      if (r.sense != RowSense::Le) {
        EXPECT_GE(lhs, r.rhs - 1e-9);
      }
    }
    for (std::size_t j = 0; j < lp.vars.size(); ++j) {
      EXPECT_GE(s.values[j], lp.vars[j].lb - 1e-9);
      EXPECT_LE(s.values[j], lp.vars[j].ub + 1e-9);
    }
  }
}

TEST(BranchAndBound, FluxDemoInteger) {
  auto s = branch_and_bound(fixture_model("flux_demo"));
  ASSERT_EQ(s.status, IlpStatus::Optimal);
  EXPECT_EQ(s.objective, 1.0);
  EXPECT_EQ(s.support.size(), 1u);
}

TEST(BranchAndBound, WorkedExampleUniformBarriers) {
  auto h = load_network("worked_example/network.json");
  auto w = objective_coefficients(load_barriers(data("worked_example/barriers_uniform.csv"), h), Thermo{}, h);
  auto q = query_from_json(nlohmann::json::parse(data("worked_example/query.json")), h);
  auto oracle = oracle_solve(h, w, q);
  ASSERT_TRUE(oracle.objective.has_value());
  auto s = branch_and_bound(build_model(h, w, q));
  ASSERT_EQ(s.status, IlpStatus::Optimal);
  EXPECT_NEAR(s.objective, *oracle.objective, 1e-6);
  EXPECT_TRUE(oracle.optimal_supports.contains(s.support));
  EXPECT_EQ(s.support.size(), 4u);
  EXPECT_EQ(s.support, (Support{eid(0), eid(8), eid(12), eid(14)}));
  EXPECT_TRUE(conserves(h, s.flow));
  EXPECT_TRUE(linked(s));
}

TEST(BranchAndBound, CutMonotone) {
  auto m = fixture_model("worked_example");
  auto first = branch_and_bound(m);
  auto second = branch_and_bound(add_cut(m, first.support));
  ASSERT_EQ(second.status, IlpStatus::Optimal);
  EXPECT_GE(second.objective, first.objective - 1e-9);
  EXPECT_FALSE(std::includes(second.support.begin(), second.support.end(), first.support.begin(), first.support.end()));
}

TEST(BranchAndBound, NodeLimit) {
  SolverOptions opts;
  opts.node_limit = 1;
  EXPECT_THROW(branch_and_bound(fixture_model("flux_demo"), opts), NodeLimitExceeded);
}

TEST(BranchAndBound, Infeasible) {
  auto m = fixture_model("worked_example");
  m = add_cut(m, {eid(0)});
  EXPECT_EQ(branch_and_bound(m).status, IlpStatus::Infeasible);
}

TEST(Enumerate, FluxDemoThreeOptima) {
  auto r = enumerate(fixture_model("flux_demo"), 3);
  ASSERT_EQ(r.solutions.size(), 3u);
  std::set<Support> supports;
  for (const auto& s : r.solutions) {
    EXPECT_EQ(s.objective, 1.0);
    EXPECT_EQ(s.support.size(), 1u);
    supports.insert(s.support);
  }
  EXPECT_EQ(supports.size(), 3u);
  EXPECT_EQ(r.cuts.size(), 3u);
}

TEST(Enumerate, KOneIsBranchAndBound) {
  auto m = fixture_model("worked_example");
  auto r = enumerate(m, 1);
  auto s = branch_and_bound(m);
  ASSERT_EQ(r.solutions.size(), 1u);
  EXPECT_EQ(r.solutions[0].values, s.values);
}

TEST(Enumerate, StopsEarly) {
  auto r = enumerate(fixture_model("worked_example"), 1000);
  EXPECT_LT(r.solutions.size(), 1000u);
  EXPECT_GE(r.solutions.size(), 2u);
  EXPECT_THROW(enumerate(fixture_model("worked_example"), 0), InputError);
}

TEST(BruteForce, AgreesOnFixtures) {
  for (const char* dir : {"flux_demo"}) {
    auto m = fixture_model(dir, 3);
    auto a = branch_and_bound(m), b = brute_force(m);
    ASSERT_EQ(a.status, b.status);
    EXPECT_NEAR(a.objective, b.objective, 1e-9);
  }
  // enumeration on the flux demo, cut by cut
  auto m = fixture_model("flux_demo", 3);
  for (int k = 0; k < 3; ++k) {
    auto a = branch_and_bound(m), b = brute_force(m);
    ASSERT_EQ(a.status, b.status);
    EXPECT_NEAR(a.objective, b.objective, 1e-9);
    EXPECT_EQ(a.support, b.support);
    m = add_cut(m, a.support);
  }
}

TEST(BruteForce, EmptyQuery) {
  auto h = load_network("flux_demo/network.json");
  auto w = objective_coefficients(load_barriers(data("flux_demo/barriers.csv"), h), Thermo{}, h);
  PathwayQuery q;
  q.flow_cap = 3;
  auto s = brute_force(build_model(h, w, q));
  ASSERT_EQ(s.status, IlpStatus::Optimal);
  EXPECT_EQ(s.objective, 0.0);
  for (auto v : s.values) EXPECT_EQ(v, 0);
}

TEST(BruteForce, TooLarge) {
  EXPECT_THROW(brute_force(fixture_model("worked_example")), InstanceTooLarge);
}

TEST(BruteForce, RandomFiveEdges) {
  std::mt19937 rng(59);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 6, 5, 3);
    auto m = build_model(inst.h, objective_coefficients(inst.barriers, Thermo{}, inst.h), inst.query);
    auto a = branch_and_bound(m), b = brute_force(m);
    ASSERT_EQ(a.status, b.status) << "trial " << trial;
    if (a.status == IlpStatus::Optimal) {
      EXPECT_NEAR(a.objective, b.objective, 1e-6) << "trial " << trial;
    }
  }
}

TEST(SolveProperty, OracleEquivalence) {
  std::mt19937 rng(61);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 6, 6, 3);
    auto w = objective_coefficients(inst.barriers, Thermo{}, inst.h);
    auto m = build_model(inst.h, w, inst.query);
    auto s = branch_and_bound(m);
    auto oracle = oracle_solve(inst.h, w, inst.query);
    ASSERT_EQ(s.status == IlpStatus::Optimal, oracle.objective.has_value()) << "trial " << trial;
    if (!oracle.objective) continue;
    ++feasible;
    EXPECT_NEAR(s.objective, *oracle.objective, 1e-6) << "trial " << trial;
    EXPECT_TRUE(oracle.optimal_supports.contains(s.support)) << "trial " << trial;
    EXPECT_TRUE(conserves(inst.h, s.flow));
    EXPECT_TRUE(linked(s));
    EXPECT_NEAR(pathway_score(s.flow, w), s.objective, 1e-6);
  }
  EXPECT_GT(feasible, 50);
}

TEST(SolveProperty, RelaxationBound) {
  std::mt19937 rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng);
    auto m = build_model(inst.h, objective_coefficients(inst.barriers, Thermo{}, inst.h), inst.query);
    auto ilp = branch_and_bound(m);
    auto lp = simplex_solve(relax(m));
    if (ilp.status != IlpStatus::Optimal) continue;
    ASSERT_EQ(lp.status, LpStatus::Optimal);
    EXPECT_LE(lp.objective, ilp.objective + 1e-6);
  }
  auto fd = fixture_model("flux_demo");
  EXPECT_GE(simplex_solve(relax(fd)).objective, branch_and_bound(fd).objective);
}

TEST(SolveProperty, EnumerationSoundness) {
  std::mt19937 rng(71);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = random_instance(rng);
    auto w = objective_coefficients(inst.barriers, Thermo{}, inst.h);
    auto r = enumerate(build_model(inst.h, w, inst.query), 6);
    for (std::size_t i = 0; i < r.solutions.size(); ++i) {
      EXPECT_TRUE(conserves(inst.h, r.solutions[i].flow));
      EXPECT_TRUE(linked(r.solutions[i]));
      for (std::size_t j = i + 1; j < r.solutions.size(); ++j) {
        const auto& a = r.solutions[i].support;
        const auto& b = r.solutions[j].support;
        EXPECT_FALSE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
        EXPECT_LE(r.solutions[i].objective, r.solutions[j].objective + 1e-6);
      }
    }
    // the i-th result is optimal among flows avoiding the earlier cuts
    std::vector<Support> cuts;
    for (std::size_t i = 0; i < r.solutions.size(); ++i) {
      auto oracle = oracle_solve(inst.h, w, inst.query, cuts);
      ASSERT_TRUE(oracle.objective.has_value());
      EXPECT_NEAR(r.solutions[i].objective, *oracle.objective, 1e-6);
      if (i < r.cuts.size()) cuts.push_back(r.cuts[i]);
    }
  }
}

TEST(SolveProperty, Deterministic) {
  auto a = enumerate(fixture_model("worked_example"), 5);
  auto b = enumerate(fixture_model("worked_example"), 5);
  ASSERT_EQ(a.solutions.size(), b.solutions.size());
  for (std::size_t i = 0; i < a.solutions.size(); ++i) EXPECT_EQ(a.solutions[i].values, b.solutions[i].values);
}

TEST(SolutionJson, Keys) {
  auto m = fixture_model("worked_example");
  auto j = solution_to_json(branch_and_bound(m), m);
  EXPECT_EQ(j.at("status"), "optimal");
  for (const char* key : {"objective_j_per_mol", "flow", "inflow", "outflow", "support"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.at("support").size(), 4u);
  EXPECT_EQ(j.at("inflow").at("0"), 1);
  IlpSolution none;
  EXPECT_EQ(solution_to_json(none, m).at("status"), "infeasible");
}
