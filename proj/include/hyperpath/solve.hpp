#pragma once

// Exact solver for the pathway models: bounded-variable tableau simplex,
// depth-first branch-and-bound, ranked enumeration with support cuts and
// an exhaustive oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperpath/netcore.hpp"
#include "hyperpath/pathopt.hpp"

namespace hyperpath {

enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0;
  std::vector<double> values;
  std::size_t pivots = 0;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-9;

inline bool row_satisfied(const Row& row, const std::vector<double>& x, double tol) {
  double lhs = 0, scale = 1 + std::abs(row.rhs);
  for (const auto& t : row.terms) {
    lhs += t.coef * x[t.var];
    scale += std::abs(t.coef * x[t.var]);
  }
  double slack = tol * scale;
  switch (row.sense) {
    case RowSense::Le: return lhs <= row.rhs + slack;
    case RowSense::Ge: return lhs >= row.rhs - slack;
    case RowSense::Eq: return std::abs(lhs - row.rhs) <= slack;
  }
  return false;
}

// Columns: structural variables, then one slack per inequality row, then
// artificials. Nonbasic columns sit at one of their bounds.
class BoundedSimplex {
 public:
  BoundedSimplex(const LpModel& model, const std::vector<double>& lb, const std::vector<double>& ub)
      : model_(model), n_(model.vars.size()), m_(model.rows.size()) {
    lo_ = lb;
    hi_ = ub;
    std::vector<std::vector<std::pair<std::size_t, double>>> extra(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto sense = model.rows[i].sense;
      if (sense == RowSense::Eq) continue;
      extra[i].push_back({add_column(0, kInf), sense == RowSense::Le ? 1.0 : -1.0});
    }
    x_.assign(lo_.size(), 0);
    for (std::size_t j = 0; j < n_; ++j) x_[j] = lo_[j];

    std::vector<double> residual(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      double r = model.rows[i].rhs;
      for (const auto& t : model.rows[i].terms) r -= t.coef * x_[t.var];
      residual[i] = r;
    }
    basis_.assign(m_, 0);
    std::vector<double> basic_coef(m_, 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (!extra[i].empty()) {
        auto [col, coef] = extra[i][0];
        if (residual[i] * coef >= 0) {
          basis_[i] = col;
          basic_coef[i] = coef;
          continue;
        }
      }
      double coef = residual[i] >= 0 ? 1.0 : -1.0;
      auto col = add_column(0, kInf);
      artificial_.push_back(col);
      extra[i].push_back({col, coef});
      basis_[i] = col;
      basic_coef[i] = coef;
    }
    cols_ = lo_.size();
    x_.resize(cols_, 0);
    where_.assign(cols_, -1);
    tab_.assign(m_ * cols_, 0);
    beta_.assign(m_, 0);
    for (std::size_t i = 0; i < m_; ++i) {
      double inv = 1.0 / basic_coef[i];
      for (const auto& t : model.rows[i].terms) at(i, t.var) += t.coef * inv;
      for (auto [col, coef] : extra[i]) at(i, col) += coef * inv;
      beta_[i] = residual[i] * inv;
      where_[basis_[i]] = static_cast<int>(i);
    }
  }

  LpSolution run() {
    LpSolution sol;
    for (std::size_t j = 0; j < n_; ++j)
      if (lo_[j] > hi_[j] + kFeasTol || !std::isfinite(lo_[j]) || !std::isfinite(hi_[j])) {
        sol.status = lo_[j] > hi_[j] ? LpStatus::Infeasible : LpStatus::NumericalFailure;
        return sol;
      }
    if (!artificial_.empty()) {
      std::vector<double> c(cols_, 0);
      for (auto a : artificial_) c[a] = 1;
      auto status = optimize(c, sol.pivots);
      if (status != LpStatus::Optimal) {
        sol.status = status == LpStatus::Unbounded ? LpStatus::NumericalFailure : status;
        return sol;
      }
      double infeasibility = 0, scale = 1;
      for (std::size_t i = 0; i < m_; ++i) scale = std::max(scale, std::abs(model_.rows[i].rhs));
      for (auto a : artificial_) infeasibility += value(a);
      if (infeasibility > 1e-7 * scale) {
        sol.status = LpStatus::Infeasible;
        return sol;
      }
      for (auto a : artificial_) hi_[a] = 0;
    }
    std::vector<double> c(cols_, 0);
    double sign = model_.maximizing() ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_; ++j) c[j] = sign * model_.cost[j];
    auto status = optimize(c, sol.pivots);
    if (status != LpStatus::Optimal) {
      sol.status = status;
      return sol;
    }
    sol.values.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) sol.values[j] = std::clamp(value(j), lo_[j], hi_[j]);
    for (const auto& row : model_.rows)
      if (!row_satisfied(row, sol.values, kFeasTol)) {
        sol.status = LpStatus::NumericalFailure;
        return sol;
      }
    sol.objective = 0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += model_.cost[j] * sol.values[j];
    sol.status = LpStatus::Optimal;
    return sol;
  }

 private:
  std::size_t add_column(double lo, double hi) {
    lo_.push_back(lo);
    hi_.push_back(hi);
    return lo_.size() - 1;
  }

  double& at(std::size_t i, std::size_t j) { return tab_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return tab_[i * cols_ + j]; }

  double value(std::size_t j) const { return where_[j] >= 0 ? beta_[where_[j]] : x_[j]; }

  LpStatus optimize(const std::vector<double>& c, std::size_t& pivots) {
    std::vector<double> d = c;
    for (std::size_t i = 0; i < m_; ++i) {
      double cb = c[basis_[i]];
      if (cb == 0) continue;
      for (std::size_t j = 0; j < cols_; ++j) d[j] -= cb * at(i, j);
    }
    double cscale = 1;
    for (double v : c) cscale = std::max(cscale, std::abs(v));
    const double dtol = 1e-9 * cscale;
    const std::size_t max_pivots = 50 * (m_ + cols_) + 10000;
    int degenerate = 0;
    bool bland = false;

    for (std::size_t iter = 0;; ++iter) {
      if (iter > max_pivots) return LpStatus::NumericalFailure;
      // pricing
      std::optional<std::size_t> q;
      double best = 0, dir = 0;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (where_[j] >= 0 || hi_[j] - lo_[j] <= 0) continue;
        double score = 0, dj = 0;
        if (x_[j] <= lo_[j] && d[j] < -dtol) {
          score = -d[j];
          dj = 1;
        } else if (x_[j] >= hi_[j] && d[j] > dtol) {
          score = d[j];
          dj = -1;
        } else {
          continue;
        }
        if (!q || (!bland && score > best)) {
          q = j;
          best = score;
          dir = dj;
          if (bland) break;
        }
      }
      if (!q) return LpStatus::Optimal;

      // ratio test
      double step = hi_[*q] - lo_[*q];
      std::optional<std::size_t> leave;
      double leave_alpha = 0;
      for (std::size_t i = 0; i < m_; ++i) {
        double alpha = at(i, *q) * dir;
        if (std::abs(alpha) < kPivotTol) continue;
        auto b = basis_[i];
        double limit;
        if (alpha > 0) {
          limit = (beta_[i] - lo_[b]) / alpha;
        } else {
          if (!std::isfinite(hi_[b])) continue;
          limit = (hi_[b] - beta_[i]) / -alpha;
        }
        limit = std::max(limit, 0.0);
        bool take = false;
        if (limit < step - 1e-12) {
          take = true;
        } else if (limit <= step + 1e-12 && leave) {
          take = bland ? basis_[i] < basis_[*leave] : std::abs(alpha) > std::abs(leave_alpha);
        }
        if (take) {
          step = limit;
          leave = i;
          leave_alpha = alpha;
        }
      }
      if (!std::isfinite(step)) return LpStatus::Unbounded;

      if (step <= 1e-12) {
        if (++degenerate > 50) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
      ++pivots;

      for (std::size_t i = 0; i < m_; ++i) beta_[i] -= at(i, *q) * dir * step;
      if (!leave) {
        x_[*q] = dir > 0 ? hi_[*q] : lo_[*q];
        continue;
      }
      std::size_t r = *leave;
      std::size_t out = basis_[r];
      double entering_value = x_[*q] + dir * step;
      x_[out] = leave_alpha > 0 ? lo_[out] : hi_[out];
      where_[out] = -1;

      double piv = at(r, *q);
      for (std::size_t j = 0; j < cols_; ++j) at(r, j) /= piv;
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == r) continue;
        double factor = at(i, *q);
        if (factor == 0) continue;
        for (std::size_t j = 0; j < cols_; ++j) at(i, j) -= factor * at(r, j);
        at(i, *q) = 0;
      }
      double dq = d[*q];
      if (dq != 0) {
        for (std::size_t j = 0; j < cols_; ++j) d[j] -= dq * at(r, j);
        d[*q] = 0;
      }
      basis_[r] = *q;
      where_[*q] = static_cast<int>(r);
      beta_[r] = entering_value;
    }
  }

  const LpModel& model_;
  std::size_t n_, m_, cols_ = 0;
  std::vector<double> lo_, hi_, x_, beta_, tab_;
  std::vector<std::size_t> basis_, artificial_;
  std::vector<int> where_;
};

}  // namespace detail

inline LpSolution simplex_solve(const LpModel& lp, const std::vector<double>& lb, const std::vector<double>& ub) {
  return detail::BoundedSimplex(lp, lb, ub).run();
}

inline LpSolution simplex_solve(const LpModel& lp) {
  std::vector<double> lb, ub;
  for (const auto& v : lp.vars) {
    lb.push_back(v.lb);
    ub.push_back(v.ub);
  }
  return simplex_solve(lp, lb, ub);
}

// ---------------------------------------------------------------------------
// Integer solutions

enum class IlpStatus : std::uint8_t { Optimal, Infeasible };

inline const char* to_string(IlpStatus s) { return s == IlpStatus::Optimal ? "optimal" : "infeasible"; }

struct IlpSolution {
  IlpStatus status = IlpStatus::Infeasible;
  double objective = 0;
  std::vector<long long> values;
  Hyperflow flow;
  std::map<EdgeId, int> indicator;
  Support support;
  std::size_t nodes = 0;
};

class NodeLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InstanceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  std::size_t node_limit = 10'000'000;
};

namespace detail {

constexpr double kIntTol = 1e-6;
constexpr double kObjTol = 1e-6;

inline IlpSolution make_solution(const IlpModel& m, std::vector<long long> values) {
  IlpSolution s;
  s.status = IlpStatus::Optimal;
  for (std::size_t j = 0; j < m.vars.size(); ++j) s.objective += m.cost[j] * static_cast<double>(values[j]);
  for (const auto& [key, j] : m.flow_var)
    if (values[j] != 0) s.flow.flow[key] = values[j];
  for (const auto& [e, j] : m.indicator_var) s.indicator[e] = static_cast<int>(values[j]);
  s.support = support(s.flow);
  s.values = std::move(values);
  return s;
}

inline bool feasible_exact(const IlpModel& m, const std::vector<long long>& values) {
  std::vector<double> x(values.begin(), values.end());
  for (std::size_t j = 0; j < m.vars.size(); ++j)
    if (x[j] < m.vars[j].lb || x[j] > m.vars[j].ub) return false;
  for (const auto& row : m.rows)
    if (!row_satisfied(row, x, 0)) return false;
  return true;
}

// true when a should replace b as the incumbent
inline bool better(const IlpModel& m, const IlpSolution& a, const IlpSolution& b) {
  double sa = m.maximizing() ? -a.objective : a.objective;
  double sb = m.maximizing() ? -b.objective : b.objective;
  if (sa < sb - kObjTol) return true;
  if (sa > sb + kObjTol) return false;
  std::vector<EdgeId> ea(a.support.begin(), a.support.end()), eb(b.support.begin(), b.support.end());
  if (ea != eb) return ea < eb;
  return a.values < b.values;
}

}  // namespace detail

/// Depth-first, most-fractional branching, lower branch first.
inline IlpSolution branch_and_bound(const IlpModel& model, const SolverOptions& opts = {}) {
  struct Node {
    std::vector<double> lb, ub;
  };
  Node root;
  for (const auto& v : model.vars) {
    root.lb.push_back(v.lb);
    root.ub.push_back(v.ub);
  }
  std::vector<Node> stack{std::move(root)};
  std::optional<IlpSolution> best;
  std::size_t nodes = 0;
  const double sign = model.maximizing() ? -1.0 : 1.0;

  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    if (++nodes > opts.node_limit)
      throw NodeLimitExceeded("branch-and-bound node limit of " + std::to_string(opts.node_limit) + " reached");
    auto lp = simplex_solve(model, node.lb, node.ub);
    if (lp.status == LpStatus::Infeasible) continue;
    if (lp.status != LpStatus::Optimal)
      throw std::runtime_error(std::string("LP relaxation failed: ") + to_string(lp.status));
    if (best && sign * lp.objective > sign * best->objective + detail::kObjTol) continue;

    std::optional<std::size_t> pick;
    double worst = 0;
    for (std::size_t j = 0; j < model.vars.size(); ++j) {
      if (!model.vars[j].integer) continue;
      double v = lp.values[j];
      double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > detail::kIntTol && frac > worst + 1e-12) {
        worst = frac;
        pick = j;
      }
    }
    if (!pick) {
      std::vector<long long> values;
      for (double v : lp.values) values.push_back(std::llround(v));
      if (!detail::feasible_exact(model, values))
        throw std::runtime_error("rounded LP vertex violates the model; numerical trouble");
      auto candidate = detail::make_solution(model, std::move(values));
      if (!best || detail::better(model, candidate, *best)) best = std::move(candidate);
      continue;
    }
    double v = lp.values[*pick];
    Node down = node, up = std::move(node);
    down.ub[*pick] = std::floor(v);
    up.lb[*pick] = std::ceil(v);
    stack.push_back(std::move(up));
    stack.push_back(std::move(down));
  }
  IlpSolution out = best ? std::move(*best) : IlpSolution{};
  out.nodes = nodes;
  return out;
}

struct RankedPathways {
  std::vector<IlpSolution> solutions;
  std::vector<Support> cuts;  // cuts[i] was added after solutions[i]
};

/// Solve, cut the support, repeat. Stops early on infeasibility or on a
/// solution with empty support (nothing left to cut). An empty support is
/// kept only as the first result, since it lies inside every other support.
inline RankedPathways enumerate(const IlpModel& model, std::size_t k, const SolverOptions& opts = {}) {
  if (k < 1) throw InputError("enumeration count must be >= 1");
  RankedPathways out;
  IlpModel current = model;
  while (out.solutions.size() < k) {
    auto s = branch_and_bound(current, opts);
    if (s.status != IlpStatus::Optimal) break;
    if (s.support.empty()) {
      if (out.solutions.empty()) out.solutions.push_back(s);
      break;
    }
    out.solutions.push_back(s);
    current = add_cut(current, s.support);
    out.cuts.push_back(s.support);
  }
  return out;
}

/// Exhaustive scan over every integer assignment within the variable
/// bounds. Partial assignments are dropped only when some row can no
/// longer be satisfied or the objective cannot beat the incumbent.
inline IlpSolution brute_force(const IlpModel& model, double max_assignments = 1e8) {
  const std::size_t n = model.vars.size();
  std::vector<long long> lo(n), hi(n);
  double product = 1;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& v = model.vars[j];
    if (!v.integer) throw InputError("brute force needs integer variables");
    lo[j] = static_cast<long long>(std::ceil(v.lb));
    hi[j] = static_cast<long long>(std::floor(v.ub));
    if (hi[j] < lo[j]) return {};
    product *= static_cast<double>(hi[j] - lo[j] + 1);
  }
  if (product > max_assignments)
    throw InstanceTooLarge("brute force domain of " + std::to_string(product) + " assignments exceeds the limit");

  const double sign = model.maximizing() ? -1.0 : 1.0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_of(n);
  std::vector<double> partial(model.rows.size(), 0), rem_min(model.rows.size(), 0), rem_max(model.rows.size(), 0);
  for (std::size_t i = 0; i < model.rows.size(); ++i)
    for (const auto& t : model.rows[i].terms) {
      rows_of[t.var].push_back({i, t.coef});
      double a = t.coef * static_cast<double>(lo[t.var]), b = t.coef * static_cast<double>(hi[t.var]);
      rem_min[i] += std::min(a, b);
      rem_max[i] += std::max(a, b);
    }
  std::vector<double> obj_rest(n + 1, 0);  // best possible signed objective of vars j..n-1
  for (std::size_t j = n; j-- > 0;) {
    double a = sign * model.cost[j] * static_cast<double>(lo[j]), b = sign * model.cost[j] * static_cast<double>(hi[j]);
    obj_rest[j] = obj_rest[j + 1] + std::min(a, b);
  }

  auto row_possible = [&](std::size_t i) {
    const auto& row = model.rows[i];
    double low = partial[i] + rem_min[i], high = partial[i] + rem_max[i];
    constexpr double eps = 1e-9;
    switch (row.sense) {
      case RowSense::Le: return low <= row.rhs + eps;
      case RowSense::Ge: return high >= row.rhs - eps;
      case RowSense::Eq: return low <= row.rhs + eps && high >= row.rhs - eps;
    }
    return false;
  };

  std::optional<IlpSolution> best;
  std::vector<long long> x(n, 0);
  auto rec = [&](auto&& self, std::size_t j, double obj) -> void {
    if (best && obj + obj_rest[j] > sign * best->objective + detail::kObjTol) return;
    if (j == n) {
      auto candidate = detail::make_solution(model, x);
      if (!best || detail::better(model, candidate, *best)) best = std::move(candidate);
      return;
    }
    for (long long v = lo[j]; v <= hi[j]; ++v) {
      x[j] = v;
      bool ok = true;
      for (auto [i, coef] : rows_of[j]) {
        double a = coef * static_cast<double>(lo[j]), b = coef * static_cast<double>(hi[j]);
        partial[i] += coef * static_cast<double>(v);
        rem_min[i] -= std::min(a, b);
        rem_max[i] -= std::max(a, b);
      }
      for (auto [i, coef] : rows_of[j])
        if (!row_possible(i)) ok = false;
      if (ok) self(self, j + 1, obj + sign * model.cost[j] * static_cast<double>(v));
      for (auto [i, coef] : rows_of[j]) {
        double a = coef * static_cast<double>(lo[j]), b = coef * static_cast<double>(hi[j]);
        partial[i] -= coef * static_cast<double>(v);
        rem_min[i] += std::min(a, b);
        rem_max[i] += std::max(a, b);
      }
    }
  };
  // rows with no terms still have to hold
  for (std::size_t i = 0; i < model.rows.size(); ++i)
    if (model.rows[i].terms.empty() && !row_possible(i)) return {};
  rec(rec, 0, 0.0);
  return best ? std::move(*best) : IlpSolution{};
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json solution_to_json(const IlpSolution& s, const IlpModel& m) {
  nlohmann::json j;
  j["status"] = to_string(s.status);
  if (s.status != IlpStatus::Optimal) return j;
  if (m.maximizing()) {
    j["objective"] = s.objective;
  } else {
    j["objective_j_per_mol"] = s.objective;
    j["objective_kj_per_mol"] = s.objective / 1000.0;
  }
  nlohmann::json flow = nlohmann::json::object(), in = nlohmann::json::object(), out = nlohmann::json::object();
  for (const auto& [key, value] : s.flow.flow) {
    auto id = std::to_string(key.id);
    switch (key.kind) {
      case FlowKind::Reaction: flow[id] = value; break;
      case FlowKind::Inflow: in[id] = value; break;
      case FlowKind::Outflow: out[id] = value; break;
    }
  }
  j["flow"] = flow;
  j["inflow"] = in;
  j["outflow"] = out;
  nlohmann::json supp = nlohmann::json::array();
  for (auto e : s.support) supp.push_back(index(e));
  j["support"] = supp;
  return j;
}

inline nlohmann::json lp_solution_to_json(const LpSolution& s, const LpModel& m) {
  nlohmann::json j;
  j["status"] = to_string(s.status);
  if (s.status != LpStatus::Optimal) return j;
  j["objective"] = s.objective;
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t i = 0; i < m.vars.size(); ++i)
    if (s.values[i] != 0) values[m.vars[i].name] = s.values[i];
  j["values"] = values;
  return j;
}

}  // namespace hyperpath
