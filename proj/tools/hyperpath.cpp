// hyperpath: batch front end for network expansion, barrier annotation,
// pathway queries and exports.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "hyperpath/kinetics.hpp"
#include "hyperpath/molgraph.hpp"
#include "hyperpath/netcore.hpp"
#include "hyperpath/pathopt.hpp"
#include "hyperpath/rewrite.hpp"
#include "hyperpath/solve.hpp"

namespace fs = std::filesystem;
using namespace hyperpath;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kLimit = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

// Everything a command touched, for the run manifest.
struct RunLog {
  std::string command;
  json inputs = json::array();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::string read(const std::string& path) {
    auto text = read_file(path);
    inputs.push_back({{"path", path}, {"sha256", sha256_hex(text)}});
    return text;
  }
};

json collect_flags(const CLI::App* sub) {
  json flags = json::object();
  for (const auto* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0) continue;
    auto results = opt->results();
    flags[opt->get_name()] = results.size() == 1 ? json(results[0]) : json(results);
  }
  return flags;
}

void write_manifest(const RunLog& log, const CLI::App* sub, const std::string& out, const std::string& manifest) {
  std::string path = manifest;
  if (path.empty()) path = (out.empty() || out == "-") ? "hyperpath.manifest.json" : out + ".manifest.json";
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - log.start).count();
  json j = {{"command", log.command},
            {"tool_version", kVersion},
            {"inputs", log.inputs},
            {"flags", collect_flags(sub)},
            {"wall_seconds", seconds}};
  write_output(path, j.dump(2) + "\n");
}

std::map<std::string, int> parse_element_limits(const std::string& text) {
  std::map<std::string, int> limits;
  if (text.empty()) return limits;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--max-elements expects EL=N pairs, got '" + item + "'");
    auto n = detail::parse_int(item.substr(eq + 1));
    if (!n || *n < 0) throw UsageError("bad element limit '" + item + "'");
    limits[item.substr(0, eq)] = static_cast<int>(*n);
  }
  return limits;
}

// Support edges in the order they can fire from the query's sources.
std::vector<EdgeId> firing_order(const Hypergraph& h, const IlpSolution& s) {
  std::set<VertexId> available;
  for (const auto& [key, value] : s.flow.flow)
    if (key.kind == FlowKind::Inflow) available.insert(VertexId{key.id});
  std::vector<EdgeId> pending(s.support.begin(), s.support.end()), order;
  while (!pending.empty()) {
    auto pick = pending.begin();
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      bool ready = true;
      for (const auto& [v, m] : h.edge(*it).reactants) ready = ready && available.contains(v);
      if (ready) {
        pick = it;
        break;
      }
    }
    for (const auto& [v, m] : h.edge(*pick).products) available.insert(v);
    order.push_back(*pick);
    pending.erase(pick);
  }
  return order;
}

std::string energy_profile(const Hypergraph& h, const IlpSolution& s, const BarrierTable& table) {
  std::ostringstream out;
  out << "step,edge_id,flow,barrier_kj_per_mol,cumulative_kj_per_mol\n";
  double total = 0;
  int step = 0;
  for (auto e : firing_order(h, s)) {
    long long f = s.flow[FlowKey::reaction(e)];
    double g = table.at(e) / 1000.0;
    total += static_cast<double>(f) * g;
    out << ++step << "," << index(e) << "," << f << "," << g << "," << total << "\n";
  }
  return out.str();
}

Hyperflow flow_from_json(const json& j) {
  Hyperflow f;
  auto read = [&](const char* field, FlowKind kind) {
    if (!j.contains(field)) return;
    for (const auto& [k, v] : j.at(field).items()) {
      auto id = detail::parse_int(k);
      if (!id || *id < 0) throw InputError(std::string("bad id in solution ") + field);
      f.flow[{kind, static_cast<std::uint32_t>(*id)}] = v.get<long long>();
    }
  };
  read("flow", FlowKind::Reaction);
  read("inflow", FlowKind::Inflow);
  read("outflow", FlowKind::Outflow);
  return f;
}

struct QueryInputs {
  std::string network, barriers, query;
  double temperature = 298.15;
  long long flow_cap = 0;  // 0: keep the query's value
};

void add_query_inputs(CLI::App* sub, QueryInputs& in) {
  sub->add_option("--network", in.network, "hypergraph JSON")->required();
  sub->add_option("--barriers", in.barriers, "CSV edge_id,barrier_kj_per_mol")->required();
  sub->add_option("--query", in.query, "pathway query JSON")->required();
  sub->add_option("--temperature-k", in.temperature, "temperature in kelvin")->check(CLI::PositiveNumber);
  sub->add_option("--flow-cap", in.flow_cap, "per-edge flow cap (overrides the query)")->check(CLI::PositiveNumber);
}

struct Loaded {
  Hypergraph h;
  BarrierTable table;
  WeightModel weights;
  PathwayQuery query;
  IlpModel model;
};

Loaded load_query(RunLog& log, const QueryInputs& in) {
  Loaded l;
  l.h = hypergraph_from_json(json::parse(log.read(in.network)));
  l.table = load_barriers(log.read(in.barriers), l.h);
  for (const auto& w : l.table.warnings) std::cerr << "warning: " << w << "\n";
  Thermo thermo{in.temperature};
  l.weights = objective_coefficients(l.table, thermo, l.h);
  l.query = query_from_json(json::parse(log.read(in.query)), l.h);
  if (in.flow_cap > 0) l.query.flow_cap = in.flow_cap;
  l.model = build_model(l.h, l.weights, l.query);
  return l;
}

std::size_t node_limit_from_env(std::size_t fallback) {
  if (const char* env = std::getenv("HYPERPATH_NODE_LIMIT")) {
    auto n = detail::parse_int(env);
    if (!n || *n < 1) throw UsageError("HYPERPATH_NODE_LIMIT must be a positive integer");
    return static_cast<std::size_t>(*n);
  }
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reaction network expansion and pathway queries"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string out, manifest;

  // expand
  auto* expand = app.add_subcommand("expand", "grow a reaction network from seed molecules");
  std::vector<std::string> seeds, filters;
  std::string rules_path, dot_path, element_limits;
  int iterations = 1, threads = 1;
  expand->add_option("--seed", seeds, "seed molecule file(s), MGF")->required();
  expand->add_option("--rules", rules_path, "rule DSL file")->required();
  expand->add_option("--max-iterations", iterations, "expansion iterations")->check(CLI::NonNegativeNumber);
  expand->add_option("--max-elements", element_limits, "element caps, e.g. C=2,N=4,O=4");
  expand->add_option("--filter", filters, "product filter: no-rings-le=N, no-cumulated-double-bonds");
  expand->add_option("--dot", dot_path, "also write the network as DOT");
  expand->add_option("--threads", threads, "matching threads")->check(CLI::PositiveNumber);
  expand->add_option("--out", out, "network JSON (default stdout)");
  expand->add_option("--manifest", manifest, "run manifest path");

  // annotate-check
  auto* annotate = app.add_subcommand("annotate-check", "validate barriers against a network and report weights");
  std::string network_path, barriers_path;
  double temperature = 298.15;
  annotate->add_option("--network", network_path, "hypergraph JSON")->required();
  annotate->add_option("--barriers", barriers_path, "CSV edge_id,barrier_kj_per_mol")->required();
  annotate->add_option("--temperature-k", temperature, "temperature in kelvin")->check(CLI::PositiveNumber);
  annotate->add_option("--out", out, "report JSON (default stdout)");
  annotate->add_option("--manifest", manifest, "run manifest path");

  // query
  auto* query = app.add_subcommand("query", "rank pathways for a query");
  QueryInputs qin;
  std::size_t k = 1, node_limit = 10'000'000;
  bool relax_mode = false;
  std::string dot_prefix, profile_prefix;
  add_query_inputs(query, qin);
  query->add_option("-k", k, "number of ranked pathways")->check(CLI::PositiveNumber);
  query->add_flag("--relax", relax_mode, "solve the LP relaxation instead");
  query->add_option("--node-limit", node_limit, "branch-and-bound node budget")->check(CLI::PositiveNumber);
  query->add_option("--dot-prefix", dot_prefix, "write <prefix><rank>.dot per solution");
  query->add_option("--profile-prefix", profile_prefix, "write <prefix><rank>.csv energy profiles");
  query->add_option("--out", out, "solutions JSON (default stdout)");
  query->add_option("--manifest", manifest, "run manifest path");

  // export-lp
  auto* export_lp = app.add_subcommand("export-lp", "write the query model as an LP file");
  QueryInputs lin;
  add_query_inputs(export_lp, lin);
  export_lp->add_option("--out", out, "LP file (default stdout)");
  export_lp->add_option("--manifest", manifest, "run manifest path");

  // export-dot
  auto* export_dot = app.add_subcommand("export-dot", "write a network, optionally with a solution, as DOT");
  std::string solutions_path;
  std::size_t rank = 1;
  export_dot->add_option("--network", network_path, "hypergraph JSON")->required();
  export_dot->add_option("--solutions", solutions_path, "solutions JSON from query");
  export_dot->add_option("--rank", rank, "which solution to draw (1-based)")->check(CLI::PositiveNumber);
  export_dot->add_option("--out", out, "DOT file (default stdout)");
  export_dot->add_option("--manifest", manifest, "run manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  RunLog log;
  CLI::App* sub = app.get_subcommands().front();
  log.command = sub->get_name();
  try {
    if (sub == expand) {
      for (const auto& f : filters) {
        try {
          parse_right_predicate(f);
        } catch (const InputError& e) {
          throw UsageError(e.what());
        }
      }
      ExpansionConfig cfg;
      for (const auto& s : seeds)
        for (auto& g : parse_molecules(log.read(s))) cfg.seed_molecules.push_back(std::move(g));
      cfg.max_element_counts = parse_element_limits(element_limits);
      cfg.max_iterations = iterations;
      cfg.right_predicates = filters;
      cfg.threads = threads;
      auto rules = parse_rules(log.read(rules_path));
      auto result = expand_network(cfg, rules);
      json j = to_json(result.network);
      json stats = json::array();
      for (const auto& s : result.iterations)
        stats.push_back({{"iteration", s.iteration}, {"molecules", s.molecules}, {"reactions", s.reactions}});
      j["iterations"] = stats;
      json rules_used = json::array();
      for (const auto& d : result.derivations) rules_used.push_back(d.rule);
      j["edge_rules"] = rules_used;
      write_output(out, j.dump(1) + "\n");
      if (!dot_path.empty()) write_output(dot_path, to_dot(result.network));
      std::cerr << result.network.vertex_count() << " molecules, " << result.network.edge_count() << " reactions\n";
    } else if (sub == annotate) {
      auto h = hypergraph_from_json(json::parse(log.read(network_path)));
      auto table = load_barriers(log.read(barriers_path), h);
      Thermo thermo{temperature};
      auto weights = objective_coefficients(table, thermo, h);
      auto p = reaction_probabilities(table, thermo);
      json edges = json::array();
      for (const auto& e : h.edges()) {
        double g = table.at(e.id);
        edges.push_back({{"id", index(e.id)},
                         {"barrier_kj_per_mol", g / 1000.0},
                         {"rate_constant_per_s", rate_constant(g, thermo)},
                         {"probability", p.at(e.id)},
                         {"coefficient_j_per_mol", weights.coeff.at(e.id)}});
      }
      json report = {{"temperature_k", temperature},
                     {"log_partition", weights.logD},
                     {"edges", edges},
                     {"warnings", table.warnings}};
      for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
      write_output(out, report.dump(1) + "\n");
    } else if (sub == query) {
      auto l = load_query(log, qin);
      if (relax_mode) {
        auto lp = relax(l.model);
        auto sol = simplex_solve(lp);
        json j = lp_solution_to_json(sol, lp);
        j["mode"] = "lp_relaxation";
        write_output(out, j.dump(1) + "\n");
      } else {
        SolverOptions opts;
        opts.node_limit = query->count("--node-limit") ? node_limit : node_limit_from_env(node_limit);
        auto ranked = enumerate(l.model, k, opts);
        json list = json::array();
        if (ranked.solutions.empty()) list.push_back({{"status", "infeasible"}, {"cuts_applied", json::array()}});
        for (std::size_t i = 0; i < ranked.solutions.size(); ++i) {
          const auto& s = ranked.solutions[i];
          json j = solution_to_json(s, l.model);
          j["rank"] = i + 1;
          json cuts = json::array();
          for (std::size_t c = 0; c < i && c < ranked.cuts.size(); ++c) {
            json edges = json::array();
            for (auto e : ranked.cuts[c]) edges.push_back(index(e));
            cuts.push_back(edges);
          }
          j["cuts_applied"] = cuts;
          list.push_back(j);
          auto tag = std::to_string(i + 1);
          if (!dot_prefix.empty()) write_output(dot_prefix + tag + ".dot", to_dot(l.h, &s.flow));
          if (!profile_prefix.empty()) write_output(profile_prefix + tag + ".csv", energy_profile(l.h, s, l.table));
        }
        write_output(out, list.dump(1) + "\n");
        std::cerr << ranked.solutions.size() << " pathway(s)\n";
      }
    } else if (sub == export_lp) {
      auto l = load_query(log, lin);
      write_output(out, export_lp_text(l.model));
    } else if (sub == export_dot) {
      auto h = hypergraph_from_json(json::parse(log.read(network_path)));
      if (solutions_path.empty()) {
        write_output(out, to_dot(h));
      } else {
        auto sols = json::parse(log.read(solutions_path));
        if (!sols.is_array() || rank > sols.size()) throw InputError("solutions file has no rank " + std::to_string(rank));
        const auto& s = sols[rank - 1];
        if (s.value("status", std::string()) != "optimal") throw InputError("solution " + std::to_string(rank) + " is not optimal");
        auto flow = flow_from_json(s);
        vertex_balance(h, flow);  // rejects ids outside the network
        write_output(out, to_dot(h, &flow));
      }
    }
    write_manifest(log, sub, out, manifest);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NodeLimitExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLimit;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const RuleError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kLimit;
  }
  return kOk;
}
