#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gmaa/gmaa.hpp"

namespace {

using namespace gmaa;

enum ExitCode { ok = 0, usage = 1, parse_failure = 2, cap = 3, invariant = 4, mismatch = 5 };

struct RunConfig {
  std::string problem;
  std::string random;  // "n,S,A,O,seed"
  int horizon = 0;
  std::string algorithm = "ice";
  std::string heuristic = "qbg";
  std::string qrepr = "tree";
  double pe_tol = 1e-9;
  std::string stats_path;
  std::string policy_path;
  std::string sweep;
  std::string cache_dir;
  double time_limit = 600.0;
  std::size_t node_cap = 1'000'000;
  std::size_t max_vectors = 200'000;
  std::size_t max_tree_nodes = 20'000'000;
};

struct Outcome {
  PastJointPolicy policy;
  double value = 0.0;
  nlohmann::json stats;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

DecPomdpModel load_model(const RunConfig& cfg, int horizon) {
  if (!cfg.random.empty()) {
    const auto parts = split(cfg.random, ',');
    if (parts.size() != 5) throw CLI::ValidationError("--random", "expects n,S,A,O,seed");
    RandomModelSizes sizes{std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]), std::stoi(parts[3])};
    return random_model(std::stoull(parts[4]), sizes, horizon);
  }
  return load_dpomdp(cfg.problem, horizon);
}

SearchVariant parse_variant(const std::string& s) {
  if (s == "gmaa") return SearchVariant::full;
  if (s == "ic") return SearchVariant::ic;
  if (s == "ice") return SearchVariant::ice;
  throw CLI::ValidationError("--algorithm", "unknown algorithm '" + s + "'");
}

HeuristicConfig heuristic_config(const RunConfig& cfg) {
  HeuristicConfig hc;
  hc.kind = parse_heuristic_kind(cfg.heuristic);
  hc.representation = parse_representation(cfg.qrepr);
  hc.max_vectors = cfg.max_vectors;
  hc.max_tree_nodes = cfg.max_tree_nodes;
  if (hc.kind == HeuristicKind::qbg && hc.representation != QRepresentation::tree)
    throw CLI::ValidationError("--qrepr", "qbg supports only the tree representation");
  return hc;
}

Outcome run_once(const RunConfig& cfg, const std::string& algorithm, int horizon) {
  const DecPomdpModel m = load_model(cfg, horizon);
  Outcome out;
  if (algorithm == "bf") {
    const auto start = std::chrono::steady_clock::now();
    auto [pi, v] = brute_force_search(m);
    out.policy = std::move(pi);
    out.value = v;
    out.stats = {{"variant", "bf"},
                 {"heuristic", "none"},
                 {"horizon", horizon},
                 {"v_star", v},
                 {"wallclock_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  } else {
    const SearchVariant variant = parse_variant(algorithm);
    const HeuristicConfig hc = heuristic_config(cfg);
    const QHeuristic q = cfg.cache_dir.empty() ? compute_heuristic(m, hc) : cached_heuristic(m, hc, cfg.cache_dir);
    SearchConfig sc;
    sc.variant = variant;
    sc.cluster.tolerance = cfg.pe_tol;
    sc.node_cap = cfg.node_cap;
    sc.time_limit_s = cfg.time_limit;
    auto result = gmaa_search(m, q, sc);
    out.policy = std::move(result.policy);
    out.value = result.value;
    out.stats = result.stats.to_json();
  }
  const double check = policy_value(m, out.policy);
  if (std::abs(check - out.value) > 1e-9 * std::max(1.0, std::abs(check)))
    throw InvariantViolation("re-evaluated policy value " + std::to_string(check) + " differs from V*");
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

int solve_command(const RunConfig& cfg) {
  const Outcome out = run_once(cfg, cfg.algorithm, cfg.horizon);
  std::cout << "V* = " << format_value(out.value) << "\n";
  if (!cfg.stats_path.empty()) write_file(cfg.stats_path, out.stats.dump(2) + "\n");
  if (!cfg.policy_path.empty()) {
    const DecPomdpModel m = load_model(cfg, cfg.horizon);
    const bool csv = cfg.policy_path.size() > 4 && cfg.policy_path.substr(cfg.policy_path.size() - 4) == ".csv";
    write_file(cfg.policy_path, csv ? policy_to_csv(m, out.policy) : policy_to_tree_text(m, out.policy));
  }
  return ok;
}

std::string format_sizes(const nlohmann::json& stats) {
  if (!stats.contains("cbg_sizes_per_stage")) return "";
  std::string s;
  for (const auto& st : stats["cbg_sizes_per_stage"]) {
    const double x = st["mean_clustered"].get<double>();
    char buf[32];
    std::snprintf(buf, sizeof buf, x == std::round(x) ? "%.1f" : "%.2f", x);
    if (!s.empty()) s += ",";
    s += buf;
  }
  return s;
}

int sweep_command(const RunConfig& cfg) {
  const auto dots = cfg.sweep.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--sweep", "expects h1..h2");
  const int h1 = std::stoi(cfg.sweep.substr(0, dots));
  const int h2 = std::stoi(cfg.sweep.substr(dots + 2));
  if (h1 < 1 || h2 < h1) throw CLI::ValidationError("--sweep", "needs 1 <= h1 <= h2");
  std::cout << "algorithm,horizon,status,v_star,time_s,heuristic_time_s,nodes_expanded,cbg_mean_clustered\n";
  for (const auto& alg : split(cfg.algorithm, ',')) {
    for (int h = h1; h <= h2; ++h) {
      std::string status = "ok";
      Outcome out;
      try {
        out = run_once(cfg, alg, h);
      } catch (const ResourceCapExceeded&) {
        status = "cap";
      } catch (const InvariantViolation&) {
        status = "invariant";
      }
      if (status != "ok") {
        std::cout << alg << "," << h << "," << status << ",,,,,\n";
        continue;
      }
      std::uint64_t nodes = 0;
      if (out.stats.contains("nodes_expanded_per_stage"))
        for (const auto& n : out.stats["nodes_expanded_per_stage"]) nodes += n.get<std::uint64_t>();
      char row[256];
      std::snprintf(row, sizeof row, "%s,%d,ok,%s,%.4f,%.4f,%llu,\"%s\"\n", alg.c_str(), h,
                    format_value(out.value).c_str(), out.stats.value("wallclock_s", 0.0),
                    out.stats.value("heuristic_time_s", 0.0), static_cast<unsigned long long>(nodes),
                    format_sizes(out.stats).c_str());
      std::cout << row;
      std::cout.flush();
    }
  }
  return ok;
}

struct VerifyConfig {
  int seeds = 100;
  std::uint64_t first_seed = 0;
  std::string sizes = "2,2,2,2";
  int horizon = 3;
  double brute_cap = 1e7;
};

int verify_command(const VerifyConfig& vc) {
  const auto parts = split(vc.sizes, ',');
  if (parts.size() != 4) throw CLI::ValidationError("--sizes", "expects n,S,A,O");
  const RandomModelSizes sizes{std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]), std::stoi(parts[3])};
  int agree = 0, mismatches = 0, trace_violations = 0, capped = 0;
  for (int k = 0; k < vc.seeds; ++k) {
    const std::uint64_t seed = vc.first_seed + static_cast<std::uint64_t>(k);
    const DecPomdpModel m = random_model(seed, sizes, vc.horizon);
    try {
      const double bf = brute_force_search(m, vc.brute_cap).second;
      const QHeuristic q = compute_heuristic(m, HeuristicConfig{});
      SearchConfig sc;
      sc.record_trace = true;
      bool same = true;
      std::vector<PolicyEncoding> traces[3];
      const SearchVariant variants[] = {SearchVariant::full, SearchVariant::ic, SearchVariant::ice};
      for (int v = 0; v < 3; ++v) {
        sc.variant = variants[v];
        const auto r = gmaa_search(m, q, sc);
        traces[v] = r.stats.trace;
        if (std::abs(r.value - bf) > 1e-9) {
          same = false;
          std::cout << "seed " << seed << ": " << to_string(variants[v]) << " V* = " << r.value
                    << " but brute force = " << bf << "\n";
        }
      }
      if (traces[1] != traces[2]) {
        ++trace_violations;
        std::cout << "seed " << seed << ": IC and ICE selected different node sequences\n";
      }
      if (same) ++agree; else ++mismatches;
    } catch (const ResourceCapExceeded& e) {
      ++capped;
      std::cout << "seed " << seed << ": cap exceeded (" << e.what() << ")\n";
    }
  }
  std::cout << agree << "/" << vc.seeds << " agree\n";
  std::cout << "trace violations: " << trace_violations << "\n";
  if (mismatches > 0 || trace_violations > 0) return ExitCode::mismatch;
  if (capped > 0) return cap;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal Dec-POMDP planning with GMAA* and incremental expansion"};
  app.set_version_flag("--version", "gmaa 1.0");
  RunConfig cfg;
  auto* problem = app.add_option("--problem", cfg.problem, ".dpomdp file")->check(CLI::ExistingFile);
  auto* random = app.add_option("--random", cfg.random, "random model n,S,A,O,seed");
  problem->excludes(random);
  app.add_option("--horizon", cfg.horizon, "planning horizon")->check(CLI::PositiveNumber);
  app.add_option("--algorithm", cfg.algorithm, "bf|gmaa|ic|ice (comma list for --sweep)");
  app.add_option("--heuristic", cfg.heuristic, "qmdp|qpomdp|qbg")
      ->check(CLI::IsMember({"qmdp", "qpomdp", "qbg"}));
  app.add_option("--qrepr", cfg.qrepr, "tree|vector|hybrid")->check(CLI::IsMember({"tree", "vector", "hybrid"}));
  app.add_option("--pe-tol", cfg.pe_tol, "probabilistic-equivalence tolerance")->check(CLI::NonNegativeNumber);
  app.add_option("--stats", cfg.stats_path, "write search statistics JSON");
  app.add_option("--policy", cfg.policy_path, "write the policy (.csv table, otherwise tree text)");
  app.add_option("--sweep", cfg.sweep, "horizon range h1..h2, prints CSV");
  app.add_option("--cache-heuristic", cfg.cache_dir, "heuristic cache directory");
  app.add_option("--time-limit", cfg.time_limit, "seconds")->check(CLI::PositiveNumber);
  app.add_option("--node-cap", cfg.node_cap, "open-list size cap")->check(CLI::PositiveNumber);
  app.add_option("--vector-cap", cfg.max_vectors, "vector count cap")->check(CLI::PositiveNumber);
  app.add_option("--tree-cap", cfg.max_tree_nodes, "belief tree node cap")->check(CLI::PositiveNumber);

  VerifyConfig vc;
  auto* verify = app.add_subcommand("verify", "compare brute force, GMAA*, IC and ICE on random models");
  verify->add_option("--seeds", vc.seeds, "number of seeds")->check(CLI::PositiveNumber);
  verify->add_option("--seed", vc.first_seed, "first seed (replay one case with --seeds 1)");
  verify->add_option("--sizes", vc.sizes, "n,S,A,O");
  verify->add_option("--horizon", vc.horizon, "planning horizon")->check(CLI::PositiveNumber);
  verify->add_option("--brute-cap", vc.brute_cap, "max joint policies for brute force")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  try {
    if (verify->parsed()) return verify_command(vc);
    if (cfg.problem.empty() && cfg.random.empty()) throw CLI::ValidationError("--problem", "a problem source is required");
    if (!cfg.sweep.empty()) return sweep_command(cfg);
    if (cfg.horizon < 1) throw CLI::ValidationError("--horizon", "a horizon >= 1 is required");
    return solve_command(cfg);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return parse_failure;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return parse_failure;
  } catch (const ResourceCapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return cap;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return invariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return usage;
  }
}
