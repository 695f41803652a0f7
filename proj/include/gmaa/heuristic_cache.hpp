#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gmaa/dpomdp.hpp"
#include "gmaa/heuristics.hpp"

namespace gmaa {

/// Lossless JSON form of a computed heuristic (doubles round-trip exactly).
struct HeuristicSerializer {
  static nlohmann::json to_json(const QHeuristic& q) {
    nlohmann::json graph = nlohmann::json::array();
    for (const auto& stage : q.graph_) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : stage) nodes.push_back({{"b", n.belief}, {"c", n.child}});
      graph.push_back(std::move(nodes));
    }
    return {{"kind", to_string(q.kind_)},
            {"representation", to_string(q.representation_)},
            {"horizon", q.horizon_},
            {"switch_stage", q.switch_stage_},
            {"num_joint_actions", q.num_ja_},
            {"num_joint_observations", q.num_jo_},
            {"num_states", q.num_states_},
            {"compute_seconds", q.compute_seconds_},
            {"reward", q.reward_},
            {"graph", graph},
            {"tree_q", q.tree_q_},
            {"vectors", q.vectors_}};
  }

  static QHeuristic from_json(const nlohmann::json& j) {
    QHeuristic q;
    q.kind_ = parse_heuristic_kind(j.at("kind").get<std::string>());
    q.representation_ = parse_representation(j.at("representation").get<std::string>());
    q.horizon_ = j.at("horizon").get<int>();
    q.switch_stage_ = j.at("switch_stage").get<int>();
    q.num_ja_ = j.at("num_joint_actions").get<int>();
    q.num_jo_ = j.at("num_joint_observations").get<int>();
    q.num_states_ = j.at("num_states").get<int>();
    q.compute_seconds_ = j.at("compute_seconds").get<double>();
    q.reward_ = j.at("reward").get<std::vector<double>>();
    for (const auto& stage : j.at("graph")) {
      std::vector<BeliefNode> nodes;
      for (const auto& n : stage)
        nodes.push_back(BeliefNode{n.at("b").get<std::vector<double>>(), n.at("c").get<std::vector<int>>()});
      q.graph_.push_back(std::move(nodes));
    }
    q.tree_q_ = j.at("tree_q").get<std::vector<std::vector<double>>>();
    q.vectors_ = j.at("vectors").get<std::vector<std::vector<std::vector<ValueVector>>>>();
    return q;
  }
};

/// 64-bit FNV-1a, hex.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Cache file for (model, kind, horizon, representation) inside `dir`.
inline std::filesystem::path heuristic_cache_path(const std::filesystem::path& dir, const DecPomdpModel& m,
                                                  const HeuristicConfig& cfg) {
  return dir / (fnv1a_hex(serialize_dpomdp(m)) + "_" + to_string(cfg.kind) + "_" + std::to_string(m.horizon()) +
                "_" + to_string(cfg.representation) + ".json");
}

/// Loads the heuristic from the cache directory, computing and storing it on a miss.
inline QHeuristic cached_heuristic(const DecPomdpModel& m, const HeuristicConfig& cfg,
                                   const std::filesystem::path& dir) {
  const auto path = heuristic_cache_path(dir, m, cfg);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    return HeuristicSerializer::from_json(nlohmann::json::parse(in));
  }
  QHeuristic q = compute_heuristic(m, cfg);
  std::filesystem::create_directories(dir);
  std::ofstream out(path);
  out << HeuristicSerializer::to_json(q).dump();
  return q;
}

}  // namespace gmaa
