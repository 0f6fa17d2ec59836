#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dasco::agent {

enum class Algorithm { Dasco, BehaviorCloning };

struct InstanceNoiseConfig {
  double sigma0 = 0.3;
  double clamp = 0.3;
  /// Steps over which sigma falls linearly to zero; unset means half of total_steps.
  std::optional<std::int64_t> anneal_steps;
};

struct Ablations {
  bool use_aux_generator = true;
  bool use_q_weight = true;
};

// Hyperparameters of one training run. Defaults follow the maze setting.
struct AgentConfig {
  Algorithm algorithm = Algorithm::Dasco;
  double gamma = 0.99;
  double tau = 0.005;
  double w = 0.025;
  double lr = 3e-4;
  std::vector<std::size_t> q_hidden{256, 256, 256};
  std::vector<std::size_t> policy_hidden{256, 256, 256, 256};
  std::vector<std::size_t> disc_hidden{750};
  std::vector<std::size_t> aux_hidden{750};
  /// Unset means 4 * action dimension.
  std::optional<std::size_t> aux_noise_dim;
  int disc_steps_per_gen_step = 5;
  InstanceNoiseConfig instance_noise;
  std::size_t batch_size = 256;
  std::int64_t total_steps = 100000;
  std::int64_t eval_interval = 5000;
  int eval_episodes = 20;
  Ablations ablations;

  static AgentConfig maze_defaults() { return {}; }
  /// Dense-reward setting: identical except w = 1.
  static AgentConfig dense_defaults();

  /// ContractError naming the first violated bound.
  void validate() const;
  /// Copy with every optional field filled in for an action dimension.
  AgentConfig resolved(std::size_t act_dim) const;
  std::int64_t anneal_steps() const;
  std::size_t noise_dim(std::size_t act_dim) const;

  nlohmann::ordered_json to_json() const;
  /// Starts from `base` and overrides the keys present; unknown keys,
  /// wrong types and invalid values are ContractErrors.
  static AgentConfig from_json(const nlohmann::json& j, const AgentConfig& base);
  static AgentConfig from_json(const nlohmann::json& j);
  static AgentConfig load(const std::filesystem::path& path, const AgentConfig& base);
  static AgentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

inline AgentConfig AgentConfig::from_json(const nlohmann::json& j) { return from_json(j, AgentConfig{}); }
inline AgentConfig AgentConfig::load(const std::filesystem::path& path) { return load(path, AgentConfig{}); }

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

}  // namespace dasco::agent
