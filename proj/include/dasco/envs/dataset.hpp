#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dasco/envs/corruption.hpp"
#include "dasco/envs/maze.hpp"

namespace dasco::envs {

inline constexpr const char* kGeneratorVersion = "dasco-toy-1";

struct DatasetMetadata {
  std::string env;
  std::string variant;
  std::uint64_t seed = 0;
  std::string generator_version = kGeneratorVersion;
  double behavior_success_rate = 0.0;

  friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

// Columnar transitions. `episode_ends[i]` is 1 on the last transition of each
// episode, so the flags partition the index range into episodes.
struct OfflineDataset {
  std::size_t obs_dim = 4;
  std::size_t act_dim = 2;
  std::vector<float> observations;       // [n, obs_dim]
  std::vector<float> actions;            // [n, act_dim]
  std::vector<float> rewards;            // [n]
  std::vector<std::uint8_t> terminals;   // [n]
  std::vector<float> next_observations;  // [n, obs_dim]
  std::vector<std::uint8_t> episode_ends;
  DatasetMetadata metadata;

  std::size_t size() const { return rewards.size(); }
  std::size_t episode_count() const;
  /// Half-open [begin, end) index ranges, one per episode.
  std::vector<std::pair<std::size_t, std::size_t>> episodes() const;
  std::vector<double> episode_returns() const;
  /// Throws FormatError naming the first inconsistent column.
  void validate() const;

  friend bool operator==(const OfflineDataset&, const OfflineDataset&) = default;
};

/// "DSET", version byte 1, a JSON header line (columns, counts, metadata),
/// then raw little-endian column payloads in header order.
void write_dataset(const OfflineDataset& ds, const std::filesystem::path& path);
std::vector<char> serialize_dataset(const OfflineDataset& ds);
OfflineDataset read_dataset(const std::filesystem::path& path);

struct GenerationResult {
  OfflineDataset dataset;
  int successes = 0;
  int episodes = 0;
};

/// Rolls out the scripted controller with corrupted actions. Episode k uses
/// the seed mix_seed(seed, k) and starts at the start-cell center jittered
/// uniformly by up to a quarter cell on each axis. Rewards are shifted by -1;
/// `terminals` marks goal arrival only (step-limit ends are not terminal).
/// Profile breakpoints are scaled by width / kStandardExtent.
GenerationResult generate_dataset(const MazeSpec& maze, Variant variant, int episodes, std::uint64_t seed,
                                  const CorruptionProfile& profile = CorruptionProfile::standard());

/// One-step dense-reward task: observation (tx, ty, tx, ty) with target in
/// [-0.8, 0.8]^2, reward -||a - t||. The behavior action is the target,
/// corrupted by position tx (scaled so [-1, 1] spans the profile).
GenerationResult generate_reacher_dataset(Variant variant, int episodes, std::uint64_t seed,
                                          const CorruptionProfile& profile = CorruptionProfile::standard());

/// Divides every reward by (max episode return - min episode return).
void standardize_rewards(OfflineDataset& ds);

}  // namespace dasco::envs
