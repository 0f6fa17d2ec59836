#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dasco/envs/maze.hpp"
#include "dasco/nn/random.hpp"

namespace dasco::envs {

enum class Variant { Clean, Noisy, Biased };

Variant parse_variant(std::string_view name);
std::string variant_name(Variant v);

// Position-dependent action noise and bias. Bucket i covers
// [positions[i], positions[i+1]).
struct CorruptionProfile {
  std::vector<double> positions;
  std::vector<double> noises;
  std::vector<double> biases;

  /// Eight buckets with a far-left sentinel breakpoint, in the original
  /// world coordinates (last breakpoint at 24, bucket width 4).
  static CorruptionProfile standard();
  /// Right edge of the last bucket of the standard profile.
  static constexpr double kStandardExtent = 28.0;

  void validate() const;
  /// max{i : positions[i] <= x}; ContractError when x is left of every breakpoint.
  std::size_t bucket(double x) const;
  /// Breakpoints multiplied by `factor`; noises and biases unchanged.
  CorruptionProfile scaled(double factor) const;
};

/// clean: unchanged; noisy: a + N(0, I) * noise; biased: a + N(0, I) * noise - bias.
/// The result is always clipped to [-1, 1].
Action corrupt_action(const Action& action, double x_position, const CorruptionProfile& profile, Variant variant,
                      nn::Rng& rng);

}  // namespace dasco::envs
