#include "dasco/envs/corruption.hpp"

#include "dasco/error.hpp"

namespace dasco::envs {

Variant parse_variant(std::string_view name) {
  if (name == "clean") return Variant::Clean;
  if (name == "noisy") return Variant::Noisy;
  if (name == "biased") return Variant::Biased;
  throw ContractError("unknown dataset variant '" + std::string(name) + "' (expected clean, noisy or biased)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Clean: return "clean";
    case Variant::Noisy: return "noisy";
    case Variant::Biased: return "biased";
  }
  return "clean";
}

CorruptionProfile CorruptionProfile::standard() {
  return CorruptionProfile{
      {-20.0, 0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0},
      {0.1, 0.0, 0.2, 0.05, 0.3, 0.1, 0.4, 0.2},
      {0.1, -0.1, 0.2, 0.0, 0.2, -0.3, 0.2, 0.0},
  };
}

void CorruptionProfile::validate() const {
  if (positions.empty()) throw ContractError("corruption profile has no buckets");
  if (positions.size() != noises.size() || positions.size() != biases.size()) {
    throw ContractError("corruption profile arrays differ in length");
  }
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (!(positions[i] > positions[i - 1])) throw ContractError("corruption breakpoints must be strictly ascending");
  }
  for (double n : noises) {
    if (!(n >= 0.0)) throw ContractError("corruption noise must be non-negative");
  }
}

std::size_t CorruptionProfile::bucket(double x) const {
  if (positions.empty() || x < positions.front()) {
    throw ContractError("x position " + std::to_string(x) + " is left of the first corruption breakpoint");
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] <= x) idx = i;
  }
  return idx;
}

CorruptionProfile CorruptionProfile::scaled(double factor) const {
  CorruptionProfile out = *this;
  for (auto& p : out.positions) p *= factor;
  return out;
}

Action corrupt_action(const Action& action, double x_position, const CorruptionProfile& profile, Variant variant,
                      nn::Rng& rng) {
  Action out = action;
  if (variant != Variant::Clean) {
    const std::size_t b = profile.bucket(x_position);
    const double bias = variant == Variant::Biased ? profile.biases[b] : 0.0;
    for (auto& a : out) a += rng.normal() * profile.noises[b] - bias;
  }
  for (auto& a : out) a = clip_unit(a);
  return out;
}

}  // namespace dasco::envs
