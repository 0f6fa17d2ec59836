#include "dasco/nn/random.hpp"

namespace dasco::nn {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Tensor Rng::normal_tensor(Shape shape, float stddev) {
  Tensor out(std::move(shape));
  for (auto& v : out.values()) v = static_cast<float>(normal()) * stddev;
  return out;
}

Tensor Rng::uniform_tensor(Shape shape, float lo, float hi) {
  Tensor out(std::move(shape));
  for (auto& v : out.values()) v = static_cast<float>(uniform(lo, hi));
  return out;
}

}  // namespace dasco::nn
