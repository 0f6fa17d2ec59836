#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dasco/nn/tape.hpp"

// "NNC1" checkpoint: 4-byte magic, one JSON header line
// {"names", "shapes", "dtype":"f32", "endian":"little"}, then the raw
// little-endian f32 payload of every tensor in header order.
namespace dasco::nn {

struct NamedTensor {
  std::string name;
  Tensor value;
};

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter* const> params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);
/// Loads into existing parameters; names and shapes must match in order.
void load_parameters(const std::filesystem::path& path, std::span<Parameter* const> params);

}  // namespace dasco::nn
