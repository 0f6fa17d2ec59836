#include "dasco/nn/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "common/binary_io.hpp"
#include "dasco/error.hpp"

namespace dasco::nn {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter* const> params) {
  json header;
  header["names"] = json::array();
  header["shapes"] = json::array();
  for (const Parameter* p : params) {
    header["names"].push_back(p->name);
    header["shapes"].push_back(p->value.shape());
  }
  header["dtype"] = "f32";
  header["endian"] = "little";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("NNC1", 4);
  out << header.dump() << '\n';
  for (const Parameter* p : params) io::write_f32_le(out, p->value.values());
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  io::expect_magic(in, "NNC1", 4);
  json header;
  try {
    header = json::parse(io::read_header_line(in));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (!header.contains("names") || !header.contains("shapes")) throw FormatError("checkpoint header lacks 'names' or 'shapes'");
  if (header.value("dtype", "") != "f32") throw FormatError("checkpoint field 'dtype' must be f32");
  if (header.value("endian", "") != "little") throw FormatError("checkpoint field 'endian' must be little");
  const auto& names = header["names"];
  const auto& shapes = header["shapes"];
  if (names.size() != shapes.size()) throw FormatError("checkpoint 'names' and 'shapes' differ in length");
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    NamedTensor t{names[i].get<std::string>(), Tensor(shapes[i].get<Shape>())};
    io::read_f32_le(in, t.value.values(), t.name);
    out.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint payload");
  return out;
}

void load_parameters(const std::filesystem::path& path, std::span<Parameter* const> params) {
  auto loaded = load_checkpoint(path);
  if (loaded.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(loaded.size()) + " tensors, expected " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (loaded[i].name != params[i]->name) throw FormatError("checkpoint tensor '" + loaded[i].name + "' where '" + params[i]->name + "' expected");
    if (!loaded[i].value.same_shape(params[i]->value)) throw FormatError("shape mismatch for '" + loaded[i].name + "'");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = std::move(loaded[i].value);
    params[i]->grad = Tensor::zeros_like(params[i]->value);
  }
}

}  // namespace dasco::nn
