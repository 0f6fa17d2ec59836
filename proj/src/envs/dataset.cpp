#include "dasco/envs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "common/binary_io.hpp"
#include "dasco/envs/environment.hpp"
#include "dasco/error.hpp"
#include "json.hpp"

namespace dasco::envs {

using nlohmann::ordered_json;

namespace {

constexpr char kMagic[] = "DSET";
constexpr std::uint8_t kVersion = 1;

void append_transition(OfflineDataset& ds, const Observation& obs, const Action& action, double reward,
                       bool terminal, const Observation& next, bool episode_end) {
  ds.observations.insert(ds.observations.end(), obs.begin(), obs.end());
  ds.actions.push_back(static_cast<float>(action[0]));
  ds.actions.push_back(static_cast<float>(action[1]));
  ds.rewards.push_back(static_cast<float>(reward));
  ds.terminals.push_back(terminal ? 1 : 0);
  ds.next_observations.insert(ds.next_observations.end(), next.begin(), next.end());
  ds.episode_ends.push_back(episode_end ? 1 : 0);
}

}  // namespace

std::size_t OfflineDataset::episode_count() const {
  return static_cast<std::size_t>(std::count(episode_ends.begin(), episode_ends.end(), std::uint8_t{1}));
}

std::vector<std::pair<std::size_t, std::size_t>> OfflineDataset::episodes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < episode_ends.size(); ++i) {
    if (episode_ends[i]) {
      out.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  return out;
}

std::vector<double> OfflineDataset::episode_returns() const {
  std::vector<double> out;
  for (auto [b, e] : episodes()) {
    double total = 0.0;
    for (std::size_t i = b; i < e; ++i) total += rewards[i];
    out.push_back(total);
  }
  return out;
}

void OfflineDataset::validate() const {
  const std::size_t n = size();
  auto check = [&](std::size_t got, std::size_t want, const char* field) {
    if (got != want) {
      throw FormatError("column '" + std::string(field) + "' holds " + std::to_string(got) + " values, expected " +
                        std::to_string(want));
    }
  };
  check(observations.size(), n * obs_dim, "observations");
  check(actions.size(), n * act_dim, "actions");
  check(terminals.size(), n, "terminals");
  check(next_observations.size(), n * obs_dim, "next_observations");
  check(episode_ends.size(), n, "episode_ends");
  if (n > 0 && episode_ends.back() != 1) throw FormatError("column 'episode_ends' does not close the last episode");
  for (auto t : terminals) {
    if (t > 1) throw FormatError("column 'terminals' holds a value other than 0 or 1");
  }
  for (auto t : episode_ends) {
    if (t > 1) throw FormatError("column 'episode_ends' holds a value other than 0 or 1");
  }
}

std::vector<char> serialize_dataset(const OfflineDataset& ds) {
  ds.validate();
  const std::size_t n = ds.size();
  ordered_json header;
  header["columns"] = ordered_json::array({
      {{"name", "observations"}, {"shape", {n, ds.obs_dim}}, {"dtype", "f32"}},
      {{"name", "actions"}, {"shape", {n, ds.act_dim}}, {"dtype", "f32"}},
      {{"name", "rewards"}, {"shape", {n}}, {"dtype", "f32"}},
      {{"name", "terminals"}, {"shape", {n}}, {"dtype", "u8"}},
      {{"name", "next_observations"}, {"shape", {n, ds.obs_dim}}, {"dtype", "f32"}},
      {{"name", "episode_ends"}, {"shape", {n}}, {"dtype", "u8"}},
  });
  header["counts"] = {{"transitions", n}, {"episodes", ds.episode_count()}};
  header["metadata"] = {{"env", ds.metadata.env},
                        {"variant", ds.metadata.variant},
                        {"seed", ds.metadata.seed},
                        {"generator_version", ds.metadata.generator_version},
                        {"behavior_success_rate", ds.metadata.behavior_success_rate}};
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  out << header.dump() << '\n';
  io::write_f32_le(out, ds.observations);
  io::write_f32_le(out, ds.actions);
  io::write_f32_le(out, ds.rewards);
  io::write_u8(out, ds.terminals);
  io::write_f32_le(out, ds.next_observations);
  io::write_u8(out, ds.episode_ends);
  const std::string bytes = out.str();
  return {bytes.begin(), bytes.end()};
}

void write_dataset(const OfflineDataset& ds, const std::filesystem::path& path) {
  const auto bytes = serialize_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

OfflineDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  io::expect_magic(in, kMagic, 4);
  const int version = in.get();
  if (version != kVersion) throw FormatError("unsupported dataset version " + std::to_string(version));

  ordered_json header;
  try {
    header = ordered_json::parse(io::read_header_line(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  OfflineDataset ds;
  std::size_t n = 0, episodes = 0;
  try {
    n = header.at("counts").at("transitions").get<std::size_t>();
    episodes = header.at("counts").at("episodes").get<std::size_t>();
    const auto& meta = header.at("metadata");
    ds.metadata.env = meta.at("env").get<std::string>();
    ds.metadata.variant = meta.at("variant").get<std::string>();
    ds.metadata.seed = meta.at("seed").get<std::uint64_t>();
    ds.metadata.generator_version = meta.at("generator_version").get<std::string>();
    ds.metadata.behavior_success_rate = meta.at("behavior_success_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header field: ") + e.what());
  }
  if (!header.contains("columns") || !header["columns"].is_array()) throw FormatError("dataset header lacks 'columns'");

  std::vector<std::string> seen;
  for (const auto& col : header["columns"]) {
    const std::string name = col.value("name", "");
    const std::string dtype = col.value("dtype", "");
    const auto shape = col.value("shape", std::vector<std::size_t>{});
    if (shape.empty() || shape[0] != n) {
      throw FormatError("column '" + name + "' row count does not match counts.transitions = " + std::to_string(n));
    }
    const std::size_t width = shape.size() > 1 ? shape[1] : 1;
    auto expect = [&](const char* want_dtype, std::size_t want_rank) {
      if (dtype != want_dtype || shape.size() != want_rank) {
        throw FormatError("column '" + name + "' has unexpected dtype or rank");
      }
    };
    if (name == "observations") {
      expect("f32", 2);
      ds.obs_dim = width;
      ds.observations.resize(n * width);
      io::read_f32_le(in, ds.observations, name);
    } else if (name == "actions") {
      expect("f32", 2);
      ds.act_dim = width;
      ds.actions.resize(n * width);
      io::read_f32_le(in, ds.actions, name);
    } else if (name == "rewards") {
      expect("f32", 1);
      ds.rewards.resize(n);
      io::read_f32_le(in, ds.rewards, name);
    } else if (name == "terminals") {
      expect("u8", 1);
      ds.terminals.resize(n);
      io::read_u8(in, ds.terminals, name);
    } else if (name == "next_observations") {
      expect("f32", 2);
      ds.next_observations.resize(n * width);
      io::read_f32_le(in, ds.next_observations, name);
    } else if (name == "episode_ends") {
      expect("u8", 1);
      ds.episode_ends.resize(n);
      io::read_u8(in, ds.episode_ends, name);
    } else {
      throw FormatError("unknown column '" + name + "'");
    }
    seen.push_back(name);
  }
  for (const char* required : {"observations", "actions", "rewards", "terminals", "next_observations", "episode_ends"}) {
    if (std::find(seen.begin(), seen.end(), required) == seen.end()) {
      throw FormatError(std::string("missing column '") + required + "'");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after column payloads");
  ds.validate();
  if (ds.episode_count() != episodes) throw FormatError("column 'episode_ends' disagrees with counts.episodes");
  return ds;
}

GenerationResult generate_dataset(const MazeSpec& maze, Variant variant, int episodes, std::uint64_t seed,
                                  const CorruptionProfile& profile) {
  if (episodes < 1) throw ContractError("generate_dataset: episodes must be at least 1");
  profile.validate();
  const CorruptionProfile scaled = profile.scaled(maze.width() / CorruptionProfile::kStandardExtent);
  GenerationResult result;
  result.episodes = episodes;
  auto& ds = result.dataset;
  for (int ep = 0; ep < episodes; ++ep) {
    nn::Rng rng(nn::mix_seed(seed, static_cast<std::uint64_t>(ep)));
    MazeState state = sample_start(maze, rng);
    while (true) {
      const Observation obs = observe(maze, state);
      const Action clean = behavior_policy_action(maze, state);
      const Action action = corrupt_action(clean, state.x, scaled, variant, rng);
      const StepResult step = step_env(maze, state, action);
      append_transition(ds, obs, action, step.reward - 1.0, step.reached_goal, observe(maze, step.state), step.done);
      state = step.state;
      if (step.done) {
        result.successes += step.reached_goal ? 1 : 0;
        break;
      }
    }
  }
  ds.metadata = {maze.name(), variant_name(variant), seed, kGeneratorVersion,
                 static_cast<double>(result.successes) / episodes};
  return result;
}

GenerationResult generate_reacher_dataset(Variant variant, int episodes, std::uint64_t seed,
                                          const CorruptionProfile& profile) {
  if (episodes < 1) throw ContractError("generate_reacher_dataset: episodes must be at least 1");
  profile.validate();
  GenerationResult result;
  result.episodes = episodes;
  auto& ds = result.dataset;
  for (int ep = 0; ep < episodes; ++ep) {
    nn::Rng rng(nn::mix_seed(seed, static_cast<std::uint64_t>(ep)));
    ReacherEnv env;
    const Observation obs = env.reset(rng);
    const Action target{obs[0], obs[1]};
    const double x_profile = (target[0] + 1.0) * 0.5 * CorruptionProfile::kStandardExtent;
    const Action action = corrupt_action(target, x_profile, profile, variant, rng);
    const EnvStep step = env.step(action);
    append_transition(ds, obs, action, step.reward, true, step.observation, true);
    result.successes += step.success ? 1 : 0;
  }
  ds.metadata = {"toy-reacher", variant_name(variant), seed, kGeneratorVersion,
                 static_cast<double>(result.successes) / episodes};
  return result;
}

void standardize_rewards(OfflineDataset& ds) {
  const auto returns = ds.episode_returns();
  if (returns.size() < 2) throw ContractError("standardize_rewards: need at least two episodes");
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw ContractError("standardize_rewards: all episode returns are equal");
  for (auto& r : ds.rewards) r = static_cast<float>(r / range);
}

}  // namespace dasco::envs
