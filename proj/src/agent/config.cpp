#include "dasco/agent/config.hpp"

#include <fstream>
#include <set>

#include "dasco/error.hpp"

namespace dasco::agent {

using nlohmann::json;
using nlohmann::ordered_json;

std::string algorithm_name(Algorithm a) { return a == Algorithm::BehaviorCloning ? "bc" : "dasco"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "dasco") return Algorithm::Dasco;
  if (name == "bc") return Algorithm::BehaviorCloning;
  throw ContractError("unknown algorithm '" + name + "' (expected dasco or bc)");
}

AgentConfig AgentConfig::dense_defaults() {
  AgentConfig c;
  c.w = 1.0;
  return c;
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ContractError("agent config: " + msg); };
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (!(w > 0.0)) fail("w must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  for (const auto* layers : {&q_hidden, &policy_hidden, &disc_hidden, &aux_hidden}) {
    if (layers->empty()) fail("hidden layer lists must be non-empty");
    for (auto n : *layers) {
      if (n == 0) fail("hidden layer sizes must be positive");
    }
  }
  if (aux_noise_dim && *aux_noise_dim == 0) fail("aux_noise_dim must be positive");
  if (disc_steps_per_gen_step < 1) fail("disc_steps_per_gen_step must be at least 1");
  if (!(instance_noise.sigma0 >= 0.0)) fail("instance_noise.sigma0 must be non-negative");
  if (!(instance_noise.clamp >= 0.0)) fail("instance_noise.clamp must be non-negative");
  if (instance_noise.anneal_steps && *instance_noise.anneal_steps < 0) fail("instance_noise.anneal_steps must be >= 0");
  if (batch_size < 1) fail("batch_size must be positive");
  if (total_steps < 0) fail("total_steps must be non-negative");
  if (eval_interval < 1) fail("eval_interval must be positive");
  if (eval_episodes < 1) fail("eval_episodes must be positive");
}

std::int64_t AgentConfig::anneal_steps() const {
  return instance_noise.anneal_steps ? *instance_noise.anneal_steps : total_steps / 2;
}

std::size_t AgentConfig::noise_dim(std::size_t act_dim) const { return aux_noise_dim ? *aux_noise_dim : 4 * act_dim; }

AgentConfig AgentConfig::resolved(std::size_t act_dim) const {
  AgentConfig out = *this;
  out.aux_noise_dim = noise_dim(act_dim);
  out.instance_noise.anneal_steps = anneal_steps();
  return out;
}

ordered_json AgentConfig::to_json() const {
  ordered_json j;
  j["algorithm"] = algorithm_name(algorithm);
  j["gamma"] = gamma;
  j["tau"] = tau;
  j["w"] = w;
  j["lr"] = lr;
  j["q_hidden"] = q_hidden;
  j["policy_hidden"] = policy_hidden;
  j["disc_hidden"] = disc_hidden;
  j["aux_hidden"] = aux_hidden;
  j["aux_noise_dim"] = aux_noise_dim ? ordered_json(*aux_noise_dim) : ordered_json(nullptr);
  j["disc_steps_per_gen_step"] = disc_steps_per_gen_step;
  j["instance_noise"] = {{"sigma0", instance_noise.sigma0},
                         {"clamp", instance_noise.clamp},
                         {"anneal_steps", instance_noise.anneal_steps ? ordered_json(*instance_noise.anneal_steps)
                                                                      : ordered_json(nullptr)}};
  j["batch_size"] = batch_size;
  j["total_steps"] = total_steps;
  j["eval_interval"] = eval_interval;
  j["eval_episodes"] = eval_episodes;
  j["ablations"] = {{"use_aux_generator", ablations.use_aux_generator}, {"use_q_weight", ablations.use_q_weight}};
  return j;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ContractError("agent config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ContractError("agent config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where = "") {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ContractError("agent config: key '" + where + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out, const std::string& where = "") {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

}  // namespace

AgentConfig AgentConfig::from_json(const json& j, const AgentConfig& base) {
  reject_unknown(j,
                 {"algorithm", "gamma", "tau", "w", "lr", "q_hidden", "policy_hidden", "disc_hidden", "aux_hidden",
                  "aux_noise_dim", "disc_steps_per_gen_step", "instance_noise", "batch_size", "total_steps",
                  "eval_interval", "eval_episodes", "ablations"},
                 "");
  AgentConfig c = base;
  if (j.contains("algorithm")) {
    std::string name;
    read(j, "algorithm", name);
    c.algorithm = parse_algorithm(name);
  }
  read(j, "gamma", c.gamma);
  read(j, "tau", c.tau);
  read(j, "w", c.w);
  read(j, "lr", c.lr);
  read(j, "q_hidden", c.q_hidden);
  read(j, "policy_hidden", c.policy_hidden);
  read(j, "disc_hidden", c.disc_hidden);
  read(j, "aux_hidden", c.aux_hidden);
  read_optional(j, "aux_noise_dim", c.aux_noise_dim);
  read(j, "disc_steps_per_gen_step", c.disc_steps_per_gen_step);
  if (j.contains("instance_noise")) {
    const auto& n = j.at("instance_noise");
    reject_unknown(n, {"sigma0", "clamp", "anneal_steps"}, "instance_noise.");
    read(n, "sigma0", c.instance_noise.sigma0, "instance_noise.");
    read(n, "clamp", c.instance_noise.clamp, "instance_noise.");
    read_optional(n, "anneal_steps", c.instance_noise.anneal_steps, "instance_noise.");
  }
  read(j, "batch_size", c.batch_size);
  read(j, "total_steps", c.total_steps);
  read(j, "eval_interval", c.eval_interval);
  read(j, "eval_episodes", c.eval_episodes);
  if (j.contains("ablations")) {
    const auto& a = j.at("ablations");
    reject_unknown(a, {"use_aux_generator", "use_q_weight"}, "ablations.");
    read(a, "use_aux_generator", c.ablations.use_aux_generator, "ablations.");
    read(a, "use_q_weight", c.ablations.use_q_weight, "ablations.");
  }
  c.validate();
  return c;
}

AgentConfig AgentConfig::load(const std::filesystem::path& path, const AgentConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, base);
}

void AgentConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write config " + path.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dasco::agent
