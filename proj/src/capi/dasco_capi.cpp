#include "dasco/dasco.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "dasco/agent/agent.hpp"
#include "dasco/agent/config.hpp"
#include "dasco/envs/dataset.hpp"
#include "dasco/envs/environment.hpp"
#include "dasco/error.hpp"
#include "dasco/gan/gan_lab.hpp"
#include "dasco/theory/theory.hpp"
#include "json.hpp"

struct dasco_dataset {
  dasco::envs::OfflineDataset ds;
};

struct dasco_policy {
  dasco::agent::LoadedPolicy loaded;
};

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

thread_local std::string g_last_error;

dasco_status fail(dasco_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `fn`, mapping exceptions onto status codes.
template <class Fn>
dasco_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return DASCO_OK;
  } catch (const dasco::Error& e) {
    return fail(static_cast<dasco_status>(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(DASCO_ERR_CONTRACT, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(DASCO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DASCO_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw dasco::ContractError(what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

json parse_object(const char* text) {
  if (!text || !*text) return json::object();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw dasco::ContractError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw dasco::ContractError("config must be a JSON object");
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dasco::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw dasco::IoError("write failed: " + path.string());
}

// ---- GAN demo config ----

struct GanDemo {
  dasco::gan::StaticDataSpec spec = dasco::gan::StaticDataSpec::bimodal_1d();
  dasco::gan::GanConfig gan;
  std::uint64_t seed = 0;
  bool use_aux = true;
};

template <class T>
T typed(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::type_error&) {
    throw dasco::ContractError(std::string("wrong type for '") + key + "'");
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw dasco::ContractError(std::string("'") + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw dasco::ContractError("unknown key '" + key + "' in " + where);
  }
}

GanDemo gan_demo_from_json(const json& j) {
  GanDemo d;
  check_keys(j, {"data", "gan", "seed", "use_aux"}, "gan demo config");
  if (j.contains("seed")) d.seed = typed<std::uint64_t>(j["seed"], "seed");
  if (j.contains("use_aux")) d.use_aux = typed<bool>(j["use_aux"], "use_aux");
  if (j.contains("data")) {
    const json& dj = j["data"];
    check_keys(dj, {"modes", "weights", "stddev", "sample_count", "objective", "target", "threshold"}, "data");
    if (dj.contains("modes")) {
      d.spec.mode_centers.clear();
      for (const auto& m : dj["modes"]) {
        if (m.is_number()) d.spec.mode_centers.push_back({m.get<double>()});
        else d.spec.mode_centers.push_back(typed<std::vector<double>>(m, "modes"));
      }
      const auto k = d.spec.mode_centers.size();
      d.spec.mode_weights.assign(k, k ? 1.0 / static_cast<double>(k) : 0.0);
    }
    if (dj.contains("weights")) d.spec.mode_weights = typed<std::vector<double>>(dj["weights"], "weights");
    if (dj.contains("stddev")) d.spec.mode_stddev = typed<double>(dj["stddev"], "stddev");
    if (dj.contains("sample_count")) d.spec.sample_count = typed<std::size_t>(dj["sample_count"], "sample_count");
    if (dj.contains("objective"))
      d.spec.objective.kind = dasco::gan::parse_objective(typed<std::string>(dj["objective"], "objective"));
    if (dj.contains("target")) d.spec.objective.target = typed<std::vector<double>>(dj["target"], "target");
    if (dj.contains("threshold")) d.spec.objective.threshold = typed<double>(dj["threshold"], "threshold");
  }
  if (j.contains("gan")) {
    const json& gj = j["gan"];
    check_keys(gj,
               {"noise_dim", "generator_hidden", "discriminator_hidden", "steps", "batch_size", "discriminator_steps",
                "generator_lr", "discriminator_lr", "f_weight", "f_sign", "instance_noise",
                "instance_noise_anneal_steps", "metrics_every", "eval_samples"},
               "gan");
    auto& g = d.gan;
    if (gj.contains("noise_dim")) g.noise_dim = typed<std::size_t>(gj["noise_dim"], "noise_dim");
    if (gj.contains("generator_hidden"))
      g.generator_hidden = typed<std::vector<std::size_t>>(gj["generator_hidden"], "generator_hidden");
    if (gj.contains("discriminator_hidden"))
      g.discriminator_hidden = typed<std::vector<std::size_t>>(gj["discriminator_hidden"], "discriminator_hidden");
    if (gj.contains("steps")) g.steps = typed<int>(gj["steps"], "steps");
    if (gj.contains("batch_size")) g.batch_size = typed<std::size_t>(gj["batch_size"], "batch_size");
    if (gj.contains("discriminator_steps"))
      g.discriminator_steps = typed<int>(gj["discriminator_steps"], "discriminator_steps");
    if (gj.contains("generator_lr")) g.generator_lr = typed<double>(gj["generator_lr"], "generator_lr");
    if (gj.contains("discriminator_lr")) g.discriminator_lr = typed<double>(gj["discriminator_lr"], "discriminator_lr");
    if (gj.contains("f_weight")) g.f_weight = typed<double>(gj["f_weight"], "f_weight");
    if (gj.contains("f_sign")) g.f_sign = typed<double>(gj["f_sign"], "f_sign");
    if (gj.contains("instance_noise")) g.instance_noise = typed<double>(gj["instance_noise"], "instance_noise");
    if (gj.contains("instance_noise_anneal_steps")) {
      g.instance_noise_anneal_steps = typed<int>(gj["instance_noise_anneal_steps"], "instance_noise_anneal_steps");
    }
    if (gj.contains("metrics_every")) g.metrics_every = typed<int>(gj["metrics_every"], "metrics_every");
    if (gj.contains("eval_samples")) g.eval_samples = typed<std::size_t>(gj["eval_samples"], "eval_samples");
  }
  if (d.spec.objective.kind == dasco::gan::ObjectiveKind::NegDistance && d.spec.objective.target.empty())
    d.spec.objective.target.assign(d.spec.dim(), 0.0);
  d.spec.validate();
  d.gan.validate();
  return d;
}

ordered_json gan_demo_to_json(const GanDemo& d) {
  ordered_json modes = ordered_json::array();
  for (const auto& c : d.spec.mode_centers) {
    if (c.size() == 1) modes.push_back(c[0]);
    else modes.push_back(c);
  }
  ordered_json data;
  data["modes"] = modes;
  data["weights"] = d.spec.mode_weights;
  data["stddev"] = d.spec.mode_stddev;
  data["sample_count"] = d.spec.sample_count;
  data["objective"] = dasco::gan::objective_name(d.spec.objective.kind);
  data["target"] = d.spec.objective.target;
  data["threshold"] = d.spec.objective.threshold;
  const auto& g = d.gan;
  ordered_json gan;
  gan["noise_dim"] = g.noise_dim;
  gan["generator_hidden"] = g.generator_hidden;
  gan["discriminator_hidden"] = g.discriminator_hidden;
  gan["steps"] = g.steps;
  gan["batch_size"] = g.batch_size;
  gan["discriminator_steps"] = g.discriminator_steps;
  gan["generator_lr"] = g.generator_lr;
  gan["discriminator_lr"] = g.discriminator_lr;
  gan["f_weight"] = g.f_weight;
  gan["f_sign"] = g.f_sign;
  gan["instance_noise"] = g.instance_noise;
  gan["instance_noise_anneal_steps"] = g.instance_noise_anneal_steps > 0 ? g.instance_noise_anneal_steps
                                                                         : std::max(1, g.steps / 2);
  gan["metrics_every"] = g.metrics_every;
  gan["eval_samples"] = g.eval_samples;
  ordered_json out;
  out["data"] = data;
  out["gan"] = gan;
  out["seed"] = d.seed;
  out["use_aux"] = d.use_aux;
  return out;
}

dasco::agent::AgentConfig preset(const char* name) {
  const std::string p = name ? name : "maze";
  if (p == "maze") return dasco::agent::AgentConfig::maze_defaults();
  if (p == "dense") return dasco::agent::AgentConfig::dense_defaults();
  throw dasco::ContractError("unknown config preset '" + p + "' (expected maze or dense)");
}

void fill(dasco_eval_result* out, const dasco::agent::EvalResult& r) {
  out->mean_return = r.mean_return;
  out->success_rate = r.success_rate;
  out->episodes = r.episodes;
}

}  // namespace

extern "C" {

const char* dasco_last_error(void) { return g_last_error.c_str(); }

const char* dasco_version(void) { return "0.1.0"; }

void dasco_string_free(char* s) { std::free(s); }

dasco_status dasco_dataset_generate(const char* env, const char* variant, int episodes, uint64_t seed,
                                    dasco_dataset** out) {
  return guarded([&] {
    require(env && variant && out, "null argument");
    require(episodes >= 1, "episodes must be at least 1");
    const auto v = dasco::envs::parse_variant(variant);
    auto h = std::make_unique<dasco_dataset>();
    if (std::string(env) == "toy-reacher")
      h->ds = dasco::envs::generate_reacher_dataset(v, episodes, seed).dataset;
    else
      h->ds = dasco::envs::generate_dataset(dasco::envs::builtin_maze(env), v, episodes, seed).dataset;
    *out = h.release();
  });
}

dasco_status dasco_dataset_generate_config(const char* config_json, dasco_dataset** out, char** out_resolved) {
  return guarded([&] {
    const json j = parse_object(config_json);
    check_keys(j, {"env", "variant", "episodes", "seed", "layout", "cell_size", "max_episode_steps"}, "dataset config");
    const std::string env = j.contains("env") ? typed<std::string>(j["env"], "env") : "toy-medium";
    const std::string variant = j.contains("variant") ? typed<std::string>(j["variant"], "variant") : "clean";
    const int episodes = j.contains("episodes") ? typed<int>(j["episodes"], "episodes") : 500;
    const auto seed = j.contains("seed") ? typed<std::uint64_t>(j["seed"], "seed") : std::uint64_t{0};
    require(episodes >= 1, "episodes must be at least 1");
    const auto v = dasco::envs::parse_variant(variant);

    ordered_json resolved;
    resolved["env"] = env;
    resolved["variant"] = dasco::envs::variant_name(v);
    resolved["episodes"] = episodes;
    resolved["seed"] = seed;
    auto h = std::make_unique<dasco_dataset>();
    const bool custom = j.contains("layout");
    if (!custom && env == "toy-reacher") {
      require(!j.contains("cell_size") && !j.contains("max_episode_steps"), "toy-reacher takes no maze fields");
      if (out) h->ds = dasco::envs::generate_reacher_dataset(v, episodes, seed).dataset;
    } else {
      const auto base = custom ? std::optional<dasco::envs::MazeSpec>{} : dasco::envs::builtin_maze(env);
      const auto layout = custom ? typed<std::vector<std::string>>(j["layout"], "layout") : base->layout();
      const double cell = j.contains("cell_size") ? typed<double>(j["cell_size"], "cell_size")
                                                  : (custom ? 1.0 : base->cell_size());
      const int limit = j.contains("max_episode_steps") ? typed<int>(j["max_episode_steps"], "max_episode_steps")
                                                        : (custom ? 100 : base->max_episode_steps());
      const dasco::envs::MazeSpec maze(env, layout, cell, limit);
      resolved["layout"] = maze.layout();
      resolved["cell_size"] = maze.cell_size();
      resolved["max_episode_steps"] = maze.max_episode_steps();
      if (out) h->ds = dasco::envs::generate_dataset(maze, v, episodes, seed).dataset;
    }
    if (out_resolved) *out_resolved = dup_string(resolved.dump(2));
    if (out) *out = h.release();
  });
}

dasco_status dasco_dataset_read(const char* path, dasco_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto h = std::make_unique<dasco_dataset>();
    h->ds = dasco::envs::read_dataset(path);
    *out = h.release();
  });
}

dasco_status dasco_dataset_write(const dasco_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds && path, "null argument");
    dasco::envs::write_dataset(ds->ds, path);
  });
}

dasco_status dasco_dataset_info_get(const dasco_dataset* ds, dasco_dataset_info* out) {
  return guarded([&] {
    require(ds && out, "null argument");
    out->transitions = ds->ds.size();
    out->episodes = ds->ds.episode_count();
    out->obs_dim = ds->ds.obs_dim;
    out->act_dim = ds->ds.act_dim;
    out->seed = ds->ds.metadata.seed;
    out->behavior_success_rate = ds->ds.metadata.behavior_success_rate;
  });
}

dasco_status dasco_dataset_metadata_json(const dasco_dataset* ds, char** out_json) {
  return guarded([&] {
    require(ds && out_json, "null argument");
    const auto& m = ds->ds.metadata;
    ordered_json j;
    j["env"] = m.env;
    j["variant"] = m.variant;
    j["seed"] = m.seed;
    j["generator_version"] = m.generator_version;
    j["behavior_success_rate"] = m.behavior_success_rate;
    j["transitions"] = ds->ds.size();
    j["episodes"] = ds->ds.episode_count();
    *out_json = dup_string(j.dump(2));
  });
}

dasco_status dasco_dataset_standardize_rewards(dasco_dataset* ds) {
  return guarded([&] {
    require(ds, "null argument");
    dasco::envs::standardize_rewards(ds->ds);
  });
}

void dasco_dataset_free(dasco_dataset* ds) { delete ds; }

dasco_status dasco_agent_config_resolve(const char* preset_name, const char* overrides_json, size_t act_dim,
                                        char** out_json) {
  return guarded([&] {
    require(out_json, "null argument");
    require(act_dim >= 1, "act_dim must be positive");
    const auto cfg = dasco::agent::AgentConfig::from_json(parse_object(overrides_json), preset(preset_name));
    *out_json = dup_string(cfg.resolved(act_dim).to_json().dump(2));
  });
}

dasco_status dasco_train(const dasco_dataset* ds, const char* config_json, uint64_t seed, const char* out_dir,
                         const char* eval_env, dasco_metrics_callback callback, void* user) {
  return guarded([&] {
    require(ds && out_dir, "null argument");
    const auto cfg = dasco::agent::AgentConfig::from_json(parse_object(config_json));
    dasco::agent::TrainOptions opts;
    opts.out_dir = std::filesystem::path(out_dir);
    if (eval_env) opts.env_name = eval_env;
    if (callback) {
      opts.on_row = [&](const dasco::agent::MetricsRow& r) {
        const dasco_metrics_row row{r.step,        r.q1_loss,     r.q2_loss,     r.policy_loss,
                                    r.aux_loss,    r.disc_loss,   r.mean_weight, r.mean_d_real,
                                    r.mean_d_fake, r.eval_return, r.eval_success};
        callback(&row, user);
      };
    }
    const auto result = dasco::agent::train(ds->ds, cfg, seed, opts);
    if (result.aborted) throw dasco::Error(dasco::ErrorKind::Numeric, result.error);
  });
}

dasco_status dasco_policy_load(const char* checkpoint_dir, dasco_policy** out) {
  return guarded([&] {
    require(checkpoint_dir && out, "null argument");
    auto h = std::make_unique<dasco_policy>();
    h->loaded = dasco::agent::load_policy(checkpoint_dir);
    *out = h.release();
  });
}

dasco_status dasco_policy_evaluate(const dasco_policy* policy, const char* env, int episodes, uint64_t seed,
                                   dasco_eval_result* out) {
  return guarded([&] {
    require(policy && env && out, "null argument");
    require(episodes >= 1, "episodes must be at least 1");
    auto e = dasco::envs::make_env(env);
    fill(out, dasco::agent::evaluate_policy(policy->loaded.policy, *e, episodes, seed));
  });
}

dasco_status dasco_behavior_evaluate(const char* env, int episodes, uint64_t seed, dasco_eval_result* out) {
  return guarded([&] {
    require(env && out, "null argument");
    require(episodes >= 1, "episodes must be at least 1");
    auto e = dasco::envs::make_env(env);
    auto* maze = dynamic_cast<dasco::envs::MazeEnv*>(e.get());
    if (!maze) throw dasco::ContractError("behavior controller is only defined for maze environments");
    fill(out, dasco::agent::evaluate_controller(
                  [&](const dasco::envs::Observation&) {
                    return dasco::envs::behavior_policy_action(maze->spec(), maze->state());
                  },
                  *e, episodes, seed));
  });
}

void dasco_policy_free(dasco_policy* policy) { delete policy; }

dasco_status dasco_theory_example_1d(char** out_json) {
  return guarded([&] {
    require(out_json, "null argument");
    *out_json = dup_string(dasco::theory::example_1d_json(dasco::theory::example_1d()));
  });
}

dasco_status dasco_theory_check(size_t instances, uint64_t seed, size_t max_n, int maximize, char** out_csv,
                                dasco_theory_summary* out) {
  return guarded([&] {
    require(instances >= 1, "instances must be at least 1");
    require(max_n >= 2, "max_n must be at least 2");
    const auto rows = dasco::theory::check_instances(instances, seed, max_n, {}, {}, maximize != 0);
    if (out) {
      *out = dasco_theory_summary{rows.size(), 0, 0.0, 0.0, 0.0};
      for (const auto& r : rows) {
        out->passed += r.pass ? 1 : 0;
        out->max_tv = std::max(out->max_tv, r.tv_theorem1);
        out->max_kkt_residual = std::max(out->max_kkt_residual, r.max_kkt_residual);
        out->max_objective_gap = std::max(out->max_objective_gap, std::abs(r.objective_gap));
      }
    }
    if (out_csv) *out_csv = dup_string(dasco::theory::check_csv(rows));
  });
}

dasco_status dasco_theory_solve(const double* p_data, const double* f, size_t n, int maximize, char** out_json) {
  return guarded([&] {
    require(p_data && f && out_json, "null argument");
    require(n >= 1, "n must be positive");
    const auto report =
        dasco::theory::solve_report(std::vector<double>(p_data, p_data + n), std::vector<double>(f, f + n), maximize != 0);
    *out_json = dup_string(dasco::theory::example_1d_json(report));
  });
}

dasco_status dasco_gan_config_resolve(const char* overrides_json, char** out_json) {
  return guarded([&] {
    require(out_json, "null argument");
    *out_json = dup_string(gan_demo_to_json(gan_demo_from_json(parse_object(overrides_json))).dump(2));
  });
}

dasco_status dasco_gan_demo(const char* config_json, const char* out_dir, dasco_gan_summary* out) {
  return guarded([&] {
    require(out_dir, "null argument");
    const GanDemo d = gan_demo_from_json(parse_object(config_json));
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw dasco::IoError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "config.json", gan_demo_to_json(d).dump(2) + "\n");

    auto run = dasco::gan::train_dual_gan(d.spec, d.gan, d.seed, d.use_aux);
    write_text(dir / "metrics.csv", dasco::gan::gan_metrics_csv(run.history));
    if (out) *out = dasco_gan_summary{};
    if (!run.history.empty() && out) {
      const auto& m = run.final_metrics();
      *out = dasco_gan_summary{m.in_support_rate, m.primary_mean_f, m.data_mean_f, m.mixture_jsd_estimate, 0};
    }
    if (run.aborted) {
      if (out) out->aborted = 1;
      throw dasco::Error(dasco::ErrorKind::Numeric, run.error);
    }

    const auto eval_seed = dasco::nn::mix_seed(d.seed, 3);
    const auto data = dasco::gan::make_bimodal_data(d.spec, dasco::nn::mix_seed(d.seed, 0));
    const auto primary = dasco::gan::sample_generator(run.primary, d.gan.eval_samples, eval_seed);
    dasco::gan::Samples mixture = primary;
    write_text(dir / "data_samples.txt", dasco::gan::samples_text(data));
    write_text(dir / "primary_samples.txt", dasco::gan::samples_text(primary));
    if (d.use_aux) {
      const auto aux = dasco::gan::sample_generator(run.aux, d.gan.eval_samples, dasco::nn::mix_seed(d.seed, 4));
      write_text(dir / "aux_samples.txt", dasco::gan::samples_text(aux));
      // Same mixture the training metrics use: both sample sets pooled.
      mixture.values.insert(mixture.values.end(), aux.values.begin(), aux.values.end());
    }
    write_text(dir / "histogram.svg", dasco::gan::histogram_svg(data, mixture, primary));
  });
}

}  // extern "C"
