// Command-line front end. Talks to the library through the C API only.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dasco/dasco.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

enum class LogLevel { Quiet, Info, Debug };

LogLevel g_log = LogLevel::Info;

// Carries an exit code out of a command body.
struct Failure {
  int code;
  std::string message;
};

void log_info(const std::string& msg) {
  if (g_log != LogLevel::Quiet) std::cerr << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (g_log == LogLevel::Debug) std::cerr << "[debug] " << msg << '\n';
}

void check(dasco_status st) {
  if (st != DASCO_OK) throw Failure{static_cast<int>(st), dasco_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  dasco_string_free(s);
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{DASCO_ERR_IO, "cannot open config " + path};
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw Failure{DASCO_ERR_CONTRACT, path + ": config must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw Failure{DASCO_ERR_CONTRACT, path + ": " + e.what()};
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{DASCO_ERR_IO, "cannot write " + path.string()};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{DASCO_ERR_IO, "cannot create " + dir.string() + ": " + ec.message()};
}

// "-1,1" -> [-1, 1]; "-1:0,1:0" -> [[-1, 0], [1, 0]].
json parse_modes(const std::string& text) {
  json modes = json::array();
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        modes.push_back(std::stod(item));
      } else {
        modes.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
      }
    }
  } catch (const std::exception&) {
    throw Failure{DASCO_ERR_CONTRACT, "cannot parse --modes '" + text + "'"};
  }
  return modes;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  } catch (const std::exception&) {
    throw Failure{DASCO_ERR_CONTRACT, std::string("cannot parse ") + flag + " '" + text + "'"};
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string config;
  std::string env = "toy-medium";
  std::string variant = "clean";
  int episodes = 500;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option* env_opt = nullptr;
  CLI::Option* variant_opt = nullptr;
  CLI::Option* episodes_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int run_gen_data(const GenDataArgs& a) {
  json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  if (a.env_opt->count() || !cfg.contains("env")) cfg["env"] = a.env;
  if (a.variant_opt->count() || !cfg.contains("variant")) cfg["variant"] = a.variant;
  if (a.episodes_opt->count() || !cfg.contains("episodes")) cfg["episodes"] = a.episodes;
  if (a.seed_opt->count() || !cfg.contains("seed")) cfg["seed"] = a.seed;
  const std::string text = cfg.dump();

  char* resolved_raw = nullptr;
  check(dasco_dataset_generate_config(text.c_str(), nullptr, &resolved_raw));
  const json resolved = json::parse(take(resolved_raw));
  const fs::path out(a.out);
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_file(fs::path(a.out + ".config.json"), resolved.dump(2) + "\n");
  log_debug("resolved config: " + resolved.dump());

  log_info("generating " + std::to_string(resolved["episodes"].get<int>()) + " episodes on " +
           resolved["env"].get<std::string>());
  dasco_dataset* ds = nullptr;
  check(dasco_dataset_generate_config(text.c_str(), &ds, nullptr));
  std::unique_ptr<dasco_dataset, void (*)(dasco_dataset*)> guard(ds, dasco_dataset_free);
  check(dasco_dataset_write(ds, a.out.c_str()));

  char* meta_raw = nullptr;
  check(dasco_dataset_metadata_json(ds, &meta_raw));
  const json meta = json::parse(take(meta_raw));
  ordered_json manifest;
  manifest["dataset"] = out.filename().string();
  manifest["env"] = meta["env"];
  manifest["variant"] = meta["variant"];
  manifest["seed"] = meta["seed"];
  manifest["generator_version"] = meta["generator_version"];
  manifest["transitions"] = meta["transitions"];
  manifest["episodes"] = meta["episodes"];
  manifest["behavior_success_rate"] = meta["behavior_success_rate"];
  manifest["config"] = resolved;
  write_file(fs::path(a.out + ".manifest.json"), manifest.dump(2) + "\n");
  log_info("wrote " + a.out + ": " + meta["transitions"].dump() + " transitions, behavior success " +
           fmt(meta["behavior_success_rate"].get<double>()));
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string dataset;
  std::string out;
  std::string config;
  std::string preset;
  std::string algorithm;
  std::string eval_env;
  bool no_aux = false;
  bool no_q_weight = false;
  bool standardize = false;
  double w = 0.0;
  long long steps = 0;
  std::uint64_t seed = 0;
  CLI::Option* w_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
};

void print_row(const dasco_metrics_row* r, void*) {
  log_info("step " + std::to_string(r->step) + "  q1 " + fmt(r->q1_loss) + "  policy " + fmt(r->policy_loss) +
           "  disc " + fmt(r->disc_loss) + "  weight " + fmt(r->mean_weight) + "  return " + fmt(r->eval_return) +
           "  success " + fmt(r->eval_success));
}

int run_train(const TrainArgs& a) {
  dasco_dataset* ds = nullptr;
  check(dasco_dataset_read(a.dataset.c_str(), &ds));
  std::unique_ptr<dasco_dataset, void (*)(dasco_dataset*)> guard(ds, dasco_dataset_free);
  dasco_dataset_info info{};
  check(dasco_dataset_info_get(ds, &info));
  char* meta_raw = nullptr;
  check(dasco_dataset_metadata_json(ds, &meta_raw));
  const json meta = json::parse(take(meta_raw));

  json overrides = a.config.empty() ? json::object() : read_json_file(a.config);
  if (!a.algorithm.empty()) overrides["algorithm"] = a.algorithm;
  if (a.no_aux) overrides["ablations"]["use_aux_generator"] = false;
  if (a.no_q_weight) overrides["ablations"]["use_q_weight"] = false;
  if (a.w_opt->count()) overrides["w"] = a.w;
  if (a.steps_opt->count()) overrides["total_steps"] = a.steps;
  const std::string preset =
      !a.preset.empty() ? a.preset : (meta["env"].get<std::string>() == "toy-reacher" ? "dense" : "maze");
  const std::string overrides_text = overrides.dump();
  char* cfg_raw = nullptr;
  check(dasco_agent_config_resolve(preset.c_str(), overrides_text.c_str(), info.act_dim, &cfg_raw));
  const std::string cfg = take(cfg_raw);
  log_debug("resolved config: " + json::parse(cfg).dump());

  make_dir(a.out);
  ordered_json run;
  run["dataset"] = fs::absolute(a.dataset).lexically_normal().string();
  run["dataset_env"] = meta["env"];
  run["dataset_variant"] = meta["variant"];
  run["preset"] = preset;
  run["seed"] = a.seed;
  run["eval_env"] = a.eval_env.empty() ? meta["env"] : json(a.eval_env);
  run["standardize_rewards"] = a.standardize;
  write_file(fs::path(a.out) / "run.json", run.dump(2) + "\n");

  if (a.standardize) check(dasco_dataset_standardize_rewards(ds));
  log_info("training on " + std::to_string(info.transitions) + " transitions -> " + a.out);
  check(dasco_train(ds, cfg.c_str(), a.seed, a.out.c_str(), a.eval_env.empty() ? nullptr : a.eval_env.c_str(),
                    print_row, nullptr));
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string env = "toy-medium";
  int episodes = 20;
  std::uint64_t seed = 0;
  bool behavior = false;
};

int run_eval(const EvalArgs& a) {
  dasco_eval_result r{};
  if (a.behavior) {
    check(dasco_behavior_evaluate(a.env.c_str(), a.episodes, a.seed, &r));
  } else {
    if (a.checkpoint.empty()) throw Failure{DASCO_ERR_CONTRACT, "eval needs --checkpoint or --behavior"};
    dasco_policy* policy = nullptr;
    check(dasco_policy_load(a.checkpoint.c_str(), &policy));
    std::unique_ptr<dasco_policy, void (*)(dasco_policy*)> guard(policy, dasco_policy_free);
    check(dasco_policy_evaluate(policy, a.env.c_str(), a.episodes, a.seed, &r));
  }
  ordered_json out;
  out["mean_return"] = r.mean_return;
  out["success_rate"] = r.success_rate;
  out["episodes"] = r.episodes;
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---- theory ----

struct TheoryCheckArgs {
  std::size_t instances = 50;
  std::uint64_t seed = 0;
  std::size_t max_n = 8;
  bool maximize = false;
  std::string out;
};

int run_theory_check(const TheoryCheckArgs& a) {
  char* csv_raw = nullptr;
  dasco_theory_summary s{};
  check(dasco_theory_check(a.instances, a.seed, a.max_n, a.maximize ? 1 : 0, &csv_raw, &s));
  const std::string csv = take(csv_raw);
  const bool pass = s.passed == s.instances;
  char summary[256];
  std::snprintf(summary, sizeof summary, "%s: %zu/%zu instances, max_tv=%.3g, max_kkt=%.3g, max_lp_gap=%.3g",
                pass ? "pass" : "fail", s.passed, s.instances, s.max_tv, s.max_kkt_residual, s.max_objective_gap);
  if (a.out.empty()) {
    std::cout << csv;
    std::cerr << summary << '\n';
  } else {
    write_file(a.out, csv);
    std::cout << summary << '\n';
  }
  return pass ? 0 : DASCO_ERR_NUMERIC;
}

struct TheorySolveArgs {
  std::string p_data;
  std::string f;
  bool maximize = false;
};

int run_theory_solve(const TheorySolveArgs& a) {
  const auto p = parse_list(a.p_data, "--p-data");
  const auto f = parse_list(a.f, "--f");
  if (p.size() != f.size()) throw Failure{DASCO_ERR_CONTRACT, "--p-data and --f differ in length"};
  char* out = nullptr;
  check(dasco_theory_solve(p.data(), f.data(), p.size(), a.maximize ? 1 : 0, &out));
  std::cout << take(out) << '\n';
  return 0;
}

// ---- gan-demo ----

struct GanArgs {
  std::string config;
  std::string modes;
  std::string objective;
  std::string target;
  double threshold = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
  double f_weight = 1.0;
  bool no_aux = false;
  bool minimize = false;
  std::string out;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* f_weight_opt = nullptr;
};

int run_gan_demo(const GanArgs& a) {
  json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  if (!a.modes.empty()) cfg["data"]["modes"] = parse_modes(a.modes);
  if (!a.objective.empty()) cfg["data"]["objective"] = a.objective;
  if (!a.target.empty()) cfg["data"]["target"] = parse_list(a.target, "--target");
  if (a.threshold_opt->count()) cfg["data"]["threshold"] = a.threshold;
  if (a.steps_opt->count()) cfg["gan"]["steps"] = a.steps;
  if (a.f_weight_opt->count()) cfg["gan"]["f_weight"] = a.f_weight;
  if (a.minimize) cfg["gan"]["f_sign"] = -1.0;
  if (a.seed_opt->count()) cfg["seed"] = a.seed;
  if (a.no_aux) cfg["use_aux"] = false;
  const std::string text = cfg.dump();
  char* resolved_raw = nullptr;
  check(dasco_gan_config_resolve(text.c_str(), &resolved_raw));
  const std::string resolved = take(resolved_raw);
  log_debug("resolved config: " + json::parse(resolved).dump());

  log_info("gan-demo -> " + a.out);
  dasco_gan_summary s{};
  check(dasco_gan_demo(resolved.c_str(), a.out.c_str(), &s));
  ordered_json out;
  out["in_support_rate"] = s.in_support_rate;
  out["primary_mean_f"] = s.primary_mean_f;
  out["data_mean_f"] = s.data_mean_f;
  out["mixture_jsd_estimate"] = s.mixture_jsd_estimate;
  std::cout << out.dump(2) << '\n';
  return 0;
}

LogLevel parse_log_level() {
  const char* env = std::getenv("DASCO_LOG");
  if (!env || !*env) return LogLevel::Info;
  const std::string v = env;
  if (v == "quiet") return LogLevel::Quiet;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  throw Failure{DASCO_ERR_CONTRACT, "DASCO_LOG must be quiet, info or debug (got '" + v + "')"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DASCO toy lab: datasets, dual-generator offline RL, theory checks and a GAN demo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dasco_version());

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Roll out the scripted behavior policy and write a dataset");
  gen->add_option("--config", gd.config, "JSON config; flags override its keys")->check(CLI::ExistingFile);
  gd.env_opt = gen->add_option("--env", gd.env, "toy-open5, toy-medium, toy-large or toy-reacher")->capture_default_str();
  gd.variant_opt = gen->add_option("--variant", gd.variant, "clean, noisy or biased")
                       ->check(CLI::IsMember({"clean", "noisy", "biased"}))
                       ->capture_default_str();
  gd.episodes_opt = gen->add_option("--episodes", gd.episodes)->capture_default_str();
  gd.seed_opt = gen->add_option("--seed", gd.seed)->capture_default_str();
  gen->add_option("--out", gd.out, "dataset path; .config.json and .manifest.json are written alongside")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train an agent on a dataset");
  train->add_option("--dataset", tr.dataset)->required();
  train->add_option("--out", tr.out, "checkpoint directory")->required();
  train->add_option("--config", tr.config, "JSON config; flags override its keys")->check(CLI::ExistingFile);
  train->add_option("--preset", tr.preset, "base settings: maze (default) or dense (default for toy-reacher)");
  train->add_option("--algorithm", tr.algorithm, "dasco or bc");
  train->add_flag("--no-aux-generator", tr.no_aux, "drop the auxiliary generator");
  train->add_flag("--no-q-weight", tr.no_q_weight, "fix the policy's Q weight at 1");
  tr.w_opt = train->add_option("--w", tr.w, "GAN term weight (maze default 0.025)");
  tr.steps_opt = train->add_option("--steps", tr.steps, "total gradient steps");
  train->add_option("--seed", tr.seed)->capture_default_str();
  train->add_option("--eval-env", tr.eval_env, "evaluation environment (default: the dataset's)");
  train->add_flag("--standardize-rewards", tr.standardize, "divide rewards by the episode-return range");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints JSON");
  eval->add_option("--checkpoint", ev.checkpoint, "directory written by train");
  eval->add_option("--env", ev.env)->capture_default_str();
  eval->add_option("--episodes", ev.episodes)->capture_default_str();
  eval->add_option("--seed", ev.seed)->capture_default_str();
  eval->add_flag("--behavior", ev.behavior, "evaluate the scripted behavior controller instead");

  auto* theory = app.add_subcommand("theory", "Discrete generator optima");
  theory->require_subcommand(1);
  TheoryCheckArgs tc;
  auto* tcheck = theory->add_subcommand("check", "Compare closed forms with numerical oracles on random instances");
  tcheck->add_option("--instances", tc.instances)->capture_default_str();
  tcheck->add_option("--seed", tc.seed)->capture_default_str();
  tcheck->add_option("--max-n", tc.max_n)->capture_default_str();
  tcheck->add_flag("--maximize", tc.maximize, "treat the sampled f as an objective to maximize");
  tcheck->add_option("--out", tc.out, "CSV path (default: stdout)");
  auto* texample = theory->add_subcommand("example-1d", "Two-action worked example as JSON");
  TheorySolveArgs ts;
  auto* tsolve = theory->add_subcommand("solve", "Optima for a given distribution and objective as JSON");
  tsolve->add_option("--p-data", ts.p_data, "comma-separated probabilities")->required();
  tsolve->add_option("--f", ts.f, "comma-separated objective values")->required();
  tsolve->add_flag("--maximize", ts.maximize, "maximize f (default: minimize)");

  GanArgs ga;
  auto* gan = app.add_subcommand("gan-demo", "Dual-generator GAN on a static Gaussian mixture");
  gan->add_option("--config", ga.config, "JSON config; flags override its keys")->check(CLI::ExistingFile);
  gan->add_option("--modes", ga.modes, "mode centers, e.g. -1,1 or -1:0,1:0 for 2D");
  gan->add_option("--objective", ga.objective, "none, linear, neg-distance or step");
  gan->add_option("--target", ga.target, "neg-distance target, comma-separated");
  ga.threshold_opt = gan->add_option("--threshold", ga.threshold, "step threshold");
  ga.steps_opt = gan->add_option("--steps", ga.steps);
  ga.seed_opt = gan->add_option("--seed", ga.seed);
  ga.f_weight_opt = gan->add_option("--f-weight", ga.f_weight);
  gan->add_flag("--minimize", ga.minimize, "push the primary generator toward low f");
  gan->add_flag("--no-aux", ga.no_aux, "single-generator baseline");
  gan->add_option("--out", ga.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.back()->help());
    return DASCO_ERR_CONTRACT;
  }

  try {
    g_log = parse_log_level();
    if (*gen) return run_gen_data(gd);
    if (*train) return run_train(tr);
    if (*eval) return run_eval(ev);
    if (*tcheck) return run_theory_check(tc);
    if (*tsolve) return run_theory_solve(ts);
    if (*texample) {
      char* out = nullptr;
      check(dasco_theory_example_1d(&out));
      std::cout << take(out) << '\n';
      return 0;
    }
    if (*gan) return run_gan_demo(ga);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return DASCO_ERR_INTERNAL;
  }
  return DASCO_ERR_CONTRACT;
}
