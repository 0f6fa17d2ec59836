#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dasco/agent/agent.hpp"
#include "dasco/error.hpp"
#include "dasco/nn/checkpoint.hpp"
#include "dasco/nn/ops.hpp"
#include "reference_net.hpp"

using namespace dasco;
using namespace dasco::agent;
using nn::Tensor;
using nn::Var;

namespace {

AgentConfig tiny_config() {
  AgentConfig c;
  c.q_hidden = {2};
  c.policy_hidden = {2};
  c.disc_hidden = {2};
  c.aux_hidden = {2};
  c.batch_size = 8;
  c.total_steps = 20;
  c.eval_interval = 10;
  c.eval_episodes = 2;
  return c;
}

std::vector<float> flatten(const nn::Mlp& net) {
  std::vector<float> out;
  for (const auto* p : net.parameters()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dasco_test_agent" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

const envs::OfflineDataset& small_dataset() {
  static const auto ds = envs::generate_dataset(envs::builtin_maze("toy-open5"), envs::Variant::Noisy, 10, 3).dataset;
  return ds;
}

void zero_last_layer(nn::Mlp& net, float bias) {
  auto params = net.parameters();
  params[params.size() - 2]->value.fill(0.0f);
  params.back()->value.fill(bias);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("agent_config_defaults") {
  const AgentConfig c;
  CHECK(c.q_hidden == std::vector<std::size_t>{256, 256, 256});
  CHECK(c.policy_hidden == std::vector<std::size_t>{256, 256, 256, 256});
  CHECK(c.disc_hidden == std::vector<std::size_t>{750});
  CHECK(c.aux_hidden == std::vector<std::size_t>{750});
  CHECK(c.lr == 3e-4);
  CHECK(c.tau == 0.005);
  CHECK(c.w == 0.025);
  CHECK(AgentConfig::dense_defaults().w == 1.0);
  CHECK(c.gamma == 0.99);
  CHECK(c.batch_size == 256);
  CHECK(c.disc_steps_per_gen_step == 5);
  CHECK(c.instance_noise.sigma0 == 0.3);
  CHECK(c.instance_noise.clamp == 0.3);
  CHECK(c.eval_episodes == 20);
  CHECK(c.ablations.use_aux_generator);
  CHECK(c.ablations.use_q_weight);
  const auto r = c.resolved(2);
  CHECK(r.aux_noise_dim.value() == 8);
  CHECK(r.instance_noise.anneal_steps.value() == c.total_steps / 2);
}

TEST_CASE("agent_config_json") {
  AgentConfig c = tiny_config();
  c.w = 0.5;
  c.ablations.use_q_weight = false;
  c.algorithm = Algorithm::BehaviorCloning;
  const auto back = AgentConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());

  auto partial = AgentConfig::from_json(nlohmann::json::parse(R"({"w": 1.0, "ablations": {"use_aux_generator": false}})"));
  CHECK(partial.w == 1.0);
  CHECK_FALSE(partial.ablations.use_aux_generator);
  CHECK(partial.ablations.use_q_weight);

  auto reject = [](const char* text) {
    CHECK_THROWS_AS(AgentConfig::from_json(nlohmann::json::parse(text)), ContractError);
  };
  reject(R"({"learning_rate": 1e-3})");
  reject(R"({"instance_noise": {"sigma": 0.1}})");
  reject(R"({"ablations": {"use_aux": false}})");
  reject(R"({"gamma": 1.0})");
  reject(R"({"tau": 0.0})");
  reject(R"({"w": 0.0})");
  reject(R"({"q_hidden": []})");
  reject(R"({"w": "big"})");
  reject(R"({"algorithm": "cql"})");

  auto path = temp_dir("cfg") / "c.json";
  std::filesystem::create_directories(path.parent_path());
  c.save(path);
  CHECK(AgentConfig::load(path).to_json() == c.to_json());
  CHECK_THROWS_AS(AgentConfig::load(path.parent_path() / "missing.json"), IoError);
}

TEST_CASE("instance_noise_schedule") {
  InstanceNoiseSchedule s(0.3, 0.3, 100);
  CHECK(s.sigma(0) == 0.3);
  CHECK(s.sigma(50) == doctest::Approx(0.15));
  CHECK(s.sigma(100) == 0.0);
  CHECK(s.sigma(1000) == 0.0);
  nn::Rng rng(4);
  const Tensor quiet = s.sample(100, {4, 2}, rng);
  for (float v : quiet.values()) CHECK(v == 0.0f);

  InstanceNoiseSchedule wide(10.0, 0.3, 100);
  bool hit_clamp = false;
  const Tensor loud = wide.sample(0, {500, 2}, rng);
  for (float v : loud.values()) {
    CHECK(std::abs(v) <= 0.3f);
    hit_clamp |= std::abs(v) == 0.3f;
  }
  CHECK(hit_clamp);
  CHECK_THROWS_AS(InstanceNoiseSchedule(-1.0, 0.3, 10), ContractError);
}

TEST_CASE("critic_target_values") {
  const Tensor r = Tensor::matrix(3, 1, {-1.0f, 0.0f, -1.0f});
  const Tensor term = Tensor::matrix(3, 1, {1.0f, 1.0f, 0.0f});
  const Tensor q1 = Tensor::matrix(3, 1, {5.0f, -3.0f, -2.0f});
  const Tensor q2 = Tensor::matrix(3, 1, {7.0f, -4.0f, -1.0f});
  const Tensor t = critic_target(r, term, q1, q2, 0.99);
  CHECK(t.data()[0] == -1.0f);
  CHECK(t.data()[1] == 0.0f);
  CHECK(t.data()[2] == doctest::Approx(-1.0 + 0.99 * -2.0));
}

TEST_CASE("critic_update_single_transition_oracle") {
  nn::Rng rng(5);
  AgentConfig cfg = tiny_config();
  cfg.q_hidden = {4, 4};
  auto nets = AgentNetworks::create(cfg, 4, 2, rng);
  auto opt = Optimizers::create(nets, cfg.lr);
  CHECK(flatten(nets.target_qf1) == flatten(nets.qf1));
  CHECK(flatten(nets.target_qf2) == flatten(nets.qf2));

  Batch b{Tensor::matrix(1, 4, {0.2f, 0.3f, 0.8f, 0.9f}), Tensor::matrix(1, 2, {0.5f, -0.25f}),
          Tensor::matrix(1, 1, {-1.0f}), Tensor::matrix(1, 1, {1.0f}), Tensor::matrix(1, 4, {0.25f, 0.3f, 0.8f, 0.9f})};
  const auto q1_ref = oracle::RefNet::from(nets.qf1).forward_row({0.2, 0.3, 0.8, 0.9, 0.5, -0.25})[0];
  const auto q2_ref = oracle::RefNet::from(nets.qf2).forward_row({0.2, 0.3, 0.8, 0.9, 0.5, -0.25})[0];
  // Terminal transition: the target is the reward.
  const auto stats = critic_update(b, nets, opt, cfg, rng);
  CHECK(stats.q1_loss == doctest::Approx((-1.0 - q1_ref) * (-1.0 - q1_ref)).epsilon(1e-5));
  CHECK(stats.q2_loss == doctest::Approx((-1.0 - q2_ref) * (-1.0 - q2_ref)).epsilon(1e-5));
}

TEST_CASE("policy_weight_properties") {
  const Tensor same = Tensor::matrix(2, 1, {0.3f, 0.8f});
  const Tensor ones = policy_weight(same, same);
  for (float v : ones.values()) CHECK(v == 1.0f);
  CHECK(policy_weight(Tensor::matrix(1, 1, {0.9f}), Tensor::matrix(1, 1, {0.4f})).item() == 1.0f);
  CHECK(policy_weight(Tensor::matrix(1, 1, {0.2f}), Tensor::matrix(1, 1, {0.8f})).item() == doctest::Approx(0.25));
  nn::Rng rng(6);
  auto a = rng.uniform_tensor({1000, 1}, 1e-6f, 1.0f - 1e-6f), b = rng.uniform_tensor({1000, 1}, 1e-6f, 1.0f - 1e-6f);
  const Tensor weights = policy_weight(a, b);
  for (float v : weights.values()) CHECK((v > 0.0f && v <= 1.0f));
  // Saturated discriminator on the policy side.
  CHECK(policy_weight(Tensor::matrix(1, 1, {0.0f}), Tensor::matrix(1, 1, {0.5f})).item() > 0.0f);
}

TEST_CASE("analytic_gan_losses") {
  nn::Rng rng(7);
  auto nets = AgentNetworks::create(tiny_config(), 4, 2, rng);
  const Tensor obs = rng.normal_tensor({6, 4});
  const Tensor act = rng.uniform_tensor({6, 2}, -1.0f, 1.0f);

  SUBCASE("half-probability discriminator") {
    zero_last_layer(nets.discriminator, 0.0f);
    nn::Tape tape;
    auto logit = [&](const Tensor& a) {
      return nets.discriminator.forward(tape, tape.constant(Tensor({6, 6}, [&] {
        std::vector<float> v;
        for (std::size_t r = 0; r < 6; ++r) {
          for (std::size_t k = 0; k < 4; ++k) v.push_back(obs.data()[r * 4 + k]);
          for (std::size_t k = 0; k < 2; ++k) v.push_back(a.data()[r * 2 + k]);
        }
        return v;
      }())));
    };
    CHECK(discriminator_loss(logit(act), {logit(act), logit(act)}).value().item() == doctest::Approx(0.375));
    CHECK(discriminator_loss(logit(act), {logit(act)}).value().item() == doctest::Approx(0.25));
    CHECK(generator_loss(logit(act)).value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
  SUBCASE("saturated discriminator") {
    nn::Tape tape;
    Var real = tape.constant(Tensor({6, 1}, 60.0f));
    Var fake = tape.constant(Tensor({6, 1}, -60.0f));
    CHECK(discriminator_loss(real, {fake, fake}).value().item() < 1e-30);
    CHECK(generator_loss(real).value().item() < 1e-20);
  }
}

TEST_CASE("tanh_gaussian_log_density_oracle") {
  nn::Tape tape;
  const std::vector<float> mean{0.3f, -1.2f, 0.0f, 2.0f}, log_std{-0.5f, 0.4f, -5.0f, 1.0f}, eps{0.7f, -1.1f, 2.0f, 0.1f};
  Var out = tape.constant(Tensor::matrix(2, 4, {mean[0], mean[1], log_std[0], log_std[1], mean[2], mean[3], log_std[2],
                                                log_std[3]}));
  const GaussianHead head = split_policy_output(out);
  const Tensor noise({2, 2}, eps);
  const Tensor lp = tanh_gaussian_log_prob(head, noise).value();
  for (int r = 0; r < 2; ++r) {
    double expected = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double m = mean[2 * r + k], ls = log_std[2 * r + k], e = eps[2 * r + k];
      const double a = std::tanh(m + std::exp(ls) * e);
      expected += -0.5 * e * e - ls - 0.5 * std::log(2.0 * M_PI) - std::log1p(-a * a);
    }
    CHECK(lp.data()[r] == doctest::Approx(expected).epsilon(1e-4));
  }
  // Density of the same actions evaluated directly.
  const Tensor actions = tanh_gaussian_sample(head, noise).value();
  const Tensor direct = tanh_gaussian_log_prob_of(head, actions).value();
  CHECK(direct.data()[0] == doctest::Approx(lp.data()[0]).epsilon(1e-3));
  CHECK(direct.data()[1] == doctest::Approx(lp.data()[1]).epsilon(1e-3));

  // log-std outside the bounds is clamped.
  nn::Tape t2;
  const GaussianHead clamped = split_policy_output(t2.constant(Tensor::matrix(1, 4, {0.0f, 0.0f, -9.0f, 7.0f})));
  CHECK(clamped.log_std.value().data()[0] == kLogStdMin);
  CHECK(clamped.log_std.value().data()[1] == kLogStdMax);
}

TEST_CASE("update_isolation") {
  nn::Rng rng(8);
  AgentConfig cfg = tiny_config();
  auto nets = AgentNetworks::create(cfg, 4, 2, rng);
  auto opt = Optimizers::create(nets, 1e-2);
  const Batch batch = sample_batch(small_dataset(), 16, rng);
  const InstanceNoiseSchedule noise(0.3, 0.3, 100);

  auto snapshot = [&] {
    std::vector<std::vector<float>> s;
    for (auto& [name, net] : nets.named()) s.push_back(flatten(*net));
    return s;
  };
  // Indices follow AgentNetworks::named(): qf1, qf2, target_qf1, target_qf2, policy, aux_generator, discriminator.
  auto changed = [&](const std::vector<std::vector<float>>& before) {
    std::vector<bool> c;
    const auto now = snapshot();
    for (std::size_t i = 0; i < now.size(); ++i) c.push_back(now[i] != before[i]);
    return c;
  };

  auto before = snapshot();
  aux_generator_update(batch, nets, opt, cfg, rng);
  CHECK(changed(before) == std::vector<bool>{false, false, false, false, false, true, false});

  before = snapshot();
  discriminator_update(batch, nets, opt, cfg, noise, 0, rng);
  CHECK(changed(before) == std::vector<bool>{false, false, false, false, false, false, true});

  before = snapshot();
  policy_update(batch, nets, opt, cfg, rng);
  CHECK(changed(before) == std::vector<bool>{false, false, false, false, true, false, false});

  before = snapshot();
  critic_update(batch, nets, opt, cfg, rng);
  CHECK(changed(before) == std::vector<bool>{true, true, true, true, false, false, false});
}

TEST_CASE("aux_gradient_reaches_generator_only") {
  nn::Rng rng(9);
  auto nets = AgentNetworks::create(tiny_config(), 4, 2, rng);
  const Batch batch = sample_batch(small_dataset(), 8, rng);
  nn::Tape tape;
  Var obs = tape.constant(batch.observations);
  Var z = tape.constant(rng.normal_tensor({8, nets.noise_dim}));
  Var action = nn::stop_gradient(nn::tanh(nets.aux_generator.forward(tape, nn::concat_cols(obs, z))));
  Var loss = generator_loss(nets.discriminator.forward(tape, nn::concat_cols(obs, action)));
  tape.backward(loss);
  // With the fake detached, as inside the discriminator step, nothing reaches the generator.
  for (const auto* p : nets.aux_generator.parameters()) {
    for (float g : p->grad.values()) CHECK(g == 0.0f);
  }
}

TEST_CASE("policy_loss_weight_is_constant") {
  // Central differences over the policy parameters with the weight held fixed
  // must reproduce the autodiff gradient.
  nn::Rng rng(10);
  AgentConfig cfg = tiny_config();
  cfg.policy_hidden = {3};
  cfg.ablations.use_q_weight = true;
  auto nets = AgentNetworks::create(cfg, 4, 2, rng);
  const Batch batch = sample_batch(small_dataset(), 4, rng);
  const Tensor eps = rng.normal_tensor({4, 2});
  const Tensor weight = Tensor::matrix(4, 1, {1.0f, 0.5f, 0.25f, 0.75f});

  auto loss_value = [&](nn::Tape& tape) {
    Var obs = tape.constant(batch.observations);
    const GaussianHead head = split_policy_output(nets.policy.forward(tape, obs));
    Var sa = nn::concat_cols(obs, tanh_gaussian_sample(head, eps));
    return policy_loss(nets.qf1.forward(tape, sa), nets.discriminator.forward(tape, sa), weight, 0.5);
  };
  nn::Tape tape;
  tape.backward(loss_value(tape));
  for (auto* p : nets.policy.parameters()) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const float orig = p->value.data()[i];
      const float h = 1e-2f;
      p->value.data()[i] = orig + h;
      nn::Tape tp;
      const double up = loss_value(tp).value().item();
      p->value.data()[i] = orig - h;
      nn::Tape tm;
      const double down = loss_value(tm).value().item();
      p->value.data()[i] = orig;
      CHECK(p->grad.data()[i] == doctest::Approx((up - down) / (2.0 * h)).epsilon(2e-2).scale(1e-2));
    }
  }
}

TEST_CASE("policy_loss_degenerates_without_value_term") {
  nn::Rng rng(11);
  AgentConfig cfg = tiny_config();
  cfg.ablations = {false, false};
  auto nets = AgentNetworks::create(cfg, 4, 2, rng);
  const Batch batch = sample_batch(small_dataset(), 8, rng);
  nn::Tape tape;
  Var obs = tape.constant(batch.observations);
  const GaussianHead head = split_policy_output(nets.policy.forward(tape, obs));
  Var sa = nn::concat_cols(obs, tanh_gaussian_sample(head, rng.normal_tensor({8, 2})));
  Var q = nets.qf1.forward(tape, sa);
  Var logit = nets.discriminator.forward(tape, sa);
  const double loss = policy_loss(q, logit, Tensor({8, 1}, 1.0f), 1e12).value().item();
  double expected = 0.0;
  for (float l : logit.value().values()) expected -= std::log(sigmoid(l));
  CHECK(loss == doctest::Approx(expected / 8.0).epsilon(1e-5));
  // And with a finite w the value term is weight * q / w.
  double with_value = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    with_value -= q.value().data()[i] / 0.5 + std::log(sigmoid(logit.value().data()[i]));
  }
  CHECK(policy_loss(q, logit, Tensor({8, 1}, 1.0f), 0.5).value().item() == doctest::Approx(with_value / 8.0).epsilon(1e-5));
}

TEST_CASE("policy_update_reports_weight_range") {
  nn::Rng rng(12);
  AgentConfig cfg = tiny_config();
  auto nets = AgentNetworks::create(cfg, 4, 2, rng);
  auto opt = Optimizers::create(nets, cfg.lr);
  for (int i = 0; i < 20; ++i) {
    const Batch batch = sample_batch(small_dataset(), 16, rng);
    const auto s = policy_update(batch, nets, opt, cfg, rng);
    CHECK((s.mean_weight > 0.0 && s.mean_weight <= 1.0));
  }
  cfg.ablations.use_q_weight = false;
  CHECK(policy_update(sample_batch(small_dataset(), 16, rng), nets, opt, cfg, rng).mean_weight == 1.0);
}

TEST_CASE("evaluate_policy_harness") {
  auto env = envs::make_env("toy-medium");
  nn::Rng rng(13);
  auto nets = AgentNetworks::create(tiny_config(), 4, 2, rng);
  const auto random_init = evaluate_policy(nets.policy, *env);
  CHECK(random_init.episodes == 20);
  CHECK(random_init.success_rate <= 0.1);

  auto* maze_env = dynamic_cast<envs::MazeEnv*>(env.get());
  REQUIRE(maze_env);
  const auto scripted = evaluate_controller(
      [&](const envs::Observation&) { return envs::behavior_policy_action(maze_env->spec(), maze_env->state()); }, *env,
      20, 0);
  CHECK(scripted.success_rate >= 0.95);
  CHECK(scripted.mean_return == doctest::Approx(scripted.success_rate));

  auto wrong = AgentNetworks::create(tiny_config(), 3, 2, rng);
  CHECK_THROWS_AS(evaluate_policy(wrong.policy, *env), ContractError);
}

TEST_CASE("behavior_cloning_fits_batch") {
  nn::Rng rng(14);
  AgentConfig cfg = tiny_config();
  cfg.policy_hidden = {16};
  auto nets = AgentNetworks::create(cfg, 4, 2, rng);
  auto opt = Optimizers::create(nets, 1e-2);
  const Batch batch = sample_batch(small_dataset(), 64, rng);
  const double first = bc_update(batch, nets, opt);
  double last = first;
  for (int i = 0; i < 200; ++i) last = bc_update(batch, nets, opt);
  CHECK(last < first - 1.0);
}

TEST_CASE("train_zero_steps_writes_initialization") {
  AgentConfig cfg = tiny_config();
  cfg.total_steps = 0;
  const auto dir = temp_dir("zero");
  auto result = train(small_dataset(), cfg, 21, {dir, "", nullptr});
  CHECK(result.rows.empty());
  nn::Rng init(nn::mix_seed(21, 0));
  auto fresh = AgentNetworks::create(cfg, 4, 2, init);
  for (auto& [name, net] : fresh.named()) {
    const auto stored = nn::load_checkpoint(dir / (name + ".nnc"));
    const auto params = net->parameters();
    REQUIRE(stored.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(stored[i].value == params[i]->value);
  }
  CHECK(read_file(dir / "metrics.csv") == metrics_csv_header());
  CHECK(AgentConfig::load(dir / "config.json").aux_noise_dim.value() == 8);
}

TEST_CASE("train_is_deterministic") {
  AgentConfig cfg = tiny_config();
  const auto a = temp_dir("det_a"), b = temp_dir("det_b");
  auto ra = train(small_dataset(), cfg, 3, {a, "", nullptr});
  auto rb = train(small_dataset(), cfg, 3, {b, "", nullptr});
  REQUIRE_FALSE(ra.aborted);
  CHECK(ra.rows.size() == 2);
  CHECK(ra.rows.back().step == 20);
  for (const char* f : {"metrics.csv", "config.json", "qf1.nnc", "qf2.nnc", "target_qf1.nnc", "target_qf2.nnc",
                        "policy.nnc", "aux_generator.nnc", "discriminator.nnc"}) {
    CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
  }
  CHECK(read_file(a / "metrics.csv").rfind(metrics_csv_header(), 0) == 0);
  for (const auto& row : ra.rows) CHECK((row.mean_weight > 0.0 && row.mean_weight <= 1.0));

  const auto loaded = load_policy(a);
  const Tensor obs = nn::Rng(1).normal_tensor({5, 4});
  CHECK(policy_mean_action(loaded.policy, obs) == policy_mean_action(ra.nets.policy, obs));
}

TEST_CASE("train_behavior_cloning_checkpoint") {
  AgentConfig cfg = tiny_config();
  cfg.algorithm = Algorithm::BehaviorCloning;
  const auto dir = temp_dir("bc");
  auto r = train(small_dataset(), cfg, 4, {dir, "", nullptr});
  CHECK(std::filesystem::exists(dir / "policy.nnc"));
  CHECK_FALSE(std::filesystem::exists(dir / "qf1.nnc"));
  CHECK(load_policy(dir).config.algorithm == Algorithm::BehaviorCloning);
  CHECK(r.rows.back().q1_loss == 0.0);
}

TEST_CASE("train_numeric_abort") {
  auto ds = small_dataset();
  for (auto& r : ds.rewards) r = 3e38f;
  const auto dir = temp_dir("abort");
  auto r = train(ds, tiny_config(), 5, {dir, "", nullptr});
  CHECK(r.aborted);
  CHECK(r.error.find("numeric") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "config.json"));
}

TEST_CASE("maze_rewards_entering_the_critic") {
  for (float r : small_dataset().rewards) CHECK((r == -1.0f || r == 0.0f));
  CHECK_THROWS_AS(train(envs::OfflineDataset{}, tiny_config(), 0), ContractError);
}
