#include "dasco/agent/agent.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dasco/error.hpp"
#include "dasco/nn/checkpoint.hpp"
#include "dasco/nn/ops.hpp"

namespace dasco::agent {

using nn::Tensor;
using nn::Var;

namespace {

constexpr float kHalfLog2Pi = 0.91893853320467274178f;
constexpr float kTanhEps = 1e-6f;
constexpr float kLn2 = 0.69314718055994530942f;

Tensor hcat(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw DimensionError("hcat: row counts differ");
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<float> v(rows * (ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data() + r * ca, ca, v.begin() + static_cast<std::ptrdiff_t>(r * (ca + cb)));
    std::copy_n(b.data() + r * cb, cb, v.begin() + static_cast<std::ptrdiff_t>(r * (ca + cb) + ca));
  }
  return Tensor({rows, ca + cb}, std::move(v));
}

Tensor add_tensors(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.numel(); ++i) a.data()[i] += b.data()[i];
  return a;
}

double tensor_mean(const Tensor& t) {
  double s = 0.0;
  for (float v : t.values()) s += v;
  return t.numel() ? s / static_cast<double>(t.numel()) : 0.0;
}

std::vector<std::size_t> sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

void copy_parameters(nn::Mlp& dst, const nn::Mlp& src) { nn::soft_update(dst, src, 1.0); }

}  // namespace

// ---- policy head ----

GaussianHead split_policy_output(Var out) {
  const std::size_t a = out.value().cols() / 2;
  if (a == 0 || out.value().cols() != 2 * a) throw DimensionError("policy output must have an even, non-zero width");
  return {nn::slice_cols(out, 0, a), nn::clamp(nn::slice_cols(out, a, a), kLogStdMin, kLogStdMax)};
}

Var tanh_gaussian_sample(const GaussianHead& head, const Tensor& eps) {
  nn::Tape& tape = *head.mean.tape();
  return nn::tanh(head.mean + nn::exp(head.log_std) * tape.constant(eps));
}

Var tanh_gaussian_log_prob(const GaussianHead& head, const Tensor& eps) {
  nn::Tape& tape = *head.mean.tape();
  Tensor base = eps;
  for (auto& v : base.values()) v = -0.5f * v * v - kHalfLog2Pi;
  // log(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u)), exact even where tanh saturates.
  Var u = head.mean + nn::exp(head.log_std) * tape.constant(eps);
  Var jacobian = nn::scale(nn::add_scalar(-u - nn::softplus(nn::scale(u, -2.0f)), kLn2), 2.0f);
  return nn::row_sum(tape.constant(base) - head.log_std - jacobian);
}

Var tanh_gaussian_log_prob_of(const GaussianHead& head, const Tensor& actions) {
  nn::Tape& tape = *head.mean.tape();
  Tensor pre = actions, constant_terms = actions;
  for (std::size_t i = 0; i < actions.numel(); ++i) {
    const float a = std::clamp(actions.data()[i], -1.0f + kTanhEps, 1.0f - kTanhEps);
    pre.data()[i] = std::atanh(a);
    constant_terms.data()[i] = -kHalfLog2Pi - std::log(1.0f - a * a + kTanhEps);
  }
  Var z = (tape.constant(pre) - head.mean) * nn::exp(-head.log_std);
  return nn::row_sum(nn::scale(nn::square(z), -0.5f) - head.log_std + tape.constant(constant_terms));
}

// ---- networks ----

AgentNetworks AgentNetworks::create(const AgentConfig& cfg, std::size_t obs_dim, std::size_t act_dim, nn::Rng& rng) {
  cfg.validate();
  if (obs_dim == 0 || act_dim == 0) throw ContractError("agent networks need positive observation and action sizes");
  AgentNetworks n;
  n.obs_dim = obs_dim;
  n.act_dim = act_dim;
  n.noise_dim = cfg.noise_dim(act_dim);
  const auto relu = nn::Activation::Relu;
  n.qf1 = nn::Mlp("qf1", sizes(obs_dim + act_dim, cfg.q_hidden, 1), relu, rng);
  n.qf2 = nn::Mlp("qf2", sizes(obs_dim + act_dim, cfg.q_hidden, 1), relu, rng);
  n.target_qf1 = nn::Mlp("qf1", sizes(obs_dim + act_dim, cfg.q_hidden, 1), relu, rng);
  n.target_qf2 = nn::Mlp("qf2", sizes(obs_dim + act_dim, cfg.q_hidden, 1), relu, rng);
  copy_parameters(n.target_qf1, n.qf1);
  copy_parameters(n.target_qf2, n.qf2);
  n.policy = nn::Mlp("policy", sizes(obs_dim, cfg.policy_hidden, 2 * act_dim), relu, rng);
  n.aux_generator = nn::Mlp("aux_generator", sizes(obs_dim + n.noise_dim, cfg.aux_hidden, act_dim), relu, rng);
  n.discriminator = nn::Mlp("discriminator", sizes(obs_dim + act_dim, cfg.disc_hidden, 1), relu, rng);
  return n;
}

std::vector<std::pair<std::string, nn::Mlp*>> AgentNetworks::named() {
  return {{"qf1", &qf1},        {"qf2", &qf2},
          {"target_qf1", &target_qf1}, {"target_qf2", &target_qf2},
          {"policy", &policy},  {"aux_generator", &aux_generator},
          {"discriminator", &discriminator}};
}

std::vector<std::pair<std::string, const nn::Mlp*>> AgentNetworks::named() const {
  std::vector<std::pair<std::string, const nn::Mlp*>> out;
  for (auto& [name, net] : const_cast<AgentNetworks*>(this)->named()) out.emplace_back(name, net);
  return out;
}

Tensor policy_mean_action(const nn::Mlp& policy, const Tensor& obs) {
  const Tensor out = policy.predict(obs);
  const std::size_t a = out.cols() / 2;
  Tensor act({out.rows(), a}, 0.0f);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t k = 0; k < a; ++k) act.data()[r * a + k] = std::tanh(out.data()[r * 2 * a + k]);
  }
  return act;
}

Tensor policy_sample_action(const nn::Mlp& policy, const Tensor& obs, nn::Rng& rng) {
  const Tensor out = policy.predict(obs);
  const std::size_t a = out.cols() / 2;
  Tensor act({out.rows(), a}, 0.0f);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t k = 0; k < a; ++k) {
      const float mean = out.data()[r * 2 * a + k];
      const float log_std = std::clamp(out.data()[r * 2 * a + a + k], kLogStdMin, kLogStdMax);
      act.data()[r * a + k] = std::tanh(mean + std::exp(log_std) * static_cast<float>(rng.normal()));
    }
  }
  return act;
}

Tensor aux_sample_action(const nn::Mlp& aux, const Tensor& obs, std::size_t noise_dim, nn::Rng& rng) {
  Tensor out = aux.predict(hcat(obs, rng.normal_tensor({obs.rows(), noise_dim})));
  for (auto& v : out.values()) v = std::tanh(v);
  return out;
}

Tensor discriminator_probability(const nn::Mlp& disc, const Tensor& obs, const Tensor& actions) {
  Tensor out = disc.predict(hcat(obs, actions));
  for (auto& v : out.values()) v = 1.0f / (1.0f + std::exp(-v));
  return out;
}

// ---- batches ----

Batch gather_batch(const envs::OfflineDataset& ds, const std::vector<std::size_t>& indices) {
  const std::size_t B = indices.size(), od = ds.obs_dim, ad = ds.act_dim;
  Batch b{Tensor({B, od}, 0.0f), Tensor({B, ad}, 0.0f), Tensor({B, 1}, 0.0f), Tensor({B, 1}, 0.0f),
          Tensor({B, od}, 0.0f)};
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t j = indices[i];
    if (j >= ds.size()) throw ContractError("gather_batch: index out of range");
    std::copy_n(ds.observations.data() + j * od, od, b.observations.data() + i * od);
    std::copy_n(ds.actions.data() + j * ad, ad, b.actions.data() + i * ad);
    b.rewards.data()[i] = ds.rewards[j];
    b.terminals.data()[i] = ds.terminals[j] ? 1.0f : 0.0f;
    std::copy_n(ds.next_observations.data() + j * od, od, b.next_observations.data() + i * od);
  }
  return b;
}

Batch sample_batch(const envs::OfflineDataset& ds, std::size_t batch_size, nn::Rng& rng) {
  if (ds.size() == 0) throw ContractError("sample_batch: empty dataset");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.index(ds.size());
  return gather_batch(ds, idx);
}

// ---- instance noise ----

InstanceNoiseSchedule::InstanceNoiseSchedule(double sigma0, double clamp, std::int64_t anneal_steps)
    : sigma0_(sigma0), clamp_(clamp), anneal_steps_(anneal_steps) {
  if (!(sigma0 >= 0.0) || !(clamp >= 0.0) || anneal_steps < 0) {
    throw ContractError("instance noise: sigma0, clamp and anneal_steps must be non-negative");
  }
}

double InstanceNoiseSchedule::sigma(std::int64_t step) const {
  if (anneal_steps_ == 0) return 0.0;
  return sigma0_ * std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(anneal_steps_));
}

Tensor InstanceNoiseSchedule::sample(std::int64_t step, nn::Shape shape, nn::Rng& rng) const {
  const double s = sigma(step);
  Tensor t(std::move(shape), 0.0f);
  for (auto& v : t.values()) v = static_cast<float>(std::clamp(s * rng.normal(), -clamp_, clamp_));
  return t;
}

// ---- losses ----

Tensor critic_target(const Tensor& rewards, const Tensor& terminals, const Tensor& q1_next, const Tensor& q2_next,
                     double gamma) {
  if (!rewards.same_shape(terminals) || !rewards.same_shape(q1_next) || !rewards.same_shape(q2_next)) {
    throw DimensionError("critic_target: inputs must share a shape");
  }
  Tensor out = rewards;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double next = std::min(q1_next.data()[i], q2_next.data()[i]);
    out.data()[i] = static_cast<float>(rewards.data()[i] + (1.0 - terminals.data()[i]) * gamma * next);
  }
  return out;
}

Tensor policy_weight(const Tensor& d_policy, const Tensor& d_real) {
  if (!d_policy.same_shape(d_real)) throw DimensionError("policy_weight: inputs must share a shape");
  Tensor out = d_policy;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const float p = d_policy.data()[i], r = d_real.data()[i];
    // Floored so a saturated discriminator (p == 0) still gives a positive weight.
    out.data()[i] = p >= r ? 1.0f : std::max(p / r, std::numeric_limits<float>::min());
  }
  return out;
}

Var policy_loss(Var q, Var d_logit, const Tensor& weight, double w) {
  nn::Tape& tape = *q.tape();
  Var value = nn::scale(tape.constant(weight) * q, static_cast<float>(1.0 / w));
  return -nn::mean(value + nn::log_sigmoid(d_logit));
}

Var generator_loss(Var d_logit) { return nn::bce_with_logits(d_logit, 1.0f); }

Var discriminator_loss(Var real_logit, const std::vector<Var>& fake_logits) {
  Var loss = nn::scale(nn::mse(nn::sigmoid(real_logit), 1.0f), 0.5f);
  for (const Var& f : fake_logits) loss = loss + nn::scale(nn::mse(nn::sigmoid(f), 0.0f), 0.5f);
  return loss;
}

// ---- updates ----

Optimizers Optimizers::create(AgentNetworks& nets, double lr) {
  const nn::AdamOptions o{.learning_rate = lr};
  return {nn::Adam(nets.qf1.parameters(), o), nn::Adam(nets.qf2.parameters(), o), nn::Adam(nets.policy.parameters(), o),
          nn::Adam(nets.aux_generator.parameters(), o), nn::Adam(nets.discriminator.parameters(), o)};
}

CriticStats critic_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt, const AgentConfig& cfg,
                          nn::Rng& rng) {
  const Tensor next_actions = policy_sample_action(nets.policy, batch.next_observations, rng);
  const Tensor next_in = hcat(batch.next_observations, next_actions);
  const Tensor target = critic_target(batch.rewards, batch.terminals, nets.target_qf1.predict(next_in),
                                      nets.target_qf2.predict(next_in), cfg.gamma);
  const Tensor in = hcat(batch.observations, batch.actions);
  auto fit = [&](nn::Mlp& q, nn::Adam& adam) {
    nn::Tape tape;
    Var loss = nn::mse(q.forward(tape, tape.constant(in)), tape.constant(target));
    tape.backward(loss);
    auto params = q.parameters();
    adam.step(params);
    return static_cast<double>(loss.value().item());
  };
  CriticStats s;
  s.q1_loss = fit(nets.qf1, opt.qf1);
  s.q2_loss = fit(nets.qf2, opt.qf2);
  nn::soft_update(nets.target_qf1, nets.qf1, cfg.tau);
  nn::soft_update(nets.target_qf2, nets.qf2, cfg.tau);
  return s;
}

PolicyStats policy_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt, const AgentConfig& cfg,
                          nn::Rng& rng) {
  nn::Tape tape;
  Var obs = tape.constant(batch.observations);
  const GaussianHead head = split_policy_output(nets.policy.forward(tape, obs));
  Var action = tanh_gaussian_sample(head, rng.normal_tensor({batch.size(), nets.act_dim}));
  Var state_action = nn::concat_cols(obs, action);
  Var q = nets.qf1.forward(tape, state_action);
  Var logit = nets.discriminator.forward(tape, state_action);

  Tensor weight({batch.size(), 1}, 1.0f);
  if (cfg.ablations.use_q_weight) {
    Tensor d_policy = logit.value();
    for (auto& v : d_policy.values()) v = 1.0f / (1.0f + std::exp(-v));
    weight = policy_weight(d_policy, discriminator_probability(nets.discriminator, batch.observations, batch.actions));
  }
  Var loss = policy_loss(q, logit, weight, cfg.w);
  tape.backward(loss);
  auto params = nets.policy.parameters();
  opt.policy.step(params);
  return {loss.value().item(), tensor_mean(weight)};
}

double aux_generator_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt, const AgentConfig&,
                            nn::Rng& rng) {
  nn::Tape tape;
  Var obs = tape.constant(batch.observations);
  Var z = tape.constant(rng.normal_tensor({batch.size(), nets.noise_dim}));
  Var action = nn::tanh(nets.aux_generator.forward(tape, nn::concat_cols(obs, z)));
  Var loss = generator_loss(nets.discriminator.forward(tape, nn::concat_cols(obs, action)));
  tape.backward(loss);
  auto params = nets.aux_generator.parameters();
  opt.aux_generator.step(params);
  return loss.value().item();
}

DiscriminatorStats discriminator_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt,
                                        const AgentConfig& cfg, const InstanceNoiseSchedule& noise,
                                        std::int64_t sigma_step, nn::Rng& rng) {
  const nn::Shape shape{batch.size(), nets.act_dim};
  std::vector<Tensor> fakes;
  fakes.push_back(policy_sample_action(nets.policy, batch.observations, rng));
  if (cfg.ablations.use_aux_generator) {
    fakes.push_back(aux_sample_action(nets.aux_generator, batch.observations, nets.noise_dim, rng));
  }
  const Tensor real = add_tensors(batch.actions, noise.sample(sigma_step, shape, rng));

  nn::Tape tape;
  Var real_logit = nets.discriminator.forward(tape, tape.constant(hcat(batch.observations, real)));
  std::vector<Var> fake_logits;
  for (const Tensor& f : fakes) {
    const Tensor noisy = add_tensors(f, noise.sample(sigma_step, shape, rng));
    fake_logits.push_back(nets.discriminator.forward(tape, tape.constant(hcat(batch.observations, noisy))));
  }
  Var loss = discriminator_loss(real_logit, fake_logits);
  tape.backward(loss);
  auto params = nets.discriminator.parameters();
  opt.discriminator.step(params);

  auto mean_prob = [](const Tensor& logits) {
    double s = 0.0;
    for (float v : logits.values()) s += 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
    return s / static_cast<double>(logits.numel());
  };
  DiscriminatorStats st;
  st.loss = loss.value().item();
  st.mean_d_real = mean_prob(real_logit.value());
  for (const Var& f : fake_logits) st.mean_d_fake += mean_prob(f.value()) / static_cast<double>(fake_logits.size());
  return st;
}

double bc_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt) {
  nn::Tape tape;
  const GaussianHead head = split_policy_output(nets.policy.forward(tape, tape.constant(batch.observations)));
  Var loss = -nn::mean(tanh_gaussian_log_prob_of(head, batch.actions));
  tape.backward(loss);
  auto params = nets.policy.parameters();
  opt.policy.step(params);
  return loss.value().item();
}

// ---- evaluation ----

EvalResult evaluate_controller(const Controller& controller, envs::Environment& env, int episodes,
                               std::uint64_t seed) {
  if (episodes < 1) throw ContractError("evaluation needs at least one episode");
  EvalResult r;
  r.episodes = episodes;
  double total_return = 0.0;
  int successes = 0;
  for (int k = 0; k < episodes; ++k) {
    nn::Rng rng(nn::mix_seed(seed, static_cast<std::uint64_t>(k)));
    envs::Observation obs = env.reset(rng);
    while (true) {
      const envs::EnvStep step = env.step(controller(obs));
      total_return += step.reward;
      obs = step.observation;
      if (step.done) {
        successes += step.success ? 1 : 0;
        break;
      }
    }
  }
  r.mean_return = total_return / episodes;
  r.success_rate = static_cast<double>(successes) / episodes;
  return r;
}

EvalResult evaluate_policy(const nn::Mlp& policy, envs::Environment& env, int episodes, std::uint64_t seed) {
  if (policy.in_dim() != env.obs_dim() || policy.out_dim() != 2 * env.act_dim()) {
    throw ContractError("policy dimensions (" + std::to_string(policy.in_dim()) + " -> " +
                        std::to_string(policy.out_dim()) + ") do not match environment " + env.name());
  }
  const std::size_t od = env.obs_dim();
  return evaluate_controller(
      [&](const envs::Observation& obs) {
        Tensor in({1, od}, std::vector<float>(obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(od)));
        const Tensor a = policy_mean_action(policy, in);
        return envs::Action{a.data()[0], a.data()[1]};
      },
      env, episodes, seed);
}

// ---- training ----

std::string metrics_csv_header() {
  return "step,q1_loss,q2_loss,policy_loss,aux_loss,disc_loss,mean_weight,mean_D_real,mean_D_fake,eval_return,"
         "eval_success\n";
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = metrics_csv_header();
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.9g", v);
    out += buf;
  };
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    for (double v : {r.q1_loss, r.q2_loss, r.policy_loss, r.aux_loss, r.disc_loss, r.mean_weight, r.mean_d_real,
                     r.mean_d_fake, r.eval_return, r.eval_success}) {
      num(v);
    }
    out += '\n';
  }
  return out;
}

void save_agent(const std::filesystem::path& dir, const AgentNetworks& nets, const AgentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  cfg.resolved(nets.act_dim).save(dir / "config.json");
  for (const auto& [name, net] : nets.named()) {
    if (cfg.algorithm == Algorithm::BehaviorCloning && name != "policy") continue;
    const auto params = net->parameters();
    nn::save_checkpoint(dir / (name + ".nnc"), params);
  }
}

LoadedPolicy load_policy(const std::filesystem::path& dir) {
  LoadedPolicy out;
  out.config = AgentConfig::load(dir / "config.json");
  const auto tensors = nn::load_checkpoint(dir / "policy.nnc");
  if (tensors.size() != 2 * (out.config.policy_hidden.size() + 1)) {
    throw FormatError("policy.nnc holds " + std::to_string(tensors.size()) +
                      " tensors, which does not match config.json policy_hidden");
  }
  const std::size_t obs_dim = tensors.front().value.cols();
  const std::size_t out_dim = tensors[tensors.size() - 2].value.rows();
  nn::Rng unused(0);
  out.policy = nn::Mlp("policy", sizes(obs_dim, out.config.policy_hidden, out_dim), nn::Activation::Relu, unused);
  auto params = out.policy.parameters();
  nn::load_parameters(dir / "policy.nnc", params);
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

struct RunningStats {
  double q1 = 0, q2 = 0, policy = 0, aux = 0, disc = 0, weight = 0, d_real = 0, d_fake = 0;
  int n = 0, n_disc = 0;

  MetricsRow row(std::int64_t step) const {
    MetricsRow r;
    r.step = step;
    const double k = std::max(n, 1), kd = std::max(n_disc, 1);
    r.q1_loss = q1 / k;
    r.q2_loss = q2 / k;
    r.policy_loss = policy / k;
    r.aux_loss = aux / k;
    r.mean_weight = weight / k;
    r.disc_loss = disc / kd;
    r.mean_d_real = d_real / kd;
    r.mean_d_fake = d_fake / kd;
    return r;
  }
};

}  // namespace

TrainResult train(const envs::OfflineDataset& ds, const AgentConfig& cfg_in, std::uint64_t seed,
                  const TrainOptions& options) {
  cfg_in.validate();
  if (ds.size() == 0) throw ContractError("train: dataset is empty");
  ds.validate();
  const AgentConfig cfg = cfg_in.resolved(ds.act_dim);
  const std::string env_name = options.env_name.empty() ? ds.metadata.env : options.env_name;
  auto env = envs::make_env(env_name);
  if (env->obs_dim() != ds.obs_dim || env->act_dim() != ds.act_dim) {
    throw ContractError("dataset dimensions do not match environment " + env_name);
  }

  nn::Rng init_rng(nn::mix_seed(seed, 0));
  nn::Rng rng(nn::mix_seed(seed, 1));
  const std::uint64_t eval_seed = nn::mix_seed(seed, 2);

  TrainResult result;
  result.config = cfg;
  result.nets = AgentNetworks::create(cfg, ds.obs_dim, ds.act_dim, init_rng);
  AgentNetworks& nets = result.nets;
  Optimizers opt = Optimizers::create(nets, cfg.lr);
  const InstanceNoiseSchedule noise(cfg.instance_noise.sigma0, cfg.instance_noise.clamp, cfg.anneal_steps());
  const bool bc = cfg.algorithm == Algorithm::BehaviorCloning;

  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    cfg.save(*options.out_dir / "config.json");
  }
  auto persist = [&] {
    if (!options.out_dir) return;
    save_agent(*options.out_dir, nets, cfg);
    write_text(*options.out_dir / "metrics.csv", metrics_csv(result.rows));
  };

  RunningStats acc;
  try {
    for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
      const Batch batch = sample_batch(ds, cfg.batch_size, rng);
      if (bc) {
        acc.policy += bc_update(batch, nets, opt);
        acc.weight += 1.0;
      } else {
        const CriticStats c = critic_update(batch, nets, opt, cfg, rng);
        const PolicyStats p = policy_update(batch, nets, opt, cfg, rng);
        acc.q1 += c.q1_loss;
        acc.q2 += c.q2_loss;
        acc.policy += p.loss;
        acc.weight += p.mean_weight;
        if (cfg.ablations.use_aux_generator) acc.aux += aux_generator_update(batch, nets, opt, cfg, rng);
        for (int k = 0; k < cfg.disc_steps_per_gen_step; ++k) {
          const DiscriminatorStats d = discriminator_update(batch, nets, opt, cfg, noise, step - 1, rng);
          acc.disc += d.loss;
          acc.d_real += d.mean_d_real;
          acc.d_fake += d.mean_d_fake;
          ++acc.n_disc;
        }
      }
      ++acc.n;
      if (step % cfg.eval_interval == 0 || step == cfg.total_steps) {
        MetricsRow row = acc.row(step);
        const EvalResult ev = evaluate_policy(nets.policy, *env, cfg.eval_episodes, eval_seed);
        row.eval_return = ev.mean_return;
        row.eval_success = ev.success_rate;
        result.rows.push_back(row);
        acc = {};
        persist();
        if (options.on_row) options.on_row(row);
      }
    }
    if (cfg.total_steps == 0) persist();
  } catch (const NumericError& e) {
    result.aborted = true;
    result.error = e.what();
  }
  return result;
}

}  // namespace dasco::agent
