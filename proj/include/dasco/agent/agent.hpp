#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dasco/agent/config.hpp"
#include "dasco/envs/dataset.hpp"
#include "dasco/envs/environment.hpp"
#include "dasco/nn/adam.hpp"
#include "dasco/nn/mlp.hpp"

namespace dasco::agent {

inline constexpr float kLogStdMin = -5.0f;
inline constexpr float kLogStdMax = 2.0f;

// ---- tanh-Gaussian policy head ----

struct GaussianHead {
  nn::Var mean;     // [B, A]
  nn::Var log_std;  // [B, A], clamped to [kLogStdMin, kLogStdMax]
};

/// Splits a policy output [B, 2A] into mean and clamped log-std.
GaussianHead split_policy_output(nn::Var out);
/// Reparameterized sample tanh(mean + exp(log_std) * eps).
nn::Var tanh_gaussian_sample(const GaussianHead& head, const nn::Tensor& eps);
/// Per-row log-density [B, 1] of the sample drawn with `eps`, including the
/// tanh change-of-variables term log(1 - a^2) in its overflow-free form.
nn::Var tanh_gaussian_log_prob(const GaussianHead& head, const nn::Tensor& eps);
/// Per-row log-density [B, 1] of given actions in (-1, 1); actions are
/// clipped to +-(1 - 1e-6) before the inverse tanh.
nn::Var tanh_gaussian_log_prob_of(const GaussianHead& head, const nn::Tensor& actions);

// ---- networks ----

struct AgentNetworks {
  nn::Mlp qf1, qf2, target_qf1, target_qf2;
  nn::Mlp policy;         // obs -> [mean, log_std]
  nn::Mlp aux_generator;  // obs || z -> pre-tanh action
  nn::Mlp discriminator;  // obs || action -> logit
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t noise_dim = 0;

  /// Target critics start as exact copies of the online critics.
  static AgentNetworks create(const AgentConfig& cfg, std::size_t obs_dim, std::size_t act_dim, nn::Rng& rng);
  /// (file stem, network) pairs in a fixed order.
  std::vector<std::pair<std::string, nn::Mlp*>> named();
  std::vector<std::pair<std::string, const nn::Mlp*>> named() const;
};

/// Deterministic action tanh(mean) for each row of `obs`.
nn::Tensor policy_mean_action(const nn::Mlp& policy, const nn::Tensor& obs);
/// Stochastic tanh-Gaussian actions, tape-free.
nn::Tensor policy_sample_action(const nn::Mlp& policy, const nn::Tensor& obs, nn::Rng& rng);
/// tanh(G_aux(obs || z)) for z ~ N(0, I), tape-free.
nn::Tensor aux_sample_action(const nn::Mlp& aux, const nn::Tensor& obs, std::size_t noise_dim, nn::Rng& rng);
/// Sigmoid of the discriminator logit, one value per row.
nn::Tensor discriminator_probability(const nn::Mlp& disc, const nn::Tensor& obs, const nn::Tensor& actions);

// ---- batches ----

struct Batch {
  nn::Tensor observations;       // [B, obs]
  nn::Tensor actions;            // [B, act]
  nn::Tensor rewards;            // [B, 1]
  nn::Tensor terminals;          // [B, 1], 0 or 1
  nn::Tensor next_observations;  // [B, obs]
  std::size_t size() const { return rewards.rows(); }
};

/// Uniform sampling with replacement.
Batch sample_batch(const envs::OfflineDataset& ds, std::size_t batch_size, nn::Rng& rng);
/// Rows `indices` of the dataset, in order.
Batch gather_batch(const envs::OfflineDataset& ds, const std::vector<std::size_t>& indices);

// ---- instance noise ----

class InstanceNoiseSchedule {
 public:
  InstanceNoiseSchedule(double sigma0, double clamp, std::int64_t anneal_steps);
  /// sigma0 * max(0, 1 - step / anneal_steps).
  double sigma(std::int64_t step) const;
  /// Gaussian noise with the current sigma, each component clamped to +-clamp.
  nn::Tensor sample(std::int64_t step, nn::Shape shape, nn::Rng& rng) const;

 private:
  double sigma0_, clamp_;
  std::int64_t anneal_steps_;
};

// ---- losses (pure, for testing) ----

/// r + (1 - terminal) * gamma * min(q1_next, q2_next), all [B, 1].
nn::Tensor critic_target(const nn::Tensor& rewards, const nn::Tensor& terminals, const nn::Tensor& q1_next,
                         const nn::Tensor& q2_next, double gamma);
/// min(d_policy, d_real) / d_real per row; exactly 1 on ties.
nn::Tensor policy_weight(const nn::Tensor& d_policy, const nn::Tensor& d_real);
/// -mean(weight * q / w + log_sigmoid(d_logit)); `weight` is a constant.
nn::Var policy_loss(nn::Var q, nn::Var d_logit, const nn::Tensor& weight, double w);
/// Non-saturating generator loss: BCE of the logits against the real label.
nn::Var generator_loss(nn::Var d_logit);
/// 0.5 * MSE(sigmoid(real), 1) plus 0.5 * MSE(sigmoid(fake), 0) for each fake source.
nn::Var discriminator_loss(nn::Var real_logit, const std::vector<nn::Var>& fake_logits);

// ---- update rules ----

struct Optimizers {
  nn::Adam qf1, qf2, policy, aux_generator, discriminator;
  static Optimizers create(AgentNetworks& nets, double lr);
};

struct CriticStats {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
};
struct PolicyStats {
  double loss = 0.0;
  double mean_weight = 1.0;
};
struct DiscriminatorStats {
  double loss = 0.0;
  double mean_d_real = 0.0;
  double mean_d_fake = 0.0;
};

CriticStats critic_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt, const AgentConfig& cfg,
                          nn::Rng& rng);
PolicyStats policy_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt, const AgentConfig& cfg,
                          nn::Rng& rng);
double aux_generator_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt, const AgentConfig& cfg,
                            nn::Rng& rng);
/// One discriminator step; `sigma_step` selects the instance-noise level.
DiscriminatorStats discriminator_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt,
                                        const AgentConfig& cfg, const InstanceNoiseSchedule& noise,
                                        std::int64_t sigma_step, nn::Rng& rng);
/// Behavior cloning step: maximizes the tanh-Gaussian log-likelihood of the
/// dataset actions. Returns the negative mean log-likelihood.
double bc_update(const Batch& batch, AgentNetworks& nets, Optimizers& opt);

// ---- evaluation ----

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  int episodes = 0;
};

using Controller = std::function<envs::Action(const envs::Observation&)>;

/// Rolls out `controller` for `episodes` episodes; episode k resets with
/// mix_seed(seed, k). The return is the undiscounted environment return.
EvalResult evaluate_controller(const Controller& controller, envs::Environment& env, int episodes, std::uint64_t seed);
/// Uses the tanh-squashed mean action; ContractError on a dimension mismatch.
EvalResult evaluate_policy(const nn::Mlp& policy, envs::Environment& env, int episodes = 20, std::uint64_t seed = 0);

// ---- training ----

struct MetricsRow {
  std::int64_t step = 0;
  double q1_loss = 0.0, q2_loss = 0.0, policy_loss = 0.0, aux_loss = 0.0, disc_loss = 0.0;
  double mean_weight = 0.0, mean_d_real = 0.0, mean_d_fake = 0.0;
  double eval_return = 0.0, eval_success = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct TrainOptions {
  /// Checkpoints and metrics.csv go here when set; rewritten at every evaluation.
  std::optional<std::filesystem::path> out_dir;
  /// Environment for periodic evaluation; defaults to the dataset's env.
  std::string env_name;
  std::function<void(const MetricsRow&)> on_row;
};

struct TrainResult {
  AgentNetworks nets;
  AgentConfig config;
  std::vector<MetricsRow> rows;
  bool aborted = false;
  std::string error;
};

/// Runs DASCO (or behavior cloning, per cfg.algorithm). Each step samples one
/// batch and applies the critic, policy, auxiliary and discriminator updates
/// in that order. Evaluation rows are produced every eval_interval steps and
/// at the final step. A NumericError stops training with the outputs of the
/// last evaluation left on disk.
TrainResult train(const envs::OfflineDataset& ds, const AgentConfig& cfg, std::uint64_t seed,
                  const TrainOptions& options = {});

/// Writes one NNC1 file per network plus config.json.
void save_agent(const std::filesystem::path& dir, const AgentNetworks& nets, const AgentConfig& cfg);

struct LoadedPolicy {
  AgentConfig config;
  nn::Mlp policy;
};
/// Reads config.json and policy.nnc from a checkpoint directory; network
/// dimensions come from the stored tensor shapes.
LoadedPolicy load_policy(const std::filesystem::path& dir);

}  // namespace dasco::agent
