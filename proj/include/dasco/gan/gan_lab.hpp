#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dasco/nn/mlp.hpp"

namespace dasco::gan {

enum class ObjectiveKind { None, Linear, NegDistance, Step };

ObjectiveKind parse_objective(std::string_view name);
std::string objective_name(ObjectiveKind kind);

// Secondary objective f on sample space. Linear reads the first coordinate;
// NegDistance is -||x - target||; Step is 1 when x[0] > threshold.
struct Objective {
  ObjectiveKind kind = ObjectiveKind::Linear;
  std::vector<double> target;
  double threshold = 0.0;

  double value(const double* x, std::size_t dim) const;
  /// Differentiable per-row f for x [B, dim], shape [B, 1]. Step uses a
  /// sigmoid of width 0.05 around the threshold so that it has a gradient.
  nn::Var apply(nn::Var x) const;
};

// Gaussian mixture in 1 or 2 dimensions with a shared isotropic stddev.
struct StaticDataSpec {
  std::vector<std::vector<double>> mode_centers;
  std::vector<double> mode_weights;
  double mode_stddev = 0.1;
  std::size_t sample_count = 10000;
  Objective objective;

  std::size_t dim() const { return mode_centers.empty() ? 0 : mode_centers.front().size(); }
  /// ContractError unless weights sum to 1, stddev > 0, sample_count >= 1000
  /// and every center has the same dimension (1 or 2).
  void validate() const;
  /// Equal-weight 1D modes at `centers`.
  static StaticDataSpec bimodal_1d(std::vector<double> centers = {-1.0, 1.0}, double stddev = 0.1);
};

// Row-major sample array.
struct Samples {
  std::size_t dim = 1;
  std::vector<double> values;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  const double* row(std::size_t i) const { return values.data() + i * dim; }
};

Samples make_bimodal_data(const StaticDataSpec& spec, std::uint64_t seed);

struct SupportMetrics {
  double in_support_rate = 0.0;
  double primary_mean_f = 0.0;
  double data_mean_f = 0.0;
  double mixture_jsd_estimate = 0.0;
};

struct HistogramOptions {
  double support_k = 4.0;
  /// 100 bins on a line; in 2D a 10 x 10 grid.
  std::size_t bins = 100;
};

/// Bin edges span [min - 1, max + 1] of `data` on each axis; samples outside
/// the range fall into the edge bins. JSD is in nats.
double histogram_jsd(const Samples& a, const Samples& b, const Samples& data, std::size_t bins = 100);

/// `mixture` is compared to `data` by histogram JSD; `primary` supplies the
/// support rate and mean f.
SupportMetrics eval_support_metrics(const Samples& primary, const Samples& mixture, const Samples& data,
                                    const StaticDataSpec& spec, const HistogramOptions& options = {});

struct GanConfig {
  std::size_t noise_dim = 8;
  std::vector<std::size_t> generator_hidden{64, 64};
  std::vector<std::size_t> discriminator_hidden{64, 64};
  int steps = 20000;
  std::size_t batch_size = 256;
  int discriminator_steps = 5;
  // Adam with beta1 = 0.5; the discriminator learns faster than the generators.
  double generator_lr = 2e-4;
  double discriminator_lr = 1e-3;
  double f_weight = 1.0;
  /// +1 maximizes f, -1 minimizes it.
  double f_sign = 1.0;
  /// Gaussian noise on every discriminator input, decayed linearly to 0.
  /// Keeps D informative across gaps between modes. anneal_steps 0 = steps / 2.
  double instance_noise = 0.5;
  int instance_noise_anneal_steps = 0;
  int metrics_every = 500;
  std::size_t eval_samples = 10000;

  void validate() const;
};

struct GanMetricsRow {
  int step = 0;
  SupportMetrics metrics;
  double discriminator_loss = 0.0;
  double primary_loss = 0.0;
  double aux_loss = 0.0;
};

struct GanRunResult {
  nn::Mlp primary;
  nn::Mlp aux;
  nn::Mlp discriminator;
  bool use_aux = true;
  std::vector<GanMetricsRow> history;
  /// Set when training stopped on a non-finite value; `history` then ends at
  /// the last good evaluation.
  bool aborted = false;
  std::string error;

  const SupportMetrics& final_metrics() const { return history.back().metrics; }
};

/// Alternates `discriminator_steps` discriminator updates (real vs an equal
/// primary/auxiliary mixture, or primary only without the auxiliary) with one
/// update of each generator. The primary adds -f_sign * f_weight * E[f(G(z))]
/// to the non-saturating GAN loss; the auxiliary uses the GAN loss alone.
GanRunResult train_dual_gan(const StaticDataSpec& spec, const GanConfig& config, std::uint64_t seed, bool use_aux);

/// `count` generator outputs for fresh noise drawn from `seed`.
Samples sample_generator(const nn::Mlp& generator, std::size_t count, std::uint64_t seed);
/// Discriminator probabilities for each row of `x`.
std::vector<double> discriminator_probabilities(const nn::Mlp& discriminator, const Samples& x);

std::string gan_metrics_csv(const std::vector<GanMetricsRow>& rows);
/// One sample per line; 2D samples are written as "x y".
std::string samples_text(const Samples& samples);
/// Overlaid 1D histograms (first coordinate) of data, mixture and primary.
std::string histogram_svg(const Samples& data, const Samples& mixture, const Samples& primary, std::size_t bins = 100);

}  // namespace dasco::gan
