#include "dasco/gan/gan_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dasco/error.hpp"
#include "dasco/nn/adam.hpp"
#include "dasco/nn/ops.hpp"
#include "dasco/theory/theory.hpp"

namespace dasco::gan {

using nn::Tensor;
using nn::Var;

ObjectiveKind parse_objective(std::string_view name) {
  if (name == "none") return ObjectiveKind::None;
  if (name == "linear") return ObjectiveKind::Linear;
  if (name == "neg-distance") return ObjectiveKind::NegDistance;
  if (name == "step") return ObjectiveKind::Step;
  throw ContractError("unknown objective '" + std::string(name) + "' (expected none, linear, neg-distance or step)");
}

std::string objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::None: return "none";
    case ObjectiveKind::Linear: return "linear";
    case ObjectiveKind::NegDistance: return "neg-distance";
    case ObjectiveKind::Step: return "step";
  }
  return "none";
}

double Objective::value(const double* x, std::size_t dim) const {
  switch (kind) {
    case ObjectiveKind::None: return 0.0;
    case ObjectiveKind::Linear: return x[0];
    case ObjectiveKind::NegDistance: {
      double sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double t = k < target.size() ? target[k] : 0.0;
        sq += (x[k] - t) * (x[k] - t);
      }
      return -std::sqrt(sq);
    }
    case ObjectiveKind::Step: return x[0] > threshold ? 1.0 : 0.0;
  }
  return 0.0;
}

Var Objective::apply(Var x) const {
  nn::Tape& tape = *x.tape();
  const std::size_t rows = x.value().rows();
  switch (kind) {
    case ObjectiveKind::None: return tape.constant(Tensor({rows, 1}, 0.0f));
    case ObjectiveKind::Linear: return nn::slice_cols(x, 0, 1);
    case ObjectiveKind::NegDistance: {
      Var sq = tape.constant(Tensor({rows, 1}, 1e-8f));
      for (std::size_t k = 0; k < x.value().cols(); ++k) {
        const float t = k < target.size() ? static_cast<float>(target[k]) : 0.0f;
        sq = sq + nn::square(nn::add_scalar(nn::slice_cols(x, k, 1), -t));
      }
      return -nn::exp(nn::scale(nn::log(sq), 0.5f));
    }
    case ObjectiveKind::Step:
      return nn::sigmoid(nn::scale(nn::add_scalar(nn::slice_cols(x, 0, 1), static_cast<float>(-threshold)), 20.0f));
  }
  return x;
}

void StaticDataSpec::validate() const {
  if (mode_centers.empty()) throw ContractError("data spec needs at least one mode");
  const std::size_t d = dim();
  if (d != 1 && d != 2) throw ContractError("data spec modes must be 1- or 2-dimensional");
  for (const auto& c : mode_centers) {
    if (c.size() != d) throw ContractError("data spec mode centers differ in dimension");
  }
  if (mode_weights.size() != mode_centers.size()) throw ContractError("data spec needs one weight per mode");
  double total = 0.0;
  for (double w : mode_weights) {
    if (!(w >= 0.0)) throw ContractError("data spec weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("data spec weights must sum to 1");
  if (!(mode_stddev > 0.0)) throw ContractError("data spec stddev must be positive");
  if (sample_count < 1000) throw ContractError("data spec sample_count must be at least 1000");
  if (objective.kind == ObjectiveKind::NegDistance && objective.target.size() != d) {
    throw ContractError("neg-distance objective needs a target of the data dimension");
  }
}

StaticDataSpec StaticDataSpec::bimodal_1d(std::vector<double> centers, double stddev) {
  StaticDataSpec spec;
  for (double c : centers) spec.mode_centers.push_back({c});
  spec.mode_weights.assign(centers.size(), 1.0 / static_cast<double>(centers.size()));
  spec.mode_stddev = stddev;
  return spec;
}

Samples make_bimodal_data(const StaticDataSpec& spec, std::uint64_t seed) {
  spec.validate();
  nn::Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(spec.mode_weights.begin(), spec.mode_weights.end());
  Samples out;
  out.dim = spec.dim();
  out.values.reserve(spec.sample_count * out.dim);
  for (std::size_t i = 0; i < spec.sample_count; ++i) {
    const auto& c = spec.mode_centers[pick(rng.engine())];
    for (std::size_t k = 0; k < out.dim; ++k) out.values.push_back(c[k] + spec.mode_stddev * rng.normal());
  }
  return out;
}

namespace {

struct Range {
  double lo, hi;
};

std::vector<double> histogram(const Samples& s, const std::vector<Range>& ranges, std::size_t per_axis) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < ranges.size(); ++k) total *= per_axis;
  std::vector<double> h(total, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      const double u = (s.row(i)[k] - ranges[k].lo) / (ranges[k].hi - ranges[k].lo);
      const double b = std::clamp(std::floor(u * static_cast<double>(per_axis)), 0.0, static_cast<double>(per_axis - 1));
      idx = idx * per_axis + static_cast<std::size_t>(b);
    }
    h[idx] += 1.0;
  }
  const double n = static_cast<double>(s.size());
  for (auto& v : h) v /= n;
  return h;
}

std::vector<Range> data_ranges(const Samples& data) {
  std::vector<Range> ranges(data.dim, Range{1e300, -1e300});
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data.dim; ++k) {
      ranges[k].lo = std::min(ranges[k].lo, data.row(i)[k]);
      ranges[k].hi = std::max(ranges[k].hi, data.row(i)[k]);
    }
  }
  for (auto& r : ranges) {
    r.lo -= 1.0;
    r.hi += 1.0;
  }
  return ranges;
}

std::size_t bins_per_axis(std::size_t bins, std::size_t dim) {
  if (dim == 1) return bins;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(bins)))));
}

double mean_f(const Samples& s, const Objective& f) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = f.value(s.row(i), s.dim);
  return theory::compensated_sum(v) / static_cast<double>(s.size());
}

Tensor to_tensor(const Samples& s) {
  std::vector<float> v(s.values.begin(), s.values.end());
  return Tensor({s.size(), s.dim}, std::move(v));
}

Samples from_tensor(const Tensor& t) {
  Samples s;
  s.dim = t.cols();
  s.values.assign(t.values().begin(), t.values().end());
  return s;
}

Samples concat(const Samples& a, const Samples& b) {
  Samples out = a;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  return out;
}

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double histogram_jsd(const Samples& a, const Samples& b, const Samples& data, std::size_t bins) {
  if (a.size() == 0 || b.size() == 0 || data.size() == 0) throw ContractError("histogram_jsd: empty sample set");
  if (a.dim != data.dim || b.dim != data.dim) throw DimensionError("histogram_jsd: sample dimensions differ");
  const auto ranges = data_ranges(data);
  const std::size_t per_axis = bins_per_axis(bins, data.dim);
  const auto ha = histogram(a, ranges, per_axis);
  const auto hb = histogram(b, ranges, per_axis);
  return std::max(0.0, theory::jsd(ha, hb));
}

SupportMetrics eval_support_metrics(const Samples& primary, const Samples& mixture, const Samples& data,
                                    const StaticDataSpec& spec, const HistogramOptions& options) {
  if (primary.size() == 0 || mixture.size() == 0 || data.size() == 0) {
    throw ContractError("eval_support_metrics: empty sample set");
  }
  if (primary.dim != spec.dim()) throw DimensionError("eval_support_metrics: primary samples have the wrong dimension");
  SupportMetrics m;
  const double radius = options.support_k * spec.mode_stddev;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < primary.size(); ++i) {
    for (const auto& c : spec.mode_centers) {
      double sq = 0.0;
      for (std::size_t k = 0; k < primary.dim; ++k) sq += (primary.row(i)[k] - c[k]) * (primary.row(i)[k] - c[k]);
      if (std::sqrt(sq) <= radius) {
        ++inside;
        break;
      }
    }
  }
  m.in_support_rate = static_cast<double>(inside) / static_cast<double>(primary.size());
  m.primary_mean_f = mean_f(primary, spec.objective);
  m.data_mean_f = mean_f(data, spec.objective);
  m.mixture_jsd_estimate = histogram_jsd(mixture, data, data, options.bins);
  return m;
}

void GanConfig::validate() const {
  if (noise_dim < 1) throw ContractError("gan config: noise_dim must be positive");
  if (steps < 1 || batch_size < 1 || discriminator_steps < 1) {
    throw ContractError("gan config: steps, batch_size and discriminator_steps must be positive");
  }
  if (metrics_every < 1 || eval_samples < 1) throw ContractError("gan config: metrics_every and eval_samples must be positive");
  if (!(generator_lr > 0.0) || !(discriminator_lr > 0.0)) throw ContractError("gan config: learning rates must be positive");
  if (!(f_weight >= 0.0)) throw ContractError("gan config: f_weight must be non-negative");
  if (f_sign != 1.0 && f_sign != -1.0) throw ContractError("gan config: f_sign must be +1 or -1");
  if (!(instance_noise >= 0.0) || instance_noise_anneal_steps < 0) {
    throw ContractError("gan config: instance_noise and its anneal_steps must be non-negative");
  }
}

Samples sample_generator(const nn::Mlp& generator, std::size_t count, std::uint64_t seed) {
  nn::Rng rng(seed);
  return from_tensor(generator.predict(rng.normal_tensor({count, generator.in_dim()})));
}

std::vector<double> discriminator_probabilities(const nn::Mlp& discriminator, const Samples& x) {
  const Tensor logits = discriminator.predict(to_tensor(x));
  std::vector<double> p(logits.numel());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.data()[i])));
  return p;
}

GanRunResult train_dual_gan(const StaticDataSpec& spec, const GanConfig& config, std::uint64_t seed, bool use_aux) {
  spec.validate();
  config.validate();
  const std::size_t dim = spec.dim();
  const Samples data = make_bimodal_data(spec, nn::mix_seed(seed, 0));

  nn::Rng init_rng(nn::mix_seed(seed, 1));
  GanRunResult result;
  result.use_aux = use_aux;
  result.primary = nn::Mlp("primary", layer_sizes(config.noise_dim, config.generator_hidden, dim), nn::Activation::Relu,
                           init_rng);
  result.aux =
      nn::Mlp("aux", layer_sizes(config.noise_dim, config.generator_hidden, dim), nn::Activation::Relu, init_rng);
  result.discriminator =
      nn::Mlp("discriminator", layer_sizes(dim, config.discriminator_hidden, 1), nn::Activation::Relu, init_rng);

  auto p_params = result.primary.parameters();
  auto a_params = result.aux.parameters();
  auto d_params = result.discriminator.parameters();
  nn::Adam p_opt(p_params, {.learning_rate = config.generator_lr, .beta1 = 0.5});
  nn::Adam a_opt(a_params, {.learning_rate = config.generator_lr, .beta1 = 0.5});
  nn::Adam d_opt(d_params, {.learning_rate = config.discriminator_lr, .beta1 = 0.5});

  nn::Rng rng(nn::mix_seed(seed, 2));
  const std::size_t B = config.batch_size;
  const Tensor all_data = to_tensor(data);
  auto real_batch = [&] {
    std::vector<float> v(B * dim);
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t j = rng.index(data.size());
      for (std::size_t k = 0; k < dim; ++k) v[i * dim + k] = all_data.data()[j * dim + k];
    }
    return Tensor({B, dim}, std::move(v));
  };
  auto noise = [&] { return rng.normal_tensor({B, config.noise_dim}); };
  const int anneal = config.instance_noise_anneal_steps > 0 ? config.instance_noise_anneal_steps
                                                             : std::max(1, config.steps / 2);
  auto sigma_at = [&](int step) {
    return config.instance_noise * std::max(0.0, 1.0 - static_cast<double>(step - 1) / anneal);
  };
  // Fresh N(0, sigma^2) per element; draws nothing once sigma hits 0.
  auto jitter = [&](double sigma) {
    Tensor t = rng.normal_tensor({B, dim});
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] *= static_cast<float>(sigma);
    return t;
  };
  auto blur = [&](Tensor x, double sigma) {
    if (sigma <= 0.0) return x;
    const Tensor n = jitter(sigma);
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] += n.data()[i];
    return x;
  };
  auto blur_var = [&](nn::Tape& tape, Var x, double sigma) {
    return sigma <= 0.0 ? x : x + tape.constant(jitter(sigma));
  };

  auto evaluate = [&](int step, double d_loss, double p_loss, double a_loss) {
    const Samples prim = sample_generator(result.primary, config.eval_samples, nn::mix_seed(seed, 3));
    const Samples mix =
        use_aux ? concat(prim, sample_generator(result.aux, config.eval_samples, nn::mix_seed(seed, 4))) : prim;
    result.history.push_back({step, eval_support_metrics(prim, mix, data, spec), d_loss, p_loss, a_loss});
  };

  double d_loss = 0.0, p_loss = 0.0, a_loss = 0.0;
  try {
    evaluate(0, d_loss, p_loss, a_loss);
    for (int step = 1; step <= config.steps; ++step) {
      const double sigma = sigma_at(step);
      for (int k = 0; k < config.discriminator_steps; ++k) {
        nn::Tape tape;
        const Tensor real = blur(real_batch(), sigma);
        const Tensor fake_p = blur(result.primary.predict(noise()), sigma);
        Var loss = nn::bce_with_logits(result.discriminator.forward(tape, tape.constant(real)), 1.0f);
        Var fake_loss = nn::bce_with_logits(result.discriminator.forward(tape, tape.constant(fake_p)), 0.0f);
        if (use_aux) {
          const Tensor fake_a = blur(result.aux.predict(noise()), sigma);
          Var aux_fake = nn::bce_with_logits(result.discriminator.forward(tape, tape.constant(fake_a)), 0.0f);
          fake_loss = nn::scale(fake_loss + aux_fake, 0.5f);
        }
        loss = loss + fake_loss;
        tape.backward(loss);
        d_opt.step(d_params);
        d_loss = loss.value().item();
      }
      {
        nn::Tape tape;
        Var x = result.primary.forward(tape, tape.constant(noise()));
        Var loss = nn::bce_with_logits(result.discriminator.forward(tape, blur_var(tape, x, sigma)), 1.0f);
        if (spec.objective.kind != ObjectiveKind::None && config.f_weight != 0.0) {
          loss = loss - nn::scale(nn::mean(spec.objective.apply(x)), static_cast<float>(config.f_sign * config.f_weight));
        }
        tape.backward(loss);
        p_opt.step(p_params);
        p_loss = loss.value().item();
      }
      if (use_aux) {
        nn::Tape tape;
        Var x = result.aux.forward(tape, tape.constant(noise()));
        Var loss = nn::bce_with_logits(result.discriminator.forward(tape, blur_var(tape, x, sigma)), 1.0f);
        tape.backward(loss);
        a_opt.step(a_params);
        a_loss = loss.value().item();
      }
      if (step % config.metrics_every == 0 || step == config.steps) evaluate(step, d_loss, p_loss, a_loss);
    }
  } catch (const NumericError& e) {
    result.aborted = true;
    result.error = e.what();
  }
  return result;
}

std::string gan_metrics_csv(const std::vector<GanMetricsRow>& rows) {
  std::string out =
      "step,in_support_rate,primary_mean_f,data_mean_f,mixture_jsd_estimate,discriminator_loss,primary_loss,aux_loss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + ',' + fmt(r.metrics.in_support_rate) + ',' + fmt(r.metrics.primary_mean_f) + ',' +
           fmt(r.metrics.data_mean_f) + ',' + fmt(r.metrics.mixture_jsd_estimate) + ',' + fmt(r.discriminator_loss) +
           ',' + fmt(r.primary_loss) + ',' + fmt(r.aux_loss) + '\n';
  }
  return out;
}

std::string samples_text(const Samples& samples) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t k = 0; k < samples.dim; ++k) {
      if (k) out += ' ';
      out += fmt(samples.row(i)[k]);
    }
    out += '\n';
  }
  return out;
}

std::string histogram_svg(const Samples& data, const Samples& mixture, const Samples& primary, std::size_t bins) {
  if (data.size() == 0) throw ContractError("histogram_svg: empty data");
  const auto range = data_ranges(data).front();
  auto first_axis = [&](const Samples& s) {
    Samples out;
    for (std::size_t i = 0; i < s.size(); ++i) out.values.push_back(s.row(i)[0]);
    return histogram(out, {range}, bins);
  };
  const auto hd = first_axis(data), hm = first_axis(mixture), hp = first_axis(primary);
  double peak = 1e-12;
  for (const auto* h : {&hd, &hm, &hp}) peak = std::max(peak, *std::max_element(h->begin(), h->end()));

  const double width = 800.0, height = 400.0, margin = 30.0;
  const double bw = (width - 2 * margin) / static_cast<double>(bins);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto bars = [&](const std::vector<double>& h, const char* colour, const char* label) {
    svg << "<g fill=\"" << colour << "\" fill-opacity=\"0.45\"><title>" << label << "</title>\n";
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double bh = (height - 2 * margin) * h[i] / peak;
      if (bh <= 0.0) continue;
      svg << "<rect x=\"" << fmt(margin + bw * static_cast<double>(i)) << "\" y=\"" << fmt(height - margin - bh)
          << "\" width=\"" << fmt(bw) << "\" height=\"" << fmt(bh) << "\"/>\n";
    }
    svg << "</g>\n";
  };
  bars(hd, "#555555", "data");
  bars(hm, "#1f77b4", "mixture");
  bars(hp, "#d62728", "primary");
  svg << "<text x=\"" << margin << "\" y=\"" << height - 8 << "\" font-size=\"12\">" << fmt(range.lo) << "</text>\n";
  svg << "<text x=\"" << width - margin - 40 << "\" y=\"" << height - 8 << "\" font-size=\"12\">" << fmt(range.hi)
      << "</text>\n";
  svg << "<text x=\"" << margin << "\" y=\"18\" font-size=\"12\">grey: data, blue: mixture, red: primary</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace dasco::gan
