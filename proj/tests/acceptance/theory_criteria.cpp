#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "acceptance.hpp"
#include "dasco/nn/random.hpp"
#include "dasco/theory/theory.hpp"

namespace acceptance {
namespace {

namespace th = dasco::theory;

// 2 JSD(p || g) + <g, f>, computed directly from the definition.
double single_objective(const std::vector<double>& p, const std::vector<double>& g, const std::vector<double>& f) {
  double value = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + g[i]);
    if (p[i] > 0) value += p[i] * std::log(p[i] / m);
    if (g[i] > 0) value += g[i] * std::log(g[i] / m);
    value += g[i] * f[i];
  }
  return value;
}

// Exponentiated-gradient descent on the simplex with a decaying step.
// The gradient of 2 JSD(p || g) in g_i is ln(2 g_i / (p_i + g_i)).
std::vector<double> mirror_descent(const std::vector<double>& p, const std::vector<double>& f, int iters) {
  std::vector<double> g = p;
  for (int t = 0; t < iters; ++t) {
    const double eta = 1.0 / std::sqrt(1.0 + 0.01 * t);
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] *= std::exp(-eta * (std::log(2.0 * g[i] / (p[i] + g[i])) + f[i]));
      total += g[i];
    }
    for (auto& v : g) v /= total;
  }
  return g;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

// Stationarity: ln(2 g / (p + g)) + f must be the same constant on every
// point with positive mass. Returns the largest deviation from the mean.
double stationarity_residual(const std::vector<double>& p, const std::vector<double>& g, const std::vector<double>& f) {
  std::vector<double> s;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (g[i] > 0) s.push_back(std::log(2.0 * g[i] / (p[i] + g[i])) + f[i]);
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double worst = 0.0;
  for (double v : s) worst = std::max(worst, std::abs(v - mean));
  return worst;
}

// min <g, f> over {0 <= g <= 2p, sum g = 1} by enumerating vertices: every
// coordinate but one sits at a bound, the free one closes the sum.
double lp_vertex_minimum(const std::vector<double>& p, const std::vector<double>& f) {
  const std::size_t n = p.size();
  double best = INFINITY;
  for (std::size_t free = 0; free < n; ++free) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << (n - 1)); ++mask) {
      std::vector<double> g(n);
      double used = 0.0;
      std::size_t bit = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == free) continue;
        g[i] = (mask >> bit++) & 1 ? 2.0 * p[i] : 0.0;
        used += g[i];
      }
      g[free] = 1.0 - used;
      if (g[free] < -1e-12 || g[free] > 2.0 * p[free] + 1e-12) continue;
      double value = 0.0;
      for (std::size_t i = 0; i < n; ++i) value += g[i] * f[i];
      best = std::min(best, value);
    }
  }
  return best;
}

}  // namespace

Outcome two_action_example(const Context&) {
  Stopwatch clock;
  const auto r = th::example_1d();
  const double secs = clock.seconds();

  // Independent check of the single-generator optimum: golden-section search
  // over g = (t, 1 - t) of 2 JSD - E[f] for the maximized f = (1.3, 0.7).
  const std::vector<double> p{0.5, 0.5}, neg_f{-1.3, -0.7};
  double lo = 1e-12, hi = 1.0 - 1e-12;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int k = 0; k < 200; ++k) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (single_objective(p, {a, 1 - a}, neg_f) < single_objective(p, {b, 1 - b}, neg_f)) hi = b;
    else lo = a;
  }
  const double t = 0.5 * (lo + hi);
  const double oracle_single = 1.3 * t + 0.7 * (1 - t);

  const bool single_ok = std::abs(r.single_expected_f - 1.15) <= 0.01;
  const bool oracle_ok = std::abs(r.single_expected_f - oracle_single) < 1e-6;
  const bool dual_ok = std::abs(r.dual_expected_f - 1.3) <= 1e-9 && r.dual.p_g[0] == 1.0 && r.dual.p_g[1] == 0.0;
  return {single_ok && oracle_ok && dual_ok && secs < 1.0,
          cat("single E[f]=", r.single_expected_f, " (oracle ", oracle_single, "), dual E[f]=", r.dual_expected_f,
              " p_g=(", r.dual.p_g[0], ",", r.dual.p_g[1], "), ", secs * 1e3, " ms")};
}

Outcome single_generator_optimum(const Context&) {
  Stopwatch clock;
  dasco::nn::Rng rng(2024);
  double worst_tv = 0.0, worst_kkt = 0.0;
  std::size_t ok = 0;
  const std::size_t instances = 50;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 2 + rng.index(7);  // 2..8
    const auto prob = th::random_problem(rng, n);
    const auto sol = th::solve_theorem1(prob);
    const auto oracle = mirror_descent(prob.p_data, prob.f, 20000);
    const double tv = total_variation(sol.p_g, oracle);
    const double kkt = stationarity_residual(prob.p_data, sol.p_g, prob.f);
    worst_tv = std::max(worst_tv, tv);
    worst_kkt = std::max(worst_kkt, kkt);
    ok += (tv < 1e-3 && kkt < 1e-6) ? 1 : 0;
  }
  const double secs = clock.seconds();
  return {ok == instances && secs < 30.0,
          cat(ok, "/", instances, " instances, max TV ", worst_tv, ", max stationarity residual ", worst_kkt)};
}

Outcome dual_generator_greedy(const Context&) {
  Stopwatch clock;
  dasco::nn::Rng rng(77);
  double worst_gap = 0.0;
  std::size_t ok = 0;
  const std::size_t instances = 100;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 2 + rng.index(9);  // 2..10
    const auto prob = th::random_problem(rng, n);
    const auto greedy = th::solve_theorem2_greedy(prob);
    const double gap = std::abs(greedy.objective_value - lp_vertex_minimum(prob.p_data, prob.f));
    worst_gap = std::max(worst_gap, gap);
    ok += gap <= 1e-9 ? 1 : 0;
  }
  // Boundary case: after the two cheapest points are filled to 2 p the
  // running sum is exactly 1, so the last point gets nothing.
  const th::DiscreteProblem edge{{0.25, 0.25, 0.5}, {0.0, 1.0, 2.0}};
  const auto e = th::solve_theorem2_greedy(edge);
  const bool edge_ok = e.p_g == std::vector<double>{0.5, 0.5, 0.0} &&
                       e.p_aux == std::vector<double>{0.0, 0.0, 1.0} && e.objective_value == 0.5;
  const double secs = clock.seconds();
  return {ok == instances && edge_ok && secs < 10.0,
          cat(ok, "/", instances, " instances match vertex enumeration (max gap ", worst_gap, "), boundary case ",
              edge_ok ? "ok" : "wrong")};
}

}  // namespace acceptance
