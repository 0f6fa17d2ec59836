#include "dasco/theory/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "dasco/error.hpp"
#include "json.hpp"

namespace dasco::theory {

namespace {

constexpr double kLn2 = std::numbers::ln2;

void require_same_length(std::span<const double> p, std::span<const double> q, const char* what) {
  if (p.size() != q.size()) throw ContractError(std::string(what) + ": length mismatch");
}

void require_distribution(std::span<const double> p, const char* what) {
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError(std::string(what) + ": negative or non-finite probability");
  }
  if (std::abs(compensated_sum(p) - 1.0) > 1e-9) throw ContractError(std::string(what) + ": probabilities must sum to 1");
}

// x * log(x / y) with 0 log 0 = 0.
double kl_term(double x, double y) { return x > 0.0 ? x * std::log(x / y) : 0.0; }

std::vector<double> dirichlet_ones(nn::Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = -std::log(1.0 - rng.uniform());
  const double total = compensated_sum(out);
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace

void DiscreteProblem::validate() const {
  if (p_data.empty()) throw ContractError("DiscreteProblem: empty sample space");
  if (f.size() != p_data.size()) throw ContractError("DiscreteProblem: f and p_data differ in length");
  for (double v : f) {
    if (!std::isfinite(v)) throw ContractError("DiscreteProblem: f must be finite");
  }
  require_distribution(p_data, "DiscreteProblem.p_data");
}

DiscreteProblem DiscreteProblem::maximizing(std::vector<double> p_data, std::vector<double> f) {
  for (auto& v : f) v = -v;
  return DiscreteProblem{std::move(p_data), std::move(f)};
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0, carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "total_variation");
  std::vector<double> diff(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) diff[i] = std::abs(p[i] - q[i]);
  return 0.5 * compensated_sum(diff);
}

double expectation(std::span<const double> p, std::span<const double> f) {
  require_same_length(p, f, "expectation");
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) terms[i] = p[i] * f[i];
  return compensated_sum(terms);
}

double jsd(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "jsd");
  require_distribution(p, "jsd");
  require_distribution(q, "jsd");
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    terms[i] = 0.5 * kl_term(p[i], m) + 0.5 * kl_term(q[i], m);
  }
  return std::clamp(compensated_sum(terms), 0.0, kLn2);
}

double theorem1_objective(const DiscreteProblem& prob, std::span<const double> g) {
  return 2.0 * jsd(prob.p_data, g) + expectation(g, prob.f);
}

double theorem1_nu_infimum(const DiscreteProblem& prob) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (prob.in_support(i)) best = std::max(best, -prob.f[i]);
  }
  return best - kLn2;
}

std::vector<double> theorem1_generator(const DiscreteProblem& prob, double nu) {
  std::vector<double> g(prob.size(), 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!prob.in_support(i)) continue;
    const double x = -prob.f[i] - nu;
    // 2 - e^x computed as -2 expm1(x - ln 2) to keep precision near the pole.
    const double denom = -2.0 * std::expm1(x - kLn2);
    g[i] = denom > 0.0 ? prob.p_data[i] * std::exp(x) / denom : std::numeric_limits<double>::infinity();
  }
  return g;
}

Theorem1Solution solve_theorem1(const DiscreteProblem& prob) {
  prob.validate();
  auto mass = [&](double nu) { return compensated_sum(theorem1_generator(prob, nu)); };
  const double lo_bound = theorem1_nu_infimum(prob);
  if (!std::isfinite(lo_bound)) throw NumericError("theorem 1: multiplier bracket is not finite");

  double lo = lo_bound;
  double width = 1.0;
  double hi = lo + width;
  for (int i = 0; mass(hi) > 1.0; ++i) {
    if (i > 2000) throw NumericError("theorem 1: failed to bracket the multiplier");
    width *= 2.0;
    hi = lo + width;
  }

  Theorem1Solution sol;
  double nu = hi;
  for (sol.iterations = 1; sol.iterations <= 200; ++sol.iterations) {
    nu = lo + 0.5 * (hi - lo);
    const double m = mass(nu);
    if (!std::isfinite(m) && nu == lo) throw NumericError("theorem 1: bisection collapsed onto the pole");
    if (std::abs(m - 1.0) < 1e-10) break;
    (m > 1.0 ? lo : hi) = nu;
  }
  sol.nu = nu;
  sol.p_g = theorem1_generator(prob, nu);
  const double total = compensated_sum(sol.p_g);
  if (!std::isfinite(total) || total <= 0.0) throw NumericError("theorem 1: degenerate normalization");
  for (auto& v : sol.p_g) v /= total;
  sol.objective_value = theorem1_objective(prob, sol.p_g);
  return sol;
}

std::vector<double> oracle_theorem1(const DiscreteProblem& prob, const MirrorDescentOptions& options) {
  prob.validate();
  const std::size_t n = prob.size();
  nn::Rng rng(options.seed);
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> log_g(n), g(n);
  for (int restart = 0; restart < options.restarts; ++restart) {
    auto start = dirichlet_ones(rng, n);
    for (std::size_t i = 0; i < n; ++i) log_g[i] = std::log(start[i]);
    for (int it = 0; it < options.iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = std::exp(log_g[i]);
        const double grad = kLn2 + log_g[i] - std::log(prob.p_data[i] + gi) + prob.f[i];
        log_g[i] -= options.step * grad;
      }
      const double shift = *std::max_element(log_g.begin(), log_g.end());
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) z += std::exp(log_g[i] - shift);
      const double log_z = shift + std::log(z);
      for (auto& v : log_g) v -= log_z;
    }
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(log_g[i]);
    const double total = compensated_sum(g);
    for (auto& v : g) v /= total;
    const double value = theorem1_objective(prob, g);
    if (value < best_value) {
      best_value = value;
      best = g;
    }
  }
  return best;
}

DualSolution solve_theorem2_greedy(const DiscreteProblem& prob) {
  prob.validate();
  const std::size_t n = prob.size();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (prob.in_support(i)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prob.f[a] < prob.f[b]; });

  DualSolution sol;
  sol.p_g.assign(n, 0.0);
  double assigned = 0.0;
  for (std::size_t i : order) {
    const double cap = 2.0 * prob.p_data[i];
    if (assigned + cap < 1.0) {
      sol.p_g[i] = cap;
      assigned += cap;
    } else {
      sol.p_g[i] = 1.0 - assigned;  // zero when the running sum already hit 1
      assigned = 1.0;
    }
  }
  sol.p_aux.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.p_aux[i] = 2.0 * prob.p_data[i] - sol.p_g[i];
  sol.objective_value = expectation(sol.p_g, prob.f);
  return sol;
}

std::vector<double> oracle_theorem2_lp(const DiscreteProblem& prob) {
  prob.validate();
  const std::size_t n = prob.size();
  if (n > 12) throw ContractError("oracle_theorem2_lp: n > 12 would enumerate too many vertices");
  std::vector<double> cap(n);
  for (std::size_t i = 0; i < n; ++i) cap[i] = 2.0 * prob.p_data[i];

  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> p(n);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    // Saturated coordinates sit at their cap; at most one other coordinate is free.
    for (std::size_t free = 0; free <= n; ++free) {
      if (free < n && (mask >> free) & 1u) continue;
      double saturated = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = (mask >> i) & 1u ? cap[i] : 0.0;
        if ((mask >> i) & 1u) saturated += cap[i];
      }
      const double rest = 1.0 - saturated;
      if (free == n) {
        if (std::abs(rest) > 1e-12) continue;
      } else {
        if (rest < -1e-15 || rest > cap[free] + 1e-15) continue;
        p[free] = std::clamp(rest, 0.0, cap[free]);
      }
      const double value = expectation(p, prob.f);
      if (value < best_value) {
        best_value = value;
        best = p;
      }
    }
  }
  return best;
}

KktReport kkt_check(const DiscreteProblem& prob, const Theorem1Solution& sol) {
  const std::size_t n = prob.size();
  KktReport report;
  report.lambda.assign(n, 0.0);
  double violation = std::abs(compensated_sum(sol.p_g) - 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = sol.p_g[i];
    violation = std::max(violation, -g);
    if (g > 0.0) {
      const double r = std::log(2.0 * g / (prob.p_data[i] + g)) + prob.f[i] + sol.nu;
      report.stationarity_residuals.push_back(r);
      violation = std::max(violation, std::abs(r));
    } else {
      // 2g / (p + g) -> 2 as g -> 0 off support, and -> 0 on support.
      const double ratio_log = prob.in_support(i) ? -std::numeric_limits<double>::infinity() : kLn2;
      report.lambda[i] = ratio_log + prob.f[i] + sol.nu;
      violation = std::max(violation, -report.lambda[i]);
    }
    violation = std::max(violation, std::abs(report.lambda[i] * g));
  }
  report.max_violation = violation;
  return report;
}

DiscreteProblem random_problem(nn::Rng& rng, std::size_t n) {
  DiscreteProblem prob;
  prob.p_data = dirichlet_ones(rng, n);
  prob.f.resize(n);
  for (auto& v : prob.f) v = rng.uniform(-2.0, 2.0);
  return prob;
}

Example1dReport solve_report(std::vector<double> p_data, std::vector<double> f, bool maximize) {
  Example1dReport report;
  report.f_max = f;
  report.maximize = maximize;
  report.problem = maximize ? DiscreteProblem::maximizing(std::move(p_data), std::move(f))
                            : DiscreteProblem{std::move(p_data), std::move(f)};
  report.problem.validate();
  report.single = solve_theorem1(report.problem);
  report.dual = solve_theorem2_greedy(report.problem);
  report.single_expected_f = expectation(report.single.p_g, report.f_max);
  report.dual_expected_f = expectation(report.dual.p_g, report.f_max);
  return report;
}

Example1dReport example_1d() { return solve_report({0.5, 0.5}, {1.3, 0.7}, true); }

std::string example_1d_json(const Example1dReport& report) {
  nlohmann::ordered_json out;
  out["p_data"] = report.problem.p_data;
  out["f"] = report.f_max;
  out["objective"] = report.maximize ? "maximize" : "minimize";
  std::vector<double> mixture(report.dual.p_g.size());
  for (std::size_t i = 0; i < mixture.size(); ++i) mixture[i] = 0.5 * (report.dual.p_g[i] + report.dual.p_aux[i]);
  out["single"] = {{"p_g", report.single.p_g}, {"nu", report.single.nu}, {"expected_f", report.single_expected_f}};
  out["dual"] = {{"p_g", report.dual.p_g},
                 {"p_aux", report.dual.p_aux},
                 {"mixture", mixture},
                 {"expected_f", report.dual_expected_f}};
  return out.dump(2);
}

std::vector<InstanceCheck> check_instances(std::size_t instances, std::uint64_t seed, std::size_t max_n,
                                           const MirrorDescentOptions& oracle, const CheckTolerances& tol,
                                           bool maximize) {
  if (max_n < 2 || max_n > 12) throw ContractError("theory check: max-n must lie in [2, 12]");
  nn::Rng rng(seed);
  std::vector<InstanceCheck> rows;
  for (std::size_t k = 0; k < instances; ++k) {
    InstanceCheck row;
    row.index = k;
    row.n = 2 + rng.index(max_n - 1);
    auto prob = random_problem(rng, row.n);
    if (maximize)
      for (double& v : prob.f) v = -v;

    const auto t1 = solve_theorem1(prob);
    auto md = oracle;
    md.seed = nn::mix_seed(seed, k);
    row.tv_theorem1 = total_variation(t1.p_g, oracle_theorem1(prob, md));
    const auto kkt = kkt_check(prob, t1);
    for (double r : kkt.stationarity_residuals) row.max_kkt_residual = std::max(row.max_kkt_residual, std::abs(r));
    row.min_lambda = *std::min_element(kkt.lambda.begin(), kkt.lambda.end());

    const auto dual = solve_theorem2_greedy(prob);
    row.greedy_objective = dual.objective_value;
    row.lp_objective = expectation(oracle_theorem2_lp(prob), prob.f);
    row.objective_gap = std::abs(row.greedy_objective - row.lp_objective);
    for (std::size_t i = 0; i < row.n; ++i) {
      const bool ok = dual.p_g[i] >= 0.0 && dual.p_g[i] <= 2.0 * prob.p_data[i] + 1e-15 && dual.p_aux[i] >= -1e-15 &&
                      std::abs(0.5 * (dual.p_g[i] + dual.p_aux[i]) - prob.p_data[i]) <= 1e-9;
      row.dual_invariants = row.dual_invariants && ok;
    }
    row.dual_invariants = row.dual_invariants && std::abs(compensated_sum(dual.p_g) - 1.0) <= 1e-9 &&
                          std::abs(compensated_sum(dual.p_aux) - 1.0) <= 1e-9;

    row.pass = row.tv_theorem1 < tol.tv && row.max_kkt_residual < tol.kkt && row.min_lambda >= tol.lambda &&
               row.objective_gap <= tol.lp_gap && row.dual_invariants;
    rows.push_back(row);
  }
  return rows;
}

std::string check_csv(const std::vector<InstanceCheck>& rows) {
  std::ostringstream out;
  out.precision(12);
  out << "instance,n,tv_theorem1,max_kkt_residual,min_lambda,greedy_objective,lp_objective,objective_gap,dual_invariants,pass\n";
  for (const auto& r : rows) {
    out << r.index << ',' << r.n << ',' << r.tv_theorem1 << ',' << r.max_kkt_residual << ',' << r.min_lambda << ','
        << r.greedy_objective << ',' << r.lp_objective << ',' << r.objective_gap << ',' << (r.dual_invariants ? 1 : 0)
        << ',' << (r.pass ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace dasco::theory
