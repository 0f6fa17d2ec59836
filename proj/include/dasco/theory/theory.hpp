#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dasco/nn/random.hpp"

// Exact discrete-sample-space analysis of generators trained against an
// optimal discriminator with a secondary objective f (minimized):
//   single generator: min_g 2 JSD(p_data || g) + E_g[f]
//   dual generator:   min_g E_g[f]  s.t.  0 <= g <= 2 p_data, sum g = 1
// All quantities are f64.
namespace dasco::theory {

/// Points with p_data below this are outside the data support.
inline constexpr double kSupportThreshold = 1e-12;

struct DiscreteProblem {
  std::vector<double> p_data;
  std::vector<double> f;  // minimized

  std::size_t size() const { return p_data.size(); }
  bool in_support(std::size_t i) const { return p_data[i] >= kSupportThreshold; }
  /// Throws ContractError unless p_data is a distribution (sum within 1e-9)
  /// and f is finite with matching length.
  void validate() const;

  /// Builds the minimization problem for an objective that should be maximized.
  static DiscreteProblem maximizing(std::vector<double> p_data, std::vector<double> f);
};

struct Theorem1Solution {
  std::vector<double> p_g;
  double nu = 0.0;
  double objective_value = 0.0;  // 2 JSD(p_data || p_g) + E_{p_g}[f]
  int iterations = 0;
};

struct DualSolution {
  std::vector<double> p_g;
  std::vector<double> p_aux;     // 2 p_data - p_g
  double objective_value = 0.0;  // E_{p_g}[f]
};

struct KktReport {
  std::vector<double> stationarity_residuals;  // one per point with p_g > 0
  std::vector<double> lambda;                  // per point; 0 where p_g > 0
  double max_violation = 0.0;
};

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);
double total_variation(std::span<const double> p, std::span<const double> q);
double expectation(std::span<const double> p, std::span<const double> f);

/// Jensen-Shannon divergence with natural log and 0 log 0 = 0; lies in [0, ln 2].
double jsd(std::span<const double> p, std::span<const double> q);

/// 2 JSD(p_data || g) + E_g[f].
double theorem1_objective(const DiscreteProblem& prob, std::span<const double> g);

/// Unnormalized closed-form generator for multiplier nu:
/// p_data * e^{-f-nu} / (2 - e^{-f-nu}), zero off support.
std::vector<double> theorem1_generator(const DiscreteProblem& prob, double nu);
/// Infimum of admissible multipliers: max over the support of (-f) - ln 2.
double theorem1_nu_infimum(const DiscreteProblem& prob);

/// Closed-form single-generator optimum, nu found by bisection on the
/// normalization constraint.
Theorem1Solution solve_theorem1(const DiscreteProblem& prob);

struct MirrorDescentOptions {
  int restarts = 20;
  int iterations = 10000;
  double step = 0.05;
  std::uint64_t seed = 0;
};

/// Exponentiated-gradient minimization of theorem1_objective over the simplex;
/// returns the best iterate across restarts. Independent of the closed form.
std::vector<double> oracle_theorem1(const DiscreteProblem& prob, const MirrorDescentOptions& options = {});

/// Greedy in-support optimum: fill points in ascending f up to 2 p_data until
/// the mass reaches 1.
DualSolution solve_theorem2_greedy(const DiscreteProblem& prob);

/// Vertex enumeration of {0 <= p <= 2 p_data, sum p = 1}; refuses n > 12.
std::vector<double> oracle_theorem2_lp(const DiscreteProblem& prob);

KktReport kkt_check(const DiscreteProblem& prob, const Theorem1Solution& sol);

/// Dirichlet(1) p_data and f ~ U[-2, 2].
DiscreteProblem random_problem(nn::Rng& rng, std::size_t n);

struct Example1dReport {
  DiscreteProblem problem;    // minimization form
  std::vector<double> f_max;  // objective as given by the caller
  bool maximize = true;
  Theorem1Solution single;
  DualSolution dual;
  double single_expected_f = 0.0;
  double dual_expected_f = 0.0;
};

/// Solves both generator settings for a user objective; `maximize` negates f internally.
Example1dReport solve_report(std::vector<double> p_data, std::vector<double> f, bool maximize);
/// Two actions with p_data = (0.5, 0.5) and f = (1.3, 0.7) maximized.
Example1dReport example_1d();
std::string example_1d_json(const Example1dReport& report);

struct InstanceCheck {
  std::size_t index = 0;
  std::size_t n = 0;
  double tv_theorem1 = 0.0;
  double max_kkt_residual = 0.0;
  double min_lambda = 0.0;
  double greedy_objective = 0.0;
  double lp_objective = 0.0;
  double objective_gap = 0.0;
  bool dual_invariants = true;
  bool pass = true;
};

struct CheckTolerances {
  double tv = 1e-3;
  double kkt = 1e-6;
  double lambda = -1e-9;
  double lp_gap = 1e-9;
};

/// Runs every solver/oracle pair on random instances with n in [2, max_n].
/// `maximize` negates the sampled f before solving.
std::vector<InstanceCheck> check_instances(std::size_t instances, std::uint64_t seed, std::size_t max_n,
                                           const MirrorDescentOptions& oracle = {}, const CheckTolerances& tol = {},
                                           bool maximize = false);
std::string check_csv(const std::vector<InstanceCheck>& rows);

}  // namespace dasco::theory
