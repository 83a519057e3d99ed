#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relcox/likelihood.hpp"

namespace relcox {

struct SolverConfig {
  double grad_tol = 1e-8;  // on the score sup-norm, multiplied by max(1, n_events)
  int max_iters = 100;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 60;
  double ridge = 0.0;  // initial ridge; escalates from ridge_min to ridge_max on singularity
  double ridge_min = 1e-8;
  double ridge_max = 1e-2;
  std::optional<Eigen::VectorXd> start;
  std::vector<std::uint8_t> active;  // empty: all coefficients free; others pinned at 0
  unsigned threads = 0;
  std::span<const ReceiverSet> receivers = {};  // replicate receiver sets
};

struct FitResult {
  Variant variant = Variant::approx_multicast;
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd information;
  Eigen::VectorXd score;
  double logpl = 0.0;
  std::size_t n_events = 0;
  std::size_t selections = 0;  // sum |J_m|
  std::size_t free_parameters = 0;
  int iterations = 0;
  bool converged = false;
  double ridge_used = 0.0;
  double residual_df = 0.0;
  double overdispersion = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> unidentifiable;
  std::vector<double> trace;  // logpl after each accepted step, starting value first

  double deviance() const { return -2.0 * logpl; }
};

// Damped Newton ascent on the log partial likelihood.
FitResult fit(const Likelihood& likelihood, Variant variant, const SolverConfig& config = {});

// sqrt(diag(cov)), optionally multiplied by sqrt(overdispersion).
Eigen::VectorXd standard_errors(const FitResult& fit, bool adjust_overdispersion = false);

struct WaldTest {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

std::vector<WaldTest> wald_tests(const FitResult& fit, double alpha = 1e-3, bool adjust_overdispersion = false);

struct DevianceRow {
  std::string term;
  std::size_t df = 0;  // 0 on the null row
  double deviance = 0.0;
  double resid_df = 0.0;
  double resid_dev = 0.0;
};

struct DevianceTable {
  std::vector<DevianceRow> rows;
  std::vector<FitResult> fits;  // one per non-null row
  std::string df_convention = "null df = sum over events of |J_m| (one slot per receiver)";
};

// Nested fits adding one group per row. Each entry names one or more
// coefficient groups joined by '+', e.g. "static", "send", "2-send+2-receive".
// The entries must cover every coefficient group exactly once.
DevianceTable deviance_table(const Likelihood& likelihood, const std::vector<std::string>& groups,
                             const std::vector<std::string>& coefficient_groups, Variant variant,
                             const SolverConfig& config = {});

// Two-sided normal tail, 2 * (1 - Phi(|z|)).
double normal_two_sided_p(double z);

}  // namespace relcox
