#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "relcox/simulator.hpp"
#include "relcox/solver.hpp"

namespace relcox {

enum class Sampler { successive, conditional_poisson };
std::string to_string(Sampler s);
Sampler parse_sampler(std::string_view s);

struct BootstrapConfig {
  std::size_t replicates = 300;
  std::uint64_t seed = 0;
  Sampler sampler = Sampler::successive;
  int max_iters = 50;  // per replicate fit, warm-started at the original estimate
};

struct BootstrapReport {
  Eigen::VectorXd beta_tilde;
  Eigen::VectorXd se_tilde;
  Eigen::MatrixXd replicates;  // one row per replicate; NaN rows for skipped fits
  std::vector<std::uint8_t> ok;
  std::size_t skipped = 0;
  bool excessive_skips = false;  // more than 5% skipped
  Eigen::VectorXd bias_hat;
  Eigen::VectorXd beta_corrected;
  Eigen::VectorXd residual_mean;  // of (beta_r - beta_tilde) / se
  Eigen::VectorXd residual_sd;
};

// Receiver sets of one replicate: times and senders as observed, each J_m
// redrawn with |J_m| members from the risk set, weights from the original
// covariate history.
std::vector<ReceiverSet> draw_replicate(const CachedDesign& design, const Eigen::VectorXd& beta, Sampler sampler,
                                        Philox4x32& rng);

// Replicates first..first+count-1 in one pass; replicate r uses substream (seed, r).
std::vector<std::vector<ReceiverSet>> draw_replicates(const CachedDesign& design, const Eigen::VectorXd& beta,
                                                      Sampler sampler, std::uint64_t seed, std::size_t first,
                                                      std::size_t count);

Philox4x32 replicate_rng(std::uint64_t seed, std::size_t r);

// Fits every replicate with the approximate likelihood and estimates the bias
// of the original fit.
BootstrapReport bootstrap_bias(const Likelihood& likelihood, const FitResult& original, const BootstrapConfig& config,
                               const SolverConfig& solver = {});

struct CoverageReport {
  Eigen::VectorXd coverage;  // per coefficient
  Eigen::MatrixXd estimates;  // replicate x p
  Eigen::MatrixXd ses;
  std::vector<std::uint8_t> converged;
  std::size_t failures = 0;
};

// Simulates `replicates` streams from `sim` (substreams of its seed), fits
// each and records whether the Wald interval at `level` covers the truth.
CoverageReport coverage_study(const SimConfig& sim, std::size_t replicates, double level,
                              Variant variant = Variant::approx_multicast, const SolverConfig& solver = {},
                              double se_inflation = 1.0);

// Standard normal quantile.
double normal_quantile(double p);

}  // namespace relcox
