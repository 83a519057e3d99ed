#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "relcox/event_stream.hpp"
#include "relcox/random.hpp"

namespace relcox {

// log e_l(w) for l = 0..L, with w_j = exp(log_w[j]). Entries are -inf when
// e_l is zero (l > n).
std::vector<double> log_elementary_symmetric(std::span<const double> log_w, std::size_t L);

// e_L of the weights together with the mean and covariance of sum_{j in S} x_j
// when S is a size-L subset drawn with probability proportional to prod w_j.
struct SubsetMoments {
  double log_e = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// x: one row per item. Throws ConfigError if L > rows or L == 0.
SubsetMoments subset_moments(const Eigen::MatrixXd& x, std::span<const double> log_w, std::size_t L);

// P(j in S) under the same law; sums to L.
Eigen::VectorXd inclusion_probabilities(std::span<const double> log_w, std::size_t L);

// Size-L subset with P(S) proportional to prod_{j in S} w_j. Uses a sequential
// draw over suffix polynomials, or direct enumeration when C(n, L) <= 1e4.
ReceiverSet sample_conditional_poisson(std::span<const ActorId> items, std::span<const double> log_w,
                                       std::size_t L, Philox4x32& rng);

// Successive sampling: draw without replacement, each step proportional to w.
// Implemented with exponential keys E_j / w_j, keeping the L smallest.
ReceiverSet sample_successive(std::span<const ActorId> items, std::span<const double> log_w, std::size_t L,
                              Philox4x32& rng);

double log_binomial(std::size_t n, std::size_t k);

}  // namespace relcox
