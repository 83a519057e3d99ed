#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "relcox/covariates.hpp"
#include "relcox/event_stream.hpp"
#include "relcox/random.hpp"

namespace relcox {

// Sender baseline rates in force from `start` until the next segment.
struct BaselineSegment {
  double start = 0.0;
  std::vector<double> rates;
};

struct SimConfig {
  std::size_t actor_count = 0;
  std::optional<double> horizon;              // stop at this time
  std::optional<std::size_t> target_events;   // or after this many events
  double start_time = 0.0;
  std::vector<double> baseline;               // lambda(i); constant unless `schedule` is set
  std::vector<BaselineSegment> schedule;      // piecewise-constant alternative, sorted by start
  // q(L) for L = 1..L_max; the L-receiver baseline is lambda(i) * q(L).
  std::vector<double> size_probs = {1.0};
  // Divide the L-receiver rate by C(|risk|, L), so that at beta = 0 the size
  // distribution is exactly q.
  bool normalize_by_subsets = false;
  Eigen::VectorXd beta;
  CovariateSpec spec;
  std::optional<ActorTraits> traits;
  RiskSetPolicy policy;
  std::uint64_t seed = 0;
  std::uint64_t stream = streams::kSimulation;
};

// Exact simulation of the multicast intensity model. Rates are constant
// between epochs (event times, baseline changes and bin crossings), so each
// waiting time is exponential; a proposal past the next epoch is discarded.
EventStream simulate(const SimConfig& config);

// Draws a size-L subset proportional to the product of exp(beta' x_j); `x`
// has one row per candidate.
ReceiverSet sample_receiver_set(std::span<const ActorId> candidates, std::span<const double> log_weights,
                                std::size_t L, Philox4x32& rng);

// Random binary traits with the given inclusion probability, reproducible from the seed.
ActorTraits random_traits(const std::vector<std::string>& names, std::size_t actor_count, double prob,
                          std::uint64_t seed);

}  // namespace relcox
