#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "relcox/design.hpp"

namespace relcox {

// How a multicast event spreads over receivers when forming N-hat.
//   duplication: |J_m| slots, each shared by the single-draw probabilities
//   multicast:   inclusion probabilities of the set-valued model
enum class ExpectedMode { duplication, multicast };
ExpectedMode parse_expected_mode(std::string_view s);

struct PairCount {
  ActorId sender;
  ActorId receiver;
  double observed = 0.0;
  double expected = 0.0;
};

struct PairCounts {
  std::vector<PairCount> pairs;  // every pair ever at risk or observed, sorted
  std::size_t pairs_at_risk = 0;
};

PairCounts expected_counts(const CachedDesign& design, const Eigen::VectorXd& beta,
                           ExpectedMode mode = ExpectedMode::duplication);

// Largest per-sender |sum_j N-hat - sum_j N|.
double conservation_error(const PairCounts& counts);

struct Residual {
  ActorId sender;
  ActorId receiver;
  double observed = 0.0;
  double expected = 0.0;
  double martingale = 0.0;
  double pearson = 0.0;  // +inf when expected == 0 < observed
};

struct ResidualReport {
  std::vector<Residual> rows;  // pairs with N = N-hat = 0 omitted
  double x2 = 0.0;             // sum of squared finite Pearson residuals
  double df_approx = 0.0;      // pairs ever at risk minus p
  std::size_t anomalies = 0;   // N > 0 with N-hat == 0
};

ResidualReport residuals(const PairCounts& counts, std::size_t parameters);

struct ResidualSummary {
  std::vector<double> probs;
  std::vector<double> quantiles;  // of |pearson|, type-7 interpolation
  double max_abs = 0.0;
  double x2 = 0.0;
  double df_approx = 0.0;
  std::size_t pairs = 0;
  std::size_t anomalies = 0;
};

ResidualSummary residual_summary(const ResidualReport& report, const std::vector<double>& probs = {0.5, 0.9, 0.95, 0.99});

// sender,receiver,observed,expected,martingale,pearson
void write_residuals_csv(std::ostream& out, const ResidualReport& report, const IdMap& ids);

}  // namespace relcox
