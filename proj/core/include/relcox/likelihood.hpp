#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relcox/design.hpp"

namespace relcox {

enum class Variant { pairwise, exact_multicast, approx_multicast };
std::string to_string(Variant v);
Variant parse_variant(std::string_view s);  // "pairwise", "exact", "approx" (or the long names)

// exp(beta' x) inside the risk set, 0 outside.
double weight(const Eigen::VectorXd& beta, const Eigen::VectorXd& x, bool in_risk_set);

// Baseline quantities of one sender class at beta: weights over J_0 scaled by
// exp(-log_scale), their sum and the static moments.
struct ClassBaseline {
  double log_scale = 0.0;
  Eigen::VectorXd eta0;  // beta_static' x_0 per row of x0
  Eigen::VectorXd w0;    // exp(eta0 - log_scale)
  double w0_sum = 0.0;
  Eigen::VectorXd pi0;
  Eigen::VectorXd e0;  // p_static
  Eigen::MatrixXd v0;  // p_static x p_static
};

ClassBaseline class_baseline(const SenderClass& cls, const Eigen::VectorXd& beta_static);

// Sender state at one event time, expressed against the class baseline:
// W_t = W_0 + sum_j dw_j, gamma = W_0 / W_t, delta_pi = dw / W_t.
struct SenderSnapshot {
  ActorId sender;
  double time = 0.0;
  double log_w0 = 0.0;  // log W_0
  double log_wt = 0.0;  // log W_t
  double gamma = 1.0;
  std::vector<ActorId> receivers;  // touched receivers, sorted
  Eigen::VectorXd delta_pi;
  Eigen::VectorXd pi;  // gamma * pi_0 + delta_pi on the touched receivers

  // pi_t(j) for any receiver in J_0.
  double probability(const SenderClass& cls, const ClassBaseline& base, ActorId j) const;
};

SenderSnapshot sender_snapshot(const DesignContext& ctx, const ClassBaseline& base, const EventDesign& ev,
                               const Eigen::VectorXd& beta);

struct LikelihoodOptions {
  Variant variant = Variant::approx_multicast;
  int order = 2;          // 0: value, 1: + score, 2: + information
  unsigned threads = 0;   // 0: hardware concurrency (or RELCOX_THREADS)
  bool keep_terms = false;
  // Take the sparse update whenever it is numerically safe, even where the
  // dense sum would be cheaper.
  bool prefer_sparse = false;
  // Replacement receiver sets, one per event (bootstrap replicates).
  std::span<const ReceiverSet> receivers = {};
};

struct LikelihoodReport {
  double logpl = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
  std::vector<double> terms;       // per event, when requested
  std::vector<double> sender_logpl;  // per actor
  std::size_t events = 0;
  std::size_t sparse_events = 0;  // evaluated by the incremental update rather than densely
};

// Log partial likelihood with score and observed information, evaluated with
// the sparse baseline decomposition. Multicast events under the exact variant
// are evaluated over the full risk set through symmetric polynomials.
class Likelihood {
 public:
  explicit Likelihood(const CachedDesign& design) : design_(&design) {}

  const CachedDesign& design() const { return *design_; }
  std::size_t dimension() const { return design_->context().dimension(); }
  LikelihoodReport evaluate(const Eigen::VectorXd& beta, const LikelihoodOptions& options = {}) const;

 private:
  const CachedDesign* design_;
};

// Same result computed in one pass over a replay, without caching the design.
LikelihoodReport evaluate_streaming(const DesignBuilder& builder, const Eigen::VectorXd& beta,
                                    const LikelihoodOptions& options = {});

// G_n = sum_{m <= n} 1{|J_m| > 1} / |risk set|, one entry per event (G_0 omitted).
std::vector<double> growth_sequence(const EventStream& stream, const RiskSetPolicy& policy = {});

// Constants of the duplication error bound at beta:
//   gradient: K e^{4 K |beta|} sum |J|^2 (|J| - 1) / |risk|
//   hessian:  2 K^2 e^{4 K |beta|} sum |J|^3 (|J| - 1) / |risk|
// with K the largest covariate norm over all risk sets.
struct ApproximationBound {
  double covariate_norm = 0.0;
  double gradient = 0.0;
  double hessian = 0.0;
};
ApproximationBound approximation_bound(const CachedDesign& design, const Eigen::VectorXd& beta);

// event_index,sender,logterm
void write_terms_csv(std::ostream& out, const CachedDesign& design, const LikelihoodReport& report);

unsigned resolve_threads(unsigned requested);

}  // namespace relcox
