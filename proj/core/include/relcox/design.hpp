#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "relcox/covariates.hpp"
#include "relcox/event_stream.hpp"

namespace relcox {

// Senders that share the static rows x_0(i, .) and the baseline receiver set.
struct SenderClass {
  std::vector<ActorId> receivers;  // baseline set J_0, sorted
  Eigen::MatrixXd x0;              // receivers.size() x p_static
  std::vector<std::int32_t> row;   // actor -> row in x0, -1 if not in J_0
};

// What one event contributes, relative to its sender class baseline.
//
// `touched` lists receivers of J_0 whose weight differs from the baseline
// weight: those with a nonzero dynamic row and those outside the current risk
// set. `dx` holds the dynamic rows, one column per touched receiver.
struct EventDesign {
  std::size_t index = 0;
  double time = 0.0;
  ActorId sender;
  ReceiverSet chosen;
  std::size_t risk_size = 0;
  std::vector<ActorId> touched;
  std::vector<std::uint8_t> at_risk;
  Eigen::SparseMatrix<double> dx;  // p_dynamic x touched.size()

  std::optional<std::size_t> touched_index(ActorId j) const;
};

// Shared, immutable description of the design: dimensions, sender classes.
struct DesignContext {
  std::size_t actor_count = 0;
  std::size_t static_dim = 0;
  std::size_t dynamic_dim = 0;
  std::vector<SenderClass> classes;
  std::vector<std::uint32_t> class_of;  // per actor
  std::vector<std::string> names;

  std::size_t dimension() const { return static_dim + dynamic_dim; }
  const SenderClass& sender_class(ActorId i) const { return classes[class_of[i.index]]; }
};

// Full covariate rows over the current risk set of one event.
struct RiskRows {
  std::vector<ActorId> receivers;  // the risk set, sorted
  Eigen::MatrixXd x;               // receivers.size() x p
};

RiskRows risk_rows(const DesignContext& ctx, const EventDesign& ev);

// x_t(i, j) for one receiver of an event; j must be in J_0(i).
Eigen::VectorXd event_covariate(const DesignContext& ctx, const EventDesign& ev, ActorId j);

// Replays the stream through the covariate state, one event at a time. Events
// at equal times see only strictly earlier events.
class DesignBuilder {
 public:
  DesignBuilder(const EventStream& stream, const CovariateSpec& spec, RiskSetPolicy policy = {});

  const EventStream& stream() const { return *stream_; }
  const CovariateSpec& spec() const { return spec_; }
  const RiskSetPolicy& policy() const { return policy_; }
  std::shared_ptr<const DesignContext> context() const { return ctx_; }
  const StaticDesign& static_design() const { return static_; }

  void replay(const std::function<void(const EventDesign&)>& visit) const;

 private:
  const EventStream* stream_;
  CovariateSpec spec_;
  RiskSetPolicy policy_;
  StaticDesign static_;
  std::shared_ptr<DesignContext> ctx_;
};

// Materialized design, grouped by sender for parallel evaluation.
class CachedDesign {
 public:
  CachedDesign() = default;
  explicit CachedDesign(const DesignBuilder& builder);

  const DesignContext& context() const { return *ctx_; }
  std::shared_ptr<const DesignContext> context_ptr() const { return ctx_; }
  const std::vector<EventDesign>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  const std::vector<std::vector<std::uint32_t>>& by_sender() const { return by_sender_; }
  std::size_t selection_count() const;

 private:
  std::shared_ptr<const DesignContext> ctx_;
  std::vector<EventDesign> events_;
  std::vector<std::vector<std::uint32_t>> by_sender_;
};

}  // namespace relcox
