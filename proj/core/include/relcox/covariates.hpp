#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "relcox/event_stream.hpp"

namespace relcox {

// Recency bins. Bin k (1-based, k = 1..K) holds messages sent at s with
// t - Delta_k <= s < t - Delta_{k-1}, i.e. elapsed age in (Delta_{k-1}, Delta_k],
// with Delta_0 = 0 and Delta_K = infinity. Messages at s == t fall in no bin.
class IntervalScheme {
 public:
  IntervalScheme() = default;  // K = 1: a single unbounded bin
  // Finite boundaries Delta_1 < ... < Delta_{K-1}, all > 0.
  explicit IntervalScheme(std::vector<double> boundaries);

  // 7.5 minutes * 4^k for k = 1..6, K = 7.
  static IntervalScheme geometric(double base_seconds, double ratio, std::size_t finite_boundaries);
  static IntervalScheme enron_default() { return geometric(450.0, 4.0, 6); }

  std::size_t bins() const { return boundaries_.size() + 1; }
  const std::vector<double>& boundaries() const { return boundaries_; }
  // Delta_k for k = 0..K; Delta_K is +inf.
  double delta(std::size_t k) const;

  // 1-based bin of a message sent at `sent` as seen at time `now`; 0 if sent >= now.
  std::size_t bin_of(double sent, double now) const;

 private:
  std::vector<double> boundaries_;
};

enum class EffectForm { indicator, binned };
enum class DyadicEffect { send, receive };
enum class TriadicEffect { two_send, two_receive, sibling, cosibling };

std::string to_string(EffectForm f);
std::string to_string(DyadicEffect e);
std::string to_string(TriadicEffect e);
DyadicEffect parse_dyadic(std::string_view s);
TriadicEffect parse_triadic(std::string_view s);
EffectForm parse_form(std::string_view s);

// X(i) * Y(j); sender_trait empty means X == 1.
struct StaticTerm {
  std::optional<std::string> sender_trait;
  std::string receiver_trait;

  static StaticTerm parse(std::string_view text);  // "X*Y", "1*Y" or "Y"
  std::string name() const;
  bool operator==(const StaticTerm&) const = default;
};

struct DyadicTerm {
  DyadicEffect effect;
  EffectForm form;
  bool operator==(const DyadicTerm&) const = default;
};

struct TriadicTerm {
  TriadicEffect effect;
  EffectForm form;
  bool operator==(const TriadicTerm&) const = default;
};

// Declarative covariate layout. Coefficients are ordered: static terms, then
// dyadic terms, then triadic terms, each in the order given. An indicator
// term occupies one slot, a binned dyadic term K slots and a binned triadic
// term K*K slots (row-major in (k, l)).
class CovariateSpec {
 public:
  CovariateSpec() = default;
  CovariateSpec(std::vector<StaticTerm> static_terms, std::vector<DyadicTerm> dyadic,
                std::vector<TriadicTerm> triadic, IntervalScheme scheme = {});

  const std::vector<StaticTerm>& static_terms() const { return static_terms_; }
  const std::vector<DyadicTerm>& dyadic_terms() const { return dyadic_; }
  const std::vector<TriadicTerm>& triadic_terms() const { return triadic_; }
  const IntervalScheme& scheme() const { return scheme_; }

  std::size_t dimension() const { return static_dimension() + dynamic_dimension(); }
  std::size_t static_dimension() const { return static_terms_.size(); }
  std::size_t dynamic_dimension() const { return dynamic_dim_; }
  bool has_triadic() const { return !triadic_.empty(); }
  bool has_dynamic() const { return dynamic_dim_ > 0; }

  // Offset of each dyadic/triadic term within the dynamic block.
  std::size_t dyadic_offset(std::size_t term) const { return dyadic_offsets_[term]; }
  std::size_t triadic_offset(std::size_t term) const { return triadic_offsets_[term]; }

  // One name per coefficient, e.g. "L*J", "send", "send[3]", "2-send[1,2]".
  std::vector<std::string> coefficient_names() const;
  // One group label per coefficient: "static", "send", "receive", "2-send", ...
  std::vector<std::string> coefficient_groups() const;

  // Enron-style preset: all 90 receiver and sender-receiver interactions of
  // the nine traits, plus indicator and binned forms of every effect.
  static CovariateSpec enron_preset(const std::vector<std::string>& traits, bool triadic = true,
                                    IntervalScheme scheme = IntervalScheme::enron_default());

 private:
  std::vector<StaticTerm> static_terms_;
  std::vector<DyadicTerm> dyadic_;
  std::vector<TriadicTerm> triadic_;
  IntervalScheme scheme_;
  std::vector<std::size_t> dyadic_offsets_;
  std::vector<std::size_t> triadic_offsets_;
  std::size_t dynamic_dim_ = 0;
};

// x_0(i, j): products of binary traits. Pure accessor.
class StaticDesign {
 public:
  StaticDesign() = default;
  StaticDesign(const CovariateSpec& spec, const ActorTraits* traits);  // traits may be null if no static terms

  std::size_t dimension() const { return dim_; }
  std::size_t actor_count() const { return actor_count_; }
  void fill(ActorId i, ActorId j, std::span<double> out) const;
  Eigen::VectorXd row(ActorId i, ActorId j) const;

  // Senders with equal keys share X_0(i); the key is the sender's values of
  // the trait columns used on the sender side.
  std::vector<std::uint8_t> sender_key(ActorId i) const;

 private:
  std::size_t actor_count_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::uint8_t> sender_vals_;    // actor x term, 1 for "1*Y" terms
  std::vector<std::uint8_t> receiver_vals_;  // actor x term
  std::vector<std::vector<std::uint8_t>> keys_;
};

// Binned dyadic counts send^{(k)}, receive^{(k)}, k = 1..K (index k-1).
struct DyadicCounts {
  std::vector<double> send;
  std::vector<double> receive;
};

// K x K count matrices, entry (k-1, l-1).
struct TriadicCounts {
  Eigen::MatrixXd two_send;
  Eigen::MatrixXd two_receive;
  Eigen::MatrixXd sibling;
  Eigen::MatrixXd cosibling;
};

// Nonzero dynamic covariate rows Delta x_t(i, j) for one sender: one column
// per receiver listed, rows indexed by the dynamic block of the spec.
struct DynamicRows {
  std::vector<ActorId> receivers;
  Eigen::MatrixXd values;  // dynamic_dimension x receivers.size()

  std::optional<std::size_t> find(ActorId j) const;
};

class DynamicState;

// Per-thread scratch for covariate queries; holds the bin memo.
class CovariateWorkspace {
 public:
  CovariateWorkspace() = default;

 private:
  friend class DynamicState;
  std::vector<std::uint64_t> stamp_;
  std::vector<double> bins_;
  std::uint64_t epoch_ = 0;
  // Bins depend only on records strictly before the query time, so the memo
  // stays valid across queries at the same time on the same state.
  const DynamicState* owner_ = nullptr;
  double time_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::int64_t> column_of_;  // actor -> column in DynamicRows, -1 if none
  std::vector<ActorId> touched_;
  Eigen::MatrixXd totals_;  // 4 x columns, all-history triadic totals
};

// History-dependent covariate state: per directed pair, the sorted send times.
class DynamicState {
 public:
  DynamicState() = default;
  DynamicState(std::size_t actor_count, const CovariateSpec& spec);

  std::size_t actor_count() const { return actor_count_; }
  double current_time() const { return current_time_; }
  std::size_t record_count() const { return records_; }

  // Appends sender -> receiver records at event.time. Throws on time regression.
  void advance(const Event& event);

  // Send times of a -> b messages (sorted), empty if none.
  std::span<const double> history(ActorId a, ActorId b) const;

  DyadicCounts dyadic_counts(double t, ActorId i, ActorId j) const;
  TriadicCounts triadic_counts(double t, ActorId i, ActorId j) const;

  // Receivers j with possibly nonzero Delta x_t(i, j); a superset.
  std::vector<ActorId> active_receivers(ActorId i) const;

  // All nonzero dynamic rows for sender i at time t (strict past).
  void dynamic_rows(double t, ActorId i, CovariateWorkspace& ws, DynamicRows& out) const;

  // Dynamic block of x_t(i, j).
  Eigen::VectorXd dynamic_vector(double t, ActorId i, ActorId j) const;

  // Earliest time > t at which some stored record changes bin (inf if none).
  // Only binned terms change at crossings; t must not decrease between calls.
  double next_bin_crossing(double t);

 private:
  struct Adjacent {
    ActorId actor;
    std::uint32_t pair;
  };

  std::int64_t pair_index(ActorId a, ActorId b) const;
  void bin_counts(std::uint32_t pair, double t, std::span<double> out) const;
  std::span<const double> memo_bins(std::uint32_t pair, double t, CovariateWorkspace& ws) const;

  std::size_t actor_count_ = 0;
  CovariateSpec spec_;
  IntervalScheme scheme_;
  double current_time_ = -std::numeric_limits<double>::infinity();
  std::size_t records_ = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> pairs_;
  std::vector<std::vector<double>> times_;
  std::vector<std::vector<Adjacent>> out_;
  std::vector<std::vector<Adjacent>> in_;
  bool track_crossings_ = false;
  std::priority_queue<double, std::vector<double>, std::greater<>> crossings_;
};

// Full x_t(i, j): static slots followed by the dynamic block.
Eigen::VectorXd covariate_vector(const DynamicState& state, const StaticDesign& design, double t, ActorId i,
                                 ActorId j);

}  // namespace relcox
