#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace relcox {

// Dense 0-based actor index into the owning registry.
struct ActorId {
  std::uint32_t index = 0;

  constexpr ActorId() = default;
  constexpr explicit ActorId(std::uint32_t i) : index(i) {}
  constexpr explicit ActorId(std::size_t i) : index(static_cast<std::uint32_t>(i)) {}
  constexpr explicit ActorId(int i) : index(static_cast<std::uint32_t>(i)) {}

  constexpr auto operator<=>(const ActorId&) const = default;
};

using ReceiverSet = std::vector<ActorId>;

struct Event {
  double time = 0.0;
  ActorId sender;
  ReceiverSet receivers;  // sorted, duplicate-free

  bool operator==(const Event&) const = default;
};

// Binary actor attributes, one row per actor.
class ActorTraits {
 public:
  ActorTraits() = default;
  ActorTraits(std::vector<std::string> names, std::size_t actor_count);

  std::size_t actor_count() const { return actor_count_; }
  std::size_t trait_count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  // Column index of a trait name, if present.
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t column(std::string_view name) const;  // throws ConfigError

  std::uint8_t at(ActorId actor, std::size_t column) const {
    return values_[actor.index * names_.size() + column];
  }
  void set(ActorId actor, std::size_t column, std::uint8_t value);

  // Appends the elementwise product of two existing columns as `name`.
  void add_product(std::string_view a, std::string_view b, std::string name);
  // Appends all pairwise products "AB" of the listed base columns.
  void add_pairwise_products(std::span<const std::string> base);

  std::size_t count(std::string_view name) const;

  // Optional original labels of the rows (from the `actor` column).
  const std::vector<std::int64_t>& labels() const { return labels_; }
  void set_labels(std::vector<std::int64_t> labels) { labels_ = std::move(labels); }

 private:
  std::vector<std::string> names_;
  std::size_t actor_count_ = 0;
  std::vector<std::uint8_t> values_;
  std::vector<std::int64_t> labels_;
};

// Maps original actor labels (as found in input files) to dense indices.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::int64_t> labels);  // position = dense index
  static IdMap identity(std::size_t n);

  std::size_t size() const { return labels_.size(); }
  std::optional<ActorId> find(std::int64_t label) const;
  std::int64_t label(ActorId id) const { return labels_.at(id.index); }
  const std::vector<std::int64_t>& labels() const { return labels_; }
  bool is_identity() const;

 private:
  std::vector<std::int64_t> labels_;
  std::vector<std::pair<std::int64_t, std::uint32_t>> sorted_;
};

class EventStream {
 public:
  EventStream() = default;
  // Validates and stably sorts by time; receivers are normalized to sorted
  // order. Throws IngestError on an invalid actor or empty receiver set.
  EventStream(std::vector<Event> events, std::size_t actor_count);

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const Event& operator[](std::size_t m) const { return events_[m]; }
  std::size_t actor_count() const { return actor_count_; }

  const std::optional<ActorTraits>& traits() const { return traits_; }
  void set_traits(ActorTraits traits);

  const IdMap& ids() const { return ids_; }
  void set_ids(IdMap ids);

  // Total number of receiver slots, sum of |J_m|.
  std::size_t selection_count() const;
  std::size_t max_receivers() const;

  // Same times and senders, receivers replaced event by event.
  EventStream with_receivers(std::span<const ReceiverSet> receivers) const;

 private:
  std::vector<Event> events_;
  std::size_t actor_count_ = 0;
  std::optional<ActorTraits> traits_;
  IdMap ids_;
};

enum class EventFormat { csv, jsonl };
EventFormat parse_event_format(std::string_view s);
EventFormat format_from_extension(const std::filesystem::path& path);

struct IngestOptions {
  std::size_t recipient_cutoff = 5;
  bool exclude_self_loops = true;
  // If set, labels must be in [0, actor_count) and are used as dense ids.
  std::optional<std::size_t> actor_count;
  // If set (e.g. from a traits file), labels must belong to this registry.
  std::optional<IdMap> registry;
};

struct IngestReport {
  EventStream stream;
  std::size_t total_rows = 0;
  std::size_t dropped_cutoff = 0;
  std::size_t dropped_empty = 0;  // rows left empty after self-loop removal
  bool reordered = false;
  std::vector<std::string> warnings;

  std::size_t dropped() const { return dropped_cutoff + dropped_empty; }
  std::size_t retained() const { return stream.size(); }
};

IngestReport ingest_events(const std::filesystem::path& path, EventFormat format,
                           const IngestOptions& options = {});
IngestReport read_events(std::istream& in, EventFormat format, const IngestOptions& options = {});

// Writes events with original labels and shortest round-trip time strings.
void write_events(std::ostream& out, const EventStream& stream, EventFormat format);
void export_events(const std::filesystem::path& path, const EventStream& stream, EventFormat format);

// traits.csv: header `actor,<names...>`, values 0/1.
ActorTraits read_traits(std::istream& in, std::optional<std::size_t> expected_actors = {});
ActorTraits ingest_traits(const std::filesystem::path& path,
                          std::optional<std::size_t> expected_actors = {});
void write_traits(std::ostream& out, const ActorTraits& traits);

// Sidecar with one `dense_id,label` row per actor.
void write_id_map(std::ostream& out, const IdMap& ids);

std::string format_time(double t);

// Receiver eligibility J_t(i).
class RiskSetPolicy {
 public:
  struct AllButSender {};
  struct StaticPerSender {
    std::vector<ReceiverSet> sets;  // indexed by sender
  };
  struct TimeVarying {
    std::function<ReceiverSet(double, ActorId)> callback;
  };
  using Mode = std::variant<AllButSender, StaticPerSender, TimeVarying>;

  RiskSetPolicy() = default;
  explicit RiskSetPolicy(Mode mode) : mode_(std::move(mode)) {}
  static RiskSetPolicy all_but_sender() { return RiskSetPolicy(AllButSender{}); }
  static RiskSetPolicy static_per_sender(std::vector<ReceiverSet> sets);
  static RiskSetPolicy time_varying(std::function<ReceiverSet(double, ActorId)> fn);

  const Mode& mode() const { return mode_; }
  bool is_all_but_sender() const { return std::holds_alternative<AllButSender>(mode_); }
  bool is_time_varying() const { return std::holds_alternative<TimeVarying>(mode_); }

  // Sorted, duplicate-free risk set.
  ReceiverSet risk_set(std::size_t actor_count, double t, ActorId sender) const;
  std::size_t risk_size(std::size_t actor_count, double t, ActorId sender) const;

  // Time-invariant superset used as the baseline receiver set J_0(i):
  // all actors for all-but-sender and time-varying, the fixed set otherwise.
  ReceiverSet baseline_set(std::size_t actor_count, ActorId sender) const;

 private:
  Mode mode_ = AllButSender{};
};

inline ReceiverSet risk_set(const RiskSetPolicy& policy, std::size_t actor_count, double t, ActorId i) {
  return policy.risk_set(actor_count, t, i);
}

}  // namespace relcox
