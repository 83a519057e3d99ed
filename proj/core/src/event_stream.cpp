#include "relcox/event_stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "relcox/error.hpp"

namespace relcox {

// ---------------------------------------------------------------------------
// ActorTraits

ActorTraits::ActorTraits(std::vector<std::string> names, std::size_t actor_count)
    : names_(std::move(names)), actor_count_(actor_count), values_(names_.size() * actor_count, 0) {}

std::optional<std::size_t> ActorTraits::find(std::string_view name) const {
  for (std::size_t c = 0; c < names_.size(); ++c)
    if (names_[c] == name) return c;
  return std::nullopt;
}

std::size_t ActorTraits::column(std::string_view name) const {
  if (auto c = find(name)) return *c;
  throw ConfigError("unknown trait '" + std::string(name) + "'");
}

void ActorTraits::set(ActorId actor, std::size_t column, std::uint8_t value) {
  if (value > 1) throw ConfigError("trait values must be 0 or 1");
  values_[actor.index * names_.size() + column] = value;
}

void ActorTraits::add_product(std::string_view a, std::string_view b, std::string name) {
  const std::size_t ca = column(a);
  const std::size_t cb = column(b);
  if (find(name)) throw ConfigError("trait '" + name + "' already exists");
  const std::size_t old_width = names_.size();
  std::vector<std::uint8_t> widened(actor_count_ * (old_width + 1));
  for (std::size_t r = 0; r < actor_count_; ++r) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(r * old_width), old_width,
                widened.begin() + static_cast<std::ptrdiff_t>(r * (old_width + 1)));
    widened[r * (old_width + 1) + old_width] =
        values_[r * old_width + ca] & values_[r * old_width + cb];
  }
  values_ = std::move(widened);
  names_.push_back(std::move(name));
}

void ActorTraits::add_pairwise_products(std::span<const std::string> base) {
  for (std::size_t a = 0; a < base.size(); ++a)
    for (std::size_t b = a + 1; b < base.size(); ++b) add_product(base[a], base[b], base[a] + base[b]);
}

std::size_t ActorTraits::count(std::string_view name) const {
  const std::size_t c = column(name);
  std::size_t total = 0;
  for (std::size_t r = 0; r < actor_count_; ++r) total += values_[r * names_.size() + c];
  return total;
}

// ---------------------------------------------------------------------------
// IdMap

IdMap::IdMap(std::vector<std::int64_t> labels) : labels_(std::move(labels)) {
  sorted_.reserve(labels_.size());
  for (std::size_t k = 0; k < labels_.size(); ++k)
    sorted_.emplace_back(labels_[k], static_cast<std::uint32_t>(k));
  std::sort(sorted_.begin(), sorted_.end());
  for (std::size_t k = 1; k < sorted_.size(); ++k)
    if (sorted_[k].first == sorted_[k - 1].first)
      throw IngestError("duplicate actor label " + std::to_string(sorted_[k].first));
}

IdMap IdMap::identity(std::size_t n) {
  std::vector<std::int64_t> labels(n);
  std::iota(labels.begin(), labels.end(), std::int64_t{0});
  return IdMap(std::move(labels));
}

std::optional<ActorId> IdMap::find(std::int64_t label) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), std::make_pair(label, std::uint32_t{0}));
  if (it == sorted_.end() || it->first != label) return std::nullopt;
  return ActorId(it->second);
}

bool IdMap::is_identity() const {
  for (std::size_t k = 0; k < labels_.size(); ++k)
    if (labels_[k] != static_cast<std::int64_t>(k)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// EventStream

EventStream::EventStream(std::vector<Event> events, std::size_t actor_count)
    : events_(std::move(events)), actor_count_(actor_count) {
  if (actor_count_ == 0) throw IngestError("actor_count must be positive");
  for (auto& e : events_) {
    if (!std::isfinite(e.time)) throw IngestError("non-finite event time");
    if (e.sender.index >= actor_count_) throw IngestError("unknown actor id " + std::to_string(e.sender.index));
    if (e.receivers.empty()) throw IngestError("event with empty receiver set");
    std::sort(e.receivers.begin(), e.receivers.end());
    e.receivers.erase(std::unique(e.receivers.begin(), e.receivers.end()), e.receivers.end());
    for (ActorId j : e.receivers)
      if (j.index >= actor_count_) throw IngestError("unknown actor id " + std::to_string(j.index));
  }
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
  ids_ = IdMap::identity(actor_count_);
}

void EventStream::set_traits(ActorTraits traits) {
  if (traits.actor_count() != actor_count_)
    throw IngestError("traits table has " + std::to_string(traits.actor_count()) + " rows, expected " +
                      std::to_string(actor_count_));
  traits_ = std::move(traits);
}

void EventStream::set_ids(IdMap ids) {
  if (ids.size() != actor_count_) throw IngestError("id map size does not match actor count");
  ids_ = std::move(ids);
}

std::size_t EventStream::selection_count() const {
  std::size_t total = 0;
  for (const auto& e : events_) total += e.receivers.size();
  return total;
}

std::size_t EventStream::max_receivers() const {
  std::size_t best = 0;
  for (const auto& e : events_) best = std::max(best, e.receivers.size());
  return best;
}

EventStream EventStream::with_receivers(std::span<const ReceiverSet> receivers) const {
  if (receivers.size() != events_.size()) throw Error("with_receivers: size mismatch");
  EventStream out = *this;
  for (std::size_t m = 0; m < events_.size(); ++m) {
    out.events_[m].receivers = receivers[m];
    std::sort(out.events_[m].receivers.begin(), out.events_[m].receivers.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing helpers

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record honoring double quotes (no embedded newlines).
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw IngestError("unterminated quote", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw IngestError("malformed time '" + std::string(s) + "'", line_no);
  return v;
}

std::int64_t parse_label(std::string_view s, std::size_t line_no) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw IngestError("malformed actor id '" + std::string(s) + "'", line_no);
  return v;
}

struct RawRow {
  double time;
  std::int64_t sender;
  std::vector<std::int64_t> receivers;
  std::size_t line;
};

std::vector<RawRow> read_csv_rows(std::istream& in) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    auto fields = split_csv(body, line_no);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 3 && trim(fields[0]) == "time" && trim(fields[1]) == "sender" &&
          trim(fields[2]) == "receivers")
        continue;
      throw IngestError("expected header 'time,sender,receivers'", line_no);
    }
    if (fields.size() != 3) throw IngestError("expected 3 fields, found " + std::to_string(fields.size()), line_no);
    RawRow row{parse_double(fields[0], line_no), parse_label(fields[1], line_no), {}, line_no};
    std::string_view rec = trim(fields[2]);
    if (rec.empty()) throw IngestError("empty receiver list", line_no);
    std::size_t start = 0;
    while (start <= rec.size()) {
      const std::size_t stop = std::min(rec.find(';', start), rec.size());
      row.receivers.push_back(parse_label(rec.substr(start, stop - start), line_no));
      start = stop + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RawRow> read_jsonl_rows(std::istream& in) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw IngestError(std::string("invalid JSON: ") + err.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("time") || !obj.contains("sender") || !obj.contains("receivers"))
      throw IngestError("object must carry time, sender, receivers", line_no);
    const auto& t = obj["time"];
    const auto& s = obj["sender"];
    const auto& r = obj["receivers"];
    if (!t.is_number() || !s.is_number_integer() || !r.is_array() || r.empty())
      throw IngestError("malformed event object", line_no);
    RawRow row{t.get<double>(), s.get<std::int64_t>(), {}, line_no};
    if (!std::isfinite(row.time)) throw IngestError("non-finite time", line_no);
    for (const auto& x : r) {
      if (!x.is_number_integer()) throw IngestError("receiver ids must be integers", line_no);
      row.receivers.push_back(x.get<std::int64_t>());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

EventFormat parse_event_format(std::string_view s) {
  if (s == "csv") return EventFormat::csv;
  if (s == "jsonl") return EventFormat::jsonl;
  throw ConfigError("unknown event format '" + std::string(s) + "'");
}

EventFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return EventFormat::jsonl;
  return EventFormat::csv;
}

IngestReport read_events(std::istream& in, EventFormat format, const IngestOptions& options) {
  std::vector<RawRow> rows = format == EventFormat::csv ? read_csv_rows(in) : read_jsonl_rows(in);

  IngestReport report;
  report.total_rows = rows.size();

  std::vector<RawRow> kept;
  kept.reserve(rows.size());
  for (auto& row : rows) {
    std::sort(row.receivers.begin(), row.receivers.end());
    row.receivers.erase(std::unique(row.receivers.begin(), row.receivers.end()), row.receivers.end());
    if (options.exclude_self_loops) std::erase(row.receivers, row.sender);
    if (row.receivers.empty()) {
      ++report.dropped_empty;
      continue;
    }
    if (row.receivers.size() > options.recipient_cutoff) {
      ++report.dropped_cutoff;
      continue;
    }
    kept.push_back(std::move(row));
  }
  if (kept.empty()) throw IngestError("empty event stream");

  IdMap ids;
  if (options.actor_count) {
    ids = IdMap::identity(*options.actor_count);
  } else if (options.registry) {
    ids = *options.registry;
  } else {
    std::vector<std::int64_t> labels;
    for (const auto& row : kept) {
      labels.push_back(row.sender);
      labels.insert(labels.end(), row.receivers.begin(), row.receivers.end());
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    ids = IdMap(std::move(labels));
  }

  const auto resolve = [&](std::int64_t label, std::size_t line) {
    auto id = ids.find(label);
    if (!id) throw IngestError("unknown actor id " + std::to_string(label), line);
    return *id;
  };

  std::vector<Event> events;
  events.reserve(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto& row = kept[k];
    Event e{row.time, resolve(row.sender, row.line), {}};
    for (auto label : row.receivers) e.receivers.push_back(resolve(label, row.line));
    if (k > 0 && row.time < kept[k - 1].time) report.reordered = true;
    events.push_back(std::move(e));
  }
  if (report.reordered) report.warnings.push_back("events were not in time order; sorted stably by time");
  if (report.dropped_cutoff > 0)
    report.warnings.push_back(std::to_string(report.dropped_cutoff) + " rows exceeded the recipient cutoff of " +
                              std::to_string(options.recipient_cutoff) + " and were dropped");

  report.stream = EventStream(std::move(events), ids.size());
  report.stream.set_ids(std::move(ids));
  return report;
}

IngestReport ingest_events(const std::filesystem::path& path, EventFormat format, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  return read_events(in, format, options);
}

std::string format_time(double t) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t);
  if (ec != std::errc()) throw Error("format_time failed");
  return std::string(buf, ptr);
}

void write_events(std::ostream& out, const EventStream& stream, EventFormat format) {
  const IdMap& ids = stream.ids();
  if (format == EventFormat::csv) {
    out << "time,sender,receivers\n";
    for (const auto& e : stream.events()) {
      out << format_time(e.time) << ',' << ids.label(e.sender) << ',';
      const bool quote = e.receivers.size() > 1;
      if (quote) out << '"';
      for (std::size_t k = 0; k < e.receivers.size(); ++k) out << (k ? ";" : "") << ids.label(e.receivers[k]);
      if (quote) out << '"';
      out << '\n';
    }
  } else {
    for (const auto& e : stream.events()) {
      out << "{\"time\":" << format_time(e.time) << ",\"sender\":" << ids.label(e.sender) << ",\"receivers\":[";
      for (std::size_t k = 0; k < e.receivers.size(); ++k) out << (k ? "," : "") << ids.label(e.receivers[k]);
      out << "]}\n";
    }
  }
}

void export_events(const std::filesystem::path& path, const EventStream& stream, EventFormat format) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_events(out, stream, format);
}

ActorTraits read_traits(std::istream& in, std::optional<std::size_t> expected_actors) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  std::vector<std::int64_t> labels;
  std::vector<std::vector<std::uint8_t>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(trim(line), line_no);
    if (!header_seen) {
      header_seen = true;
      if (fields.empty() || trim(fields[0]) != "actor") throw IngestError("expected header 'actor,<traits>'", line_no);
      for (std::size_t k = 1; k < fields.size(); ++k) names.emplace_back(trim(fields[k]));
      continue;
    }
    if (fields.size() != names.size() + 1)
      throw IngestError("expected " + std::to_string(names.size() + 1) + " fields", line_no);
    labels.push_back(parse_label(fields[0], line_no));
    std::vector<std::uint8_t> row;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto v = trim(fields[k]);
      if (v != "0" && v != "1") throw IngestError("non-binary trait value '" + std::string(v) + "'", line_no);
      row.push_back(v == "1" ? 1 : 0);
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw IngestError("empty traits file");
  if (expected_actors && rows.size() != *expected_actors)
    throw IngestError("traits table has " + std::to_string(rows.size()) + " rows, expected " +
                      std::to_string(*expected_actors));
  ActorTraits traits(std::move(names), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) traits.set(ActorId(r), c, rows[r][c]);
  IdMap check(labels);  // rejects duplicate labels
  traits.set_labels(std::move(labels));
  return traits;
}

ActorTraits ingest_traits(const std::filesystem::path& path, std::optional<std::size_t> expected_actors) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  return read_traits(in, expected_actors);
}

void write_traits(std::ostream& out, const ActorTraits& traits) {
  out << "actor";
  for (const auto& n : traits.names()) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < traits.actor_count(); ++r) {
    out << (traits.labels().empty() ? static_cast<std::int64_t>(r) : traits.labels()[r]);
    for (std::size_t c = 0; c < traits.trait_count(); ++c) out << ',' << int(traits.at(ActorId(r), c));
    out << '\n';
  }
}

void write_id_map(std::ostream& out, const IdMap& ids) {
  out << "dense_id,label\n";
  for (std::size_t k = 0; k < ids.size(); ++k) out << k << ',' << ids.labels()[k] << '\n';
}

// ---------------------------------------------------------------------------
// RiskSetPolicy

RiskSetPolicy RiskSetPolicy::static_per_sender(std::vector<ReceiverSet> sets) {
  for (auto& s : sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return RiskSetPolicy(StaticPerSender{std::move(sets)});
}

RiskSetPolicy RiskSetPolicy::time_varying(std::function<ReceiverSet(double, ActorId)> fn) {
  return RiskSetPolicy(TimeVarying{std::move(fn)});
}

ReceiverSet RiskSetPolicy::risk_set(std::size_t actor_count, double t, ActorId sender) const {
  ReceiverSet out;
  if (std::holds_alternative<AllButSender>(mode_)) {
    out.reserve(actor_count - 1);
    for (std::size_t j = 0; j < actor_count; ++j)
      if (j != sender.index) out.emplace_back(j);
  } else if (const auto* fixed = std::get_if<StaticPerSender>(&mode_)) {
    if (sender.index < fixed->sets.size()) out = fixed->sets[sender.index];
  } else {
    out = std::get<TimeVarying>(mode_).callback(t, sender);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

std::size_t RiskSetPolicy::risk_size(std::size_t actor_count, double t, ActorId sender) const {
  if (std::holds_alternative<AllButSender>(mode_)) return sender.index < actor_count ? actor_count - 1 : actor_count;
  if (const auto* fixed = std::get_if<StaticPerSender>(&mode_))
    return sender.index < fixed->sets.size() ? fixed->sets[sender.index].size() : 0;
  return risk_set(actor_count, t, sender).size();
}

ReceiverSet RiskSetPolicy::baseline_set(std::size_t actor_count, ActorId sender) const {
  if (const auto* fixed = std::get_if<StaticPerSender>(&mode_))
    return sender.index < fixed->sets.size() ? fixed->sets[sender.index] : ReceiverSet{};
  ReceiverSet all;
  all.reserve(actor_count);
  for (std::size_t j = 0; j < actor_count; ++j) all.emplace_back(j);
  return all;
}

}  // namespace relcox
