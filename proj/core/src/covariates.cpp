#include "relcox/covariates.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "relcox/error.hpp"

namespace relcox {

// ---------------------------------------------------------------------------
// IntervalScheme

IntervalScheme::IntervalScheme(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
  for (std::size_t k = 0; k < boundaries_.size(); ++k) {
    if (!std::isfinite(boundaries_[k]) || boundaries_[k] <= 0.0)
      throw ConfigError("interval boundaries must be finite and positive");
    if (k > 0 && boundaries_[k] <= boundaries_[k - 1])
      throw ConfigError("interval boundaries must be strictly increasing");
  }
}

IntervalScheme IntervalScheme::geometric(double base_seconds, double ratio, std::size_t finite_boundaries) {
  std::vector<double> b;
  double value = base_seconds;
  for (std::size_t k = 0; k < finite_boundaries; ++k) {
    value *= ratio;
    b.push_back(value);
  }
  return IntervalScheme(std::move(b));
}

double IntervalScheme::delta(std::size_t k) const {
  if (k == 0) return 0.0;
  if (k >= bins()) return std::numeric_limits<double>::infinity();
  return boundaries_[k - 1];
}

std::size_t IntervalScheme::bin_of(double sent, double now) const {
  if (!(sent < now)) return 0;
  for (std::size_t k = 1; k < bins(); ++k)
    if (sent >= now - boundaries_[k - 1]) return k;
  return bins();
}

// ---------------------------------------------------------------------------
// Names

std::string to_string(EffectForm f) { return f == EffectForm::indicator ? "indicator" : "binned"; }

std::string to_string(DyadicEffect e) { return e == DyadicEffect::send ? "send" : "receive"; }

std::string to_string(TriadicEffect e) {
  switch (e) {
    case TriadicEffect::two_send: return "2-send";
    case TriadicEffect::two_receive: return "2-receive";
    case TriadicEffect::sibling: return "sibling";
    case TriadicEffect::cosibling: return "cosibling";
  }
  return "?";
}

DyadicEffect parse_dyadic(std::string_view s) {
  if (s == "send") return DyadicEffect::send;
  if (s == "receive") return DyadicEffect::receive;
  throw ConfigError("unknown dyadic effect '" + std::string(s) + "'");
}

TriadicEffect parse_triadic(std::string_view s) {
  if (s == "2-send") return TriadicEffect::two_send;
  if (s == "2-receive") return TriadicEffect::two_receive;
  if (s == "sibling") return TriadicEffect::sibling;
  if (s == "cosibling") return TriadicEffect::cosibling;
  throw ConfigError("unknown triadic effect '" + std::string(s) + "'");
}

EffectForm parse_form(std::string_view s) {
  if (s == "indicator") return EffectForm::indicator;
  if (s == "binned") return EffectForm::binned;
  throw ConfigError("unknown effect form '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// StaticTerm / CovariateSpec

StaticTerm StaticTerm::parse(std::string_view text) {
  const auto star = text.find('*');
  if (star == std::string_view::npos) {
    if (text.empty() || text == "1") throw ConfigError("static term must name a receiver trait");
    return {std::nullopt, std::string(text)};
  }
  const std::string lhs(text.substr(0, star));
  const std::string rhs(text.substr(star + 1));
  if (lhs.empty() || rhs.empty()) throw ConfigError("malformed static term '" + std::string(text) + "'");
  if (rhs == "1")
    throw ConfigError("sender-only term '" + std::string(text) +
                      "' is not identifiable: it is constant across receivers");
  if (lhs == "1") return {std::nullopt, rhs};
  return {lhs, rhs};
}

std::string StaticTerm::name() const { return (sender_trait ? *sender_trait : std::string("1")) + "*" + receiver_trait; }

CovariateSpec::CovariateSpec(std::vector<StaticTerm> static_terms, std::vector<DyadicTerm> dyadic,
                             std::vector<TriadicTerm> triadic, IntervalScheme scheme)
    : static_terms_(std::move(static_terms)),
      dyadic_(std::move(dyadic)),
      triadic_(std::move(triadic)),
      scheme_(std::move(scheme)) {
  for (std::size_t a = 0; a < static_terms_.size(); ++a) {
    if (static_terms_[a].receiver_trait.empty() || static_terms_[a].receiver_trait == "1")
      throw ConfigError("sender-only term '" + static_terms_[a].name() + "' is not identifiable");
    for (std::size_t b = 0; b < a; ++b)
      if (static_terms_[a] == static_terms_[b]) throw ConfigError("duplicate static term " + static_terms_[a].name());
  }
  const std::size_t K = scheme_.bins();
  std::size_t offset = 0;
  for (std::size_t t = 0; t < dyadic_.size(); ++t) {
    for (std::size_t u = 0; u < t; ++u)
      if (dyadic_[t] == dyadic_[u]) throw ConfigError("duplicate dyadic term " + to_string(dyadic_[t].effect));
    dyadic_offsets_.push_back(offset);
    offset += dyadic_[t].form == EffectForm::indicator ? 1 : K;
  }
  for (std::size_t t = 0; t < triadic_.size(); ++t) {
    for (std::size_t u = 0; u < t; ++u)
      if (triadic_[t] == triadic_[u]) throw ConfigError("duplicate triadic term " + to_string(triadic_[t].effect));
    triadic_offsets_.push_back(offset);
    offset += triadic_[t].form == EffectForm::indicator ? 1 : K * K;
  }
  dynamic_dim_ = offset;
}

std::vector<std::string> CovariateSpec::coefficient_names() const {
  std::vector<std::string> names;
  for (const auto& t : static_terms_) names.push_back(t.name());
  const std::size_t K = scheme_.bins();
  for (const auto& d : dyadic_) {
    const auto base = to_string(d.effect);
    if (d.form == EffectForm::indicator) {
      names.push_back(base);
    } else {
      for (std::size_t k = 1; k <= K; ++k) names.push_back(base + "[" + std::to_string(k) + "]");
    }
  }
  for (const auto& d : triadic_) {
    const auto base = to_string(d.effect);
    if (d.form == EffectForm::indicator) {
      names.push_back(base);
    } else {
      for (std::size_t k = 1; k <= K; ++k)
        for (std::size_t l = 1; l <= K; ++l)
          names.push_back(base + "[" + std::to_string(k) + "," + std::to_string(l) + "]");
    }
  }
  return names;
}

std::vector<std::string> CovariateSpec::coefficient_groups() const {
  std::vector<std::string> groups(static_terms_.size(), "static");
  const std::size_t K = scheme_.bins();
  for (const auto& d : dyadic_)
    groups.insert(groups.end(), d.form == EffectForm::indicator ? 1 : K, to_string(d.effect));
  for (const auto& d : triadic_)
    groups.insert(groups.end(), d.form == EffectForm::indicator ? 1 : K * K, to_string(d.effect));
  return groups;
}

CovariateSpec CovariateSpec::enron_preset(const std::vector<std::string>& traits, bool triadic,
                                          IntervalScheme scheme) {
  std::vector<StaticTerm> st;
  for (const auto& y : traits) st.push_back({std::nullopt, y});
  for (const auto& x : traits)
    for (const auto& y : traits) st.push_back({x, y});
  std::vector<DyadicTerm> dy;
  for (auto e : {DyadicEffect::send, DyadicEffect::receive}) {
    dy.push_back({e, EffectForm::indicator});
    dy.push_back({e, EffectForm::binned});
  }
  std::vector<TriadicTerm> tr;
  if (triadic) {
    for (auto e : {TriadicEffect::sibling, TriadicEffect::two_send, TriadicEffect::cosibling,
                   TriadicEffect::two_receive}) {
      tr.push_back({e, EffectForm::indicator});
      tr.push_back({e, EffectForm::binned});
    }
  }
  return CovariateSpec(std::move(st), std::move(dy), std::move(tr), std::move(scheme));
}

// ---------------------------------------------------------------------------
// StaticDesign

StaticDesign::StaticDesign(const CovariateSpec& spec, const ActorTraits* traits) : dim_(spec.static_dimension()) {
  if (dim_ == 0) {
    actor_count_ = traits ? traits->actor_count() : 0;
    return;
  }
  if (!traits) throw ConfigError("static covariate terms require an actor traits table");
  actor_count_ = traits->actor_count();
  sender_vals_.assign(actor_count_ * dim_, 1);
  receiver_vals_.assign(actor_count_ * dim_, 0);
  std::set<std::size_t> key_cols;
  for (std::size_t k = 0; k < dim_; ++k) {
    const auto& term = spec.static_terms()[k];
    const std::size_t rc = traits->column(term.receiver_trait);
    std::optional<std::size_t> sc;
    if (term.sender_trait) {
      sc = traits->column(*term.sender_trait);
      key_cols.insert(*sc);
    }
    for (std::size_t a = 0; a < actor_count_; ++a) {
      receiver_vals_[a * dim_ + k] = traits->at(ActorId(a), rc);
      if (sc) sender_vals_[a * dim_ + k] = traits->at(ActorId(a), *sc);
    }
  }
  keys_.resize(actor_count_);
  for (std::size_t a = 0; a < actor_count_; ++a)
    for (std::size_t c : key_cols) keys_[a].push_back(traits->at(ActorId(a), c));
}

void StaticDesign::fill(ActorId i, ActorId j, std::span<double> out) const {
  const std::uint8_t* s = sender_vals_.data() + i.index * dim_;
  const std::uint8_t* r = receiver_vals_.data() + j.index * dim_;
  for (std::size_t k = 0; k < dim_; ++k) out[k] = static_cast<double>(s[k] & r[k]);
}

Eigen::VectorXd StaticDesign::row(ActorId i, ActorId j) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  fill(i, j, std::span<double>(v.data(), dim_));
  return v;
}

std::vector<std::uint8_t> StaticDesign::sender_key(ActorId i) const {
  if (keys_.empty()) return {};
  return keys_[i.index];
}

// ---------------------------------------------------------------------------
// DynamicRows

std::optional<std::size_t> DynamicRows::find(ActorId j) const {
  auto it = std::lower_bound(receivers.begin(), receivers.end(), j);
  if (it == receivers.end() || *it != j) return std::nullopt;
  return static_cast<std::size_t>(it - receivers.begin());
}

// ---------------------------------------------------------------------------
// DynamicState

DynamicState::DynamicState(std::size_t actor_count, const CovariateSpec& spec)
    : actor_count_(actor_count), spec_(spec), scheme_(spec.scheme()), out_(actor_count), in_(actor_count) {
  bool binned = false;
  for (const auto& d : spec.dyadic_terms()) binned |= d.form == EffectForm::binned;
  for (const auto& d : spec.triadic_terms()) binned |= d.form == EffectForm::binned;
  track_crossings_ = binned && scheme_.bins() > 1;
}

std::int64_t DynamicState::pair_index(ActorId a, ActorId b) const {
  const auto it = pairs_.find((static_cast<std::uint64_t>(a.index) << 32) | b.index);
  return it == pairs_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void DynamicState::advance(const Event& event) {
  if (event.time < current_time_) throw Error("time regression in covariate state");
  if (event.sender.index >= actor_count_) throw Error("advance: sender out of range");
  current_time_ = event.time;
  for (ActorId j : event.receivers) {
    if (j.index >= actor_count_) throw Error("advance: receiver out of range");
    const std::uint64_t key = (static_cast<std::uint64_t>(event.sender.index) << 32) | j.index;
    auto [it, inserted] = pairs_.try_emplace(key, static_cast<std::uint32_t>(times_.size()));
    if (inserted) {
      times_.emplace_back();
      out_[event.sender.index].push_back({j, it->second});
      in_[j.index].push_back({event.sender, it->second});
    }
    times_[it->second].push_back(event.time);
    ++records_;
    if (track_crossings_)
      for (double b : scheme_.boundaries()) crossings_.push(event.time + b);
  }
}

std::span<const double> DynamicState::history(ActorId a, ActorId b) const {
  const auto p = pair_index(a, b);
  if (p < 0) return {};
  return times_[static_cast<std::size_t>(p)];
}

void DynamicState::bin_counts(std::uint32_t pair, double t, std::span<double> out) const {
  const auto& ts = times_[pair];
  const auto count_before = [&](double x) {
    return static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), x) - ts.begin());
  };
  const std::size_t K = scheme_.bins();
  std::size_t prev = count_before(t);
  for (std::size_t k = 1; k < K; ++k) {
    const std::size_t cur = count_before(t - scheme_.boundaries()[k - 1]);
    out[k - 1] = static_cast<double>(prev - cur);
    prev = cur;
  }
  out[K - 1] = static_cast<double>(prev);
}

std::span<const double> DynamicState::memo_bins(std::uint32_t pair, double t, CovariateWorkspace& ws) const {
  const std::size_t K = scheme_.bins();
  std::span<double> slot(ws.bins_.data() + static_cast<std::size_t>(pair) * K, K);
  if (ws.stamp_[pair] != ws.epoch_) {
    bin_counts(pair, t, slot);
    ws.stamp_[pair] = ws.epoch_;
  }
  return slot;
}

DyadicCounts DynamicState::dyadic_counts(double t, ActorId i, ActorId j) const {
  const std::size_t K = scheme_.bins();
  DyadicCounts c{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
  if (auto p = pair_index(i, j); p >= 0) bin_counts(static_cast<std::uint32_t>(p), t, c.send);
  if (auto p = pair_index(j, i); p >= 0) bin_counts(static_cast<std::uint32_t>(p), t, c.receive);
  return c;
}

TriadicCounts DynamicState::triadic_counts(double t, ActorId i, ActorId j) const {
  const auto K = static_cast<Eigen::Index>(scheme_.bins());
  TriadicCounts c{Eigen::MatrixXd::Zero(K, K), Eigen::MatrixXd::Zero(K, K), Eigen::MatrixXd::Zero(K, K),
                  Eigen::MatrixXd::Zero(K, K)};
  Eigen::VectorXd a(K), b(K);
  const auto bins = [&](std::int64_t p, Eigen::VectorXd& v) {
    bin_counts(static_cast<std::uint32_t>(p), t, std::span<double>(v.data(), static_cast<std::size_t>(K)));
  };
  for (const auto& [h, p_ih] : out_[i.index]) {  // i -> h
    if (h == i || h == j) continue;
    if (auto p_hj = pair_index(h, j); p_hj >= 0) {  // h -> j
      bins(p_ih, a);
      bins(p_hj, b);
      c.two_send += a * b.transpose();
    }
    if (auto p_jh = pair_index(j, h); p_jh >= 0) {  // j -> h
      bins(p_ih, a);
      bins(p_jh, b);
      c.cosibling += a * b.transpose();
    }
  }
  for (const auto& [h, p_hi] : in_[i.index]) {  // h -> i
    if (h == i || h == j) continue;
    if (auto p_jh = pair_index(j, h); p_jh >= 0) {  // j -> h
      bins(p_hi, a);
      bins(p_jh, b);
      c.two_receive += a * b.transpose();
    }
    if (auto p_hj = pair_index(h, j); p_hj >= 0) {  // h -> j
      bins(p_hi, a);
      bins(p_hj, b);
      c.sibling += a * b.transpose();
    }
  }
  return c;
}

std::vector<ActorId> DynamicState::active_receivers(ActorId i) const {
  std::vector<ActorId> out;
  if (!spec_.has_dynamic()) return out;
  for (const auto& adj : out_[i.index]) out.push_back(adj.actor);
  for (const auto& adj : in_[i.index]) out.push_back(adj.actor);
  if (spec_.has_triadic()) {
    for (const auto& h : out_[i.index]) {
      for (const auto& adj : out_[h.actor.index]) out.push_back(adj.actor);
      for (const auto& adj : in_[h.actor.index]) out.push_back(adj.actor);
    }
    for (const auto& h : in_[i.index]) {
      for (const auto& adj : out_[h.actor.index]) out.push_back(adj.actor);
      for (const auto& adj : in_[h.actor.index]) out.push_back(adj.actor);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void DynamicState::dynamic_rows(double t, ActorId i, CovariateWorkspace& ws, DynamicRows& out) const {
  out.receivers.clear();
  const auto pd = static_cast<Eigen::Index>(spec_.dynamic_dimension());
  if (pd == 0) {
    out.values.resize(0, 0);
    return;
  }
  const std::size_t K = scheme_.bins();
  if (ws.owner_ != this || !(ws.time_ == t)) {
    ++ws.epoch_;
    ws.owner_ = this;
    ws.time_ = t;
  }
  if (ws.stamp_.size() < times_.size()) {
    ws.stamp_.resize(times_.size(), 0);
    ws.bins_.resize(times_.size() * K);
  }
  if (ws.column_of_.size() < actor_count_) ws.column_of_.assign(actor_count_, -1);

  // Same set as active_receivers(i), deduplicated through the column map.
  const auto mark = [&](const std::vector<Adjacent>& adj) {
    for (const auto& a : adj)
      if (ws.column_of_[a.actor.index] < 0) {
        ws.column_of_[a.actor.index] = 0;
        out.receivers.push_back(a.actor);
      }
  };
  mark(out_[i.index]);
  mark(in_[i.index]);
  if (spec_.has_triadic()) {
    for (const auto& h : out_[i.index]) {
      mark(out_[h.actor.index]);
      mark(in_[h.actor.index]);
    }
    for (const auto& h : in_[i.index]) {
      mark(out_[h.actor.index]);
      mark(in_[h.actor.index]);
    }
  }
  std::sort(out.receivers.begin(), out.receivers.end());
  const auto n = static_cast<Eigen::Index>(out.receivers.size());
  for (Eigen::Index c = 0; c < n; ++c) ws.column_of_[out.receivers[static_cast<std::size_t>(c)].index] = c;
  out.values.setZero(pd, n);

  const auto& dyadic = spec_.dyadic_terms();
  for (std::size_t term = 0; term < dyadic.size(); ++term) {
    const auto offset = static_cast<Eigen::Index>(spec_.dyadic_offset(term));
    const auto& adjacency = dyadic[term].effect == DyadicEffect::send ? out_[i.index] : in_[i.index];
    for (const auto& [j, pair] : adjacency) {
      const auto b = memo_bins(pair, t, ws);
      const auto col = ws.column_of_[j.index];
      if (dyadic[term].form == EffectForm::indicator) {
        double total = 0.0;
        for (double v : b) total += v;
        out.values(offset, col) = total > 0.0 ? 1.0 : 0.0;
      } else {
        for (std::size_t k = 0; k < K; ++k) out.values(offset + static_cast<Eigen::Index>(k), col) = b[k];
      }
    }
  }

  const auto& triadic = spec_.triadic_terms();
  if (!triadic.empty()) {
    // Which families are requested, and in which forms.
    std::array<bool, 4> want{}, want_binned{};
    for (const auto& term : triadic) {
      const auto f = static_cast<std::size_t>(term.effect);
      want[f] = true;
      want_binned[f] = want_binned[f] || term.form == EffectForm::binned;
    }
    ws.totals_.setZero(4, n);
    std::array<Eigen::MatrixXd, 4> blocks;
    const auto KK = static_cast<Eigen::Index>(K * K);
    for (std::size_t f = 0; f < 4; ++f)
      if (want_binned[f]) blocks[f].setZero(KK, n);

    const auto join = [&](std::size_t family, std::span<const double> a, ActorId h,
                          const std::vector<Adjacent>& second) {
      double sa = 0.0;
      for (double v : a) sa += v;
      if (sa == 0.0) return;
      for (const auto& [j, pair] : second) {
        if (j == h) continue;
        const auto b = memo_bins(pair, t, ws);
        double sb = 0.0;
        for (double v : b) sb += v;
        if (sb == 0.0) continue;
        const auto col = ws.column_of_[j.index];
        ws.totals_(static_cast<Eigen::Index>(family), col) += sa * sb;
        if (want_binned[family]) {
          double* block = blocks[family].col(col).data();
          for (std::size_t k = 0; k < K; ++k) {
            if (a[k] == 0.0) continue;
            for (std::size_t l = 0; l < K; ++l) block[k * K + l] += a[k] * b[l];
          }
        }
      }
    };

    constexpr auto kTwoSend = static_cast<std::size_t>(TriadicEffect::two_send);
    constexpr auto kTwoReceive = static_cast<std::size_t>(TriadicEffect::two_receive);
    constexpr auto kSibling = static_cast<std::size_t>(TriadicEffect::sibling);
    constexpr auto kCosibling = static_cast<std::size_t>(TriadicEffect::cosibling);

    for (const auto& [h, p_ih] : out_[i.index]) {  // i -> h
      if (h == i) continue;
      const auto a = memo_bins(p_ih, t, ws);
      if (want[kTwoSend]) join(kTwoSend, a, h, out_[h.index]);      // h -> j
      if (want[kCosibling]) join(kCosibling, a, h, in_[h.index]);   // j -> h
    }
    for (const auto& [h, p_hi] : in_[i.index]) {  // h -> i
      if (h == i) continue;
      const auto a = memo_bins(p_hi, t, ws);
      if (want[kTwoReceive]) join(kTwoReceive, a, h, in_[h.index]);  // j -> h
      if (want[kSibling]) join(kSibling, a, h, out_[h.index]);       // h -> j
    }
    // The join above counted h == j pairs only when j == h, which is skipped;
    // h == i is skipped on the first leg.

    for (std::size_t term = 0; term < triadic.size(); ++term) {
      const auto offset = static_cast<Eigen::Index>(spec_.triadic_offset(term));
      const auto f = static_cast<std::size_t>(triadic[term].effect);
      if (triadic[term].form == EffectForm::indicator) {
        for (Eigen::Index c = 0; c < n; ++c)
          out.values(offset, c) = ws.totals_(static_cast<Eigen::Index>(f), c) > 0.0 ? 1.0 : 0.0;
      } else {
        out.values.middleRows(offset, KK) = blocks[f];
      }
    }
  }

  // Drop all-zero columns; reset the column map for the next query.
  Eigen::Index kept = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    ws.column_of_[out.receivers[static_cast<std::size_t>(c)].index] = -1;
    if (out.values.col(c).cwiseAbs().maxCoeff() == 0.0) continue;
    if (kept != c) {
      out.values.col(kept) = out.values.col(c);
      out.receivers[static_cast<std::size_t>(kept)] = out.receivers[static_cast<std::size_t>(c)];
    }
    ++kept;
  }
  out.receivers.resize(static_cast<std::size_t>(kept));
  out.values.conservativeResize(pd, kept);
}

Eigen::VectorXd DynamicState::dynamic_vector(double t, ActorId i, ActorId j) const {
  const std::size_t K = scheme_.bins();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.dynamic_dimension()));
  if (!spec_.has_dynamic()) return v;
  const DyadicCounts dy = dyadic_counts(t, i, j);
  for (std::size_t term = 0; term < spec_.dyadic_terms().size(); ++term) {
    const auto& d = spec_.dyadic_terms()[term];
    const auto& counts = d.effect == DyadicEffect::send ? dy.send : dy.receive;
    const auto offset = static_cast<Eigen::Index>(spec_.dyadic_offset(term));
    double total = 0.0;
    for (double c : counts) total += c;
    if (d.form == EffectForm::indicator) {
      v(offset) = total > 0.0 ? 1.0 : 0.0;
    } else {
      for (std::size_t k = 0; k < K; ++k) v(offset + static_cast<Eigen::Index>(k)) = counts[k];
    }
  }
  if (spec_.has_triadic()) {
    const TriadicCounts tc = triadic_counts(t, i, j);
    for (std::size_t term = 0; term < spec_.triadic_terms().size(); ++term) {
      const auto& d = spec_.triadic_terms()[term];
      const Eigen::MatrixXd* m = nullptr;
      switch (d.effect) {
        case TriadicEffect::two_send: m = &tc.two_send; break;
        case TriadicEffect::two_receive: m = &tc.two_receive; break;
        case TriadicEffect::sibling: m = &tc.sibling; break;
        case TriadicEffect::cosibling: m = &tc.cosibling; break;
      }
      const auto offset = static_cast<Eigen::Index>(spec_.triadic_offset(term));
      if (d.form == EffectForm::indicator) {
        v(offset) = m->sum() > 0.0 ? 1.0 : 0.0;
      } else {
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t l = 0; l < K; ++l)
            v(offset + static_cast<Eigen::Index>(k * K + l)) =
                (*m)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      }
    }
  }
  return v;
}

double DynamicState::next_bin_crossing(double t) {
  while (!crossings_.empty() && crossings_.top() <= t) crossings_.pop();
  return crossings_.empty() ? std::numeric_limits<double>::infinity() : crossings_.top();
}

Eigen::VectorXd covariate_vector(const DynamicState& state, const StaticDesign& design, double t, ActorId i,
                                 ActorId j) {
  const auto ps = static_cast<Eigen::Index>(design.dimension());
  const Eigen::VectorXd dyn = state.dynamic_vector(t, i, j);
  Eigen::VectorXd x(ps + dyn.size());
  design.fill(i, j, std::span<double>(x.data(), static_cast<std::size_t>(ps)));
  x.tail(dyn.size()) = dyn;
  return x;
}

}  // namespace relcox
