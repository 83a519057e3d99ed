#include "relcox/design.hpp"

#include <algorithm>
#include <map>

#include "relcox/error.hpp"

namespace relcox {

std::optional<std::size_t> EventDesign::touched_index(ActorId j) const {
  auto it = std::lower_bound(touched.begin(), touched.end(), j);
  if (it == touched.end() || *it != j) return std::nullopt;
  return static_cast<std::size_t>(it - touched.begin());
}

Eigen::VectorXd event_covariate(const DesignContext& ctx, const EventDesign& ev, ActorId j) {
  const SenderClass& cls = ctx.sender_class(ev.sender);
  const auto r = cls.row[j.index];
  if (r < 0) throw RiskSetError("receiver " + std::to_string(j.index) + " is outside the sender's receiver set");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx.dimension()));
  x.head(static_cast<Eigen::Index>(ctx.static_dim)) = cls.x0.row(r).transpose();
  if (auto t = ev.touched_index(j)) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(ev.dx, static_cast<Eigen::Index>(*t)); it; ++it)
      x(static_cast<Eigen::Index>(ctx.static_dim) + it.row()) = it.value();
  }
  return x;
}

RiskRows risk_rows(const DesignContext& ctx, const EventDesign& ev) {
  const SenderClass& cls = ctx.sender_class(ev.sender);
  const auto ps = static_cast<Eigen::Index>(ctx.static_dim);
  RiskRows out;
  out.receivers.reserve(ev.risk_size);
  std::size_t t = 0;
  for (ActorId j : cls.receivers) {
    while (t < ev.touched.size() && ev.touched[t] < j) ++t;
    const bool touched = t < ev.touched.size() && ev.touched[t] == j;
    if (touched && !ev.at_risk[t]) continue;
    out.receivers.push_back(j);
  }
  out.x.setZero(static_cast<Eigen::Index>(out.receivers.size()), static_cast<Eigen::Index>(ctx.dimension()));
  t = 0;
  for (std::size_t r = 0; r < out.receivers.size(); ++r) {
    const ActorId j = out.receivers[r];
    const auto row = static_cast<Eigen::Index>(r);
    out.x.row(row).head(ps) = cls.x0.row(cls.row[j.index]);
    while (t < ev.touched.size() && ev.touched[t] < j) ++t;
    if (t < ev.touched.size() && ev.touched[t] == j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(ev.dx, static_cast<Eigen::Index>(t)); it; ++it)
        out.x(row, ps + it.row()) = it.value();
  }
  return out;
}

DesignBuilder::DesignBuilder(const EventStream& stream, const CovariateSpec& spec, RiskSetPolicy policy)
    : stream_(&stream), spec_(spec), policy_(std::move(policy)) {
  const ActorTraits* traits = stream.traits() ? &*stream.traits() : nullptr;
  static_ = StaticDesign(spec_, traits);
  const std::size_t n = stream.actor_count();

  auto ctx = std::make_shared<DesignContext>();
  ctx->actor_count = n;
  ctx->static_dim = spec_.static_dimension();
  ctx->dynamic_dim = spec_.dynamic_dimension();
  ctx->names = spec_.coefficient_names();
  ctx->class_of.resize(n);

  std::map<std::pair<std::vector<std::uint8_t>, ReceiverSet>, std::uint32_t> seen;
  for (std::size_t a = 0; a < n; ++a) {
    const ActorId i(a);
    ReceiverSet base = policy_.baseline_set(n, i);
    auto key = std::make_pair(static_.sender_key(i), base);
    auto [it, inserted] = seen.try_emplace(std::move(key), static_cast<std::uint32_t>(ctx->classes.size()));
    if (inserted) {
      SenderClass cls;
      cls.receivers = std::move(base);
      cls.row.assign(n, -1);
      cls.x0.resize(static_cast<Eigen::Index>(cls.receivers.size()), static_cast<Eigen::Index>(ctx->static_dim));
      Eigen::VectorXd buf(static_cast<Eigen::Index>(ctx->static_dim));
      for (std::size_t r = 0; r < cls.receivers.size(); ++r) {
        const ActorId j = cls.receivers[r];
        if (j.index >= n) throw ConfigError("risk set refers to unknown actor " + std::to_string(j.index));
        cls.row[j.index] = static_cast<std::int32_t>(r);
        if (ctx->static_dim > 0) {
          static_.fill(i, j, std::span<double>(buf.data(), ctx->static_dim));
          cls.x0.row(static_cast<Eigen::Index>(r)) = buf.transpose();
        }
      }
      ctx->classes.push_back(std::move(cls));
    }
    ctx->class_of[a] = it->second;
  }
  ctx_ = std::move(ctx);
}

void DesignBuilder::replay(const std::function<void(const EventDesign&)>& visit) const {
  const auto& events = stream_->events();
  const std::size_t n = stream_->actor_count();
  DynamicState state(n, spec_);
  CovariateWorkspace ws;
  DynamicRows rows;
  EventDesign ev;
  std::vector<std::uint8_t> in_risk(n, 0);
  std::size_t advanced = 0;

  for (std::size_t m = 0; m < events.size(); ++m) {
    const Event& e = events[m];
    while (advanced < m && events[advanced].time < e.time) state.advance(events[advanced++]);

    const SenderClass& cls = ctx_->sender_class(e.sender);
    const ReceiverSet risk = policy_.risk_set(n, e.time, e.sender);
    for (ActorId j : risk) {
      if (j.index >= n || cls.row[j.index] < 0)
        throw RiskSetError("risk set of sender " + std::to_string(e.sender.index) +
                           " leaves its baseline receiver set");
      in_risk[j.index] = 1;
    }
    for (ActorId j : e.receivers) {
      if (!in_risk[j.index]) {
        for (ActorId r : risk) in_risk[r.index] = 0;
        throw RiskSetError("event " + std::to_string(m) + ": receiver " + std::to_string(j.index) +
                           " is not in the risk set of sender " + std::to_string(e.sender.index));
      }
    }

    state.dynamic_rows(e.time, e.sender, ws, rows);

    ev.index = m;
    ev.time = e.time;
    ev.sender = e.sender;
    ev.chosen = e.receivers;
    ev.risk_size = risk.size();
    ev.touched.clear();
    ev.at_risk.clear();

    // Merge active receivers (inside J_0) with J_0 members outside the risk set.
    std::vector<std::int32_t> source;  // column in rows.values, or -1
    std::size_t a = 0;
    const auto take_active = [&](std::size_t k) {
      const ActorId j = rows.receivers[k];
      if (cls.row[j.index] < 0) return;  // can never be chosen, weight stays 0
      ev.touched.push_back(j);
      ev.at_risk.push_back(in_risk[j.index]);
      source.push_back(static_cast<std::int32_t>(k));
    };
    for (ActorId j : cls.receivers) {
      if (in_risk[j.index]) continue;
      while (a < rows.receivers.size() && rows.receivers[a] < j) take_active(a++);
      if (a < rows.receivers.size() && rows.receivers[a] == j) {
        ev.touched.push_back(j);
        ev.at_risk.push_back(0);
        source.push_back(static_cast<std::int32_t>(a++));
      } else {
        ev.touched.push_back(j);
        ev.at_risk.push_back(0);
        source.push_back(-1);
      }
    }
    while (a < rows.receivers.size()) take_active(a++);

    const auto pd = static_cast<Eigen::Index>(ctx_->dynamic_dim);
    ev.dx.resize(pd, static_cast<Eigen::Index>(ev.touched.size()));
    ev.dx.setZero();
    if (pd > 0) {
      std::vector<Eigen::Triplet<double>> trip;
      for (std::size_t c = 0; c < source.size(); ++c) {
        if (source[c] < 0) continue;
        const auto col = rows.values.col(source[c]);
        for (Eigen::Index r = 0; r < pd; ++r)
          if (col(r) != 0.0) trip.emplace_back(r, static_cast<Eigen::Index>(c), col(r));
      }
      ev.dx.setFromTriplets(trip.begin(), trip.end());
      ev.dx.makeCompressed();
    }

    for (ActorId j : risk) in_risk[j.index] = 0;
    visit(ev);
  }
}

CachedDesign::CachedDesign(const DesignBuilder& builder) : ctx_(builder.context()) {
  events_.reserve(builder.stream().size());
  builder.replay([&](const EventDesign& ev) { events_.push_back(ev); });
  by_sender_.resize(ctx_->actor_count);
  for (std::size_t m = 0; m < events_.size(); ++m)
    by_sender_[events_[m].sender.index].push_back(static_cast<std::uint32_t>(m));
}

std::size_t CachedDesign::selection_count() const {
  std::size_t total = 0;
  for (const auto& ev : events_) total += ev.chosen.size();
  return total;
}

}  // namespace relcox
