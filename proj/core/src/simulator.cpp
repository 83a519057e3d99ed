#include "relcox/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relcox/error.hpp"
#include "relcox/symmetric_polynomial.hpp"

namespace relcox {

ReceiverSet sample_receiver_set(std::span<const ActorId> candidates, std::span<const double> log_weights,
                                std::size_t L, Philox4x32& rng) {
  return sample_conditional_poisson(candidates, log_weights, L, rng);
}

ActorTraits random_traits(const std::vector<std::string>& names, std::size_t actor_count, double prob,
                          std::uint64_t seed) {
  ActorTraits traits(names, actor_count);
  Philox4x32 rng(seed, substream_id(streams::kSimulation, 0x545241495453ull));  // "TRAITS"
  for (std::size_t a = 0; a < actor_count; ++a)
    for (std::size_t c = 0; c < names.size(); ++c)
      traits.set(ActorId(a), c, uniform_open(rng) < prob ? 1 : 0);
  return traits;
}

namespace {

void validate(const SimConfig& cfg) {
  if (cfg.actor_count < 2) throw ConfigError("simulation needs at least two actors");
  if (!cfg.horizon && !cfg.target_events) throw ConfigError("simulation needs a horizon or a target event count");
  if (cfg.schedule.empty() && cfg.baseline.size() != cfg.actor_count)
    throw ConfigError("baseline must list one rate per actor");
  for (const auto& seg : cfg.schedule)
    if (seg.rates.size() != cfg.actor_count) throw ConfigError("baseline segment must list one rate per actor");
  for (std::size_t s = 1; s < cfg.schedule.size(); ++s)
    if (cfg.schedule[s].start <= cfg.schedule[s - 1].start)
      throw ConfigError("baseline schedule must be strictly increasing in time");
  const auto check_rates = [](const std::vector<double>& r) {
    for (double v : r)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("baseline rates must be finite and nonnegative");
  };
  check_rates(cfg.baseline);
  for (const auto& seg : cfg.schedule) check_rates(seg.rates);
  if (cfg.size_probs.empty()) throw ConfigError("size distribution is empty");
  double total = 0.0;
  for (double q : cfg.size_probs) {
    if (!(q >= 0.0)) throw ConfigError("size probabilities must be nonnegative");
    total += q;
  }
  if (!(total > 0.0)) throw ConfigError("size distribution has no mass");
  if (static_cast<std::size_t>(cfg.beta.size()) != cfg.spec.dimension())
    throw ConfigError("beta has " + std::to_string(cfg.beta.size()) + " entries, spec needs " +
                      std::to_string(cfg.spec.dimension()));
}

}  // namespace

EventStream simulate(const SimConfig& cfg) {
  validate(cfg);
  const std::size_t n = cfg.actor_count;
  const std::size_t lmax = cfg.size_probs.size();
  const double inf = std::numeric_limits<double>::infinity();
  const double horizon = cfg.horizon.value_or(inf);
  const std::size_t target = cfg.target_events.value_or(std::numeric_limits<std::size_t>::max());

  const ActorTraits* traits = cfg.traits ? &*cfg.traits : nullptr;
  const StaticDesign design(cfg.spec, traits);
  const auto ps = static_cast<Eigen::Index>(cfg.spec.static_dimension());
  const auto pd = static_cast<Eigen::Index>(cfg.spec.dynamic_dimension());
  const Eigen::VectorXd beta_s = cfg.beta.head(ps);
  const Eigen::VectorXd beta_d = cfg.beta.tail(pd);

  // Static part of the linear predictor for every ordered pair.
  Eigen::MatrixXd eta0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (ps > 0) {
    Eigen::VectorXd buf(ps);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        design.fill(ActorId(i), ActorId(j), std::span<double>(buf.data(), static_cast<std::size_t>(ps)));
        eta0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = beta_s.dot(buf);
      }
  }
  std::vector<double> log_q(lmax);
  for (std::size_t l = 0; l < lmax; ++l) log_q[l] = cfg.size_probs[l] > 0 ? std::log(cfg.size_probs[l]) : -inf;

  Philox4x32 rng(cfg.seed, cfg.stream);
  DynamicState state(n, cfg.spec);
  CovariateWorkspace ws;
  DynamicRows rows;
  std::vector<Event> events;

  struct Candidate {
    std::vector<ActorId> risk;
    std::vector<double> eta;
    std::vector<double> log_rate;  // per L (index L-1)
  };
  std::vector<Candidate> cand(n);

  const std::vector<double> idle(n, 0.0);
  const auto rates_at = [&](double u) -> const std::vector<double>& {
    if (cfg.schedule.empty()) return cfg.baseline;
    const std::vector<double>* r = &idle;
    for (const auto& seg : cfg.schedule)
      if (seg.start <= u) r = &seg.rates;
    return *r;
  };
  const auto next_change = [&](double u) {
    for (const auto& seg : cfg.schedule)
      if (seg.start > u) return seg.start;
    return inf;
  };

  double t = cfg.start_time;
  while (events.size() < target && t < horizon) {
    const double b = std::min({state.next_bin_crossing(t), next_change(t), horizon});
    const double mid = std::isfinite(b) ? t + 0.5 * (b - t) : t + 1.0;
    const auto& lambda = rates_at(mid);

    double top = -inf;
    for (std::size_t i = 0; i < n; ++i) {
      Candidate& c = cand[i];
      c.log_rate.assign(lmax, -inf);
      if (!(lambda[i] > 0.0)) continue;
      const ActorId sender(i);
      c.risk = cfg.policy.risk_set(n, mid, sender);
      if (c.risk.empty()) continue;
      if (pd > 0) state.dynamic_rows(mid, sender, ws, rows);
      c.eta.resize(c.risk.size());
      for (std::size_t k = 0; k < c.risk.size(); ++k) {
        const ActorId j = c.risk[k];
        double v = eta0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j.index));
        if (pd > 0)
          if (auto col = rows.find(j)) v += beta_d.dot(rows.values.col(static_cast<Eigen::Index>(*col)));
        c.eta[k] = v;
      }
      const auto le = log_elementary_symmetric(c.eta, std::min(lmax, c.risk.size()));
      for (std::size_t l = 1; l < le.size(); ++l) {
        double r = std::log(lambda[i]) + log_q[l - 1] + le[l];
        if (cfg.normalize_by_subsets) r -= log_binomial(c.risk.size(), l);
        c.log_rate[l - 1] = r;
        top = std::max(top, r);
      }
    }

    if (top == -inf) {
      if (!std::isfinite(b)) throw ConfigError("all simulation rates are zero");
      t = b;
      continue;
    }
    if (top > 700.0) throw ConfigError("simulation intensity overflows; reduce beta or the baseline");
    double total = 0.0;
    for (const auto& c : cand)
      for (double r : c.log_rate) total += std::exp(r - top);
    const double rate = total * std::exp(top);
    const double wait = exponential(rng) / rate;
    if (t + wait >= b) {
      t = b;
      continue;
    }
    if (t + wait == t) throw ConfigError("simulation intensity explodes; reduce the self-exciting coefficients");
    t += wait;

    // Sender and size jointly proportional to their rates.
    double u = uniform_open(rng) * total;
    std::size_t pick_i = n, pick_l = 0;
    for (std::size_t i = 0; i < n && pick_i == n; ++i)
      for (std::size_t l = 0; l < lmax; ++l) {
        const double w = std::exp(cand[i].log_rate[l] - top);
        if (w <= 0.0) continue;
        pick_i = i;
        pick_l = l + 1;
        if (u < w) break;
        u -= w;
        pick_i = n;
      }
    if (pick_i == n) {
      // Rounding left u past the last bucket: take the last positive one.
      for (std::size_t i = n; i-- > 0 && pick_i == n;)
        for (std::size_t l = lmax; l-- > 0;)
          if (cand[i].log_rate[l] > -inf) {
            pick_i = i;
            pick_l = l + 1;
            break;
          }
    }
    const Candidate& c = cand[pick_i];
    Event e;
    e.time = t;
    e.sender = ActorId(pick_i);
    e.receivers = sample_receiver_set(c.risk, c.eta, pick_l, rng);
    state.advance(e);
    events.push_back(std::move(e));
  }

  EventStream out(std::move(events), n);
  if (cfg.traits) out.set_traits(*cfg.traits);
  return out;
}

}  // namespace relcox
