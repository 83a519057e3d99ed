#include "relcox/likelihood.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <thread>

#include "relcox/error.hpp"
#include "relcox/symmetric_polynomial.hpp"

namespace relcox {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::pairwise: return "pairwise";
    case Variant::exact_multicast: return "exact";
    case Variant::approx_multicast: return "approx";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "pairwise") return Variant::pairwise;
  if (s == "exact" || s == "exact_multicast") return Variant::exact_multicast;
  if (s == "approx" || s == "approx_multicast") return Variant::approx_multicast;
  throw ConfigError("unknown likelihood variant '" + std::string(s) + "'");
}

double weight(const Eigen::VectorXd& beta, const Eigen::VectorXd& x, bool in_risk_set) {
  return in_risk_set ? std::exp(beta.dot(x)) : 0.0;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RELCOX_THREADS")) {
    unsigned v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    if (std::from_chars(env, end, v).ec == std::errc() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ClassBaseline class_baseline(const SenderClass& cls, const Eigen::VectorXd& beta_static) {
  ClassBaseline b;
  const Eigen::Index n0 = cls.x0.rows();
  b.eta0 = n0 > 0 && cls.x0.cols() > 0 ? Eigen::VectorXd(cls.x0 * beta_static) : Eigen::VectorXd::Zero(n0);
  b.log_scale = n0 > 0 ? b.eta0.maxCoeff() : 0.0;
  b.w0 = (b.eta0.array() - b.log_scale).exp().matrix();
  b.w0_sum = b.w0.sum();
  b.pi0 = b.w0_sum > 0 ? Eigen::VectorXd(b.w0 / b.w0_sum) : Eigen::VectorXd::Zero(n0);
  b.e0 = cls.x0.transpose() * b.pi0;
  b.v0 = cls.x0.transpose() * b.pi0.asDiagonal() * cls.x0 - b.e0 * b.e0.transpose();
  return b;
}

double SenderSnapshot::probability(const SenderClass& cls, const ClassBaseline& base, ActorId j) const {
  auto it = std::lower_bound(receivers.begin(), receivers.end(), j);
  if (it != receivers.end() && *it == j) return pi(it - receivers.begin());
  const auto r = cls.row[j.index];
  return r < 0 ? 0.0 : gamma * base.pi0(r);
}

namespace {

using SpIt = Eigen::SparseMatrix<double>::InnerIterator;

// Scratch for one event against its class baseline.
struct EventKernel {
  std::vector<double> eta;  // beta' x - log_scale for touched receivers
  Eigen::VectorXd dpi;
  Eigen::VectorXd pi;
  double gamma = 1.0;
  double log_wt = 0.0;
  bool stable = true;

  void run(const DesignContext& ctx, const SenderClass& cls, const ClassBaseline& base, const EventDesign& ev,
           const Eigen::VectorXd& beta, bool prefer_sparse = false) {
    const auto ps = static_cast<Eigen::Index>(ctx.static_dim);
    const auto pd = static_cast<Eigen::Index>(ctx.dynamic_dim);
    const std::size_t nt = ev.touched.size();
    if (ev.risk_size == 0)
      throw DegenerateSenderError("sender " + std::to_string(ev.sender.index) + " has an empty risk set");
    eta.resize(nt);
    double shift = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      const auto r = cls.row[ev.touched[t].index];
      double v = base.eta0(r) - base.log_scale;
      for (SpIt it(ev.dx, static_cast<Eigen::Index>(t)); it; ++it) v += beta(ps + it.row()) * it.value();
      eta[t] = v;
      if (ev.at_risk[t]) shift = std::max(shift, v);
    }
    (void)pd;
    const double scale = std::exp(-shift);
    const double w0 = base.w0_sum * scale;
    double wt = w0;
    double mass = w0;
    dpi.resize(static_cast<Eigen::Index>(nt));
    for (std::size_t t = 0; t < nt; ++t) {
      const auto r = cls.row[ev.touched[t].index];
      const double now = ev.at_risk[t] ? std::exp(eta[t] - shift) : 0.0;
      const double d = now - base.w0(r) * scale;
      dpi(static_cast<Eigen::Index>(t)) = d;
      wt += d;
      mass += std::abs(d);
    }
    // The update cancels against W_0 when most of the mass moved; the dense
    // path is then both cheaper and exact.
    stable = wt > 0.1 * mass && (prefer_sparse || 2 * nt < cls.receivers.size());
    if (!stable) return;
    gamma = w0 / wt;
    dpi /= wt;
    log_wt = std::log(wt) + shift + base.log_scale;
    pi.resize(static_cast<Eigen::Index>(nt));
    for (std::size_t t = 0; t < nt; ++t) {
      const auto r = cls.row[ev.touched[t].index];
      pi(static_cast<Eigen::Index>(t)) = ev.at_risk[t] ? gamma * base.pi0(r) + dpi(static_cast<Eigen::Index>(t)) : 0.0;
    }
  }
};

struct SenderAccumulator {
  bool used = false;
  double logpl = 0.0;
  Eigen::VectorXd chosen;  // sum of chosen covariate rows
  double g = 0.0;          // sum L gamma
  double g2 = 0.0;         // sum L gamma (1 - gamma)
  Eigen::VectorXd sdpi;    // per J_0 row: sum L dpi
  Eigen::VectorXd sgdpi;   // per J_0 row: sum L gamma dpi
  Eigen::VectorXd b;       // sum L b
  Eigen::VectorXd gb;      // sum L gamma b
  Eigen::MatrixXd aa;      // sum L a a'
  Eigen::MatrixXd ba;      // sum L b a'
  Eigen::MatrixXd dacc;    // per J_0 row: sum L pi_j d_j
  Eigen::MatrixXd dd;      // sum L (sum pi d d' - b b')
  Eigen::VectorXd dense_e;
  Eigen::MatrixXd dense_v;
  bool any_dense = false;
  std::size_t sparse = 0;  // events taken through the incremental update

  void init(const DesignContext& ctx, const SenderClass& cls, int order) {
    used = true;
    const auto p = static_cast<Eigen::Index>(ctx.dimension());
    const auto ps = static_cast<Eigen::Index>(ctx.static_dim);
    const auto pd = static_cast<Eigen::Index>(ctx.dynamic_dim);
    const auto n0 = static_cast<Eigen::Index>(cls.receivers.size());
    if (order >= 1) {
      chosen.setZero(p);
      sdpi.setZero(n0);
      b.setZero(pd);
      dense_e.setZero(p);
    }
    if (order >= 2) {
      sgdpi.setZero(n0);
      gb.setZero(pd);
      aa.setZero(ps, ps);
      ba.setZero(pd, ps);
      dacc.setZero(pd, n0);
      dd.setZero(pd, pd);
      dense_v.setZero(p, p);
    }
  }
};

struct SenderResult {
  double logpl = 0.0;
  std::size_t sparse = 0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

struct Evaluator {
  const DesignContext& ctx;
  const Eigen::VectorXd& beta;
  const LikelihoodOptions& opt;
  std::vector<ClassBaseline> bases;

  Evaluator(const DesignContext& c, const Eigen::VectorXd& b, const LikelihoodOptions& o)
      : ctx(c), beta(b), opt(o) {
    if (static_cast<std::size_t>(beta.size()) != ctx.dimension())
      throw ConfigError("coefficient vector has length " + std::to_string(beta.size()) + ", expected " +
                        std::to_string(ctx.dimension()));
    if (!beta.allFinite()) throw ConfigError("non-finite coefficients");
    const Eigen::VectorXd bs = beta.head(static_cast<Eigen::Index>(ctx.static_dim));
    for (const auto& cls : ctx.classes) bases.push_back(class_baseline(cls, bs));
  }

  const ReceiverSet& chosen_of(const EventDesign& ev) const {
    if (opt.receivers.empty()) return ev.chosen;
    return opt.receivers[ev.index];
  }

  // Adds the chosen receivers' covariates; returns sum of beta' x over them.
  double add_chosen(const EventDesign& ev, const ReceiverSet& chosen, const SenderClass& cls,
                    const ClassBaseline& base, SenderAccumulator& acc) const {
    const auto ps = static_cast<Eigen::Index>(ctx.static_dim);
    double lin = 0.0;
    for (ActorId j : chosen) {
      if (j.index >= ctx.actor_count || cls.row[j.index] < 0)
        throw RiskSetError("event " + std::to_string(ev.index) + ": receiver outside the risk set");
      const auto r = cls.row[j.index];
      lin += base.eta0(r);
      if (opt.order >= 1) acc.chosen.head(ps) += cls.x0.row(r).transpose();
      if (auto t = ev.touched_index(j)) {
        if (!ev.at_risk[*t])
          throw RiskSetError("event " + std::to_string(ev.index) + ": receiver " + std::to_string(j.index) +
                             " is not in the risk set");
        for (SpIt it(ev.dx, static_cast<Eigen::Index>(*t)); it; ++it) {
          lin += beta(ps + it.row()) * it.value();
          if (opt.order >= 1) acc.chosen(ps + it.row()) += it.value();
        }
      }
    }
    return lin;
  }

  // Full risk-set evaluation: exact multicast or a numerically delicate event.
  double dense_event(const EventDesign& ev, std::size_t L, bool exact, SenderAccumulator& acc) const {
    const RiskRows rr = risk_rows(ctx, ev);
    const Eigen::VectorXd eta = rr.x * beta;
    const std::span<const double> lw(eta.data(), static_cast<std::size_t>(eta.size()));
    if (exact) {
      const SubsetMoments sm = subset_moments(rr.x, lw, L);
      if (opt.order >= 1) acc.dense_e += sm.mean;
      if (opt.order >= 2) acc.dense_v += sm.cov;
      acc.any_dense = true;
      return sm.log_e;
    }
    const double top = eta.maxCoeff();
    Eigen::VectorXd pi = (eta.array() - top).exp().matrix();
    const double total = pi.sum();
    pi /= total;
    const double dl = static_cast<double>(L);
    if (opt.order >= 1) {
      const Eigen::VectorXd e = rr.x.transpose() * pi;
      acc.dense_e += dl * e;
      if (opt.order >= 2) acc.dense_v += dl * (rr.x.transpose() * pi.asDiagonal() * rr.x - e * e.transpose());
    }
    acc.any_dense = true;
    return dl * (std::log(total) + top);
  }

  double event(const EventDesign& ev, SenderAccumulator& acc, EventKernel& k) const {
    const SenderClass& cls = ctx.sender_class(ev.sender);
    const ClassBaseline& base = bases[ctx.class_of[ev.sender.index]];
    if (!acc.used) acc.init(ctx, cls, opt.order);
    const ReceiverSet& chosen = chosen_of(ev);
    const std::size_t L = chosen.size();
    if (L == 0) throw RiskSetError("event " + std::to_string(ev.index) + " has no receivers");
    if (L > ev.risk_size)
      throw RiskSetError("event " + std::to_string(ev.index) + ": " + std::to_string(L) +
                         " receivers exceed the risk set of size " + std::to_string(ev.risk_size));
    if (opt.variant == Variant::pairwise && L > 1)
      throw ConfigError("pairwise likelihood requires single-receiver events (event " +
                        std::to_string(ev.index) + " has " + std::to_string(L) + ")");

    const double lin = add_chosen(ev, chosen, cls, base, acc);
    if (opt.variant == Variant::exact_multicast && L > 1) return lin - dense_event(ev, L, true, acc);

    k.run(ctx, cls, base, ev, beta, opt.prefer_sparse);
    if (!k.stable) return lin - dense_event(ev, L, false, acc);
    ++acc.sparse;

    const double dl = static_cast<double>(L);
    if (opt.order >= 1) {
      const auto ps = static_cast<Eigen::Index>(ctx.static_dim);
      acc.g += dl * k.gamma;
      Eigen::VectorXd bvec = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx.dynamic_dim));
      Eigen::VectorXd a = Eigen::VectorXd::Zero(ps);
      for (std::size_t t = 0; t < ev.touched.size(); ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        const auto r = cls.row[ev.touched[t].index];
        acc.sdpi(r) += dl * k.dpi(ti);
        for (SpIt it(ev.dx, ti); it; ++it) bvec(it.row()) += k.pi(ti) * it.value();
        if (opt.order >= 2) {
          acc.sgdpi(r) += dl * k.gamma * k.dpi(ti);
          if (ps > 0) a.noalias() += k.dpi(ti) * cls.x0.row(r).transpose();
          const double c = dl * k.pi(ti);
          for (SpIt it(ev.dx, ti); it; ++it) {
            acc.dacc(it.row(), r) += c * it.value();
            for (SpIt jt(ev.dx, ti); jt; ++jt) acc.dd(it.row(), jt.row()) += c * it.value() * jt.value();
          }
        }
      }
      acc.b += dl * bvec;
      if (opt.order >= 2) {
        acc.g2 += dl * k.gamma * (1.0 - k.gamma);
        acc.gb += dl * k.gamma * bvec;
        acc.aa.noalias() += dl * a * a.transpose();
        acc.ba.noalias() += dl * bvec * a.transpose();
        acc.dd.noalias() -= dl * bvec * bvec.transpose();
      }
    }
    return lin - dl * k.log_wt;
  }

  SenderResult finish(const SenderClass& cls, const ClassBaseline& base, const SenderAccumulator& acc) const {
    SenderResult out;
    out.logpl = acc.logpl;
    out.sparse = acc.sparse;
    if (opt.order < 1) return out;
    const auto p = static_cast<Eigen::Index>(ctx.dimension());
    const auto ps = static_cast<Eigen::Index>(ctx.static_dim);
    const auto pd = static_cast<Eigen::Index>(ctx.dynamic_dim);
    Eigen::VectorXd e(p);
    e.head(ps) = acc.g * base.e0 + cls.x0.transpose() * acc.sdpi;
    e.tail(pd) = acc.b;
    out.score = acc.chosen - e - acc.dense_e;
    if (opt.order < 2) return out;

    out.information.setZero(p, p);
    const Eigen::VectorXd u = cls.x0.transpose() * acc.sgdpi;
    auto vss = out.information.topLeftCorner(ps, ps);
    vss = acc.g * base.v0 + acc.g2 * base.e0 * base.e0.transpose() - base.e0 * u.transpose() -
          u * base.e0.transpose() + cls.x0.transpose() * acc.sdpi.asDiagonal() * cls.x0 - acc.aa;
    const Eigen::MatrixXd vds = acc.dacc * cls.x0 - acc.gb * base.e0.transpose() - acc.ba;
    out.information.bottomLeftCorner(pd, ps) = vds;
    out.information.topRightCorner(ps, pd) = vds.transpose();
    out.information.bottomRightCorner(pd, pd) = acc.dd;
    out.information += acc.dense_v;
    out.information = 0.5 * (out.information + out.information.transpose()).eval();
    return out;
  }

  LikelihoodReport reduce(const std::vector<SenderResult>& results, const std::vector<std::uint8_t>& active,
                          std::size_t events) const {
    LikelihoodReport rep;
    const auto p = static_cast<Eigen::Index>(ctx.dimension());
    rep.events = events;
    rep.sender_logpl.assign(ctx.actor_count, 0.0);
    if (opt.order >= 1) rep.score.setZero(p);
    if (opt.order >= 2) rep.information.setZero(p, p);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!active[i]) continue;
      rep.sender_logpl[i] = results[i].logpl;
      rep.logpl += results[i].logpl;
      rep.sparse_events += results[i].sparse;
      if (opt.order >= 1) rep.score += results[i].score;
      if (opt.order >= 2) rep.information += results[i].information;
    }
    return rep;
  }
};

}  // namespace

SenderSnapshot sender_snapshot(const DesignContext& ctx, const ClassBaseline& base, const EventDesign& ev,
                               const Eigen::VectorXd& beta) {
  const SenderClass& cls = ctx.sender_class(ev.sender);
  EventKernel k;
  k.run(ctx, cls, base, ev, beta);
  if (!k.stable) {
    // Recompute the normalizer directly over the risk set.
    const RiskRows rr = risk_rows(ctx, ev);
    const Eigen::VectorXd eta = rr.x * beta;
    const double top = eta.maxCoeff();
    const double wt = (eta.array() - top).exp().sum();
    k.log_wt = std::log(wt) + top;
    const double log_w0 = std::log(base.w0_sum) + base.log_scale;
    k.gamma = std::exp(log_w0 - k.log_wt);
    k.pi.resize(static_cast<Eigen::Index>(ev.touched.size()));
    k.dpi.resize(k.pi.size());
    for (std::size_t t = 0; t < ev.touched.size(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const auto r = cls.row[ev.touched[t].index];
      k.pi(ti) = ev.at_risk[t] ? std::exp(k.eta[t] + base.log_scale - k.log_wt) : 0.0;
      k.dpi(ti) = k.pi(ti) - k.gamma * base.pi0(r);
    }
  }
  SenderSnapshot s;
  s.sender = ev.sender;
  s.time = ev.time;
  s.log_w0 = std::log(base.w0_sum) + base.log_scale;
  s.log_wt = k.log_wt;
  s.gamma = k.gamma;
  s.receivers = ev.touched;
  s.delta_pi = k.dpi;
  s.pi = k.pi;
  return s;
}

LikelihoodReport Likelihood::evaluate(const Eigen::VectorXd& beta, const LikelihoodOptions& options) const {
  const DesignContext& ctx = design_->context();
  const auto& events = design_->events();
  if (!options.receivers.empty() && options.receivers.size() != events.size())
    throw ConfigError("receiver override has " + std::to_string(options.receivers.size()) + " entries for " +
                      std::to_string(events.size()) + " events");
  Evaluator ev(ctx, beta, options);
  const auto& groups = design_->by_sender();
  std::vector<SenderResult> results(ctx.actor_count);
  std::vector<std::uint8_t> active(ctx.actor_count, 0);
  std::vector<double> terms(options.keep_terms ? events.size() : 0);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const auto work = [&] {
    EventKernel kernel;
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= groups.size()) break;
      if (groups[i].empty()) continue;
      try {
        SenderAccumulator acc;
        for (std::uint32_t m : groups[i]) {
          const double term = ev.event(events[m], acc, kernel);
          acc.logpl += term;
          if (options.keep_terms) terms[m] = term;
        }
        const ActorId sender(i);
        results[i] = ev.finish(ctx.sender_class(sender), ev.bases[ctx.class_of[i]], acc);
        active[i] = 1;
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };

  const unsigned threads = std::min<unsigned>(resolve_threads(options.threads),
                                              static_cast<unsigned>(std::max<std::size_t>(1, groups.size())));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  LikelihoodReport rep = ev.reduce(results, active, events.size());
  rep.terms = std::move(terms);
  return rep;
}

LikelihoodReport evaluate_streaming(const DesignBuilder& builder, const Eigen::VectorXd& beta,
                                    const LikelihoodOptions& options) {
  const auto ctx = builder.context();
  const std::size_t n_events = builder.stream().size();
  if (!options.receivers.empty() && options.receivers.size() != n_events)
    throw ConfigError("receiver override size does not match the stream");
  Evaluator ev(*ctx, beta, options);
  std::vector<SenderAccumulator> accs(ctx->actor_count);
  std::vector<double> terms(options.keep_terms ? n_events : 0);
  EventKernel kernel;
  builder.replay([&](const EventDesign& e) {
    auto& acc = accs[e.sender.index];
    const double term = ev.event(e, acc, kernel);
    acc.logpl += term;
    if (options.keep_terms) terms[e.index] = term;
  });
  std::vector<SenderResult> results(ctx->actor_count);
  std::vector<std::uint8_t> active(ctx->actor_count, 0);
  for (std::size_t i = 0; i < accs.size(); ++i) {
    if (!accs[i].used) continue;
    results[i] = ev.finish(ctx->sender_class(ActorId(i)), ev.bases[ctx->class_of[i]], accs[i]);
    active[i] = 1;
  }
  LikelihoodReport rep = ev.reduce(results, active, n_events);
  rep.terms = std::move(terms);
  return rep;
}

std::vector<double> growth_sequence(const EventStream& stream, const RiskSetPolicy& policy) {
  std::vector<double> g;
  g.reserve(stream.size());
  double total = 0.0;
  for (const Event& e : stream.events()) {
    if (e.receivers.size() > 1) {
      const std::size_t r = policy.risk_size(stream.actor_count(), e.time, e.sender);
      if (r > 0) total += 1.0 / static_cast<double>(r);
    }
    g.push_back(total);
  }
  return g;
}

ApproximationBound approximation_bound(const CachedDesign& design, const Eigen::VectorXd& beta) {
  ApproximationBound out;
  double k = 0.0;
  double sum_g = 0.0;
  double sum_h = 0.0;
  for (const auto& ev : design.events()) {
    const RiskRows rr = risk_rows(design.context(), ev);
    if (rr.x.rows() > 0) k = std::max(k, rr.x.rowwise().norm().maxCoeff());
    const double L = static_cast<double>(ev.chosen.size());
    const double r = static_cast<double>(ev.risk_size);
    sum_g += L * L * (L - 1.0) / r;
    sum_h += L * L * L * (L - 1.0) / r;
  }
  const double growth = std::exp(4.0 * k * beta.norm());
  out.covariate_norm = k;
  out.gradient = k * growth * sum_g;
  out.hessian = 2.0 * k * k * growth * sum_h;
  return out;
}

void write_terms_csv(std::ostream& out, const CachedDesign& design, const LikelihoodReport& report) {
  out << "event_index,sender,logterm\n";
  const auto& ids = design.events();
  char buf[64];
  for (std::size_t m = 0; m < report.terms.size() && m < ids.size(); ++m) {
    auto res = std::to_chars(buf, buf + sizeof buf, report.terms[m]);
    out << m << ',' << ids[m].sender.index << ',' << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

}  // namespace relcox
