#include "relcox/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relcox/error.hpp"
#include "relcox/symmetric_polynomial.hpp"

namespace relcox {

std::string to_string(Sampler s) { return s == Sampler::successive ? "successive" : "conditional_poisson"; }

Sampler parse_sampler(std::string_view s) {
  if (s == "successive" || s == "sequential_wor" || s == "exponential_keys") return Sampler::successive;
  if (s == "conditional_poisson") return Sampler::conditional_poisson;
  throw ConfigError("unknown sampler '" + std::string(s) + "'");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal quantile needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Philox4x32 replicate_rng(std::uint64_t seed, std::size_t r) {
  return Philox4x32(seed, substream_id(streams::kBootstrap, r));
}

namespace {

ReceiverSet draw_one(const RiskRows& rr, std::span<const double> lw, std::size_t L, Sampler sampler,
                     Philox4x32& rng) {
  return sampler == Sampler::successive ? sample_successive(rr.receivers, lw, L, rng)
                                        : sample_conditional_poisson(rr.receivers, lw, L, rng);
}

}  // namespace

std::vector<ReceiverSet> draw_replicate(const CachedDesign& design, const Eigen::VectorXd& beta, Sampler sampler,
                                        Philox4x32& rng) {
  std::vector<ReceiverSet> out;
  out.reserve(design.size());
  for (const auto& ev : design.events()) {
    const RiskRows rr = risk_rows(design.context(), ev);
    const Eigen::VectorXd eta = rr.x * beta;
    out.push_back(draw_one(rr, std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())),
                           ev.chosen.size(), sampler, rng));
  }
  return out;
}

std::vector<std::vector<ReceiverSet>> draw_replicates(const CachedDesign& design, const Eigen::VectorXd& beta,
                                                      Sampler sampler, std::uint64_t seed, std::size_t first,
                                                      std::size_t count) {
  std::vector<Philox4x32> rngs;
  for (std::size_t r = 0; r < count; ++r) rngs.push_back(replicate_rng(seed, first + r));
  std::vector<std::vector<ReceiverSet>> out(count);
  for (auto& v : out) v.reserve(design.size());
  for (const auto& ev : design.events()) {
    const RiskRows rr = risk_rows(design.context(), ev);
    const Eigen::VectorXd eta = rr.x * beta;
    const std::span<const double> lw(eta.data(), static_cast<std::size_t>(eta.size()));
    for (std::size_t r = 0; r < count; ++r) out[r].push_back(draw_one(rr, lw, ev.chosen.size(), sampler, rngs[r]));
  }
  return out;
}

BootstrapReport bootstrap_bias(const Likelihood& likelihood, const FitResult& original, const BootstrapConfig& config,
                               const SolverConfig& solver) {
  if (config.replicates == 0) throw ConfigError("bootstrap needs at least one replicate");
  const auto p = original.beta.size();
  BootstrapReport rep;
  rep.beta_tilde = original.beta;
  rep.se_tilde = original.se;
  rep.replicates = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(config.replicates), p,
                                             std::numeric_limits<double>::quiet_NaN());
  rep.ok.assign(config.replicates, 0);

  // Draw in blocks so that memory stays bounded for long streams.
  constexpr std::size_t kBlock = 32;
  for (std::size_t first = 0; first < config.replicates; first += kBlock) {
    const std::size_t count = std::min(kBlock, config.replicates - first);
    const auto sets = draw_replicates(likelihood.design(), original.beta, config.sampler, config.seed, first, count);
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t r = first + c;
      SolverConfig cfg = solver;
      cfg.start = original.beta;
      cfg.max_iters = config.max_iters;
      cfg.receivers = sets[c];
      try {
        const FitResult f = fit(likelihood, Variant::approx_multicast, cfg);
        if (!f.converged || !f.beta.allFinite()) continue;
        rep.replicates.row(static_cast<Eigen::Index>(r)) = f.beta.transpose();
        rep.ok[r] = 1;
      } catch (const Error&) {
        // counted as skipped below
      }
    }
  }

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  std::size_t good = 0;
  for (std::size_t r = 0; r < config.replicates; ++r)
    if (rep.ok[r]) {
      sum += rep.replicates.row(static_cast<Eigen::Index>(r)).transpose();
      ++good;
    }
  rep.skipped = config.replicates - good;
  rep.excessive_skips = static_cast<double>(rep.skipped) > 0.05 * static_cast<double>(config.replicates);
  if (good == 0) throw Error("every bootstrap replicate fit failed");

  const Eigen::VectorXd mean = sum / static_cast<double>(good);
  rep.bias_hat = mean - rep.beta_tilde;
  rep.beta_corrected = rep.beta_tilde - rep.bias_hat;

  rep.residual_mean = Eigen::VectorXd::Zero(p);
  rep.residual_sd = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < config.replicates; ++r) {
      if (!rep.ok[r]) continue;
      const double z = (rep.replicates(static_cast<Eigen::Index>(r), k) - rep.beta_tilde(k)) / rep.se_tilde(k);
      s += z;
      s2 += z * z;
    }
    const double g = static_cast<double>(good);
    rep.residual_mean(k) = s / g;
    rep.residual_sd(k) = good > 1 ? std::sqrt(std::max(0.0, (s2 - s * s / g) / (g - 1.0))) : 0.0;
  }
  return rep;
}

CoverageReport coverage_study(const SimConfig& sim, std::size_t replicates, double level, Variant variant,
                              const SolverConfig& solver, double se_inflation) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("coverage level must lie in (0, 1)");
  const auto p = static_cast<Eigen::Index>(sim.spec.dimension());
  const double z = normal_quantile(0.5 + 0.5 * level);
  CoverageReport out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.estimates = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(replicates), p, nan);
  out.ses = out.estimates;
  out.converged.assign(replicates, 0);
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(p);
  for (std::size_t r = 0; r < replicates; ++r) {
    SimConfig cfg = sim;
    cfg.stream = substream_id(streams::kMonteCarlo, r);
    try {
      const EventStream stream = simulate(cfg);
      const DesignBuilder builder(stream, cfg.spec, cfg.policy);
      const CachedDesign design(builder);
      const Likelihood lik(design);
      const FitResult f = fit(lik, variant, solver);
      if (!f.converged) {
        ++out.failures;
        continue;
      }
      const auto row = static_cast<Eigen::Index>(r);
      out.estimates.row(row) = f.beta.transpose();
      out.ses.row(row) = f.se.transpose();
      out.converged[r] = 1;
      for (Eigen::Index k = 0; k < p; ++k)
        if (std::abs(f.beta(k) - sim.beta(k)) <= z * se_inflation * f.se(k)) hits(k) += 1.0;
    } catch (const Error&) {
      ++out.failures;
    }
  }
  const double used = static_cast<double>(replicates - out.failures);
  out.coverage = used > 0 ? Eigen::VectorXd(hits / used) : Eigen::VectorXd::Constant(p, nan);
  return out;
}

}  // namespace relcox
