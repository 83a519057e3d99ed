#include "relcox/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "relcox/error.hpp"
#include "relcox/symmetric_polynomial.hpp"

namespace relcox {

ExpectedMode parse_expected_mode(std::string_view s) {
  if (s == "duplication") return ExpectedMode::duplication;
  if (s == "multicast" || s == "exact") return ExpectedMode::multicast;
  throw ConfigError("unknown expected-count mode '" + std::string(s) + "'");
}

PairCounts expected_counts(const CachedDesign& design, const Eigen::VectorXd& beta, ExpectedMode mode) {
  const auto& ctx = design.context();
  const auto n = static_cast<Eigen::Index>(ctx.actor_count);
  Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::uint8_t> at_risk(static_cast<std::size_t>(n * n), 0);

  for (const auto& ev : design.events()) {
    const RiskRows rr = risk_rows(ctx, ev);
    const Eigen::VectorXd eta = rr.x * beta;
    const auto i = static_cast<Eigen::Index>(ev.sender.index);
    const std::size_t L = ev.chosen.size();
    Eigen::VectorXd share;
    if (mode == ExpectedMode::multicast && L > 1) {
      share = inclusion_probabilities(std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())), L);
    } else {
      share = (eta.array() - eta.maxCoeff()).exp().matrix();
      share *= static_cast<double>(L) / share.sum();
    }
    for (std::size_t k = 0; k < rr.receivers.size(); ++k) {
      const auto j = static_cast<Eigen::Index>(rr.receivers[k].index);
      expected(i, j) += share(static_cast<Eigen::Index>(k));
      at_risk[static_cast<std::size_t>(i * n + j)] = 1;
    }
    for (ActorId j : ev.chosen) observed(i, static_cast<Eigen::Index>(j.index)) += 1.0;
  }

  PairCounts out;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool risk = at_risk[static_cast<std::size_t>(i * n + j)] != 0;
      out.pairs_at_risk += risk;
      if (risk || observed(i, j) > 0)
        out.pairs.push_back({ActorId(static_cast<std::size_t>(i)), ActorId(static_cast<std::size_t>(j)),
                             observed(i, j), expected(i, j)});
    }
  return out;
}

double conservation_error(const PairCounts& counts) {
  double worst = 0.0;
  std::size_t k = 0;
  while (k < counts.pairs.size()) {
    const ActorId i = counts.pairs[k].sender;
    double obs = 0.0, exp = 0.0;
    for (; k < counts.pairs.size() && counts.pairs[k].sender == i; ++k) {
      obs += counts.pairs[k].observed;
      exp += counts.pairs[k].expected;
    }
    worst = std::max(worst, std::abs(exp - obs));
  }
  return worst;
}

ResidualReport residuals(const PairCounts& counts, std::size_t parameters) {
  ResidualReport rep;
  for (const auto& pc : counts.pairs) {
    if (pc.observed == 0.0 && pc.expected == 0.0) continue;
    Residual r{pc.sender, pc.receiver, pc.observed, pc.expected, pc.observed - pc.expected, 0.0};
    if (pc.expected > 0.0) {
      r.pearson = r.martingale / std::sqrt(pc.expected);
      rep.x2 += r.pearson * r.pearson;
    } else {
      r.pearson = std::numeric_limits<double>::infinity();
      ++rep.anomalies;
    }
    rep.rows.push_back(r);
  }
  rep.df_approx = static_cast<double>(counts.pairs_at_risk) - static_cast<double>(parameters);
  return rep;
}

ResidualSummary residual_summary(const ResidualReport& report, const std::vector<double>& probs) {
  ResidualSummary s;
  s.probs = probs;
  s.x2 = report.x2;
  s.df_approx = report.df_approx;
  s.pairs = report.rows.size();
  s.anomalies = report.anomalies;
  std::vector<double> a;
  for (const auto& r : report.rows)
    if (std::isfinite(r.pearson)) a.push_back(std::abs(r.pearson));
  std::sort(a.begin(), a.end());
  s.max_abs = a.empty() ? 0.0 : a.back();
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile probabilities must lie in [0, 1]");
    if (a.empty()) {
      s.quantiles.push_back(0.0);
      continue;
    }
    const double h = (static_cast<double>(a.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, a.size() - 1);
    s.quantiles.push_back(a[lo] + (h - static_cast<double>(lo)) * (a[hi] - a[lo]));
  }
  return s;
}

void write_residuals_csv(std::ostream& out, const ResidualReport& report, const IdMap& ids) {
  out << "sender,receiver,observed,expected,martingale,pearson\n";
  for (const auto& r : report.rows) {
    out << ids.label(r.sender) << ',' << ids.label(r.receiver) << ',' << format_time(r.observed) << ','
        << format_time(r.expected) << ',' << format_time(r.martingale) << ',';
    if (std::isfinite(r.pearson))
      out << format_time(r.pearson);
    else
      out << "inf";
    out << '\n';
  }
}

}  // namespace relcox
