#include "relcox/solver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "relcox/error.hpp"

namespace relcox {

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace {

std::vector<Eigen::Index> active_indices(const SolverConfig& cfg, std::size_t p) {
  if (!cfg.active.empty() && cfg.active.size() != p)
    throw ConfigError("active mask has " + std::to_string(cfg.active.size()) + " entries, expected " +
                      std::to_string(p));
  std::vector<Eigen::Index> idx;
  for (std::size_t k = 0; k < p; ++k)
    if (cfg.active.empty() || cfg.active[k]) idx.push_back(static_cast<Eigen::Index>(k));
  return idx;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(idx[a]);
  return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) out(a, b) = m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  return out;
}

// Solves (I + ridge * scale) d = u, escalating the ridge until the factor is
// positive definite. Returns false if no admissible ridge works.
bool newton_direction(const Eigen::MatrixXd& info, const Eigen::VectorXd& u, const SolverConfig& cfg,
                      double& ridge, Eigen::VectorXd& dir) {
  const Eigen::Index n = info.rows();
  if (n == 0) {
    dir.resize(0);
    return true;
  }
  const double scale = std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
  double lambda = cfg.ridge;
  while (true) {
    Eigen::MatrixXd a = info;
    a.diagonal().array() += lambda * scale;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const auto d = ldlt.vectorD();
    const bool pd = ldlt.info() == Eigen::Success && d.minCoeff() > 1e-12 * scale;
    if (pd) {
      dir = ldlt.solve(u);
      if (dir.allFinite()) {
        ridge = lambda;
        return true;
      }
    }
    if (lambda >= cfg.ridge_max) return false;
    lambda = lambda <= 0.0 ? cfg.ridge_min : std::min(cfg.ridge_max, lambda * 10.0);
  }
}

}  // namespace

FitResult fit(const Likelihood& likelihood, Variant variant, const SolverConfig& config) {
  const CachedDesign& design = likelihood.design();
  const std::size_t p = likelihood.dimension();
  if (p == 0) throw ConfigError("model has no coefficients");
  if (design.size() == 0) throw ConfigError("no events to fit");
  if (!(config.shrink > 0.0 && config.shrink < 1.0)) throw ConfigError("line-search shrink must lie in (0, 1)");
  if (!(config.grad_tol > 0.0)) throw ConfigError("gradient tolerance must be positive");

  const auto idx = active_indices(config, p);
  FitResult res;
  res.variant = variant;
  res.names = design.context().names;
  res.n_events = design.size();
  res.selections = 0;
  for (std::size_t m = 0; m < design.size(); ++m)
    res.selections += config.receivers.empty() ? design.events()[m].chosen.size() : config.receivers[m].size();
  res.free_parameters = idx.size();

  LikelihoodOptions opt;
  opt.variant = variant;
  opt.threads = config.threads;
  opt.receivers = config.receivers;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (config.start) {
    if (static_cast<std::size_t>(config.start->size()) != p) throw ConfigError("start vector has the wrong length");
    for (auto k : idx) beta(k) = (*config.start)(k);
  }

  const double tol = config.grad_tol * std::max<double>(1.0, static_cast<double>(design.size()));
  opt.order = 2;
  LikelihoodReport rep = likelihood.evaluate(beta, opt);
  res.trace.push_back(rep.logpl);

  double ridge = 0.0;
  for (int iter = 0;; ++iter) {
    const Eigen::VectorXd u = gather(rep.score, idx);
    if (u.size() == 0 || u.cwiseAbs().maxCoeff() <= tol) {
      res.converged = true;
      break;
    }
    if (iter >= config.max_iters) break;
    const Eigen::MatrixXd info = gather(rep.information, idx);
    Eigen::VectorXd dir;
    if (!newton_direction(info, u, config, ridge, dir))
      throw SingularInformationError("information matrix is singular even with ridge " +
                                     std::to_string(config.ridge_max));
    res.ridge_used = std::max(res.ridge_used, ridge);

    const double slope = u.dot(dir);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial = beta;
    opt.order = 0;
    for (int bt = 0; bt <= config.max_backtracks; ++bt) {
      for (std::size_t a = 0; a < idx.size(); ++a) trial(idx[a]) = beta(idx[a]) + step * dir(static_cast<Eigen::Index>(a));
      double value = -std::numeric_limits<double>::infinity();
      try {
        value = likelihood.evaluate(trial, opt).logpl;
      } catch (const ConfigError&) {
        // non-finite trial point
      }
      if (std::isfinite(value) && value >= rep.logpl + config.sufficient_decrease * step * slope) {
        accepted = true;
        break;
      }
      step *= config.shrink;
    }
    opt.order = 2;
    if (!accepted) break;  // no ascent possible at working precision
    beta = trial;
    rep = likelihood.evaluate(beta, opt);
    res.trace.push_back(rep.logpl);
    res.iterations = iter + 1;
  }

  res.beta = beta;
  res.logpl = rep.logpl;
  res.score = rep.score;
  res.information = rep.information;

  // Identifiability: coefficients loading on near-null directions of the information.
  const Eigen::MatrixXd info = gather(rep.information, idx);
  std::vector<std::uint8_t> flagged(idx.size(), 0);
  if (info.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    for (Eigen::Index e = 0; e < es.eigenvalues().size(); ++e) {
      if (es.eigenvalues()(e) > 1e-9 * top) continue;
      for (Eigen::Index a = 0; a < es.eigenvectors().rows(); ++a)
        if (std::abs(es.eigenvectors()(a, e)) > 0.1) flagged[static_cast<std::size_t>(a)] = 1;
    }
  }
  std::vector<Eigen::Index> keep;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (flagged[a])
      res.unidentifiable.push_back(static_cast<std::size_t>(idx[a]));
    else
      keep.push_back(static_cast<Eigen::Index>(a));
  }

  const auto pp = static_cast<Eigen::Index>(p);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.cov = Eigen::MatrixXd::Constant(pp, pp, nan);
  // Pinned coefficients are fixed, not estimated.
  for (Eigen::Index k = 0; k < pp; ++k)
    if (!config.active.empty() && !config.active[static_cast<std::size_t>(k)]) {
      res.cov.row(k).setZero();
      res.cov.col(k).setZero();
    }
  if (!keep.empty()) {
    const auto nk = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd sub(nk, nk);
    for (Eigen::Index a = 0; a < nk; ++a)
      for (Eigen::Index b = 0; b < nk; ++b)
        sub(a, b) = info(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
    const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(nk, nk));
    for (Eigen::Index a = 0; a < nk; ++a)
      for (Eigen::Index b = 0; b < nk; ++b)
        res.cov(idx[static_cast<std::size_t>(keep[static_cast<std::size_t>(a)])],
                idx[static_cast<std::size_t>(keep[static_cast<std::size_t>(b)])]) = inv(a, b);
  }
  res.se = res.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index k = 0; k < pp; ++k)
    if (std::isnan(res.cov(k, k))) res.se(k) = nan;

  res.residual_df = static_cast<double>(res.selections) - static_cast<double>(idx.size());
  if (res.residual_df > 0) res.overdispersion = res.deviance() / res.residual_df;
  return res;
}

Eigen::VectorXd standard_errors(const FitResult& fit, bool adjust_overdispersion) {
  Eigen::VectorXd se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index k = 0; k < se.size(); ++k)
    if (std::isnan(fit.cov(k, k))) se(k) = std::numeric_limits<double>::quiet_NaN();
  if (adjust_overdispersion && std::isfinite(fit.overdispersion)) se *= std::sqrt(fit.overdispersion);
  return se;
}

std::vector<WaldTest> wald_tests(const FitResult& fit, double alpha, bool adjust_overdispersion) {
  const Eigen::VectorXd se = standard_errors(fit, adjust_overdispersion);
  std::vector<WaldTest> out;
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    WaldTest w;
    w.name = static_cast<std::size_t>(k) < fit.names.size() ? fit.names[static_cast<std::size_t>(k)] : "";
    w.estimate = fit.beta(k);
    w.se = se(k);
    w.z = w.estimate == 0.0 ? 0.0 : w.estimate / w.se;
    w.p_value = std::isfinite(w.z) ? normal_two_sided_p(w.z) : (std::isnan(w.z) ? std::nan("") : 0.0);
    w.significant = w.p_value < alpha;
    out.push_back(w);
  }
  return out;
}

DevianceTable deviance_table(const Likelihood& likelihood, const std::vector<std::string>& groups,
                             const std::vector<std::string>& coefficient_groups, Variant variant,
                             const SolverConfig& config) {
  const std::size_t p = likelihood.dimension();
  if (coefficient_groups.size() != p) throw ConfigError("coefficient group labels do not match the model");
  std::set<std::string> known(coefficient_groups.begin(), coefficient_groups.end());
  std::set<std::string> used;
  std::vector<std::set<std::string>> rows;
  for (const auto& entry : groups) {
    std::set<std::string> members;
    std::stringstream ss(entry);
    std::string part;
    while (std::getline(ss, part, '+')) {
      if (!known.count(part)) throw ConfigError("unknown coefficient group '" + part + "'");
      if (!used.insert(part).second) throw ConfigError("coefficient group '" + part + "' listed twice");
      members.insert(part);
    }
    rows.push_back(std::move(members));
  }
  for (const auto& g : known)
    if (!used.count(g)) throw ConfigError("deviance groups do not cover '" + g + "'");

  DevianceTable table;
  LikelihoodOptions opt;
  opt.variant = variant;
  opt.order = 0;
  opt.threads = config.threads;
  const double null_dev = -2.0 * likelihood.evaluate(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), opt).logpl;
  const double null_df = static_cast<double>(likelihood.design().selection_count());
  table.rows.push_back({"Null", 0, 0.0, null_df, null_dev});

  std::vector<std::uint8_t> active(p, 0);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double prev_dev = null_dev;
  double resid_df = null_df;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t df = 0;
    for (std::size_t k = 0; k < p; ++k)
      if (rows[r].count(coefficient_groups[k])) {
        active[k] = 1;
        ++df;
      }
    SolverConfig cfg = config;
    cfg.active = active;
    cfg.start = start;
    FitResult f = fit(likelihood, variant, cfg);
    start = f.beta;
    resid_df -= static_cast<double>(df);
    const double dev = f.deviance();
    table.rows.push_back({groups[r], df, prev_dev - dev, resid_df, dev});
    prev_dev = dev;
    table.fits.push_back(std::move(f));
  }
  return table;
}

}  // namespace relcox
