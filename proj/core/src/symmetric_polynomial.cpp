#include "relcox/symmetric_polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "relcox/error.hpp"

namespace relcox {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

void check_size(std::size_t n, std::size_t L) {
  if (L == 0) throw ConfigError("receiver set size must be positive");
  if (L > n)
    throw RiskSetError("receiver set of size " + std::to_string(L) + " exceeds risk set of size " +
                       std::to_string(n));
}

// table[k * (L + 1) + l] = log e_l(w_k, ..., w_{n-1}); row n is the empty suffix.
std::vector<double> suffix_table(std::span<const double> log_w, std::size_t L) {
  const std::size_t n = log_w.size();
  std::vector<double> t((n + 1) * (L + 1), kNegInf);
  t[n * (L + 1)] = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double* next = &t[(k + 1) * (L + 1)];
    double* cur = &t[k * (L + 1)];
    cur[0] = 0.0;
    for (std::size_t l = 1; l <= L; ++l) cur[l] = log_add(next[l], log_w[k] + next[l - 1]);
  }
  return t;
}

}  // namespace

double log_binomial(std::size_t n, std::size_t k) {
  if (k > n) return kNegInf;
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

std::vector<double> log_elementary_symmetric(std::span<const double> log_w, std::size_t L) {
  std::vector<double> e(L + 1, kNegInf);
  e[0] = 0.0;
  for (std::size_t k = 0; k < log_w.size(); ++k)
    for (std::size_t l = std::min(k + 1, L); l >= 1; --l) e[l] = log_add(e[l], log_w[k] + e[l - 1]);
  return e;
}

SubsetMoments subset_moments(const Eigen::MatrixXd& x, std::span<const double> log_w, std::size_t L) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (log_w.size() != n) throw ConfigError("subset_moments: weight and row counts differ");
  check_size(n, L);
  const Eigen::Index p = x.cols();

  const double shift = *std::max_element(log_w.begin(), log_w.end());
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) w(static_cast<Eigen::Index>(k)) = std::exp(log_w[k] - shift);

  // Moments are shift invariant; centering at the single-draw mean keeps the
  // recurrences well conditioned.
  const Eigen::RowVectorXd mu = (w.transpose() * x) / w.sum();

  // Degree l keeps log e_l and the first two conditional moments of the
  // centered subset sum. Each item updates them by a convex combination, so
  // no stage can overflow or underflow whatever the spread of the weights.
  std::vector<double> le(L + 1, kNegInf);
  std::vector<Eigen::VectorXd> g(L + 1, Eigen::VectorXd::Zero(p));
  std::vector<Eigen::MatrixXd> h(L + 1, Eigen::MatrixXd::Zero(p, p));
  le[0] = 0.0;
  Eigen::VectorXd xc(p), gs(p);

  for (std::size_t k = 0; k < n; ++k) {
    xc = (x.row(static_cast<Eigen::Index>(k)) - mu).transpose();
    for (std::size_t l = std::min(k + 1, L); l >= 1; --l) {
      const double with = log_w[k] + le[l - 1];
      const double total = log_add(le[l], with);
      const double b = std::exp(with - total);
      const double a = le[l] == kNegInf ? 0.0 : std::exp(le[l] - total);
      gs = g[l - 1] + xc;
      h[l] *= a;
      h[l].noalias() += b * h[l - 1];
      h[l].noalias() += b * (g[l - 1] * xc.transpose() + xc * g[l - 1].transpose());
      h[l].noalias() += b * xc * xc.transpose();
      g[l] = a * g[l] + b * gs;
      le[l] = total;
    }
  }

  SubsetMoments out;
  out.log_e = le[L];
  out.mean = g[L] + static_cast<double>(L) * mu.transpose();
  out.cov = h[L] - g[L] * g[L].transpose();
  return out;
}

Eigen::VectorXd inclusion_probabilities(std::span<const double> log_w, std::size_t L) {
  const std::size_t n = log_w.size();
  check_size(n, L);
  const auto suffix = suffix_table(log_w, L);
  // prefix[l] = log e_l(w_0..w_{k-1}), rolled forward.
  std::vector<double> prefix(L + 1, kNegInf);
  prefix[0] = 0.0;
  const double log_total = suffix[L];
  Eigen::VectorXd pi(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double* after = &suffix[(k + 1) * (L + 1)];
    double others = kNegInf;  // log e_{L-1} of all weights except k
    for (std::size_t a = 0; a < L; ++a) others = log_add(others, prefix[a] + after[L - 1 - a]);
    pi(static_cast<Eigen::Index>(k)) = std::exp(log_w[k] + others - log_total);
    for (std::size_t l = std::min(k + 1, L); l >= 1; --l) prefix[l] = log_add(prefix[l], log_w[k] + prefix[l - 1]);
  }
  return pi;
}

ReceiverSet sample_conditional_poisson(std::span<const ActorId> items, std::span<const double> log_w,
                                       std::size_t L, Philox4x32& rng) {
  const std::size_t n = items.size();
  if (log_w.size() != n) throw ConfigError("sampler: weight and item counts differ");
  check_size(n, L);
  ReceiverSet out;
  out.reserve(L);
  if (L == n) {
    out.assign(items.begin(), items.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  if (log_binomial(n, L) <= std::log(1e4)) {
    // Enumerate subsets in lexicographic order and invert the CDF.
    std::vector<std::size_t> idx(L);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<double> logp;
    while (true) {
      double s = 0.0;
      for (auto k : idx) s += log_w[k];
      subsets.push_back(idx);
      logp.push_back(s);
      std::size_t pos = L;
      while (pos-- > 0 && idx[pos] == n - L + pos) {
      }
      if (pos == static_cast<std::size_t>(-1)) break;
      ++idx[pos];
      for (std::size_t q = pos + 1; q < L; ++q) idx[q] = idx[q - 1] + 1;
    }
    const double top = *std::max_element(logp.begin(), logp.end());
    double total = 0.0;
    for (double& v : logp) total += (v = std::exp(v - top));
    double u = uniform_open(rng) * total;
    std::size_t pick = subsets.size() - 1;
    for (std::size_t s = 0; s < logp.size(); ++s) {
      if (u < logp[s]) {
        pick = s;
        break;
      }
      u -= logp[s];
    }
    for (auto k : subsets[pick]) out.push_back(items[k]);
    std::sort(out.begin(), out.end());
    return out;
  }

  const auto suffix = suffix_table(log_w, L);
  std::size_t need = L;
  for (std::size_t k = 0; k < n && need > 0; ++k) {
    if (n - k == need) {
      out.push_back(items[k]);
      --need;
      continue;
    }
    const double p = std::exp(log_w[k] + suffix[(k + 1) * (L + 1) + need - 1] - suffix[k * (L + 1) + need]);
    if (uniform_open(rng) < p) {
      out.push_back(items[k]);
      --need;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ReceiverSet sample_successive(std::span<const ActorId> items, std::span<const double> log_w, std::size_t L,
                              Philox4x32& rng) {
  const std::size_t n = items.size();
  if (log_w.size() != n) throw ConfigError("sampler: weight and item counts differ");
  check_size(n, L);
  std::vector<std::pair<double, std::size_t>> keys(n);
  for (std::size_t k = 0; k < n; ++k) keys[k] = {std::log(exponential(rng)) - log_w[k], k};
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(L), keys.end());
  ReceiverSet out;
  for (std::size_t k = 0; k < L; ++k) out.push_back(items[keys[k].second]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace relcox
