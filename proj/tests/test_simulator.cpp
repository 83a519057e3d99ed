#include <doctest.h>

#include "relcox/error.hpp"
#include "relcox/likelihood.hpp"
#include "relcox/simulator.hpp"
#include "relcox/solver.hpp"

using namespace relcox;

namespace {

SimConfig base(std::size_t n, const CovariateSpec& spec, Eigen::VectorXd beta) {
  SimConfig c;
  c.actor_count = n;
  c.baseline.assign(n, 1.0);
  c.spec = spec;
  c.beta = std::move(beta);
  return c;
}

CovariateSpec dyadic() {
  return CovariateSpec({}, {{DyadicEffect::send, EffectForm::indicator}, {DyadicEffect::receive, EffectForm::indicator}}, {});
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("event count under uniform weights") {
    // 10 senders, each with rate 0.5 * 9 at beta = 0.
    SimConfig c = base(10, dyadic(), Eigen::Vector2d::Zero());
    c.baseline.assign(10, 0.5);
    c.horizon = 20.0;
    const double mean = 20.0 * 10 * 0.5 * 9;
    double total = 0.0;
    const int runs = 20;
    for (int s = 0; s < runs; ++s) {
      c.seed = static_cast<std::uint64_t>(s);
      const auto stream = simulate(c);
      CHECK(std::abs(static_cast<double>(stream.size()) - mean) < 4 * std::sqrt(mean));
      total += static_cast<double>(stream.size());
    }
    CHECK(std::abs(total / runs - mean) < 3 * std::sqrt(mean / runs));
  }

  TEST_CASE("receivers are uniform at beta zero") {
    SimConfig c = base(5, dyadic(), Eigen::Vector2d::Zero());
    c.target_events = 10000;
    c.seed = 3;
    const auto s = simulate(c);
    // Pearson chi-square over the 20 ordered pairs, given the sender counts.
    Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(5, 5);
    Eigen::VectorXd sent = Eigen::VectorXd::Zero(5);
    for (const auto& e : s.events()) {
      obs(e.sender.index, e.receivers[0].index) += 1;
      sent(e.sender.index) += 1;
    }
    double x2 = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) {
          const double ex = sent(i) / 4.0;
          x2 += (obs(i, j) - ex) * (obs(i, j) - ex) / ex;
        }
    CHECK(x2 < 30.58);  // chi-square(15) at 0.99
  }

  TEST_CASE("reciprocation matches the one-step conditional probability") {
    const Eigen::Vector2d beta(0.0, 2.5);
    SimConfig c = base(8, dyadic(), beta);
    c.target_events = 3000;
    c.seed = 5;
    const auto s = simulate(c);
    DesignBuilder b(s, c.spec);
    CachedDesign d(b);
    double observed = 0.0, expected = 0.0, var = 0.0, uniform = 0.0;
    for (const auto& e : d.events()) {
      const RiskRows rr = risk_rows(d.context(), e);
      const Eigen::VectorXd w = (rr.x * beta).array().exp();
      double p = 0.0, share = 0.0;
      for (std::size_t r = 0; r < rr.receivers.size(); ++r)
        if (rr.x(static_cast<Eigen::Index>(r), 1) > 0) {
          p += w(static_cast<Eigen::Index>(r)) / w.sum();
          share += 1.0 / static_cast<double>(rr.receivers.size());
        }
      const auto j = e.chosen[0];
      const auto k = static_cast<Eigen::Index>(std::lower_bound(rr.receivers.begin(), rr.receivers.end(), j) - rr.receivers.begin());
      observed += rr.x(k, 1) > 0 ? 1.0 : 0.0;
      expected += p;
      var += p * (1 - p);
      uniform += share;
    }
    CHECK(std::abs(observed - expected) < 4 * std::sqrt(var));
    CHECK(observed > uniform);
  }

  TEST_CASE("stream invariants, determinism and multicast sizes") {
    SimConfig c = base(12, dyadic(), Eigen::Vector2d(1.0, 0.5));
    c.target_events = 800;
    c.size_probs = {0.5, 0.2, 0.1, 0.1, 0.1};
    c.seed = 11;
    const auto a = simulate(c), b = simulate(c);
    CHECK(a.events() == b.events());
    std::vector<int> sizes(6, 0);
    double last = -1.0;
    for (const auto& e : a.events()) {
      CHECK(e.time >= last);
      last = e.time;
      CHECK(std::find(e.receivers.begin(), e.receivers.end(), e.sender) == e.receivers.end());
      CHECK(std::is_sorted(e.receivers.begin(), e.receivers.end()));
      ++sizes[e.receivers.size()];
    }
    for (int L = 1; L <= 5; ++L) CHECK(sizes[static_cast<std::size_t>(L)] > 0);
    c.seed = 12;
    CHECK(simulate(c).events() != a.events());
  }

  TEST_CASE("binned covariates and baseline schedule") {
    CovariateSpec spec({}, {{DyadicEffect::send, EffectForm::binned}}, {}, IntervalScheme({0.5, 2.0}));
    SimConfig c = base(6, spec, Eigen::Vector3d(-0.4, -0.2, 0.0));
    c.baseline.clear();
    c.schedule = {{0.0, std::vector<double>(6, 1.0)}, {5.0, std::vector<double>(6, 0.0)}, {8.0, std::vector<double>(6, 2.0)}};
    c.horizon = 12.0;
    c.seed = 2;
    const auto s = simulate(c);
    for (const auto& e : s.events()) CHECK(!(e.time >= 5.0 && e.time < 8.0));
    CHECK(s.size() > 50);
  }

  TEST_CASE("likelihood at the truth never beats the fit") {
    SimConfig c = base(10, dyadic(), Eigen::Vector2d(1.0, 0.5));
    c.target_events = 600;
    double lr = 0.0;
    const int runs = 40;
    for (int r = 0; r < runs; ++r) {
      c.seed = 100 + static_cast<std::uint64_t>(r);
      const auto s = simulate(c);
      DesignBuilder b(s, c.spec);
      CachedDesign d(b);
      Likelihood lik(d);
      const FitResult f = fit(lik, Variant::pairwise);
      LikelihoodOptions o;
      o.variant = Variant::pairwise;
      o.order = 0;
      const double at_truth = lik.evaluate(c.beta, o).logpl;
      CHECK(f.logpl >= at_truth);
      lr += 2.0 * (f.logpl - at_truth);
    }
    lr /= runs;
    CHECK(lr >= 0.5 * 2);
    CHECK(lr <= 2.0 * 2);
  }

  TEST_CASE("configuration errors") {
    SimConfig c = base(4, dyadic(), Eigen::Vector2d::Zero());
    CHECK_THROWS_AS(simulate(c), ConfigError);  // no stopping rule
    c.target_events = 10;
    c.baseline.assign(4, 0.0);
    CHECK_THROWS_AS(simulate(c), ConfigError);
    c.baseline.assign(4, 1.0);
    c.beta = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(simulate(c), ConfigError);
    c.beta = Eigen::Vector2d::Zero();
    c.size_probs = {0.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(simulate(c), Error);  // L = 4 exceeds the three available receivers
  }
}
