#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "relcox/diagnostics.hpp"
#include "relcox/solver.hpp"

using namespace relcox;

namespace {

Event ev(double t, int i, std::initializer_list<int> js) {
  Event e;
  e.time = t;
  e.sender = ActorId(i);
  for (int j : js) e.receivers.emplace_back(j);
  return e;
}

const CovariateSpec& send_only() {
  static const CovariateSpec s({}, {{DyadicEffect::send, EffectForm::indicator}}, {});
  return s;
}

double expected_of(const PairCounts& c, int i, int j) {
  for (const auto& pc : c.pairs)
    if (pc.sender == ActorId(i) && pc.receiver == ActorId(j)) return pc.expected;
  return -1.0;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("uniform shares") {
    std::vector<Event> es;
    for (int m = 0; m < 10; ++m) es.push_back(ev(m, 0, {1 + m % 5}));
    const EventStream s(es, 6);
    DesignBuilder b(s, send_only());
    CachedDesign d(b);
    const auto c = expected_counts(d, Eigen::VectorXd::Zero(1));
    for (int j = 1; j <= 5; ++j) CHECK(expected_of(c, 0, j) == doctest::Approx(2.0));

    const EventStream one({ev(1.0, 2, {0})}, 5);
    DesignBuilder b1(one, send_only());
    CachedDesign d1(b1);
    const auto c1 = expected_counts(d1, Eigen::VectorXd::Zero(1));
    for (int j : {0, 1, 3, 4}) CHECK(expected_of(c1, 2, j) == doctest::Approx(0.25));
  }

  TEST_CASE("conservation on a fitted multicast model") {
    const EventStream s = fixtures::random_stream(10, 400, 4, 3);
    const auto spec = fixtures::full_spec({900.0});
    EventStream st = s;
    st.set_traits(fixtures::random_traits(10, {"A", "B"}, 3));
    DesignBuilder b(st, spec);
    CachedDesign d(b);
    Likelihood lik(d);
    const FitResult f = fit(lik, Variant::approx_multicast);
    for (auto mode : {ExpectedMode::duplication, ExpectedMode::multicast}) {
      const auto c = expected_counts(d, f.beta, mode);
      CHECK(conservation_error(c) < 1e-10);
      CHECK(c.pairs_at_risk == 90);
      const auto r = residuals(c, spec.dimension());
      CHECK(r.df_approx == 90.0 - static_cast<double>(spec.dimension()));
      double x2 = 0.0;
      for (const auto& row : r.rows) {
        x2 += row.pearson * row.pearson;
        if (row.expected > 0 && row.martingale != 0) CHECK((row.pearson > 0) == (row.martingale > 0));
      }
      CHECK(x2 == doctest::Approx(r.x2));
    }
  }

  TEST_CASE("residual arithmetic") {
    PairCounts c;
    c.pairs = {{ActorId(0), ActorId(1), 4.0, 1.0}, {ActorId(0), ActorId(2), 2.0, 2.0}, {ActorId(1), ActorId(0), 0.0, 0.0},
               {ActorId(1), ActorId(2), 3.0, 0.0}};
    c.pairs_at_risk = 4;
    const auto r = residuals(c, 1);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].pearson == 3.0);
    CHECK(r.rows[1].martingale == 0.0);
    CHECK(r.rows[1].pearson == 0.0);
    CHECK(std::isinf(r.rows[2].pearson));
    CHECK(r.anomalies == 1);
    CHECK(r.x2 == 9.0);
    std::ostringstream out;
    write_residuals_csv(out, r, IdMap::identity(3));
    CHECK(out.str().rfind("sender,receiver,observed,expected,martingale,pearson\n", 0) == 0);
  }

  TEST_CASE("published degrees of freedom heuristic") {
    CHECK(156 * 155 - (90 + 2 * 8 + 2 * 50) == 23974);
  }

  TEST_CASE("summaries") {
    ResidualReport zero;
    for (int k = 0; k < 10; ++k) zero.rows.push_back({ActorId(0), ActorId(1), 1.0, 1.0, 0.0, 0.0});
    const auto s0 = residual_summary(zero);
    for (double q : s0.quantiles) CHECK(q == 0.0);
    CHECK(s0.x2 == 0.0);

    ResidualReport pm;
    for (int k = 0; k < 200; ++k) {
      const double r = k % 2 ? 1.0 : -1.0;
      pm.rows.push_back({ActorId(0), ActorId(1), 1.0 + r, 1.0, r, r});
      pm.x2 += r * r;
    }
    const auto s1 = residual_summary(pm);
    CHECK(s1.x2 == 200.0);
    CHECK(s1.max_abs == 1.0);

    ResidualReport ramp;
    for (int k = 1; k <= 5; ++k) ramp.rows.push_back({ActorId(0), ActorId(1), 0, 1, 0, static_cast<double>(k)});
    const auto s2 = residual_summary(ramp, {0.0, 0.5, 0.9, 1.0});
    const std::vector<double> want{1.0, 3.0, 4.6, 5.0};
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(s2.quantiles[k] == doctest::Approx(want[k]));
  }
}
