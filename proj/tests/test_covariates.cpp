#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "relcox/design.hpp"
#include "relcox/error.hpp"

using namespace relcox;

namespace {

const double kMin = 60.0;

Event ev(double t, int i, std::initializer_list<int> js) {
  Event e;
  e.time = t;
  e.sender = ActorId(i);
  for (int j : js) e.receivers.emplace_back(j);
  return e;
}

CovariateSpec binned_spec(std::vector<double> bounds) {
  std::vector<DyadicTerm> dy{{DyadicEffect::send, EffectForm::binned}, {DyadicEffect::receive, EffectForm::binned}};
  std::vector<TriadicTerm> tr;
  for (auto e : {TriadicEffect::two_send, TriadicEffect::two_receive, TriadicEffect::sibling, TriadicEffect::cosibling})
    tr.push_back({e, EffectForm::binned});
  return CovariateSpec({}, dy, tr, IntervalScheme(std::move(bounds)));
}

}  // namespace

TEST_SUITE("covariates") {
  TEST_CASE("interval scheme") {
    const auto s = IntervalScheme::enron_default();
    CHECK(s.bins() == 7);
    CHECK(s.delta(1) == doctest::Approx(30 * kMin));
    CHECK(s.delta(2) == doctest::Approx(120 * kMin));
    CHECK(std::isinf(s.delta(7)));
    // 25 minutes old: bin 1; ten minutes later: bin 2.
    CHECK(s.bin_of(0.0, 25 * kMin) == 1);
    CHECK(s.bin_of(0.0, 35 * kMin) == 2);
    CHECK(s.bin_of(5.0, 5.0) == 0);
    CHECK_THROWS_AS(IntervalScheme({10.0, 5.0}), ConfigError);
  }

  TEST_CASE("static terms") {
    CHECK_THROWS_AS(StaticTerm::parse("X*1"), ConfigError);
    CHECK(StaticTerm::parse("J").name() == "1*J");
    ActorTraits tr({"J", "F", "M"}, 2);
    tr.set(ActorId(0), 1, 1);  // actor 0 female
    tr.set(ActorId(1), 0, 1);  // actor 1 junior, male
    tr.set(ActorId(1), 2, 1);
    CovariateSpec spec({StaticTerm::parse("1*J"), StaticTerm::parse("F*F")}, {}, {});
    StaticDesign d(spec, &tr);
    const auto x = d.row(ActorId(0), ActorId(1));
    CHECK(x(0) == 1.0);
    CHECK(x(1) == 0.0);
    CHECK_THROWS_AS(StaticDesign(CovariateSpec({StaticTerm::parse("1*Q")}, {}, {}), &tr), ConfigError);
  }

  TEST_CASE("enron preset has 90 static terms") {
    const std::vector<std::string> traits{"L", "T", "J", "F", "LJ", "TJ", "LF", "TF", "JF"};
    const auto spec = CovariateSpec::enron_preset(traits);
    CHECK(spec.static_dimension() == 90);
    // Indicators and 7 bins for the two dyadic effects, indicators and 7x7 for
    // the four triadic ones.
    CHECK(spec.dynamic_dimension() == 2 * 8 + 4 * 50);
    CHECK_THROWS_AS(CovariateSpec({}, {{DyadicEffect::send, EffectForm::indicator},
                                       {DyadicEffect::send, EffectForm::indicator}}, {}),
                    ConfigError);
  }

  TEST_CASE("dyadic counts") {
    const auto spec = binned_spec({30 * kMin, 120 * kMin});
    DynamicState st(3, spec);
    auto c = st.dyadic_counts(0.0, ActorId(0), ActorId(1));
    CHECK(c.send == std::vector<double>{0, 0, 0});
    st.advance(ev(0.0, 0, {1, 2}));
    CHECK(st.history(ActorId(0), ActorId(1)).size() == 1);
    CHECK(st.history(ActorId(0), ActorId(2)).size() == 1);
    // Same-time query sees nothing.
    CHECK(st.dyadic_counts(0.0, ActorId(0), ActorId(1)).send == std::vector<double>{0, 0, 0});
    c = st.dyadic_counts(60 * kMin, ActorId(0), ActorId(1));
    CHECK(c.send == std::vector<double>{0, 1, 0});
    CHECK(st.dyadic_counts(60 * kMin, ActorId(1), ActorId(0)).receive == std::vector<double>{0, 1, 0});
    st.advance(ev(60 * kMin - 60, 0, {1}));
    st.advance(ev(60 * kMin - 60, 0, {1}));
    st.advance(ev(60 * kMin - 60, 0, {1}));
    CHECK(st.dyadic_counts(60 * kMin, ActorId(0), ActorId(1)).send == std::vector<double>{3, 1, 0});
  }

  TEST_CASE("triadic counts") {
    const auto spec = binned_spec({30 * kMin, 120 * kMin, 480 * kMin});
    {
      DynamicState st(3, spec);  // i = 0, h = 1, j = 2
      st.advance(ev(0.0, 0, {1}));
      st.advance(ev(5 * kMin, 1, {2}));
      const auto c = st.triadic_counts(10 * kMin, ActorId(0), ActorId(2));
      CHECK(c.two_send(0, 0) == 1.0);
      CHECK(c.two_send.sum() == 1.0);
      CHECK(c.sibling.sum() + c.cosibling.sum() + c.two_receive.sum() == 0.0);
    }
    {
      DynamicState st(3, spec);  // h = 1 sends to i = 0 and to j = 2
      st.advance(ev(0.0, 1, {2}));
      st.advance(ev(170 * kMin, 1, {0}));
      const auto c = st.triadic_counts(180 * kMin, ActorId(0), ActorId(2));
      CHECK(c.sibling(0, 2) == 1.0);
      CHECK(c.sibling.sum() == 1.0);
    }
  }

  TEST_CASE("triadic counts equal direct pair enumeration") {
    const auto spec = binned_spec({300.0, 1200.0});
    const EventStream s = fixtures::random_stream(5, 50, 3, 4, 120.0);
    DynamicState st(5, spec);
    for (const auto& e : s.events()) st.advance(e);
    const double t = s.events().back().time + 1.0;
    const auto& b = spec.scheme().boundaries();
    struct Rec {
      double s;
      std::size_t a, b;
    };
    std::vector<Rec> recs;
    for (const auto& e : s.events())
      for (auto r : e.receivers) recs.push_back({e.time, e.sender.index, r.index});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        if (i == j) continue;
        Eigen::MatrixXd two_send = Eigen::MatrixXd::Zero(3, 3), two_recv = two_send, sib = two_send, cosib = two_send;
        for (const auto& r1 : recs)
          for (const auto& r2 : recs) {
            const auto k = oracle::bin_of_age(b, t - r1.s), l = oracle::bin_of_age(b, t - r2.s);
            const auto K = static_cast<Eigen::Index>(k) - 1, Lb = static_cast<Eigen::Index>(l) - 1;
            // r1 is the (i, h) leg, r2 the (h, j) leg; h must differ from i and j.
            if (r1.a == i && r2.b == j && r1.b == r2.a && r1.b != i && r1.b != j) two_send(K, Lb) += 1;
            if (r1.b == i && r2.a == j && r1.a == r2.b && r1.a != i && r1.a != j) two_recv(K, Lb) += 1;
            if (r1.b == i && r2.b == j && r1.a == r2.a && r1.a != i && r1.a != j) sib(K, Lb) += 1;
            if (r1.a == i && r2.a == j && r1.b == r2.b && r1.b != i && r1.b != j) cosib(K, Lb) += 1;
          }
        const auto c = st.triadic_counts(t, ActorId(i), ActorId(j));
        CHECK(c.two_send == two_send);
        CHECK(c.two_receive == two_recv);
        CHECK(c.sibling == sib);
        CHECK(c.cosibling == cosib);
      }
  }

  TEST_CASE("incremental covariates equal full replay") {
    const EventStream base = fixtures::random_stream(12, 400, 3, 5, 300.0, 60.0);  // ties on a 1-minute grid
    EventStream s = base;
    s.set_traits(fixtures::random_traits(12, {"A", "B"}, 1));
    const auto spec = fixtures::full_spec({600.0, 3600.0});
    DynamicState st(12, spec);
    StaticDesign sd(spec, &*s.traits());
    oracle::Replay replay(s, spec);
    std::size_t m = 0, checked = 0;
    while (m < s.size()) {
      const double t = s[m].time;
      if (m % 7 == 0)
        for (std::size_t i = 0; i < 12; i += 3)
          for (std::size_t j = 0; j < 12; ++j) {
            if (i == j) continue;
            const Eigen::VectorXd a = covariate_vector(st, sd, t, ActorId(i), ActorId(j));
            const Eigen::VectorXd b = replay.x(t, i, j);
            REQUIRE(oracle::rel_err(a, b) <= 1e-12);
            ++checked;
          }
      st.advance(s[m]);
      ++m;
    }
    CHECK(checked > 1000);
  }

  TEST_CASE("predictability and bin conservation") {
    const auto spec = binned_spec({100.0, 1000.0});
    const EventStream s = fixtures::random_stream(6, 80, 2, 8, 50.0);
    DynamicState st(6, spec);
    for (const auto& e : s.events()) {
      const auto before = st.dynamic_vector(e.time, e.sender, e.receivers.front());
      st.advance(e);
      CHECK(st.dynamic_vector(e.time, e.sender, e.receivers.front()) == before);
    }
    const double t = s.events().back().time;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        if (i == j) continue;
        for (double later : {t + 1.0, t + 500.0, t + 5000.0}) {
          const auto c = st.dyadic_counts(later, ActorId(i), ActorId(j));
          double total = 0;
          for (double v : c.send) total += v;
          CHECK(total == static_cast<double>(st.history(ActorId(i), ActorId(j)).size()));
        }
      }
  }

  TEST_CASE("active receivers cover every nonzero row") {
    const auto spec = fixtures::full_spec();
    {
      DynamicState st(4, spec);
      CHECK(st.active_receivers(ActorId(0)).empty());
      st.advance(ev(0.0, 0, {1}));
      const auto a0 = st.active_receivers(ActorId(0));
      const auto a1 = st.active_receivers(ActorId(1));
      CHECK(std::find(a0.begin(), a0.end(), ActorId(1)) != a0.end());
      CHECK(std::find(a1.begin(), a1.end(), ActorId(0)) != a1.end());
      st.advance(ev(1.0, 1, {2}));
      const auto closure = st.active_receivers(ActorId(0));
      CHECK(std::find(closure.begin(), closure.end(), ActorId(2)) != closure.end());
    }
    const EventStream s = fixtures::random_stream(10, 200, 3, 9, 100.0);
    DynamicState st(10, spec);
    CovariateWorkspace ws;
    DynamicRows rows;
    for (const auto& e : s.events()) st.advance(e);
    const double t = s.events().back().time + 10.0;
    for (std::size_t i = 0; i < 10; ++i) {
      const auto act = st.active_receivers(ActorId(i));
      st.dynamic_rows(t, ActorId(i), ws, rows);
      for (std::size_t j = 0; j < 10; ++j) {
        const Eigen::VectorXd v = st.dynamic_vector(t, ActorId(i), ActorId(j));
        const auto col = rows.find(ActorId(j));
        if (v.cwiseAbs().sum() > 0) {
          CHECK(std::find(act.begin(), act.end(), ActorId(j)) != act.end());
          REQUIRE(col.has_value());
          CHECK(rows.values.col(static_cast<Eigen::Index>(*col)) == v);
        } else {
          CHECK(!col.has_value());
        }
      }
    }
  }

  TEST_CASE("advance rejects time regression") {
    DynamicState st(3, fixtures::full_spec());
    st.advance(ev(10.0, 0, {1}));
    CHECK_THROWS_AS(st.advance(ev(5.0, 1, {2})), Error);
  }
}
