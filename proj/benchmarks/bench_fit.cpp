// Cost of the design build, one likelihood evaluation and a full fit as the
// stream grows, for a singleton and a multicast stream.

#include <benchmark/benchmark.h>

#include <map>
#include <tuple>

#include "relcox/likelihood.hpp"
#include "relcox/simulator.hpp"
#include "relcox/solver.hpp"

using namespace relcox;

namespace {

SimConfig config(std::size_t actors, std::size_t events, bool multicast) {
  SimConfig c;
  c.actor_count = actors;
  c.target_events = events;
  c.baseline.assign(actors, 1.0);
  if (multicast) c.size_probs = {0.5, 0.2, 0.15, 0.1, 0.05};
  c.spec = CovariateSpec({StaticTerm::parse("1*A"), StaticTerm::parse("A*B")},
                         {{DyadicEffect::send, EffectForm::indicator}, {DyadicEffect::receive, EffectForm::indicator},
                          {DyadicEffect::send, EffectForm::binned}},
                         {{TriadicEffect::two_send, EffectForm::indicator}, {TriadicEffect::sibling, EffectForm::indicator}},
                         IntervalScheme({1.0, 10.0}));
  c.traits = random_traits({"A", "B"}, actors, 0.5, 1);
  c.beta.resize(9);
  c.beta << 0.3, -0.2, 1.0, 0.5, -0.3, -0.1, 0.0, 0.2, 0.1;  // recent-send counts damp
  c.seed = 42;
  return c;
}

const EventStream& stream(std::size_t actors, std::size_t events, bool multicast) {
  static std::map<std::tuple<std::size_t, std::size_t, bool>, EventStream> cache;
  auto key = std::tuple{actors, events, multicast};
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, simulate(config(actors, events, multicast))).first;
  return it->second;
}

void BM_DesignBuild(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const EventStream& s = stream(100, n, state.range(1) != 0);
  const CovariateSpec spec = config(100, n, false).spec;
  for (auto _ : state) {
    DesignBuilder b(s, spec);
    CachedDesign d(b);
    benchmark::DoNotOptimize(d.size());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_Evaluate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool multicast = state.range(1) != 0;
  const EventStream& s = stream(100, n, multicast);
  const SimConfig c = config(100, n, multicast);
  DesignBuilder b(s, c.spec);
  CachedDesign d(b);
  Likelihood lik(d);
  LikelihoodOptions o;
  o.variant = multicast ? Variant::approx_multicast : Variant::pairwise;
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(lik.evaluate(c.beta, o).logpl);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_Fit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const EventStream& s = stream(100, n, false);
  const SimConfig c = config(100, n, false);
  SolverConfig sc;
  sc.threads = 1;
  for (auto _ : state) {
    DesignBuilder b(s, c.spec);
    CachedDesign d(b);
    Likelihood lik(d);
    benchmark::DoNotOptimize(fit(lik, Variant::pairwise, sc).logpl);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

}  // namespace

BENCHMARK(BM_DesignBuild)->ArgsProduct({{2500, 5000, 10000, 20000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->ArgsProduct({{2500, 5000, 10000, 20000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fit)->Arg(5000)->Arg(10000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
