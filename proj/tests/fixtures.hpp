#pragma once

#include <random>
#include <vector>

#include "relcox/covariates.hpp"
#include "relcox/event_stream.hpp"

namespace fixtures {

// Random stream: sender uniform, receiver set size uniform in 1..max_size,
// exponential gaps with the given mean. Times are rounded to `grid` when
// positive so that ties occur.
inline relcox::EventStream random_stream(std::size_t actors, std::size_t events, std::size_t max_size,
                                         unsigned seed, double mean_gap = 600.0, double grid = 0.0) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> who(0, actors - 1);
  std::uniform_int_distribution<std::size_t> size(1, max_size);
  std::exponential_distribution<double> gap(1.0 / mean_gap);
  std::vector<relcox::Event> out;
  double t = 0.0;
  for (std::size_t m = 0; m < events; ++m) {
    t += gap(gen);
    relcox::Event e;
    e.time = grid > 0.0 ? std::round(t / grid) * grid : t;
    e.sender = relcox::ActorId(who(gen));
    const std::size_t L = std::min(size(gen), actors - 1);
    while (e.receivers.size() < L) {
      relcox::ActorId j(who(gen));
      if (j == e.sender || std::find(e.receivers.begin(), e.receivers.end(), j) != e.receivers.end()) continue;
      e.receivers.push_back(j);
    }
    std::sort(e.receivers.begin(), e.receivers.end());
    out.push_back(std::move(e));
  }
  return relcox::EventStream(std::move(out), actors);
}

inline relcox::ActorTraits random_traits(std::size_t actors, std::vector<std::string> names, unsigned seed) {
  std::mt19937_64 gen(seed);
  relcox::ActorTraits tr(std::move(names), actors);
  for (std::size_t a = 0; a < actors; ++a)
    for (std::size_t c = 0; c < tr.trait_count(); ++c) tr.set(relcox::ActorId(a), c, gen() & 1u);
  return tr;
}

// Static terms on traits A, B; every dyadic and triadic effect in both forms.
inline relcox::CovariateSpec full_spec(std::vector<double> bounds = {900.0, 3600.0}) {
  using namespace relcox;
  std::vector<DyadicTerm> dy;
  std::vector<TriadicTerm> tr;
  for (auto f : {EffectForm::indicator, EffectForm::binned}) {
    for (auto e : {DyadicEffect::send, DyadicEffect::receive}) dy.push_back({e, f});
    for (auto e : {TriadicEffect::two_send, TriadicEffect::two_receive, TriadicEffect::sibling,
                   TriadicEffect::cosibling})
      tr.push_back({e, f});
  }
  return CovariateSpec({StaticTerm::parse("1*A"), StaticTerm::parse("A*B")}, dy, tr, IntervalScheme(bounds));
}

}  // namespace fixtures
