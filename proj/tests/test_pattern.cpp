#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qfix/deduction.hpp"
#include "qfix/pattern.hpp"
#include "qfix/rng.hpp"

using namespace qfix;

namespace {

Pattern random_pattern(Rng& rng, std::size_t arity, std::size_t max_tuples = 3) {
  std::vector<WeightTuple> ts;
  const std::size_t count = 1 + rng.uniform_index(max_tuples);
  for (std::size_t t = 0; t < count; ++t) {
    std::vector<double> w(arity);
    double sum = 0.0;
    for (double& x : w) {
      x = rng.uniform01();
      sum += x;
    }
    const double scale = sum > 0.0 ? rng.uniform01() / sum : 0.0;
    for (double& x : w) x *= scale;
    ts.emplace_back(std::move(w));
  }
  return Pattern(arity, std::move(ts));
}

void require_valid(const Pattern& p) {
  REQUIRE(!p.tuples().empty());
  for (const WeightTuple& t : p.tuples()) {
    REQUIRE(t.arity() == p.arity());
    double sum = 0.0;
    for (double w : t.weights()) {
      REQUIRE(w >= -kTol);
      REQUIRE(w <= 1.0 + kTol);
      sum += w;
    }
    REQUIRE(sum <= 1.0 + kTol);
  }
}

}  // namespace

TEST_CASE("make_pattern validates membership") {
  const Pattern p = make_pattern({WeightTuple{0.3, 0.7}}, 2);
  REQUIRE(p.arity() == 2);
  REQUIRE(p.size() == 1);

  const Pattern dedup = make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}, WeightTuple{1, 0}}, 2);
  REQUIRE(dedup.size() == 2);
  REQUIRE(dedup.contains(WeightTuple{1, 0}));
  REQUIRE(dedup.contains(WeightTuple{0, 1}));

  REQUIRE_THROWS_MATCHES((WeightTuple{0.6, 0.6}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::SumExceedsOne;
                         }));
  REQUIRE_THROWS_MATCHES(make_pattern({}, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::EmptyPattern;
                         }));
  REQUIRE_THROWS_MATCHES(make_pattern({WeightTuple{0.5}}, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::ArityMismatch;
                         }));
  REQUIRE_THROWS_MATCHES((WeightTuple{-0.2, 0.4}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::WeightOutOfRange;
                         }));
}

TEST_CASE("scalar multiplication") {
  const Pattern p = make_pattern({WeightTuple{0.4, 0.6}}, 2);
  const Pattern half = scalar_mul(0.5, p);
  REQUIRE(half == make_pattern({WeightTuple{0.2, 0.3}}, 2));

  const Pattern zero = scalar_mul(0.0, make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}}, 2));
  REQUIRE(zero == make_pattern({WeightTuple{0, 0}}, 2));
  REQUIRE(zero.size() == 1);  // duplicates merge

  REQUIRE(scalar_mul(1.0, p) == p);
  REQUIRE_THROWS_AS(scalar_mul(1.5, p), Error);
}

TEST_CASE("subconvex sum enumerates cross-combinations") {
  const Pattern a = make_pattern({WeightTuple{1, 0}}, 2);
  const Pattern b = make_pattern({WeightTuple{0, 1}}, 2);
  REQUIRE(subconvex_sum(WeightTuple{0.5, 0.5}, {a, b}) ==
          make_pattern({WeightTuple{0.5, 0.5}}, 2));

  // two choices for the first pattern, one for the second:
  //   0.5*<1,0> + 0.5*<0,1> = <0.5,0.5>   and   0.5*<0,1> + 0.5*<0,1> = <0,1>
  const Pattern ab = make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}}, 2);
  REQUIRE(subconvex_sum(WeightTuple{0.5, 0.5}, {ab, b}) ==
          make_pattern({WeightTuple{0.5, 0.5}, WeightTuple{0, 1}}, 2));

  const Pattern p = make_pattern({WeightTuple{0.2, 0.1}, WeightTuple{0, 0.9}}, 2);
  REQUIRE(subconvex_sum(WeightTuple{1.0}, {p}) == p);
}

TEST_CASE("contraction merges components") {
  REQUIRE(contract(make_pattern({WeightTuple{0.3, 0.2, 0.5}}, 3), 1, 2) ==
          make_pattern({WeightTuple{0.5, 0.5}}, 2));

  const Pattern nonexp = make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}}, 2);
  const Pattern merged = contract(nonexp, 1, 2);
  REQUIRE(merged == make_pattern({WeightTuple{1}}, 1));
  REQUIRE(merged.size() == 1);

  REQUIRE_THROWS_MATCHES(contract(make_pattern({WeightTuple{0.2, 0.3}}, 2), 2, 1), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::IndicesNotOrdered;
                         }));
  REQUIRE_THROWS_AS(contract(nonexp, 1, 3), Error);
}

TEST_CASE("composition") {
  // (x +_0.4 y) applied through a choice between its pair and a third slot
  const Pattern outer = make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}}, 2);
  const Pattern mix = make_pattern({WeightTuple{0.4, 0.6, 0.0}}, 3);
  const Pattern third = make_pattern({WeightTuple{0, 0, 1}}, 3);
  REQUIRE(compose(outer, {mix, third}) ==
          make_pattern({WeightTuple{0.4, 0.6, 0.0}, WeightTuple{0, 0, 1}}, 3));

  const Pattern p = make_pattern({WeightTuple{0.5, 0.5}}, 2);
  REQUIRE(compose(p, {unit_projection(1, 2), unit_projection(2, 2)}) == p);

  const Pattern q = make_pattern({WeightTuple{0.1, 0.2}, WeightTuple{0.8, 0.0}}, 2);
  REQUIRE(compose(make_pattern({WeightTuple{1}}, 1), {q}) == q);

  REQUIRE_THROWS_AS(compose(p, {unit_projection(1, 2)}), Error);
}

TEST_CASE("mu pattern") {
  REQUIRE(mu_pattern(make_pattern({WeightTuple{0.5, 0.25}}, 2), 1) ==
          make_pattern({WeightTuple{0.5}}, 1));
  // 0.7/(1-0.3) = 1: the fixed point of x -> x +_0.3 y tracks y exactly
  REQUIRE(mu_pattern(make_pattern({WeightTuple{0.3, 0.7}}, 2), 1) ==
          make_pattern({WeightTuple{1}}, 1));
  REQUIRE_THROWS_MATCHES(mu_pattern(make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}}, 2), 1),
                         Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::NotContractive;
                         }));
}

TEST_CASE("contraction modulus") {
  const Pattern ex3 = make_pattern({WeightTuple{0.4, 0.6, 0.0}, WeightTuple{0, 0, 1}}, 3);
  REQUIRE(contraction_modulus(ex3, 3) == 1.0);
  REQUIRE(contraction_modulus(make_pattern({WeightTuple{0.3, 0.7}}, 2), 1) == 0.3);
  REQUIRE(contraction_modulus(make_pattern({WeightTuple{0, 0}}, 2), 2) == 0.0);
  REQUIRE_THROWS_AS(contraction_modulus(ex3, 4), Error);
  REQUIRE(!is_contractive(ex3, 3));
  REQUIRE(is_contractive(ex3, 1));
}

TEST_CASE("operations stay inside the tuple space", "[property]") {
  Rng rng(20240811);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t arity = 1 + rng.uniform_index(4);
    const Pattern p = random_pattern(rng, arity);
    require_valid(p);
    require_valid(scalar_mul(rng.uniform01(), p));
    if (arity >= 2) {
      const std::size_t i = 1 + rng.uniform_index(arity - 1);
      const std::size_t j = i + 1 + rng.uniform_index(arity - i);
      require_valid(contract(p, i, j));
    }
    const std::size_t m = 1 + rng.uniform_index(3);
    std::vector<Pattern> inner;
    for (std::size_t k = 0; k < arity; ++k) inner.push_back(random_pattern(rng, m));
    require_valid(compose(p, inner, m));

    const std::size_t slot = 1 + rng.uniform_index(arity);
    if (is_contractive(p, slot) && arity >= 2) require_valid(mu_pattern(p, slot));
  }
}

TEST_CASE("compose with unit projections is the identity", "[property]") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t arity = 1 + rng.uniform_index(4);
    const Pattern p = random_pattern(rng, arity);
    std::vector<Pattern> units;
    for (std::size_t k = 1; k <= arity; ++k) units.push_back(unit_projection(k, arity));
    REQUIRE(compose(p, units) == p);
  }
}

TEST_CASE("scalar multiplication composes", "[property]") {
  Rng rng(78);
  for (int trial = 0; trial < 100; ++trial) {
    const Pattern p = random_pattern(rng, 1 + rng.uniform_index(4));
    const double r = rng.uniform01(), s = rng.uniform01();
    REQUIRE(scalar_mul(r, scalar_mul(s, p)) == scalar_mul(r * s, p));
  }
}

TEST_CASE("mu output always sums below one", "[property]") {
  Rng rng(79);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t arity = 2 + rng.uniform_index(3);
    const Pattern p = random_pattern(rng, arity);
    const std::size_t slot = 1 + rng.uniform_index(arity);
    if (!is_contractive(p, slot)) continue;
    const Pattern m = mu_pattern(p, slot);
    for (const WeightTuple& t : m.tuples()) REQUIRE(t.sum() <= 1.0 + kTol);
  }
}

TEST_CASE("contract then modulus equals the merged maximum", "[property]") {
  Rng rng(80);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t arity = 2 + rng.uniform_index(3);
    const Pattern p = random_pattern(rng, arity);
    const std::size_t i = 1 + rng.uniform_index(arity - 1);
    const std::size_t j = i + 1 + rng.uniform_index(arity - i);
    double expected = 0.0;
    for (const WeightTuple& t : p.tuples()) expected = std::max(expected, t.at(i) + t.at(j));
    REQUIRE_THAT(contraction_modulus(contract(p, i, j), i),
                 Catch::Matchers::WithinAbs(expected, kTol));
  }
}

TEST_CASE("pattern equality is tuple-set equality") {
  // <0.5,0.5> never wins the weighted-sum maximum against the two
  // projections, so both patterns induce identical bounds; as tuple sets
  // they still compare unequal.
  const Pattern big =
      make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}, WeightTuple{0.5, 0.5}}, 2);
  const Pattern small = make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}}, 2);
  Rng rng(81);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> eps{rng.uniform01(), rng.uniform01()};
    REQUIRE_THAT(banach_delta(big, eps), Catch::Matchers::WithinAbs(banach_delta(small, eps), 1e-15));
  }
  REQUIRE(!(big == small));
}

TEST_CASE("dominated tuples can be pruned on request") {
  // componentwise domination: <0.3,0.2> <= <0.4,0.5>
  const Pattern p = make_pattern({WeightTuple{0.3, 0.2}, WeightTuple{0.4, 0.5}}, 2);
  REQUIRE(prune_dominated(p) == make_pattern({WeightTuple{0.4, 0.5}}, 2));
  // the projections do not dominate <0.5,0.5> componentwise
  const Pattern mixed =
      make_pattern({WeightTuple{1, 0}, WeightTuple{0, 1}, WeightTuple{0.5, 0.5}}, 2);
  REQUIRE(prune_dominated(mixed) == mixed);
}
