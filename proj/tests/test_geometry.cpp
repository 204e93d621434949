#include "helpers.hpp"

#include <doctest.h>

#include <limits>

using namespace varpro;
using test::kPi;

TEST_CASE("canonicalize wraps into [0, L)") {
  const Domain c = Domain::circle();
  CHECK(canonicalize({2 * kPi}, c)[0] == doctest::Approx(0.0));
  CHECK(canonicalize({-kPi / 2}, c)[0] == doctest::Approx(3 * kPi / 2));

  const Domain t = Domain::flat_torus(2, 4.0);
  const ManifoldPoint p = canonicalize({5.0, -1.0}, t);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 3.0);
}

TEST_CASE("canonicalize rejects bad input") {
  const Domain c = Domain::circle();
  CHECK_THROWS_AS(canonicalize({std::numeric_limits<double>::quiet_NaN()}, c), InvalidInput);
  CHECK_THROWS_AS(canonicalize({std::numeric_limits<double>::infinity()}, c), InvalidInput);
  CHECK_THROWS_AS(canonicalize({1.0, 2.0}, c), InvalidInput);
}

TEST_CASE("domain validation") {
  CHECK_NOTHROW(Domain::circle().validate());
  CHECK_THROWS_AS((Domain{DomainKind::Circle, 2, 2 * kPi}.validate()), InvalidInput);
  CHECK_THROWS_AS((Domain{DomainKind::FlatTorus, 2, 0.0}.validate()), InvalidInput);
  CHECK_THROWS_AS((Domain{DomainKind::FlatTorus, 0, 1.0}.validate()), InvalidInput);
}

TEST_CASE("canonicalize is idempotent and lands in range") {
  Rng rng(7);
  const Domain t = Domain::flat_torus(3, 4.0);
  for (int it = 0; it < 2000; ++it) {
    Coords raw(3);
    for (int k = 0; k < 3; ++k) raw[k] = 1e3 * (rng.uniform() - 0.5);
    const ManifoldPoint p = canonicalize(raw, t);
    for (int k = 0; k < 3; ++k) {
      CHECK(p[k] >= 0.0);
      CHECK(p[k] < 4.0);
    }
    CHECK(canonicalize(p.coords(), t) == p);
  }
  // Tiny negatives must not round up to L itself.
  const ManifoldPoint q = canonicalize({-1e-300}, Domain::circle());
  CHECK(q[0] < 2 * kPi);
}

TEST_CASE("displacement picks the shortest representative") {
  const Domain c = Domain::circle();
  const Coords d = displacement(canonicalize({0.1}, c), canonicalize({2 * kPi - 0.1}, c), c);
  CHECK(d[0] == doctest::Approx(0.2));
  CHECK(displacement(canonicalize({1.0}, c), canonicalize({1.0}, c), c)[0] == 0.0);

  const Domain t = Domain::flat_torus(2, 4.0);
  const Coords e = displacement(canonicalize({3.5, 0.0}, t), canonicalize({0.5, 0.0}, t), t);
  CHECK(e[0] == doctest::Approx(-1.0));
  CHECK(e[1] == 0.0);

  // Half-period tie resolves to -L/2.
  const Coords tie = displacement(canonicalize({2.0, 0.0}, t), canonicalize({0.0, 0.0}, t), t);
  CHECK(tie[0] == -2.0);
}

TEST_CASE("displacement properties on random pairs") {
  Rng rng(11);
  const Domain t = Domain::flat_torus(2, 4.0);
  for (int it = 0; it < 2000; ++it) {
    const ManifoldPoint a = canonicalize({4 * rng.uniform(), 4 * rng.uniform()}, t);
    const ManifoldPoint b = canonicalize({4 * rng.uniform(), 4 * rng.uniform()}, t);
    const Coords ab = displacement(a, b, t);
    const Coords ba = displacement(b, a, t);
    CHECK((ab + ba).norm() < 1e-12);
    CHECK(ab.norm() <= 4.0 * std::sqrt(2.0) / 2.0);
    CHECK(quotient_distance(a, b, t) == doctest::Approx(ab.norm()));
    // a - b is a lattice translate of the displacement.
    for (int k = 0; k < 2; ++k) {
      const double q = (a[k] - b[k] - ab[k]) / 4.0;
      CHECK(std::abs(q - std::round(q)) < 1e-12);
    }
  }
}

TEST_CASE("displacement rejects mismatched domains") {
  const Domain t = Domain::flat_torus(2, 4.0);
  const Domain c = Domain::circle();
  CHECK_THROWS_AS(displacement(canonicalize({0.0}, c), canonicalize({0.0, 0.0}, t), t), InvalidInput);
}

TEST_CASE("retract") {
  const Domain c = Domain::circle();
  CHECK(retract(canonicalize({3 * kPi / 2}, c), Coords::Constant(1, kPi), c)[0] == doctest::Approx(kPi / 2));
  const ManifoldPoint p = canonicalize({1.234}, c);
  CHECK(retract(p, Coords::Zero(1), c) == p);

  const Domain t = Domain::flat_torus(2, 4.0);
  Coords s(2);
  s << 0.2, 0.2;
  const ManifoldPoint q = retract(canonicalize({3.9, 3.9}, t), s, t);
  CHECK(q[0] == doctest::Approx(0.1));
  CHECK(q[1] == doctest::Approx(0.1));

  Coords bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(retract(p, bad, c), InvalidInput);
}

TEST_CASE("retract composes") {
  Rng rng(5);
  const Domain c = Domain::circle();
  for (int it = 0; it < 500; ++it) {
    const ManifoldPoint p = canonicalize({2 * kPi * rng.uniform()}, c);
    const Coords s1 = Coords::Constant(1, 10 * rng.normal());
    const Coords s2 = Coords::Constant(1, 10 * rng.normal());
    const ManifoldPoint once = retract(p, s1 + s2, c);
    const ManifoldPoint twice = retract(retract(p, s1, c), s2, c);
    CHECK(quotient_distance(once, twice, c) < 1e-12);
  }
}

TEST_CASE("chordal distance") {
  const Domain c = Domain::circle();
  CHECK(chordal_distance(canonicalize({0.0}, c), canonicalize({kPi}, c), c) == doctest::Approx(2.0));
  CHECK(chordal_distance(canonicalize({0.7}, c), canonicalize({0.7}, c), c) == 0.0);
  // Embedding oracle: explicit unit vectors.
  const double d = chordal_distance(canonicalize({0.0}, c), canonicalize({kPi / 2}, c), c);
  CHECK(d == doctest::Approx(std::hypot(1.0 - std::cos(kPi / 2), 0.0 - std::sin(kPi / 2))).epsilon(1e-14));
  CHECK(d == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  Rng rng(3);
  for (int it = 0; it < 200; ++it) {
    const double a = 2 * kPi * rng.uniform(), b = 2 * kPi * rng.uniform();
    const double emb = std::hypot(std::cos(a) - std::cos(b), std::sin(a) - std::sin(b));
    CHECK(chordal_distance(canonicalize({a}, c), canonicalize({b}, c), c) == doctest::Approx(emb).epsilon(1e-12));
  }

  const Domain t = Domain::flat_torus(2, 4.0);
  const ManifoldPoint a = canonicalize({0.5, 0.5}, t), b = canonicalize({3.5, 3.5}, t);
  CHECK(chordal_distance(a, b, t) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("scalar wrap helpers") {
  CHECK(wrap_centered(3.0, 4.0) == -1.0);
  CHECK(wrap_centered(-2.0, 4.0) == -2.0);
  CHECK(wrap_centered(2.0, 4.0) == -2.0);
  CHECK(wrap_positive(-1.0, 4.0) == 3.0);
  CHECK(wrap_positive(4.0, 4.0) == 0.0);
}
