#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "test_support.hpp"

using namespace symga;
using namespace testsup;

TEST_CASE("uniform and dirac policies are valid and correctly shaped",
          "[policy]") {
  const StationaryPolicy u = uniform_policy(2, 4);
  CHECK_NOTHROW(validate_policy(u));
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 4; ++a) CHECK(u.prob(x, a) == 0.25);

  const StationaryPolicy d = dirac_policy(3, 2, 1);
  CHECK_NOTHROW(validate_policy(d));
  for (int x = 0; x < 3; ++x) {
    CHECK(d.prob(x, 0) == 0.0);
    CHECK(d.prob(x, 1) == 1.0);
  }
}

TEST_CASE("policy validation rejects bad rows", "[policy]") {
  StationaryPolicy pi = uniform_policy(1, 3);
  pi.row(0)[0] = 0.5;  // row sums to 7/6
  CHECK_THROWS_AS(validate_policy(pi), ValidationError);

  StationaryPolicy neg = uniform_policy(1, 2);
  neg.row(0)[0] = -0.25;
  neg.row(0)[1] = 1.25;
  CHECK_THROWS_AS(validate_policy(neg), NegativeProbability);

  StationaryPolicy empty;
  CHECK_THROWS_AS(validate_policy(empty), ValidationError);
}

TEST_CASE("perturbation mixes toward uniform with the exact weights",
          "[policy]") {
  const StationaryPolicy pi = dirac_policy(2, 4, 2);
  const StationaryPolicy mixed = perturb(pi, 0.2);
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 4; ++a) {
      const double want = 0.8 * pi.prob(x, a) + 0.2 / 4.0;
      CHECK(std::abs(mixed.prob(x, a) - want) < 1e-15);
    }
  CHECK(policy_distance(perturb(pi, 0.0), pi) == 0.0);
  CHECK(policy_distance(perturb(pi, 1.0), uniform_policy(2, 4)) < 1e-15);
  CHECK_THROWS_AS(perturb(pi, 1.5), RangeError);
  CHECK_THROWS_AS(perturb(pi, -0.1), RangeError);
}

TEST_CASE("two perturbations compose into one with the product weight",
          "[policy]") {
  RandomStream rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    StationaryPolicy pi(2, 3);
    for (int x = 0; x < 2; ++x) {
      double total = 0.0;
      for (double& v : pi.row(x)) {
        v = rng.uniform() + 1e-3;
        total += v;
      }
      for (double& v : pi.row(x)) v /= total;
    }
    const double r1 = rng.uniform(), r2 = rng.uniform();
    const StationaryPolicy twice = perturb(perturb(pi, r1), r2);
    const StationaryPolicy once = perturb(pi, r1 + r2 - r1 * r2);
    CHECK(policy_distance(twice, once) < 1e-12);
  }
}

TEST_CASE("policy distance is the entrywise sup norm", "[policy]") {
  StationaryPolicy a = uniform_policy(2, 2);
  StationaryPolicy b = a;
  b.row(1)[0] = 0.9;
  b.row(1)[1] = 0.1;
  CHECK(policy_distance(a, b) == Catch::Approx(0.4).margin(1e-15));
  CHECK(policy_distance(b, a) == policy_distance(a, b));

  JointPolicy ja{{a, a}};
  JointPolicy jb{{a, b}};
  CHECK(policy_distance(ja, jb) == policy_distance(a, b));

  StationaryPolicy other_shape = uniform_policy(1, 2);
  CHECK_THROWS_AS(policy_distance(a, other_shape), ShapeMismatch);
  JointPolicy jc{{a}};
  CHECK_THROWS_AS(policy_distance(ja, jc), ShapeMismatch);
}

TEST_CASE("action sampling matches the row distribution", "[policy]") {
  StationaryPolicy pi(1, 3);
  pi.row(0)[0] = 0.5;
  pi.row(0)[1] = 0.2;
  pi.row(0)[2] = 0.3;
  RandomStream rng(7);
  const int n = 20000;
  std::vector<int> hits(3, 0);
  for (int t = 0; t < n; ++t) ++hits[sample_action(rng, pi, 0)];
  CHECK(std::abs(hits[0] / double(n) - 0.5) < 0.02);
  CHECK(std::abs(hits[1] / double(n) - 0.2) < 0.02);
  CHECK(std::abs(hits[2] / double(n) - 0.3) < 0.02);
}

// ---------------------------------------------------------------------------

TEST_CASE("compositions enumerate in ascending lexicographic order",
          "[quantizer]") {
  const auto rows = enumerate_compositions(2, 3);
  const std::vector<std::vector<int>> want = {
      {0, 0, 2}, {0, 1, 1}, {0, 2, 0}, {1, 0, 1}, {1, 1, 0}, {2, 0, 0}};
  CHECK(rows == want);
  CHECK(composition_count(2, 3) == 6);
  CHECK(composition_count(10, 3) == 66);
  CHECK(composition_count(4, 3) == 15);
  CHECK(composition_count(3, 3) == 10);
  CHECK(composition_count(1, 2) == 2);
  CHECK(composition_count(0, 4) == 1);
  for (int m : {1, 2, 3, 7})
    for (int d : {1, 2, 3, 4})
      CHECK(enumerate_compositions(m, d).size() == composition_count(m, d));
}

TEST_CASE("grid sizes follow the composition counts", "[quantizer]") {
  const auto g1 = QuantizedPolicySet::build(3, 1, 10);
  CHECK(g1.num_points() == 66);
  CHECK(g1.num_policies() == 66);

  const auto g2 = QuantizedPolicySet::build(3, 2, 10);
  CHECK(g2.num_points() == 66);
  CHECK(g2.num_policies() == 66 * 66);
  CHECK_THROWS_AS(g2.num_policies(100), CombinatorialBlowup);
}

TEST_CASE("every simplex point has a grid point within 1/m in sup norm",
          "[quantizer]") {
  RandomStream rng(23);
  for (int m : {1, 2, 3, 5}) {
    const auto grid = QuantizedPolicySet::build(3, 1, m);
    for (int rep = 0; rep < 200; ++rep) {
      double v[3], total = 0.0;
      for (double& x : v) {
        x = -std::log(rng.uniform() + 1e-300);
        total += x;
      }
      for (double& x : v) x /= total;
      const auto p = grid.point(grid.nearest_point({v, 3}));
      double dist = 0.0;
      for (int a = 0; a < 3; ++a) dist = std::max(dist, std::abs(p[a] - v[a]));
      INFO("m = " << m);
      CHECK(dist <= 1.0 / m + 1e-12);
    }
  }
}

TEST_CASE("nearest-point ties break toward the lowest enumeration index",
          "[quantizer]") {
  const auto half = QuantizedPolicySet::build(2, 1, 1);
  // (0.5, 0.5) is equidistant from (0,1) and (1,0); (0,1) enumerates first.
  const double target[2] = {0.5, 0.5};
  CHECK(half.nearest_point({target, 2}) == 0);

  const auto tenths = QuantizedPolicySet::build(3, 1, 10);
  // Equidistant from (.5,.2,.3), (.5,.3,.2) and (.6,.2,.2); the first wins.
  const double mid[3] = {1.0 / 3 + 0.2, 1.0 / 3 - 0.1, 1.0 / 3 - 0.1};
  const auto chosen = tenths.point_numerators(tenths.nearest_point({mid, 3}));
  CHECK(chosen == std::vector<int>{5, 2, 3});
}

TEST_CASE("exact membership lookup round-trips and rejects outsiders",
          "[quantizer]") {
  const auto grid = QuantizedPolicySet::build(3, 1, 4);
  for (std::uint64_t i = 0; i < grid.num_points(); ++i) {
    const auto idx = grid.point_index(grid.point(i));
    REQUIRE(idx.has_value());
    CHECK(*idx == i);
  }
  const double off[3] = {0.3, 0.3, 0.4};  // not on the quarter grid
  CHECK_FALSE(grid.point_index({off, 3}).has_value());
}

TEST_CASE("policy indices use state 0 as the most significant digit",
          "[quantizer]") {
  const auto grid = QuantizedPolicySet::build(2, 2, 1);  // 2 points, 4 policies
  REQUIRE(grid.num_points() == 2);
  REQUIRE(grid.num_policies() == 4);
  // Point 0 is (0, 1) and point 1 is (1, 0) in ascending numerator order.
  const StationaryPolicy p1 = grid.policy_from_index(1);  // digits (0, 1)
  CHECK(p1.prob(0, 1) == 1.0);
  CHECK(p1.prob(1, 0) == 1.0);
  const StationaryPolicy p2 = grid.policy_from_index(2);  // digits (1, 0)
  CHECK(p2.prob(0, 0) == 1.0);
  CHECK(p2.prob(1, 1) == 1.0);

  for (std::uint64_t idx = 0; idx < 4; ++idx) {
    CHECK(grid.policy_index_of_points(grid.point_indices_of(idx)) == idx);
    const auto back = grid.policy_index_of(grid.policy_from_index(idx));
    REQUIRE(back.has_value());
    CHECK(*back == idx);
  }
  CHECK_FALSE(grid.policy_index_of(uniform_policy(2, 2)).has_value());
}

TEST_CASE("uniform grid draws cover the policy set uniformly", "[quantizer]") {
  const auto grid = QuantizedPolicySet::build(2, 2, 1);
  RandomStream rng(31);
  const int n = 20000;
  std::vector<int> hits(4, 0);
  for (int t = 0; t < n; ++t) ++hits[grid.uniform_policy_draw(rng)];
  for (int k = 0; k < 4; ++k)
    CHECK(std::abs(hits[k] / double(n) - 0.25) < 0.02);

  RandomStream a(5), b(5);
  for (int t = 0; t < 100; ++t)
    CHECK(grid.uniform_policy_draw(a) == grid.uniform_policy_draw(b));
}

TEST_CASE("grid projection is idempotent and acts per state", "[quantizer]") {
  const auto grid = QuantizedPolicySet::build(3, 2, 4);
  RandomStream rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    StationaryPolicy pi(2, 3);
    for (int x = 0; x < 2; ++x) {
      double total = 0.0;
      for (double& v : pi.row(x)) {
        v = rng.uniform();
        total += v;
      }
      for (double& v : pi.row(x)) v /= total;
    }
    const StationaryPolicy once = project_to_grid(pi, grid);
    const StationaryPolicy twice = project_to_grid(once, grid);
    CHECK(policy_distance(once, twice) == 0.0);
    for (int x = 0; x < 2; ++x) {
      const auto want = grid.point(grid.nearest_point(pi.row(x)));
      for (int a = 0; a < 3; ++a) CHECK(once.prob(x, a) == want[a]);
    }
  }
  CHECK_THROWS_AS(project_to_grid(uniform_policy(1, 2), grid), ShapeMismatch);
}
