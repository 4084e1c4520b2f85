#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "test_support.hpp"

using namespace symga;
using namespace testsup;

TEST_CASE("rock-paper-scissors validates and exposes its shape", "[game]") {
  const ValidatedGame g = rps_game();
  CHECK(g.num_players() == 2);
  CHECK(g.num_states() == 1);
  CHECK(g.num_actions(0) == 3);
  CHECK(g.num_actions(1) == 3);
  CHECK(g.num_joint_actions() == 9);
  CHECK(g.discount(0) == 0.0);
  CHECK(g.c_max(0) == 1.0);
  CHECK(g.c_max() == 1.0);
  CHECK(g.value_bound(0) == 1.0);
  REQUIRE(g.initial_dist().size() == 1);
  CHECK(g.initial_dist()[0] == 1.0);

  // Zero-sum: the column player's cost is the negated row-player cost.
  for (int ja = 0; ja < 9; ++ja) CHECK(g.cost(1, 0, ja) == -g.cost(0, 0, ja));
  // Paper beats rock: the rock player pays 1, the paper player pays -1.
  const std::vector<int> rock_vs_paper = {0, 1};
  const int ja = g.encode_action(rock_vs_paper);
  CHECK(g.cost(0, 0, ja) == 1.0);
  CHECK(g.cost(1, 0, ja) == -1.0);
}

TEST_CASE("joint action encode and decode are inverse bijections", "[game]") {
  RandomStream rng(11);
  const ValidatedGame g = random_game(rng, 3, 2, 3, 0.5);
  for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
    const auto decoded = g.decode_action(ja);
    REQUIRE(decoded.size() == 3);
    CHECK(g.encode_action(decoded) == ja);
  }
  // Player 0 owns the most significant digit.
  const std::vector<int> a = {2, 0, 0};
  CHECK(g.encode_action(a) == 2 * 9);
}

TEST_CASE("game validation rejects malformed specs", "[game]") {
  SECTION("kernel row that does not sum to one") {
    GameSpec s = rps_spec();
    s.kernel[3] = 0.97;
    CHECK_THROWS_AS(validate_game(s), KernelRowNotStochastic);
  }
  SECTION("negative kernel probability") {
    GameSpec s = rps_spec();
    s.num_states = 1;
    s.kernel[0] = -0.25;
    CHECK_THROWS_AS(validate_game(s), NegativeProbability);
  }
  SECTION("empty action set") {
    GameSpec s = rps_spec();
    s.num_actions[1] = 0;
    CHECK_THROWS_AS(validate_game(s), EmptyStateOrActionSet);
  }
  SECTION("no players") {
    GameSpec s = rps_spec();
    s.num_players = 0;
    CHECK_THROWS_AS(validate_game(s), EmptyStateOrActionSet);
  }
  SECTION("non-finite cost") {
    GameSpec s = rps_spec();
    s.cost[4] = std::nan("");
    CHECK_THROWS_AS(validate_game(s), NonFiniteValue);
  }
  SECTION("discount outside [0, 1)") {
    GameSpec s = rps_spec();
    s.discount[0] = 1.0;
    CHECK_THROWS_AS(validate_game(s), RangeError);
  }
  SECTION("cost table of the wrong size") {
    GameSpec s = rps_spec();
    s.cost.pop_back();
    CHECK_THROWS_AS(validate_game(s), ShapeMismatch);
  }
  SECTION("initial distribution not summing to one") {
    GameSpec s = rps_spec();
    s.initial_dist[0] = 0.5;
    CHECK_THROWS_AS(validate_game(s), ValidationError);
  }
  SECTION("negative costs are allowed") {
    GameSpec s = rps_spec();
    CHECK_NOTHROW(validate_game(s));
  }
}

TEST_CASE("rock-paper-scissors is symmetric", "[game]") {
  const auto report = check_symmetry(rps_game());
  CHECK(report.is_symmetric);
  CHECK_FALSE(report.witness.has_value());
}

TEST_CASE("perturbing one cost entry breaks symmetry with a witness", "[game]") {
  const ValidatedGame g = validate_game(broken_symmetry_spec(rps_game()));
  const auto report = check_symmetry(g);
  REQUIRE_FALSE(report.is_symmetric);
  REQUIRE(report.witness.has_value());
  CHECK(report.witness->condition == "cost");
  CHECK(report.witness->player_i >= 0);
  CHECK(report.witness->state >= 0);
}

TEST_CASE("multiset-built random games are symmetric for any player count",
          "[game]") {
  RandomStream rng(2026);
  for (int n : {2, 3, 4}) {
    const ValidatedGame g = random_symmetric_game(rng, n, 2, 3, 0.6);
    INFO("players: " << n);
    CHECK(check_symmetry(g).is_symmetric);
    CHECK_FALSE(check_symmetry(validate_game(broken_symmetry_spec(g)))
                    .is_symmetric);
  }
}

TEST_CASE("hand-built matching and dominance games are symmetric", "[game]") {
  CHECK(check_symmetry(matching_game(3)).is_symmetric);
  CHECK(check_symmetry(dominant_action_game(2)).is_symmetric);
}

TEST_CASE("mismatched action counts or discounts are asymmetric", "[game]") {
  GameSpec s;
  s.num_players = 2;
  s.num_states = 1;
  s.num_actions = {2, 3};
  s.discount = {0.0, 0.0};
  s.cost.assign(2 * 6, 0.0);
  s.kernel.assign(6, 1.0);
  s.initial_dist = {1.0};
  const auto unequal_actions = check_symmetry(validate_game(s));
  REQUIRE_FALSE(unequal_actions.is_symmetric);
  CHECK(unequal_actions.witness->condition == "action_sets");

  GameSpec d = rps_spec();
  d.discount = {0.0, 0.5};
  const auto unequal_discounts = check_symmetry(validate_game(d));
  REQUIRE_FALSE(unequal_discounts.is_symmetric);
  CHECK(unequal_discounts.witness->condition == "discounts");
}

TEST_CASE("kernel asymmetry is detected", "[game]") {
  // Two states; the transition depends on which player picked action 1,
  // not just on the multiset of actions.
  GameSpec s;
  s.num_players = 2;
  s.num_states = 2;
  s.num_actions = {2, 2};
  s.discount = {0.5, 0.5};
  s.cost.assign(2 * 2 * 4, 0.0);
  s.kernel.assign(2 * 4 * 2, 0.0);
  auto set_row = [&](int x, int ja, double p0, double p1) {
    s.kernel[(static_cast<std::size_t>(x) * 4 + ja) * 2 + 0] = p0;
    s.kernel[(static_cast<std::size_t>(x) * 4 + ja) * 2 + 1] = p1;
  };
  for (int x = 0; x < 2; ++x) {
    set_row(x, 0, 1.0, 0.0);   // (0,0)
    set_row(x, 1, 1.0, 0.0);   // (0,1)
    set_row(x, 2, 0.0, 1.0);   // (1,0): differs from its transposition (0,1)
    set_row(x, 3, 0.0, 1.0);   // (1,1)
  }
  s.initial_dist = {1.0, 0.0};
  const auto report = check_symmetry(validate_game(s));
  REQUIRE_FALSE(report.is_symmetric);
  CHECK(report.witness->condition == "kernel");
}

TEST_CASE("symmetry check accepts value noise below its tolerance", "[game]") {
  GameSpec s = rps_spec();
  s.cost[1] += 1e-12;  // within the default 1e-9 tolerance
  CHECK(check_symmetry(validate_game(s)).is_symmetric);
  CHECK_FALSE(check_symmetry(validate_game(s), 1e-15).is_symmetric);
}

TEST_CASE("reachability holds for dense kernels and fails for sinks", "[game]") {
  CHECK(check_reachability(rps_game()));  // single state, self loop
  RandomStream rng(5);
  CHECK(check_reachability(random_game(rng, 2, 3, 2, 0.5)));

  GameSpec s;
  s.num_players = 1;
  s.num_states = 2;
  s.num_actions = {1};
  s.discount = {0.5};
  s.cost.assign(2, 0.0);
  // Both states always transition to state 0; state 1 is unreachable.
  s.kernel = {1.0, 0.0, 1.0, 0.0};
  s.initial_dist = {1.0, 0.0};
  CHECK_FALSE(check_reachability(validate_game(s)));
}

TEST_CASE("transition sampling follows the kernel row", "[game]") {
  SECTION("a deterministic row always yields its target") {
    const ValidatedGame g = two_state_chain();
    RandomStream rng(3);
    for (int rep = 0; rep < 50; ++rep) {
      CHECK(sample_transition(rng, g, 0, 0) == 1);
      CHECK(sample_transition(rng, g, 1, 0) == 0);
    }
  }
  SECTION("empirical frequencies match a mixed row") {
    GameSpec s;
    s.num_players = 1;
    s.num_states = 3;
    s.num_actions = {1};
    s.discount = {0.0};
    s.cost.assign(3, 0.0);
    s.kernel = {0.2, 0.3, 0.5, 1, 0, 0, 1, 0, 0};
    s.initial_dist = {1.0, 0.0, 0.0};
    const ValidatedGame g = validate_game(s);
    RandomStream rng(99);
    const int n = 20000;
    std::vector<int> hits(3, 0);
    for (int t = 0; t < n; ++t) ++hits[sample_transition(rng, g, 0, 0)];
    CHECK(std::abs(hits[0] / double(n) - 0.2) < 0.02);
    CHECK(std::abs(hits[1] / double(n) - 0.3) < 0.02);
    CHECK(std::abs(hits[2] / double(n) - 0.5) < 0.02);
  }
}

TEST_CASE("stage simulation reports joint action, costs and next state",
          "[game]") {
  const ValidatedGame g = two_state_chain();
  RandomStream rng(1);
  const StageOutcome out = simulate_stage(rng, g, 0, {0});
  CHECK(out.joint_action == std::vector<int>{0});
  REQUIRE(out.costs.size() == 1);
  CHECK(out.costs[0] == 1.0);
  CHECK(out.next_state == 1);

  const ValidatedGame rps = rps_game();
  const StageOutcome duel = simulate_stage(rng, rps, 0, {0, 1});
  CHECK(duel.costs == std::vector<double>{1.0, -1.0});
  CHECK(duel.next_state == 0);
}
