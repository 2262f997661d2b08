#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "platoon/baselines.hpp"
#include "platoon/rng.hpp"

using namespace platoon;
using namespace platoon::baselines;
using fixtures::make_world;

namespace {

// Cohort benefit computed from the drag rule directly: k trucks share
// 0.32 (k - 1) / k of the air drag.
double share(int k) { return 0.32 * (k - 1) / k; }

}  // namespace

TEST_CASE("nc policy is always medium") {
  auto w = make_world(fixtures::line_graph({60, 60}), {{{0, 1, 2}, 1}, {{2, 1}, 3}});
  const Scenario sc = w->scenario();
  WorldState ws = initial_world(sc);
  for (int i = 0; i < 2; ++i) CHECK(nc_policy(ws, i) == SpeedAction::Medium);
  const auto run = run_nc(w->graph, w->missions, w->params, true, 7);
  for (const auto& row : run.actions)
    for (int a : row) CHECK(a == action_index(SpeedAction::Medium));
}

TEST_CASE("nc noise-free episodes arrive on time") {
  auto w = make_world(fixtures::line_graph({60, 47, 83}),
                      {{{0, 1, 2, 3}, 1}, {{3, 2, 1}, 2}, {{1, 2}, 5}, {{2, 1, 0}, 9}});
  const auto run = run_nc(w->graph, w->missions, w->params, false, 0);
  for (int i = 0; i < w->missions.size(); ++i)
    CHECK(run.trajectory.arrival_step[i] == w->missions.missions[i].normal_arrival_step);
  CHECK(run.metrics.T_d == 0.0);
  CHECK(run.metrics.F_r == 0.0);
  CHECK(run.metrics.P_j == 0.0);
  CHECK(run.metrics.P_r == 0.0);
  CHECK(run.decision_epochs.size() == run.actions.size());
}

TEST_CASE("earlier truck waits for a partner arriving two steps later") {
  // B leaves hub 0 at step 1 and reaches hub 1 at step 21; A starts at hub 1
  // at step 19 on the same outgoing edge.
  auto w = make_world(fixtures::line_graph({100, 100, 100}), {{{1, 2, 3}, 19}, {{0, 1, 2, 3}, 1}});
  const SimParams& p = w->params;
  const Scenario sc = w->scenario();

  WorldState ws = initial_world(sc);
  const NoiseModel quiet{0.0, 0};
  while (ws.t < 19) ws = step_world(sc, ws, {SpeedAction::Medium, SpeedAction::Medium}, quiet).next;
  NePlanner planner(sc, {});
  CHECK(planner.interval() == 2);
  const WaitGame game = planner.build_game(ws);
  REQUIRE(game.players.size() == 1);
  CHECK(game.players[0].truck == 0);
  CHECK(game.players[0].max_wait == 4);  // floor(0.1 * 40)
  CHECK(game.fixed.at({game.players[0].edge, 2}) == 1);

  // Brute force over A's waits: only waiting exactly 2 steps shares the edge.
  int best = -1;
  double best_u = -1.0;
  for (int wait = 0; wait <= 4; ++wait) {
    const double u = 100.0 * share(wait == 2 ? 2 : 1);
    CHECK(wait_utility(game, {wait}, 0, p) == doctest::Approx(u).epsilon(1e-12));
    if (u > best_u) best_u = u, best = wait;
  }
  const WaitSolution sol = solve_wait_game(game, p);
  CHECK(sol.converged);
  CHECK(sol.waits[0] == best);
  CHECK(best == 2);

  const auto run = run_ne(w->graph, w->missions, p);
  CHECK(run.trajectory.arrival_step[0] == w->missions.missions[0].normal_arrival_step + 2);
  CHECK(run.trajectory.arrival_step[1] == w->missions.missions[1].normal_arrival_step);
  CHECK(run.metrics.P_r == doctest::Approx(100.0));
  CHECK(run.metrics.T_o == 0.0);
  CHECK(run.metrics.F_r > 0.0);
}

TEST_CASE("exhausted budget means no wait") {
  // A single 20 km edge: 4 normal steps, floor(0.4) = 0 spare steps.
  auto w = make_world(fixtures::line_graph({100, 20}), {{{1, 2}, 19}, {{0, 1, 2}, 1}});
  const Scenario sc = w->scenario();
  WorldState ws = initial_world(sc);
  const NoiseModel quiet{0.0, 0};
  while (ws.t < 19) ws = step_world(sc, ws, {SpeedAction::Medium, SpeedAction::Medium}, quiet).next;
  NePlanner planner(sc, {});
  const WaitGame game = planner.build_game(ws);
  REQUIRE(game.players.size() == 1);
  CHECK(game.players[0].max_wait == 0);
  CHECK(solve_wait_game(game, w->params).waits[0] == 0);
  const auto run = run_ne(w->graph, w->missions, w->params);
  CHECK(run.trajectory.arrival_step[0] == w->missions.missions[0].normal_arrival_step);
}

TEST_CASE("best responses reach a fixed point with no unilateral gain") {
  const SimParams p;
  Rng rng(2024);
  for (int trial = 0; trial < 400; ++trial) {
    WaitGame game;
    const int n = uniform_int(rng, 1, 3);
    for (int i = 0; i < n; ++i) {
      WaitGame::Player pl;
      pl.truck = i;
      pl.edge = uniform_int(rng, 0, 1);
      pl.edge_km = pl.edge == 0 ? 80.0 : 55.0;
      pl.max_wait = uniform_int(rng, 0, 5);
      game.players.push_back(pl);
    }
    const int events = uniform_int(rng, 0, 4);
    for (int e = 0; e < events; ++e) ++game.fixed[{uniform_int(rng, 0, 1), uniform_int(rng, 1, 5)}];

    const WaitSolution sol = solve_wait_game(game, p);
    REQUIRE(sol.converged);
    for (std::size_t k = 1; k < sol.potential.size(); ++k) CHECK(sol.potential[k] >= sol.potential[k - 1] - 1e-12);

    for (int i = 0; i < n; ++i) {
      auto cohort = [&](const std::vector<int>& waits) {
        int k = 1;
        const auto it = game.fixed.find({game.players[i].edge, waits[i]});
        if (it != game.fixed.end()) k += it->second;
        for (int j = 0; j < n; ++j)
          if (j != i && game.players[j].edge == game.players[i].edge && waits[j] == waits[i]) ++k;
        return k;
      };
      const double here = game.players[i].edge_km * share(cohort(sol.waits));
      CHECK(wait_utility(game, sol.waits, i, p) == doctest::Approx(here).epsilon(1e-12));
      std::vector<int> dev = sol.waits;
      for (int wait = 0; wait <= game.players[i].max_wait; ++wait) {
        dev[i] = wait;
        const double there = game.players[i].edge_km * share(cohort(dev));
        CHECK(there <= here + 1e-12);
        // Potential differences equal the deviator's utility difference.
        CHECK(wait_potential(game, dev, p) - wait_potential(game, sol.waits, p) ==
              doctest::Approx(there - here).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("ne runs never time out and keep the potential monotone") {
  const SimParams p;
  auto w = make_world(fixtures::line_graph({60, 50, 70, 40}),
                      {{{0, 1, 2, 3, 4}, 1}, {{0, 1, 2, 3}, 2}, {{1, 2, 3, 4}, 12}, {{4, 3, 2, 1}, 1},
                       {{3, 2, 1, 0}, 4}, {{2, 3, 4}, 30}, {{0, 1, 2}, 3}});
  std::vector<WaitSolution> sols;
  const auto run = run_ne(w->graph, w->missions, p, {}, &sols);
  CHECK(run.metrics.T_o == 0.0);
  for (int i = 0; i < w->missions.size(); ++i)
    CHECK_FALSE(over_budget(run.trajectory.arrival_step[i], w->missions.missions[i], p));
  CHECK(run.metrics.P_r > 0.0);
  CHECK(run.decision_epochs.size() == sols.size());
  for (const auto& s : sols) {
    CHECK(s.converged);
    for (std::size_t k = 1; k < s.potential.size(); ++k) CHECK(s.potential[k] >= s.potential[k - 1] - 1e-12);
  }
}
