#include "doctest.h"
#include "fixtures.hpp"
#include "platoon/env.hpp"
#include "platoon/rng.hpp"

using namespace platoon;
using fixtures::make_world;

namespace {

constexpr auto M = SpeedAction::Medium;
constexpr auto H = SpeedAction::High;
constexpr auto W = SpeedAction::Wait;

// Hubs 0..4 on a line plus a branch 5 joining hub 2.
NetworkGraph branch_graph() {
  std::vector<Hub> hubs;
  for (int i = 0; i < 6; ++i) hubs.push_back(Hub{i, "H" + std::to_string(i)});
  std::vector<EdgeSpec> es;
  auto both = [&](int a, int b, double l) {
    es.push_back({a, b, l});
    es.push_back({b, a, l});
  };
  both(0, 1, 50);
  both(1, 2, 50);
  both(2, 3, 50);
  both(3, 4, 50);
  both(5, 2, 40);
  return NetworkGraph::build(hubs, es, SimParams{});
}

}  // namespace

TEST_CASE("communication hub follows the location") {
  auto w = make_world(branch_graph(), {{{0, 1, 2}}, {{1, 2}, 3}});
  const auto sc = w->scenario();
  auto world = initial_world(sc);
  auto v = communication_view(sc, world);
  CHECK(v.comm_hub[0] == 0);
  CHECK(v.comm_hub[1] == -1);  // not departed
  world = step_world(sc, world, {M, M}, NoiseModel{}).next;
  v = communication_view(sc, world);
  CHECK(v.comm_hub[0] == 1);
  CHECK(v.next_hub[0] == 2);
  // run truck 0 to its destination
  while (world.trucks[0].phase != Phase::Arrived) world = step_world(sc, world, {M, M}, NoiseModel{}).next;
  v = communication_view(sc, world);
  CHECK(v.comm_hub[0] == -1);
  CHECK(potential_partners(v, 1).empty());
}

TEST_CASE("potential partner examples") {
  auto w = make_world(branch_graph(), {{{1, 2, 3}}, {{1, 2, 3}}, {{0, 1, 2}}, {{5, 2, 3}}, {{1, 2, 3, 4}}});
  const auto sc = w->scenario();
  auto world = initial_world(sc);
  // 0,1,4 at hub 1 heading to 2; 2 at hub 0; 3 at hub 5
  auto v = communication_view(sc, world);
  CHECK(potential_partners(v, 0) == std::vector<int>{1, 4});

  // Put truck 2 on edge (0,1): comm hub 1, next-next 2, so hub trucks at 1 see it.
  world.trucks[2].on_edge = true;
  world.trucks[2].remaining_km = 20.0;
  // Truck 0 on edge (1,2) while truck 1 waits at hub 1: comm hubs 2 and 1 differ.
  world.trucks[0].on_edge = true;
  world.trucks[0].remaining_km = 30.0;
  world = regroup(sc, world);
  v = communication_view(sc, world);
  CHECK(v.comm_hub[0] == 2);
  CHECK(v.comm_hub[1] == 1);
  const auto p0 = potential_partners(v, 0);
  CHECK(std::find(p0.begin(), p0.end(), 1) == p0.end());
  const auto p1 = potential_partners(v, 1);
  CHECK(std::find(p1.begin(), p1.end(), 2) != p1.end());

  // Same edge => partners regardless of next-next hub (truck 4 continues to 4, truck 0 stops at 3).
  world.trucks[4].on_edge = true;
  world.trucks[4].remaining_km = 10.0;
  world = regroup(sc, world);
  v = communication_view(sc, world);
  const auto p4 = potential_partners(v, 4);
  CHECK(std::find(p4.begin(), p4.end(), 0) != p4.end());

  // Relative positions seen from truck 1 at hub 1: truck 2 approaching at 20 km.
  const auto obs = raw_observation(sc, world, v, 1, 0.0, 0);
  REQUIRE(obs.others.size() == 1);
  CHECK(obs.others[0] == std::pair<int, double>{1, -20.0});
  // From truck 0 on edge (1,2): truck 4 behind on the same edge.
  const auto obs0 = raw_observation(sc, world, v, 0, 0.0, 0);
  bool saw4 = false;
  for (auto [rs1, rs2] : obs0.others)
    if (rs1 == 0 && rs2 == 20.0) saw4 = true;
  CHECK(saw4);
}

TEST_CASE("partner relation matches its definition on random worlds") {
  SimParams p;
  const auto g = synthesize_network(SyntheticNetworkConfig{8, 2, 24, 60.0}, 3, p);
  MissionGenConfig cfg;
  cfg.trucks = 20;
  cfg.depart_last_step = 10;
  const auto ms = generate_missions(g, cfg, 4, p);
  const Scenario sc{&g, &ms, p};
  Rng rng(8);
  auto world = initial_world(sc);
  for (int t = 0; t < 40 && !world.all_arrived(); ++t) {
    std::vector<SpeedAction> acts(ms.size());
    for (int i = 0; i < ms.size(); ++i) {
      const auto mask = feasible_actions(sc, world, i);
      do acts[i] = action_from_index(uniform_int(rng, 0, 3));
      while (!mask[action_index(acts[i])]);
    }
    world = step_world(sc, world, acts, NoiseModel{0.01, 1}).next;
    const auto v = communication_view(sc, world);
    for (int i = 0; i < ms.size(); ++i) {
      const auto partners = potential_partners(v, i);
      for (int j = 0; j < ms.size(); ++j) {
        bool expect = false;
        if (i != j && world.active(i) && world.active(j)) {
          const auto& si = world.trucks[i];
          const auto& sj = world.trucks[j];
          const auto& ri = ms.missions[i].route.hubs;
          const auto& rj = ms.missions[j].route.hubs;
          const int hi = si.on_edge ? ri[si.route_pos + 1] : ri[si.route_pos];
          const int hj = sj.on_edge ? rj[sj.route_pos + 1] : rj[sj.route_pos];
          auto m1 = [](const TruckState& s, const std::vector<int>& r) {
            const int k = s.route_pos + (s.on_edge ? 2 : 1);
            return k < static_cast<int>(r.size()) ? r[k] : -1;
          };
          const int mi = m1(si, ri);
          const int mj = m1(sj, rj);
          const bool same_edge = si.on_edge && sj.on_edge &&
                                 ms.missions[i].route.edges[si.route_pos] == ms.missions[j].route.edges[sj.route_pos];
          if (hi == hj) expect = (mi >= 0 && mi == mj) || (si.on_edge && same_edge);
        }
        const bool got = std::find(partners.begin(), partners.end(), j) != partners.end();
        CHECK(got == expect);
      }
    }
  }
}

TEST_CASE("edge segments follow the half-open intervals") {
  CHECK(edge_segment(139.0, 140.0, 10) == 1);
  CHECK(edge_segment(140.0, 140.0, 10) == 1);
  CHECK(edge_segment(126.0, 140.0, 10) == 2);
  CHECK(edge_segment(126.0001, 140.0, 10) == 1);
  CHECK(edge_segment(0.5, 140.0, 10) == 10);
  CHECK(edge_segment(14.0, 140.0, 10) == 10);
  CHECK(edge_segment(14.01, 140.0, 10) == 9);
  for (int k = 1; k <= 10; ++k) {
    const double upper = k * 137.3 / 10.0;
    CHECK(edge_segment(upper, 137.3, 10) == 11 - k);
  }
}

TEST_CASE("encoded state layout") {
  SimParams p;
  const auto g = synthesize_network(SyntheticNetworkConfig{}, 1, p);
  MissionSet empty;
  const Scenario sc{&g, &empty, p};
  const auto s = encode_state(sc, initial_world(sc));
  CHECK(s.size() == 2120);
  CHECK(s.isZero());

  auto w = make_world(fixtures::line_graph({140, 140}), {{{0, 1, 2}}, {{0, 1, 2}}, {{0, 1, 2}}});
  const auto sc2 = w->scenario();
  auto world = fixtures::place_on_edge(sc2, {139.0, 60.0, 60.0}, {75, 75, 75});
  const auto st = encode_state(sc2, world);
  const int alpha = 10;
  const int e = current_edge(sc2, world, 0);
  CHECK(st(e * alpha + 0) == 1.0);
  CHECK(st.segment(e * alpha, alpha).sum() == 3.0);
  const int co = alpha * sc2.graph->edge_count();
  CHECK(st(co + 0) == 0.0);
  CHECK(st(co + 1) == 1.0);
  CHECK(st(co + 2) == 1.0);
}

TEST_CASE("observation contents") {
  SimParams p;
  auto w = make_world(fixtures::line_graph({140, 140}), {{{0, 1, 2}}, {{0, 1, 2}}, {{0, 1, 2}, 4}}, p);
  Env env(w->graph, w->missions, p, false, 1);
  const auto obs = env.raw_observation_of(0);
  CHECK(obs.category == 0);
  CHECK(obs.delay_budget_min == doctest::Approx(1.1 * w->missions.missions[0].normal_travel_steps() * 4.0));
  REQUIRE(obs.others.size() == 1);
  CHECK(obs.others[0] == std::pair<int, double>{0, 0.0});
  const auto z = env.observation_of(0);
  CHECK(z.size() == 13);
  CHECK(z(2) == doctest::Approx(1.0));
  for (int k = 1; k < 5; ++k) {
    CHECK(z(3 + 2 * k) == 3.0);
    CHECK(z(4 + 2 * k) == 0.0);
  }
  const auto inactive = env.observation_of(2);
  CHECK(inactive(0) == 3.0);
  CHECK(inactive(2) == 0.0);

  env.step({W, H, M});
  // truck 0 waited: budget drops by one step
  CHECK(env.raw_observation_of(0).delay_budget_min ==
        doctest::Approx(1.1 * w->missions.missions[0].normal_travel_steps() * 4.0 - 4.0));
  CHECK(env.raw_observation_of(1).category == 1);
  CHECK(env.raw_observation_of(1).delay_budget_min ==
        doctest::Approx(1.1 * w->missions.missions[1].normal_travel_steps() * 4.0 + 0.8));
  CHECK(env.observations().rows() == 3);
  CHECK(env.observations().cols() == 13);
}

TEST_CASE("dense time and formation rewards") {
  SimParams p;
  const double D = p.t_avgtotal_min;
  auto w = make_world(fixtures::line_graph({140}), {{{0, 1}}, {{0, 1}}}, p);
  SUBCASE("medium gives no time reward, high gives w2*0.8/D") {
    Env env(w->graph, w->missions, p, false, 1);
    const auto out = env.step({M, H});
    CHECK(out.time_rewards[0] == 0.0);
    CHECK(out.time_rewards[1] == doctest::Approx(p.w_delay * 0.8 / D));
  }
  SUBCASE("departing together pays the formation reward over the whole edge") {
    Env env(w->graph, w->missions, p, false, 1);
    const auto out = env.step({M, M});
    const double expect = p.w_fuel * (1.0 - 0.84) * 140.0 / (1.25 * D);
    CHECK(out.fuel_rewards[0] == doctest::Approx(expect));
    CHECK(out.fuel_rewards[1] == doctest::Approx(expect));
    const auto next = env.step({M, M});
    CHECK(next.fuel_rewards[0] == 0.0);
  }
  SUBCASE("catch-up mid-edge uses the remaining distance") {
    Env env(w->graph, w->missions, p, false, 1);
    env.step({M, W});
    StepOutcome out;
    int guard = 0;
    while (env.world().position_group_size[0] < 2 && ++guard < 10) out = env.step({M, H});
    REQUIRE(env.world().position_group_size[0] == 2);
    CHECK(out.fuel_rewards[1] == doctest::Approx(p.w_fuel * fuel_saving_step(90, 1.0, p, D)));
    const double s2 = env.world().trucks[0].remaining_km;
    out = env.step({M, M});
    CHECK(out.fuel_rewards[0] == doctest::Approx(p.w_fuel * 0.16 * s2 / (1.25 * D)));
  }
}

TEST_CASE("growing platoon uses the drop in drag") {
  SimParams p;
  const double D = p.t_avgtotal_min;
  auto w = make_world(fixtures::line_graph({140}), {{{0, 1}}, {{0, 1}}, {{0, 1}}}, p);
  Env env(w->graph, w->missions, p, false, 1);
  env.step({M, M, W});
  StepOutcome out;
  int guard = 0;
  while (env.world().position_group_size[0] < 3 && ++guard < 10) out = env.step({M, M, H});
  REQUIRE(env.world().position_group_size[0] == 3);
  const double s2 = env.world().trucks[0].remaining_km;
  out = env.step({M, M, M});
  const double phi1 = drag_coefficient(1, p);
  const double phi2 = drag_coefficient(2, p);
  CHECK(out.fuel_rewards[0] == doctest::Approx(p.w_fuel * (phi1 - phi2) * s2 / (1.25 * D)));
  CHECK(out.fuel_rewards[2] == doctest::Approx(p.w_fuel * (1.0 - phi2) * s2 / (1.25 * D)));
}

TEST_CASE("ending reward and done") {
  SimParams p;
  auto w = make_world(fixtures::line_graph({40}), {{{0, 1}}}, p);
  Env env(w->graph, w->missions, p, false, 1);
  const auto& m = w->missions.missions[0];
  // normal: 8 steps; budget 8.8 -> waiting once is fine, twice is over
  env.step({W});
  env.step({W});
  StepOutcome last;
  while (!env.done()) last = env.step({M});
  CHECK(env.trajectory().arrival_step[0] == m.normal_arrival_step + 2);
  CHECK(last.ending_rewards[0] == doctest::Approx(p.w_delay * (2.0 - 1.0) * (-8.0) / p.t_avgtotal_min));
  const auto after = env.step({M});
  CHECK(after.done);
  CHECK(after.team_reward == 0.0);
}

TEST_CASE("single-truck NC episode earns nothing") {
  SimParams p;
  auto w = make_world(fixtures::line_graph({137, 61}), {{{0, 1, 2}}}, p);
  Env env(w->graph, w->missions, p, false, 1);
  while (!env.done()) env.step({M});
  CHECK(env.total_reward() == 0.0);
}

TEST_CASE("timeouts are forced over budget") {
  SimParams p;
  p.horizon_steps = 12;
  auto w = make_world(fixtures::line_graph({40}), {{{0, 1}}}, p);
  Env env(w->graph, w->missions, p, false, 1);
  StepOutcome last;
  while (!env.done()) last = env.step({W});
  CHECK(env.trajectory().timed_out[0]);
  CHECK(env.trajectory().arrival_step[0] == 12);
  CHECK(last.ending_rewards[0] < 0.0);
}

TEST_CASE("time rewards decompose the delay objective for medium driving with waits") {
  SimParams p;
  p.noise_sigma_km = 0.0;
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto w = make_world(fixtures::line_graph({47, 52, 40}), {{{0, 1, 2, 3}}, {{3, 2, 1}, 2}, {{1, 2, 3}, 3}}, p);
    Env env(w->graph, w->missions, p, false, 1);
    std::vector<double> dense(3, 0.0), ending(3, 0.0);
    while (!env.done()) {
      const auto masks = env.masks();
      std::vector<SpeedAction> acts(3, M);
      for (int i = 0; i < 3; ++i)
        if (masks[i][3] && uniform01(rng) < 0.15) acts[i] = W;
      const auto out = env.step(acts);
      for (int i = 0; i < 3; ++i) {
        dense[i] += out.time_rewards[i];
        ending[i] += out.ending_rewards[i];
      }
    }
    for (int i = 0; i < 3; ++i) {
      const double jd = delay_objective(env.trajectory().arrival_step[i], w->missions.missions[i], p,
                                        p.t_avgtotal_min);
      CHECK(dense[i] + ending[i] == doctest::Approx(p.w_delay * jd).epsilon(1e-9));
    }
  }
}

TEST_CASE("episodes replay to the same hash") {
  SimParams p;
  auto w = make_world(fixtures::line_graph({47, 52, 40}), {{{0, 1, 2, 3}}, {{0, 1, 2}, 2}, {{1, 2, 3}, 3}}, p);
  Env env(w->graph, w->missions, p, true, 99);
  EpisodeRecord rec;
  rec.mission_ref = "inline";
  rec.seed = 99;
  Rng rng(4);
  std::uint64_t h = kFnvOffset;
  while (!env.done()) {
    h = hash_doubles(env.state(), h);
    const Eigen::MatrixXd z = env.observations();
    h = hash_doubles(Eigen::Map<const Eigen::VectorXd>(z.data(), z.size()), h);
    const auto masks = env.masks();
    std::vector<SpeedAction> acts(3);
    std::vector<int> idx(3);
    for (int i = 0; i < 3; ++i) {
      do acts[i] = action_from_index(uniform_int(rng, 0, 3));
      while (!masks[i][action_index(acts[i])]);
      idx[i] = action_index(acts[i]);
    }
    rec.actions.push_back(idx);
    rec.team_rewards.push_back(env.step(acts).team_reward);
  }
  rec.encoding_hash = h;
  const auto back = episode_from_json(episode_to_json(rec));
  std::vector<double> rewards;
  CHECK(replay_episode(back, w->graph, w->missions, p, &rewards) == rec.encoding_hash);
  CHECK(rewards == rec.team_rewards);
}
