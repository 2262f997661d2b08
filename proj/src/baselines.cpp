#include "platoon/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <set>

namespace platoon::baselines {

namespace {

double error_rate(double reward, double fv) {
  if (fv == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(reward - fv) / std::abs(fv);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> to_ints(const std::vector<SpeedAction>& a) {
  std::vector<int> out;
  out.reserve(a.size());
  for (auto x : a) out.push_back(action_index(x));
  return out;
}

void finish(BaselineRun& run, const Env& env, const MissionSet& ms, const SimParams& p) {
  run.trajectory = env.trajectory();
  run.metrics = episode_metrics(run.trajectory, ms, p);
  run.total_reward = env.total_reward();
  run.error_rate = error_rate(run.total_reward, run.metrics.F_v);
}

int active_count(const WorldState& w) {
  int n = 0;
  for (int i = 0; i < w.size(); ++i) n += w.active(i);
  return n;
}

// Arrival step when leaving route hub `pos` at step t and driving Medium.
int arrival_from_hub(const Mission& m, int pos, int t, const SimParams& p) {
  const double per_step = p.step_km(p.v_medium);
  int steps = 0;
  for (std::size_t k = static_cast<std::size_t>(pos); k < m.route.edge_km.size(); ++k)
    steps += static_cast<int>(std::ceil(m.route.edge_km[k] / per_step));
  return t + steps;
}

int cohort_size(const WaitGame& game, const std::vector<int>& waits, int i) {
  const auto& pi = game.players[i];
  int k = 1;
  if (auto it = game.fixed.find({pi.edge, waits[i]}); it != game.fixed.end()) k += it->second;
  for (std::size_t j = 0; j < game.players.size(); ++j)
    if (static_cast<int>(j) != i && game.players[j].edge == pi.edge && waits[j] == waits[i]) ++k;
  return k;
}

}  // namespace

SpeedAction nc_policy(const WorldState&, int) { return SpeedAction::Medium; }

BaselineRun run_nc(const NetworkGraph& g, const MissionSet& ms, const SimParams& p, bool noise, std::uint64_t seed) {
  BaselineRun run;
  Env env(g, ms, p, noise, seed);
  while (!env.done()) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SpeedAction> acts(env.trucks());
    for (int i = 0; i < env.trucks(); ++i) acts[i] = nc_policy(env.world(), i);
    run.decision_epochs.emplace_back(active_count(env.world()), seconds_since(t0));
    run.actions.push_back(to_ints(acts));
    env.step(acts);
  }
  finish(run, env, ms, p);
  return run;
}

double wait_utility(const WaitGame& game, const std::vector<int>& waits, int i, const SimParams& p) {
  const int k = cohort_size(game, waits, i);
  return game.players[i].edge_km * (1.0 - drag_coefficient(k - 1, p));
}

double wait_potential(const WaitGame& game, const std::vector<int>& waits, const SimParams& p) {
  std::map<std::pair<int, int>, std::pair<int, double>> cohorts;  // -> (players, edge km)
  for (std::size_t i = 0; i < game.players.size(); ++i) {
    auto& c = cohorts[{game.players[i].edge, waits[i]}];
    ++c.first;
    c.second = game.players[i].edge_km;
  }
  double s = 0.0;
  for (const auto& [key, c] : cohorts) {
    const auto it = game.fixed.find(key);
    const int f = it == game.fixed.end() ? 0 : it->second;
    for (int k = f + 1; k <= f + c.first; ++k) s += c.second * (1.0 - drag_coefficient(k - 1, p));
  }
  return s;
}

WaitSolution solve_wait_game(const WaitGame& game, const SimParams& p, int max_sweeps) {
  constexpr double tol = 1e-12;
  WaitSolution sol;
  sol.waits.assign(game.players.size(), 0);
  sol.potential.push_back(wait_potential(game, sol.waits, p));
  while (sol.sweeps < max_sweeps) {
    bool changed = false;
    for (std::size_t i = 0; i < game.players.size(); ++i) {
      const int ii = static_cast<int>(i);
      std::vector<int> trial = sol.waits;
      const double current = wait_utility(game, trial, ii, p);
      int best = sol.waits[i];
      double best_u = -std::numeric_limits<double>::infinity();
      for (int w = 0; w <= game.players[i].max_wait; ++w) {
        trial[i] = w;
        const double u = wait_utility(game, trial, ii, p);
        if (u > best_u + tol) {
          best_u = u;
          best = w;
        }
      }
      if (best_u > current + tol) {
        sol.waits[i] = best;
        changed = true;
      }
    }
    ++sol.sweeps;
    sol.potential.push_back(wait_potential(game, sol.waits, p));
    if (!changed) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

NePlanner::NePlanner(const Scenario& sc, const NeConfig& cfg) : sc_(sc), cfg_(cfg) {
  interval_ = cfg.interval_steps > 0 ? cfg.interval_steps
                                     : static_cast<int>(std::ceil(5.0 / sc.params.dt_min - 1e-12));
  wait_until_.assign(sc.trucks(), 0);
}

WaitGame NePlanner::build_game(const WorldState& w) const {
  WaitGame game;
  std::set<int> players;
  int horizon = 0;
  for (int i = 0; i < w.size(); ++i) {
    if (!w.active(i) || current_hub(sc_, w, i) < 0) continue;
    const TruckState& s = w.trucks[i];
    const Mission& m = sc_.mission(i);
    WaitGame::Player pl;
    pl.truck = i;
    pl.edge = current_edge(sc_, w, i);
    pl.edge_km = m.route.edge_km[s.route_pos];
    if (feasible_actions(sc_, w, i)[action_index(SpeedAction::Wait)]) {
      const int a0 = arrival_from_hub(m, s.route_pos, w.t, sc_.params);
      while (a0 + pl.max_wait + 1 <= sc_.params.horizon_steps && !over_budget(a0 + pl.max_wait + 1, m, sc_.params))
        ++pl.max_wait;
      if (over_budget(a0, m, sc_.params)) pl.max_wait = 0;
    }
    horizon = std::max(horizon, pl.max_wait);
    game.players.push_back(pl);
    players.insert(i);
  }
  if (game.players.empty() || horizon == 0) return game;

  const std::vector<SpeedAction> medium(w.size(), SpeedAction::Medium);
  const NoiseModel quiet{0.0, 0};
  WorldState sim = w;
  for (int s = 1; s <= horizon && !sim.all_arrived(); ++s) {
    sim = step_world(sc_, sim, medium, quiet).next;
    for (int i = 0; i < sim.size(); ++i) {
      if (players.count(i) || !sim.active(i) || current_hub(sc_, sim, i) < 0) continue;
      ++game.fixed[{current_edge(sc_, sim, i), s}];
    }
  }
  return game;
}

std::vector<SpeedAction> NePlanner::act(const WorldState& w) {
  if ((w.t - 1) % interval_ == 0) {
    const WaitGame game = build_game(w);
    WaitSolution sol = solve_wait_game(game, sc_.params, cfg_.max_sweeps);
    if (!sol.converged) {
      ++unconverged_;
      std::cerr << "warning: hub-waiting best responses did not converge at step " << w.t << "\n";
    }
    for (std::size_t k = 0; k < game.players.size(); ++k) wait_until_[game.players[k].truck] = w.t + sol.waits[k];
    solutions_.push_back(std::move(sol));
  }
  std::vector<SpeedAction> out(w.size(), SpeedAction::Medium);
  for (int i = 0; i < w.size(); ++i) {
    if (!w.active(i) || current_hub(sc_, w, i) < 0 || w.t >= wait_until_[i]) continue;
    if (feasible_actions(sc_, w, i)[action_index(SpeedAction::Wait)]) out[i] = SpeedAction::Wait;
  }
  return out;
}

BaselineRun run_ne(const NetworkGraph& g, const MissionSet& ms, const SimParams& p, const NeConfig& cfg,
                   std::vector<WaitSolution>* solutions) {
  BaselineRun run;
  Env env(g, ms, p, false, 0);
  NePlanner planner(env.scenario(), cfg);
  while (!env.done()) {
    const bool planning = (env.world().t - 1) % planner.interval() == 0;
    const auto t0 = std::chrono::steady_clock::now();
    auto acts = planner.act(env.world());
    if (planning) run.decision_epochs.emplace_back(active_count(env.world()), seconds_since(t0));
    run.actions.push_back(to_ints(acts));
    env.step(acts);
  }
  finish(run, env, ms, p);
  if (solutions) *solutions = planner.solutions();
  return run;
}

}  // namespace platoon::baselines
