#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "platoon/env.hpp"

namespace platoon::baselines {

/// Outcome of running a fixed policy for one episode.
struct BaselineRun {
  Trajectory trajectory;
  Metrics metrics;
  double total_reward = 0.0;
  double error_rate = 0.0;  // |R - F_v| / |F_v|, NaN when F_v = 0
  std::vector<std::vector<int>> actions;
  std::vector<std::pair<int, double>> decision_epochs;  // (active trucks, wall seconds)
};

/// No coordination: Medium everywhere.
SpeedAction nc_policy(const WorldState& w, int truck);
BaselineRun run_nc(const NetworkGraph& g, const MissionSet& ms, const SimParams& p, bool noise, std::uint64_t seed);

/// Hub-waiting game at one decision instant.
///
/// Each player sits at a hub and picks a wait in [0, max_wait] before taking
/// its outgoing edge at Medium. Trucks leaving the same hub on the same edge
/// at the same step form a cohort and split the drag benefit equally. Other
/// trucks are predicted departures that cannot change.
struct WaitGame {
  struct Player {
    int truck = -1;
    int edge = -1;
    double edge_km = 0.0;
    int max_wait = 0;
  };
  std::vector<Player> players;
  std::map<std::pair<int, int>, int> fixed;  // (edge, steps from now) -> departing non-players
};

/// Relative fuel saving of player i over its next edge: L (1 - phi(k - 1))
/// for a cohort of k trucks.
double wait_utility(const WaitGame& game, const std::vector<int>& waits, int i, const SimParams& p);
/// Exact potential: for each cohort with f fixed trucks and n players, the sum
/// of the k-truck utility for k = f+1 .. f+n. A unilateral change of wait
/// moves it by exactly the change in that player's utility.
double wait_potential(const WaitGame& game, const std::vector<int>& waits, const SimParams& p);

struct WaitSolution {
  std::vector<int> waits;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> potential;  // after the start and after each sweep
};

/// Best-response sweeps in player order starting from zero waits. A player
/// moves only on a strict gain, to the shortest wait reaching its best utility.
WaitSolution solve_wait_game(const WaitGame& game, const SimParams& p, int max_sweeps = 100);

struct NeConfig {
  int interval_steps = 0;  // 0: ceil(5 min / dt)
  int max_sweeps = 100;
};

/// Plans waits every interval and follows the plan in between. Trucks without
/// a pending wait drive at Medium.
class NePlanner {
 public:
  NePlanner(const Scenario& sc, const NeConfig& cfg);

  int interval() const { return interval_; }
  std::vector<SpeedAction> act(const WorldState& w);

  /// Game for the players at hubs in `w`. Predictions roll the world forward
  /// noise-free with every non-player at Medium.
  WaitGame build_game(const WorldState& w) const;

  const std::vector<WaitSolution>& solutions() const { return solutions_; }
  int unconverged() const { return unconverged_; }

 private:
  Scenario sc_;
  NeConfig cfg_;
  int interval_;
  std::vector<int> wait_until_;  // Wait while t < wait_until_
  std::vector<WaitSolution> solutions_;
  int unconverged_ = 0;
};

/// NE-based hub waiting on a noise-free simulator.
BaselineRun run_ne(const NetworkGraph& g, const MissionSet& ms, const SimParams& p, const NeConfig& cfg = {},
                   std::vector<WaitSolution>* solutions = nullptr);

}  // namespace platoon::baselines
