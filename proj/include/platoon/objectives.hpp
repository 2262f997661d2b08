#pragma once

#include <vector>

#include "platoon/dynamics.hpp"
#include "platoon/network.hpp"
#include "platoon/params.hpp"

namespace platoon {

/// phi for a truck sharing its position and speed with `omega_size` others.
double drag_coefficient(int omega_size, const SimParams& p);

/// Fuel saved in one step relative to a solo truck at v_m, as a fraction of
/// the scenario's normal consumption. `t_total_min` is the normalizer.
double fuel_saving_step(double speed_kmh, double phi, const SimParams& p, double t_total_min);

/// Absolute drag-fuel use of one step, with the retained physical constants.
double air_fuel_step(double speed_kmh, double phi, const SimParams& p);

/// (t_a - d) / (t_a' - d) > K_d.
bool over_budget(int arrival_step, const Mission& m, const SimParams& p);

/// Delay ratio J_d for an arrival step. A truck that never arrived always
/// takes the over-budget branch.
double delay_objective(int arrival_step, const Mission& m, const SimParams& p, double t_total_min,
                       bool timed_out = false);

/// Everything metrics need from one episode: per-step records of active trucks
/// and the effective arrival step of each truck (T_e when it never arrived).
struct Trajectory {
  std::vector<TruckStepLog> records;
  std::vector<int> arrival_step;
  std::vector<bool> timed_out;
};

struct Metrics {
  double F_r = 0.0;  // percent
  double T_d = 0.0;  // minutes
  double T_r = 0.0;  // percent
  double P_j = 0.0;  // percent
  double F_v = 0.0;
  double T_o = 0.0;  // percent
  double P_r = 0.0;  // percent
};

/// Sum over trucks of w_1 * sum_t J_f + w_2 * J_d, normalized by `t_norm_min`.
double objective_value(const Trajectory& traj, const MissionSet& ms, const SimParams& p,
                       double t_norm_min);

/// Metrics with the missions' own t_total as normalizer.
Metrics episode_metrics(const Trajectory& traj, const MissionSet& ms, const SimParams& p);

}  // namespace platoon
