#pragma once

#include <algorithm>
#include <cmath>

namespace platoon {

/// Simulation, objective and encoding constants shared by every module.
///
/// Times are in minutes, speeds in km/h, distances in km. The internal time
/// axis is the step index t in [1, horizon_steps].
struct SimParams {
  double dt_min = 4.0;
  double v_low = 60.0;
  double v_medium = 75.0;
  double v_high = 90.0;

  double noise_sigma_km = 0.01;
  int horizon_steps = 250;  // T_e = ceil(1000 min / 4 min)

  double delay_budget_rate = 1.1;  // K_d
  double overbudget_multiplier = 2.0;  // c_b

  double phi_solo = 1.0;
  double phi_platoon = 0.68;
  // Absolute-fuel constants. They cancel in every ratio.
  double fuel_energy_coeff = 1.0;
  double air_density = 1.0;
  double cross_section = 1.0;

  double t_avgtotal_min = 18028.7167;
  double w_fuel = 7.03125 * 18028.7167;
  double w_delay = 10.5 * 18028.7167;

  int segments_per_edge = 10;  // alpha
  int observed_partners = 5;  // q
  int max_trucks = 100;  // N_max

  double step_km(double speed_kmh) const { return speed_kmh * dt_min / 60.0; }
  double medium_km_per_min() const { return v_medium / 60.0; }

  /// Rendezvous window for M-sets: min(v_h - v_m, v_m - v_l) * dt.
  double mset_window_km() const {
    return std::min(v_high - v_medium, v_medium - v_low) * dt_min / 60.0;
  }

  /// Sets t_avgtotal and rescales the weights the way the experiments do
  /// (w_1 = 7.03125 t_avg, w_2 = 10.5 t_avg).
  void set_reward_normalizer(double t_avg) {
    t_avgtotal_min = t_avg;
    w_fuel = 7.03125 * t_avg;
    w_delay = 10.5 * t_avg;
  }

  static int horizon_from_minutes(double minutes, double dt) {
    return static_cast<int>(std::ceil(minutes / dt));
  }
};

}  // namespace platoon
