#include "platoon/objectives.hpp"

#include <algorithm>

namespace platoon {

double drag_coefficient(int omega_size, const SimParams& p) {
  if (omega_size <= 0) return p.phi_solo;
  const double k = static_cast<double>(omega_size);
  return 1.0 - (p.phi_solo - p.phi_platoon) * k / (k + 1.0);
}

double fuel_saving_step(double speed_kmh, double phi, const SimParams& p, double t_total_min) {
  if (speed_kmh <= 0.0) return 0.0;
  const double vm = p.v_medium;
  return (p.phi_solo * vm * vm - phi * speed_kmh * speed_kmh) * speed_kmh * p.dt_min /
         (vm * vm * vm * t_total_min);
}

double air_fuel_step(double speed_kmh, double phi, const SimParams& p) {
  return 0.5 * p.fuel_energy_coeff * p.air_density * p.cross_section * phi * speed_kmh * speed_kmh *
         speed_kmh * p.dt_min;
}

bool over_budget(int arrival_step, const Mission& m, const SimParams& p) {
  const double actual = arrival_step - m.depart_step;
  const double normal = m.normal_travel_steps();
  return actual / normal > p.delay_budget_rate;
}

double delay_objective(int arrival_step, const Mission& m, const SimParams& p, double t_total_min,
                       bool timed_out) {
  const double base = (m.normal_arrival_step - arrival_step) * p.dt_min / t_total_min;
  return timed_out || over_budget(arrival_step, m, p) ? p.overbudget_multiplier * base : base;
}

double objective_value(const Trajectory& traj, const MissionSet& ms, const SimParams& p,
                       double t_norm_min) {
  double fuel = 0.0;
  for (const auto& r : traj.records) {
    const double v = speed_of(r.action, p);
    fuel += fuel_saving_step(v, drag_coefficient(r.omega_size, p), p, t_norm_min);
  }
  double delay = 0.0;
  for (int i = 0; i < ms.size(); ++i)
    delay += delay_objective(traj.arrival_step[i], ms.missions[i], p, t_norm_min, traj.timed_out[i]);
  return p.w_fuel * fuel + p.w_delay * delay;
}

Metrics episode_metrics(const Trajectory& traj, const MissionSet& ms, const SimParams& p) {
  Metrics out;
  const int n = ms.size();
  if (n == 0) return out;
  const double t_total = ms.t_total_min;

  double fuel = 0.0;
  double platoon_km = 0.0;
  std::vector<bool> joined(n, false);
  for (const auto& r : traj.records) {
    const double v = speed_of(r.action, p);
    fuel += fuel_saving_step(v, drag_coefficient(r.omega_size, p), p, t_total);
    if (r.omega_size > 0) {
      platoon_km += r.moved_km;
      joined[r.truck] = true;
    }
  }

  double route_km = 0.0;
  double delay_min = 0.0;
  int over = 0;
  for (int i = 0; i < n; ++i) {
    const auto& m = ms.missions[i];
    route_km += m.route.total_km();
    delay_min += (traj.arrival_step[i] - m.normal_arrival_step) * p.dt_min;
    over += traj.timed_out[i] || over_budget(traj.arrival_step[i], m, p) ? 1 : 0;
  }

  out.F_r = 100.0 * fuel;
  out.T_d = delay_min / n;
  out.T_r = 100.0 * delay_min / t_total;
  out.P_j = route_km > 0.0 ? 100.0 * platoon_km / route_km : 0.0;
  out.F_v = objective_value(traj, ms, p, t_total);
  out.T_o = 100.0 * over / n;
  out.P_r = 100.0 * static_cast<double>(std::count(joined.begin(), joined.end(), true)) / n;
  return out;
}

}  // namespace platoon
