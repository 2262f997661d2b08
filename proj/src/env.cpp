#include "platoon/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "json.hpp"

namespace platoon {

CommView communication_view(const Scenario& sc, const WorldState& w) {
  const int n = w.size();
  CommView v;
  v.comm_hub.assign(n, -1);
  v.next_hub.assign(n, -1);
  v.edge.assign(n, -1);
  v.hub.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!w.active(i)) continue;
    const auto& s = w.trucks[i];
    const auto& hubs = sc.mission(i).route.hubs;
    const int k = s.route_pos;
    if (s.on_edge) {
      v.edge[i] = sc.mission(i).route.edges[k];
      v.comm_hub[i] = hubs[k + 1];
      v.next_hub[i] = k + 2 < static_cast<int>(hubs.size()) ? hubs[k + 2] : -1;
    } else {
      v.hub[i] = hubs[k];
      v.comm_hub[i] = hubs[k];
      v.next_hub[i] = hubs[k + 1];
    }
  }
  return v;
}

std::vector<int> communication_set(const CommView& v, int truck) {
  std::vector<int> out;
  if (v.comm_hub[truck] < 0) return out;
  for (int j = 0; j < static_cast<int>(v.comm_hub.size()); ++j)
    if (j != truck && v.comm_hub[j] == v.comm_hub[truck]) out.push_back(j);
  return out;
}

std::vector<int> potential_partners(const CommView& v, int truck) {
  std::vector<int> out;
  const bool at_hub = v.hub[truck] >= 0;
  for (int j : communication_set(v, truck)) {
    const bool same_next = v.next_hub[truck] >= 0 && v.next_hub[truck] == v.next_hub[j];
    if (at_hub ? same_next : (same_next || (v.edge[j] >= 0 && v.edge[j] == v.edge[truck])))
      out.push_back(j);
  }
  return out;
}

RawObservation raw_observation(const Scenario& sc, const WorldState& w, const CommView& v, int truck,
                               double past_speed_sum_kmh, int past_steps) {
  RawObservation obs;
  if (!w.active(truck)) return obs;
  const auto& p = sc.params;
  const auto& s = w.trucks[truck];
  const auto& m = sc.mission(truck);
  obs.category = !s.on_edge ? 0 : (w.position_group_size[truck] > 1 ? 2 : 1);
  obs.remaining_km = s.remaining_km;
  obs.delay_budget_min = past_speed_sum_kmh * p.dt_min / p.v_medium - past_steps * p.dt_min +
                         p.delay_budget_rate * m.normal_travel_steps() * p.dt_min;

  struct Rel {
    int id;
    int rs1;
    double rs2;
  };
  std::vector<Rel> rel;
  for (int j : potential_partners(v, truck)) {
    const auto& sj = w.trucks[j];
    const bool same_loc = s.on_edge ? v.edge[j] == v.edge[truck] : v.hub[j] == v.hub[truck];
    Rel r{j, same_loc ? 0 : 1, 0.0};
    if (!s.on_edge) {
      // j at the same hub, or approaching it on an edge
      r.rs2 = same_loc ? 0.0 : -sj.remaining_km;
    } else if (sj.on_edge) {
      r.rs2 = s.remaining_km - sj.remaining_km;
    } else {
      // j already waits at the hub i is heading to
      r.rs2 = s.remaining_km;
    }
    rel.push_back(r);
  }
  std::sort(rel.begin(), rel.end(), [](const Rel& a, const Rel& b) {
    if (std::abs(a.rs2) != std::abs(b.rs2)) return std::abs(a.rs2) > std::abs(b.rs2);
    return a.id < b.id;
  });
  const int q = p.observed_partners;
  for (int k = 0; k < static_cast<int>(rel.size()) && k < q; ++k) obs.others.push_back({rel[k].rs1, rel[k].rs2});
  return obs;
}

Eigen::VectorXd observation_vector(const RawObservation& obs, const Mission& m, const SimParams& p) {
  const int q = p.observed_partners;
  Eigen::VectorXd z(2 * q + 3);
  z(0) = obs.category;
  z(1) = obs.remaining_km / kKmScale;
  const double budget = p.delay_budget_rate * m.normal_travel_steps() * p.dt_min;
  z(2) = (obs.category == 3 || budget <= 0.0) ? 0.0 : obs.delay_budget_min / budget;
  for (int k = 0; k < q; ++k) {
    if (k < static_cast<int>(obs.others.size())) {
      z(3 + 2 * k) = obs.others[k].first;
      z(4 + 2 * k) = obs.others[k].second / kKmScale;
    } else {
      z(3 + 2 * k) = 3.0;
      z(4 + 2 * k) = 0.0;
    }
  }
  return z;
}

int edge_segment(double remaining_km, double length_km, int alpha) {
  // Interval j is ((alpha-j)/alpha L, (alpha+1-j)/alpha L]; k = alpha+1-j.
  int k = static_cast<int>(std::ceil(remaining_km * alpha / length_km));
  k = std::clamp(k, 1, alpha);
  while (k > 1 && remaining_km <= (k - 1) * length_km / alpha) --k;
  while (k < alpha && remaining_km > k * length_km / alpha) ++k;
  return alpha + 1 - k;
}

Eigen::VectorXd encode_state(const Scenario& sc, const WorldState& w) {
  const auto& p = sc.params;
  const int alpha = p.segments_per_edge;
  const int edges = sc.graph->edge_count();
  if (w.size() > p.max_trucks)
    throw std::invalid_argument("more trucks (" + std::to_string(w.size()) + ") than N_max (" +
                                std::to_string(p.max_trucks) + ")");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(alpha * edges + p.max_trucks);
  for (int i = 0; i < w.size(); ++i) {
    if (!w.active(i)) continue;
    const auto& t = w.trucks[i];
    if (t.on_edge) {
      const int e = current_edge(sc, w, i);
      const int j = edge_segment(t.remaining_km, sc.graph->edges()[e].length_km, alpha);
      s(e * alpha + j - 1) += 1.0;
    }
    if (w.platoon_group_size[i] > 1) s(alpha * edges + i) = 1.0;
  }
  return s;
}

Env::Env(const NetworkGraph& graph, const MissionSet& missions, SimParams params, bool noise,
         std::uint64_t episode_seed)
    : sc_{&graph, &missions, params} {
  noise_.sigma_km = noise ? params.noise_sigma_km : 0.0;
  reset(episode_seed);
}

void Env::reset(std::uint64_t episode_seed) {
  noise_.episode_seed = episode_seed;
  world_ = initial_world(sc_);
  const int n = sc_.trucks();
  prev_omega_.assign(n, 0);
  speed_sum_.assign(n, 0.0);
  steps_taken_.assign(n, 0);
  traj_ = Trajectory{};
  traj_.arrival_step.assign(n, -1);
  traj_.timed_out.assign(n, false);
  total_reward_ = 0.0;
  done_ = world_.all_arrived() || world_.t >= sc_.params.horizon_steps;
}

std::vector<ActionMask> Env::masks() const {
  std::vector<ActionMask> m(trucks());
  for (int i = 0; i < trucks(); ++i) m[i] = feasible_actions(sc_, world_, i);
  return m;
}

RawObservation Env::raw_observation_of(int truck) const {
  const auto view = communication_view(sc_, world_);
  return raw_observation(sc_, world_, view, truck, speed_sum_[truck], steps_taken_[truck]);
}

std::vector<RawObservation> Env::raw_observations() const {
  const auto view = communication_view(sc_, world_);
  std::vector<RawObservation> out(trucks());
  for (int i = 0; i < trucks(); ++i)
    out[i] = raw_observation(sc_, world_, view, i, speed_sum_[i], steps_taken_[i]);
  return out;
}

Eigen::VectorXd Env::observation_of(int truck) const {
  return observation_vector(raw_observation_of(truck), sc_.mission(truck), sc_.params);
}

Eigen::MatrixXd Env::observations() const {
  const auto raw = raw_observations();
  const int width = 2 * sc_.params.observed_partners + 3;
  Eigen::MatrixXd z(trucks(), width);
  for (int i = 0; i < trucks(); ++i) z.row(i) = observation_vector(raw[i], sc_.mission(i), sc_.params).transpose();
  return z;
}

StepOutcome Env::step(const std::vector<SpeedAction>& actions) {
  const auto& p = sc_.params;
  const int n = trucks();
  StepOutcome out;
  out.rewards.assign(n, 0.0);
  out.fuel_rewards.assign(n, 0.0);
  out.time_rewards.assign(n, 0.0);
  out.ending_rewards.assign(n, 0.0);
  if (done_) {
    out.done = true;
    return out;
  }

  const double D = p.t_avgtotal_min;
  const double vm_km_per_min = p.medium_km_per_min();
  auto res = step_world(sc_, world_, actions, noise_);
  for (const auto& rec : res.log) {
    const int i = rec.truck;
    const double v = speed_of(rec.action, p);
    out.time_rewards[i] = p.w_delay * (v * p.dt_min / p.v_medium - p.dt_min) / D;

    const int omega = rec.omega_size;
    const int prev = rec.on_edge ? prev_omega_[i] : 0;
    const double phi = drag_coefficient(omega, p);
    double rf = 0.0;
    if (omega == 0) {
      rf = p.w_fuel * fuel_saving_step(v, phi, p, D);
    } else if (prev == 0) {
      rf = p.w_fuel * (p.phi_solo - phi) * rec.remaining_km / (vm_km_per_min * D);
    } else if (omega > prev) {
      rf = p.w_fuel * (drag_coefficient(prev, p) - phi) * rec.remaining_km / (vm_km_per_min * D);
    }
    out.fuel_rewards[i] = rf;
    prev_omega_[i] = omega;

    speed_sum_[i] += v;
    steps_taken_[i] += 1;

    if (rec.arrived_final) {
      const int ta = rec.t + 1;
      traj_.arrival_step[i] = ta;
      const auto& m = sc_.mission(i);
      if (over_budget(ta, m, p))
        out.ending_rewards[i] =
            p.w_delay * (p.overbudget_multiplier - 1.0) * (m.normal_arrival_step - ta) * p.dt_min / D;
    }
    traj_.records.push_back(rec);
  }
  world_ = std::move(res.next);
  done_ = world_.all_arrived() || world_.t >= p.horizon_steps;
  if (done_) finish_timeouts(out);

  for (int i = 0; i < n; ++i) {
    out.rewards[i] = out.fuel_rewards[i] + out.time_rewards[i] + out.ending_rewards[i];
    out.team_reward += out.rewards[i];
  }
  total_reward_ += out.team_reward;
  out.done = done_;
  return out;
}

void Env::finish_timeouts(StepOutcome& out) {
  const auto& p = sc_.params;
  for (int i = 0; i < trucks(); ++i) {
    if (traj_.arrival_step[i] >= 0) continue;
    const int ta = p.horizon_steps;
    traj_.arrival_step[i] = ta;
    traj_.timed_out[i] = true;
    const auto& m = sc_.mission(i);
    // Never arriving always takes the over-budget branch.
    const double late = (m.normal_arrival_step - ta) * p.dt_min / p.t_avgtotal_min;
    out.ending_rewards[i] += p.w_delay * (p.overbudget_multiplier - 1.0) * late;
  }
}

std::uint64_t hash_doubles(const Eigen::VectorXd& v, std::uint64_t h) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t k = 0; k < static_cast<std::size_t>(v.size()) * sizeof(double); ++k) {
    h ^= bytes[k];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string episode_to_json(const EpisodeRecord& rec) {
  nlohmann::json j;
  j["mission_ref"] = rec.mission_ref;
  j["seed"] = rec.seed;
  j["noise"] = rec.noise;
  j["actions"] = rec.actions;
  j["team_rewards"] = rec.team_rewards;
  j["encoding_hash"] = rec.encoding_hash;
  return j.dump();
}

EpisodeRecord episode_from_json(const std::string& doc) {
  const auto j = nlohmann::json::parse(doc);
  EpisodeRecord rec;
  rec.mission_ref = j.at("mission_ref").get<std::string>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.noise = j.at("noise").get<bool>();
  rec.actions = j.at("actions").get<std::vector<std::vector<int>>>();
  rec.team_rewards = j.at("team_rewards").get<std::vector<double>>();
  rec.encoding_hash = j.at("encoding_hash").get<std::uint64_t>();
  return rec;
}

std::uint64_t replay_episode(const EpisodeRecord& rec, const NetworkGraph& graph,
                             const MissionSet& missions, const SimParams& params,
                             std::vector<double>* team_rewards) {
  Env env(graph, missions, params, rec.noise, rec.seed);
  std::uint64_t h = kFnvOffset;
  for (const auto& step : rec.actions) {
    h = hash_doubles(env.state(), h);
    const Eigen::MatrixXd z = env.observations();
    h = hash_doubles(Eigen::Map<const Eigen::VectorXd>(z.data(), z.size()), h);
    std::vector<SpeedAction> acts;
    for (int a : step) acts.push_back(action_from_index(a));
    const auto out = env.step(acts);
    if (team_rewards) team_rewards->push_back(out.team_reward);
  }
  return h;
}

}  // namespace platoon
