#include "platoon/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "platoon/rng.hpp"

namespace platoon {

double speed_of(SpeedAction a, const SimParams& p) {
  switch (a) {
    case SpeedAction::Low: return p.v_low;
    case SpeedAction::Medium: return p.v_medium;
    case SpeedAction::High: return p.v_high;
    case SpeedAction::Wait: return 0.0;
  }
  return 0.0;
}

const char* action_name(SpeedAction a) {
  switch (a) {
    case SpeedAction::Low: return "low";
    case SpeedAction::Medium: return "medium";
    case SpeedAction::High: return "high";
    case SpeedAction::Wait: return "wait";
  }
  return "?";
}

bool WorldState::all_arrived() const {
  return std::all_of(trucks.begin(), trucks.end(),
                     [](const TruckState& s) { return s.phase == Phase::Arrived; });
}

int current_edge(const Scenario& sc, const WorldState& w, int truck) {
  const auto& s = w.trucks[truck];
  if (s.phase != Phase::Active) return -1;
  return sc.mission(truck).route.edges[s.route_pos];
}

int current_hub(const Scenario& sc, const WorldState& w, int truck) {
  const auto& s = w.trucks[truck];
  if (s.phase != Phase::Active || s.on_edge) return -1;
  return sc.mission(truck).route.hubs[s.route_pos];
}

bool same_position(const WorldState& w, const Scenario& sc, int a, int b) {
  if (!w.active(a) || !w.active(b)) return false;
  const auto& sa = w.trucks[a];
  const auto& sb = w.trucks[b];
  return sa.on_edge == sb.on_edge && current_edge(sc, w, a) == current_edge(sc, w, b) &&
         sa.remaining_km == sb.remaining_km;
}

namespace {

// Groups active trucks by (position, optional speed). Ids are the smallest
// member index; inactive trucks get -1.
void group_by(const Scenario& sc, const WorldState& w, const std::vector<double>& speed,
              bool with_speed, bool moving_only, std::vector<int>& group, std::vector<int>& size) {
  const int n = w.size();
  group.assign(n, -1);
  size.assign(n, 0);
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (w.active(i) && (!moving_only || speed[i] > 0.0)) idx.push_back(i);
  auto key = [&](int i) {
    const auto& s = w.trucks[i];
    return std::make_tuple(s.on_edge, current_edge(sc, w, i), s.remaining_km,
                           with_speed ? speed[i] : 0.0, i);
  };
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return key(a) < key(b); });
  std::size_t start = 0;
  while (start < idx.size()) {
    std::size_t end = start + 1;
    auto same = [&](int a, int b) {
      const auto& ka = key(a);
      const auto& kb = key(b);
      return std::get<0>(ka) == std::get<0>(kb) && std::get<1>(ka) == std::get<1>(kb) &&
             std::get<2>(ka) == std::get<2>(kb) && std::get<3>(ka) == std::get<3>(kb);
    };
    while (end < idx.size() && same(idx[start], idx[end])) ++end;
    int id = idx[start];
    for (std::size_t k = start; k < end; ++k) id = std::min(id, idx[k]);
    for (std::size_t k = start; k < end; ++k) {
      group[idx[k]] = id;
      size[idx[k]] = static_cast<int>(end - start);
    }
    start = end;
  }
}

void refresh_groups(const Scenario& sc, WorldState& w) {
  std::vector<double> speed(w.size());
  for (int i = 0; i < w.size(); ++i) speed[i] = w.trucks[i].speed_kmh;
  group_by(sc, w, speed, false, false, w.position_group, w.position_group_size);
  group_by(sc, w, speed, true, true, w.platoon_group, w.platoon_group_size);
}

void activate(const Scenario& sc, WorldState& w) {
  for (int i = 0; i < w.size(); ++i) {
    auto& s = w.trucks[i];
    const auto& m = sc.mission(i);
    if (s.phase == Phase::NotDeparted && m.depart_step <= w.t) {
      s.phase = Phase::Active;
      s.route_pos = 0;
      s.on_edge = false;
      s.remaining_km = m.route.edge_km[0];
      s.speed_kmh = 0.0;
    }
  }
}

}  // namespace

WorldState initial_world(const Scenario& sc) {
  WorldState w;
  w.t = 1;
  w.trucks.resize(sc.trucks());
  for (int i = 0; i < sc.trucks(); ++i)
    w.trucks[i].hub_waits.assign(sc.mission(i).route.hub_count(), 0);
  activate(sc, w);
  refresh_groups(sc, w);
  return w;
}

WorldState regroup(const Scenario& sc, WorldState w) {
  refresh_groups(sc, w);
  return w;
}

ActionMask feasible_actions(const Scenario& sc, const WorldState& w, int truck) {
  (void)sc;
  if (!w.active(truck)) return kNoopMask;
  const auto& s = w.trucks[truck];
  if (!s.on_edge) return {true, true, true, true};
  if (w.position_group_size[truck] > 1) return kNoopMask;
  return {true, true, true, false};
}

PlatoonView platoon_of(const Scenario& sc, const WorldState& w, int truck) {
  PlatoonView v;
  if (!w.active(truck)) return v;
  const double sp = w.trucks[truck].speed_kmh;
  for (int j = 0; j < w.size(); ++j) {
    if (j == truck || !same_position(w, sc, truck, j)) continue;
    v.colocated.push_back(j);
    if (sp > 0.0 && w.trucks[j].speed_kmh == sp) v.omega.push_back(j);
  }
  return v;
}

double NoiseModel::draw(int t, int group_id) const {
  if (sigma_km <= 0.0) return 0.0;
  Rng rng(derive_seed(episode_seed, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(group_id)}));
  const double z = std::clamp(standard_normal(rng), -3.0, 3.0);
  return sigma_km * z;
}

std::vector<RendezvousGroup> rendezvous_groups(const Scenario& sc, const WorldState& w,
                                               const std::vector<SpeedAction>& actions,
                                               const std::vector<bool>& arriving) {
  const auto& p = sc.params;
  const int n = w.size();
  const double window = p.mset_window_km();
  const double high_step = p.step_km(p.v_high);
  const double low_step = p.step_km(p.v_low);
  auto step = [&](int i) { return p.step_km(speed_of(actions[i], p)); };
  auto rem = [&](int i) { return w.trucks[i].remaining_km; };

  std::vector<bool> eligible(n, false);
  for (int i = 0; i < n; ++i) {
    if (!w.active(i) || !w.trucks[i].on_edge) continue;
    const bool arrives = arriving.empty() ? rem(i) <= step(i) : static_cast<bool>(arriving[i]);
    eligible[i] = !arrives && rem(i) > step(i);
  }

  std::vector<RendezvousGroup> out;
  std::vector<bool> assigned(n, false);

  std::vector<int> by_edge(n);
  std::iota(by_edge.begin(), by_edge.end(), 0);
  std::vector<int> edge_of(n, -1);
  for (int i = 0; i < n; ++i)
    if (eligible[i]) edge_of[i] = current_edge(sc, w, i);

  std::vector<int> edges;
  for (int i = 0; i < n; ++i)
    if (eligible[i]) edges.push_back(edge_of[i]);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  for (int e : edges) {
    std::vector<int> on;
    for (int i = 0; i < n; ++i)
      if (eligible[i] && edge_of[i] == e) on.push_back(i);
    std::sort(on.begin(), on.end(), [&](int a, int b) {
      if (rem(a) != rem(b)) return rem(a) > rem(b);
      return a < b;
    });

    // M-sets: greedy sweep from the truck farthest from the next hub.
    std::size_t k = 0;
    while (k < on.size()) {
      std::size_t end = k + 1;
      while (end < on.size() && rem(on[k]) - rem(on[end]) <= window) ++end;
      if (end - k >= 2) {
        RendezvousGroup g;
        g.kind = RendezvousGroup::Kind::MSet;
        g.edge = e;
        g.members.assign(on.begin() + static_cast<long>(k), on.begin() + static_cast<long>(end));
        std::sort(g.members.begin(), g.members.end());
        g.anchor = g.members.front();
        for (int m : g.members) {
          const double v = rem(m) - step(m);
          const double best = rem(g.anchor) - step(g.anchor);
          if (v > best) g.anchor = m;
        }
        g.target_km = rem(g.anchor) - step(g.anchor);
        for (int m : g.members) assigned[m] = true;
        out.push_back(std::move(g));
        k = end;
      } else {
        ++k;
      }
    }

    // Pairwise catch-up / slow-down among the remaining singles.
    auto pair_rule = [&](int a, int b, RendezvousGroup& g) {
      int behind = a, front = b;
      if (rem(behind) < rem(front)) std::swap(behind, front);
      const double gap = rem(behind) - rem(front);
      if (!(gap > 0.0 && gap < high_step - low_step)) return false;
      if (!(rem(front) > high_step)) return false;
      const double closing = step(behind) - step(front);
      if (gap < closing) {
        g.kind = RendezvousGroup::Kind::CatchUp;
        g.anchor = front;
      } else if (closing > 0.0 && closing < gap && gap < step(behind) - low_step) {
        g.kind = RendezvousGroup::Kind::SlowDown;
        g.anchor = behind;
      } else {
        return false;
      }
      g.edge = e;
      g.members = {std::min(a, b), std::max(a, b)};
      g.target_km = rem(g.anchor) - step(g.anchor);
      return true;
    };
    std::vector<int> singles;
    for (int i : on)
      if (!assigned[i]) singles.push_back(i);
    std::sort(singles.begin(), singles.end());
    for (int i : singles) {
      if (assigned[i]) continue;
      for (int j : singles) {
        if (j == i || assigned[j]) continue;
        RendezvousGroup g;
        if (pair_rule(i, j, g)) {
          assigned[i] = assigned[j] = true;
          out.push_back(std::move(g));
          break;
        }
      }
    }
  }
  return out;
}

StepResult step_world(const Scenario& sc, const WorldState& w, const std::vector<SpeedAction>& actions,
                      const NoiseModel& noise) {
  const auto& p = sc.params;
  const int n = w.size();
  if (static_cast<int>(actions.size()) != n)
    throw DynamicsError("expected " + std::to_string(n) + " actions, got " +
                        std::to_string(actions.size()));
  for (int i = 0; i < n; ++i) {
    if (!w.active(i)) continue;
    const auto mask = feasible_actions(sc, w, i);
    if (!mask[action_index(actions[i])]) {
      std::ostringstream msg;
      msg << "infeasible action '" << action_name(actions[i]) << "' for truck " << i << " at step "
          << w.t << (w.trucks[i].on_edge ? " (on edge" : " (at hub")
          << (w.position_group_size[i] > 1 ? ", in platoon)" : ")");
      throw DynamicsError(msg.str());
    }
  }

  std::vector<double> speed(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (w.active(i)) speed[i] = speed_of(actions[i], p);

  std::vector<int> motion_group, motion_size, moving_group, moving_size;
  group_by(sc, w, speed, true, false, motion_group, motion_size);
  group_by(sc, w, speed, true, true, moving_group, moving_size);

  std::vector<double> xi(n, 0.0);
  std::vector<bool> arriving(n, false);
  for (int i = 0; i < n; ++i) {
    if (!w.active(i) || speed[i] <= 0.0) continue;
    xi[i] = noise.draw(w.t, motion_group[i]);
    const auto& s = w.trucks[i];
    if (s.on_edge) arriving[i] = s.remaining_km <= p.step_km(speed[i]) - xi[i];
  }

  StepResult res;
  res.rendezvous = rendezvous_groups(sc, w, actions, arriving);
  std::vector<int> group_of(n, -1);
  for (int g = 0; g < static_cast<int>(res.rendezvous.size()); ++g)
    for (int m : res.rendezvous[g].members) group_of[m] = g;

  WorldState next = w;
  next.t = w.t + 1;
  for (int i = 0; i < n; ++i) {
    if (!w.active(i)) continue;
    const auto& s = w.trucks[i];
    const auto& route = sc.mission(i).route;
    auto& ns = next.trucks[i];
    const double edge_len = route.edge_km[s.route_pos];

    TruckStepLog rec;
    rec.t = w.t;
    rec.truck = i;
    rec.on_edge = s.on_edge;
    rec.edge = route.edges[s.route_pos];
    rec.hub = s.on_edge ? -1 : route.hubs[s.route_pos];
    rec.remaining_km = s.remaining_km;
    rec.action = actions[i];
    rec.group = motion_group[i];
    rec.omega_size = speed[i] > 0.0 ? moving_size[i] - 1 : 0;
    rec.noise_km = xi[i];

    ns.speed_kmh = speed[i];
    if (!s.on_edge) {
      if (actions[i] == SpeedAction::Wait) {
        ns.hub_waits[s.route_pos] += 1;
        rec.moved_km = 0.0;
      } else {
        ns.on_edge = true;
        ns.remaining_km = std::min(edge_len, edge_len - p.step_km(speed[i]) + xi[i]);
        rec.moved_km = edge_len - ns.remaining_km;
      }
    } else if (group_of[i] >= 0) {
      const auto& g = res.rendezvous[group_of[i]];
      ns.remaining_km = std::min(edge_len, g.target_km + xi[g.anchor]);
      rec.moved_km = s.remaining_km - ns.remaining_km;
    } else if (arriving[i]) {
      rec.moved_km = s.remaining_km;
      const int next_pos = s.route_pos + 1;
      if (next_pos == route.hub_count() - 1) {
        ns.phase = Phase::Arrived;
        ns.route_pos = next_pos;
        ns.on_edge = false;
        ns.remaining_km = 0.0;
        ns.speed_kmh = 0.0;
        ns.arrival_step = next.t;
        rec.arrived_final = true;
      } else {
        ns.route_pos = next_pos;
        ns.on_edge = false;
        ns.remaining_km = route.edge_km[next_pos];
      }
    } else {
      ns.remaining_km = std::min(edge_len, s.remaining_km - p.step_km(speed[i]) + xi[i]);
      rec.moved_km = s.remaining_km - ns.remaining_km;
    }
    res.log.push_back(rec);
  }
  activate(sc, next);
  refresh_groups(sc, next);
  res.next = std::move(next);
  return res;
}

std::string log_line(const TruckStepLog& r, const Scenario& sc) {
  nlohmann::json j;
  j["t"] = r.t;
  j["truck"] = r.truck;
  j["truck_id"] = sc.mission(r.truck).truck_id;
  j["kind"] = r.on_edge ? "edge" : "hub";
  j["edge"] = r.edge;
  j["hub"] = r.hub >= 0 ? sc.graph->hubs()[r.hub].id : -1;
  j["hub_index"] = r.hub;
  j["remaining_km"] = r.remaining_km;
  j["action"] = action_index(r.action);
  j["group"] = r.group;
  j["omega"] = r.omega_size;
  j["noise_km"] = r.noise_km;
  j["moved_km"] = r.moved_km;
  j["arrived"] = r.arrived_final;
  return j.dump();
}

TruckStepLog parse_log_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TruckStepLog r;
  r.t = j.at("t").get<int>();
  r.truck = j.at("truck").get<int>();
  r.on_edge = j.at("kind").get<std::string>() == "edge";
  r.edge = j.at("edge").get<int>();
  r.hub = j.at("hub_index").get<int>();
  r.remaining_km = j.at("remaining_km").get<double>();
  r.action = action_from_index(j.at("action").get<int>());
  r.group = j.at("group").get<int>();
  r.omega_size = j.at("omega").get<int>();
  r.noise_km = j.at("noise_km").get<double>();
  r.moved_km = j.at("moved_km").get<double>();
  r.arrived_final = j.at("arrived").get<bool>();
  return r;
}

}  // namespace platoon
