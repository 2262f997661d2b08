#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They restate the model rules directly and share no code with src/.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace oracles {

struct PairGroup {
  std::set<int> members;
  double target = 0.0;

  bool operator<(const PairGroup& o) const {
    if (members != o.members) return members < o.members;
    return target < o.target;
  }
  bool operator==(const PairGroup& o) const { return members == o.members && target == o.target; }
};

/// Rendezvous by enumeration for one edge. rem/step per truck (km), with
/// `arriving` trucks excluded. M-sets take precedence over pairwise rules.
inline std::vector<PairGroup> rendezvous(const std::vector<double>& rem,
                                         const std::vector<double>& step,
                                         const std::vector<bool>& arriving, double window,
                                         double high_step, double low_step) {
  const int n = static_cast<int>(rem.size());
  std::vector<int> pool;
  for (int i = 0; i < n; ++i)
    if (!arriving[i] && rem[i] > step[i]) pool.push_back(i);

  std::vector<PairGroup> out;
  std::vector<int> singles;
  while (!pool.empty()) {
    int head = pool.front();
    for (int i : pool)
      if (rem[i] > rem[head] || (rem[i] == rem[head] && i < head)) head = i;
    // Largest subset containing head whose pairwise gaps fit the window.
    const int m = static_cast<int>(pool.size());
    std::vector<int> best;
    for (int mask = 1; mask < (1 << m); ++mask) {
      std::vector<int> s;
      for (int b = 0; b < m; ++b)
        if (mask & (1 << b)) s.push_back(pool[b]);
      if (std::find(s.begin(), s.end(), head) == s.end()) continue;
      bool ok = true;
      for (int a : s)
        for (int b : s)
          if (std::abs(rem[a] - rem[b]) > window) ok = false;
      if (ok && s.size() > best.size()) best = s;
    }
    if (best.size() >= 2) {
      int k = best.front();
      for (int j : best) {
        const double v = rem[j] - step[j];
        const double bv = rem[k] - step[k];
        if (v > bv || (v == bv && j < k)) k = j;
      }
      out.push_back({std::set<int>(best.begin(), best.end()), rem[k] - step[k]});
      for (int j : best) pool.erase(std::find(pool.begin(), pool.end(), j));
    } else {
      singles.push_back(head);
      pool.erase(std::find(pool.begin(), pool.end(), head));
    }
  }

  // i behind j, j in front: catch up.
  auto catch_up = [&](int i, int j) {
    return rem[i] > rem[j] && rem[j] > high_step && 0 < rem[i] - rem[j] &&
           rem[i] - rem[j] < step[i] - step[j];
  };
  // j behind i: i slows down for j.
  auto slow_down = [&](int i, int j) {
    return rem[j] > rem[i] && rem[i] > high_step && 0 < step[j] - step[i] &&
           step[j] - step[i] < rem[j] - rem[i] && rem[j] - rem[i] < step[j] - low_step;
  };
  std::sort(singles.begin(), singles.end());
  std::set<int> used;
  for (int i : singles) {
    if (used.count(i)) continue;
    for (int j : singles) {
      if (j == i || used.count(j)) continue;
      double target = 0.0;
      bool hit = true;
      if (catch_up(i, j)) target = rem[j] - step[j];
      else if (catch_up(j, i)) target = rem[i] - step[i];
      else if (slow_down(i, j)) target = rem[j] - step[j];
      else if (slow_down(j, i)) target = rem[i] - step[i];
      else hit = false;
      if (hit) {
        out.push_back({{i, j}, target});
        used.insert(i);
        used.insert(j);
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Minimum route length by enumerating simple paths (small graphs only).
/// adjacency[u] = list of (v, length).
inline double brute_shortest(const std::vector<std::vector<std::pair<int, double>>>& adj, int s,
                             int t) {
  double best = INFINITY;
  std::vector<bool> seen(adj.size(), false);
  auto dfs = [&](auto&& self, int u, double d) -> void {
    if (u == t) {
      best = std::min(best, d);
      return;
    }
    seen[u] = true;
    for (auto [v, len] : adj[u])
      if (!seen[v]) self(self, v, d + len);
    seen[u] = false;
  };
  dfs(dfs, s, 0.0);
  return best;
}

/// Constants the metric oracle needs, restated independently of SimParams.
struct MetricConsts {
  double dt = 4.0, v_m = 75.0, v_l = 60.0, v_h = 90.0;
  double phi_s = 1.0, phi_p = 0.68;
  double K_d = 1.1, c_b = 2.0;
  double w1 = 1.0, w2 = 1.0;
};

struct TruckInfo {
  int depart = 1;
  int normal_arrival = 1;
  double route_km = 0.0;
};

struct LogRow {
  int t = 0;
  int truck = 0;
  int group = 0;  // trucks sharing position and chosen speed at t
  int action = 1;  // 0 low, 1 medium, 2 high, 3 wait
  double moved = 0.0;
};

struct OracleMetrics {
  double F_r = 0, T_d = 0, T_r = 0, P_j = 0, F_v = 0, T_o = 0, P_r = 0;
};

/// Recomputes the seven metrics from log rows and arrival steps.
inline OracleMetrics metrics_from_log(const std::vector<LogRow>& rows, const std::vector<TruckInfo>& trucks,
                                      const std::vector<int>& arrival, const std::vector<bool>& timed_out,
                                      const MetricConsts& c) {
  double t_total = 0;
  for (const auto& t : trucks) t_total += (t.normal_arrival - t.depart) * c.dt;
  auto speed = [&](int a) { return a == 0 ? c.v_l : a == 1 ? c.v_m : a == 2 ? c.v_h : 0.0; };
  std::map<std::pair<int, int>, int> group_size;
  for (const auto& r : rows) group_size[{r.t, r.group}] += 1;
  double fuel = 0, pj = 0, route = 0;
  std::vector<int> joined(trucks.size(), 0);
  for (const auto& r : rows) {
    const double v = speed(r.action);
    const int omega = v > 0 ? group_size[{r.t, r.group}] - 1 : 0;
    const double phi = omega == 0 ? c.phi_s : 1.0 - (c.phi_s - c.phi_p) * omega / (omega + 1.0);
    fuel += (c.phi_s * c.v_m * c.v_m - phi * v * v) * v * c.dt / (c.v_m * c.v_m * c.v_m * t_total);
    if (omega > 0) {
      pj += r.moved;
      joined[r.truck] = 1;
    }
  }
  double delay = 0, jd = 0;
  int over = 0, nj = 0;
  for (std::size_t i = 0; i < trucks.size(); ++i) {
    route += trucks[i].route_km;
    const double late = (arrival[i] - trucks[i].normal_arrival) * c.dt;
    delay += late;
    const bool ob = timed_out[i] || static_cast<double>(arrival[i] - trucks[i].depart) /
                                            (trucks[i].normal_arrival - trucks[i].depart) > c.K_d;
    over += ob;
    jd += (ob ? c.c_b : 1.0) * (-late) / t_total;
    nj += joined[i];
  }
  const double n = static_cast<double>(trucks.size());
  return {100 * fuel, delay / n, 100 * delay / t_total, 100 * pj / route, c.w1 * fuel + c.w2 * jd,
          100 * over / n, 100 * nj / n};
}

}  // namespace oracles
