// Independent test oracles: central finite differences for gradients and
// plain BFS for shortest paths. These deliberately avoid the library's own
// autodiff / Dijkstra code paths.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <tuple>
#include <vector>

#include "backtrack/autodiff.hpp"

namespace testsupport {

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients (already accumulated in the parameters' grad
// slots) against central finite differences of `loss_fn`, which must rerun
// the forward pass from the current parameter values. Differences below
// `abs_floor` count as matching: central differences of a loss of magnitude
// |f| carry ~|f|*eps/h of cancellation noise, which dominates the relative
// error on near-zero gradient entries.
inline GradCheck check_parameter_gradients(const std::vector<backtrack::Parameter*>& params,
                                           const std::function<double()>& loss_fn,
                                           double h = 1e-5, double abs_floor = 1e-7) {
  GradCheck result;
  for (backtrack::Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = loss_fn();
      p->value[i] = saved - h;
      const double down = loss_fn();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      ++result.checked;
      if (std::abs(numeric - analytic) < abs_floor) continue;
      const double rel =
          std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
      result.max_rel_err = std::max(result.max_rel_err, rel);
    }
  }
  return result;
}

inline constexpr std::uint32_t kBfsUnreachable = std::numeric_limits<std::uint32_t>::max();

// Multi-source BFS distance TO the nearest source following edges forward,
// i.e. walking the reversed edges outward from the sources.
inline std::vector<std::uint32_t> bfs_distance_to_sources(
    std::size_t nodes, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
    const std::vector<std::uint32_t>& sources) {
  std::vector<std::vector<std::uint32_t>> radj(nodes);
  for (const auto& [u, v] : edges) radj[v].push_back(u);
  std::vector<std::uint32_t> dist(nodes, kBfsUnreachable);
  std::deque<std::uint32_t> queue;
  for (std::uint32_t s : sources) {
    if (dist[s] == 0) continue;
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    for (std::uint32_t w : radj[u]) {
      if (dist[w] != kBfsUnreachable) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  return dist;
}

}  // namespace testsupport
