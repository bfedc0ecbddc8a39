#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "backtrack/backward.hpp"
#include "backtrack/latent.hpp"

namespace backtrack {

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

// Per-node shortest distance, in transitions, to the nearest goal node.
using SpeMap = std::vector<std::uint32_t>;

// Union of all backward rollouts as a directed graph. Edges carry the
// forward orientation: u --a--> v means action a at u reaches v.
struct GoalGraph {
  struct Edge {
    std::uint32_t from;
    std::uint32_t to;
    std::uint8_t action;
    std::uint32_t count;  // how many archived transitions collapsed into this edge
  };

  LatentShape latent;
  std::vector<LatentCode> codes;  // node id -> code, insertion order
  std::vector<Edge> edges;        // deduplicated by (from, action, to)
  std::vector<std::uint32_t> goal_nodes;
  std::vector<std::uint32_t> negative_nodes;

  std::size_t node_count() const { return codes.size(); }
};

// Nodes and deduplicated edges from the archive; goals must be archived
// (they are rollout roots), otherwise a ConfigError names the missing goal.
GoalGraph build_graph(const RolloutArchive& archive, const std::vector<LatentCode>& goals,
                      const std::vector<LatentCode>& negative_goals = {});

// Multi-source Dijkstra (binary heap, unit weights) on the edge-reversed
// graph: distance from every node TO the nearest source along forward edges.
SpeMap shortest_to_nodes(const GoalGraph& graph, std::span<const std::uint32_t> sources);

inline SpeMap compute_spe(const GoalGraph& graph) {
  return shortest_to_nodes(graph, graph.goal_nodes);
}

// SPE-filtered state-action pairs for imitation, deduplicated with
// provenance counts. `avoid` holds actions the policy must not take.
struct ImitationDataset {
  struct Pair {
    LatentCode code;
    std::uint8_t action;
    std::uint32_t count;
  };

  LatentShape latent;
  std::vector<Pair> pairs;
  std::vector<Pair> avoid;
  std::uint32_t label_conflicts = 0;  // positive labels dropped in favor of avoid
};

// Keeps (code(u), a) for every edge u --a--> v with both endpoints reachable
// and SPE(u) > SPE(v): the action demonstrably moves closer to a goal.
ImitationDataset filter_dataset(const GoalGraph& graph, const SpeMap& spe);

enum class GoalLabelKind { kApproach, kAvoid };

struct GoalLabel {
  LatentCode code;
  std::uint8_t action;
  GoalLabelKind kind;
  std::uint32_t count;
};

// Negative-goal handling. Nodes that reach both goal kinds keep their
// positive labels (standard SPE rule); components touching only negative
// goals get avoid labels on their SPE_neg-decreasing actions.
std::vector<GoalLabel> negative_goal_labels(const GoalGraph& graph, const SpeMap& spe_pos);

// Folds avoid labels into the dataset. A pair that is both approached and
// avoided resolves to avoid; the conflict count is recorded on the dataset.
void merge_avoid_labels(ImitationDataset& dataset, const std::vector<GoalLabel>& labels);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double reachable_fraction = 0.0;
  std::uint32_t max_spe = 0;
  std::vector<std::size_t> spe_histogram;  // index = distance, value = node count
};

GraphStats graph_stats(const GoalGraph& graph, const SpeMap& spe);

// Text edge list: header lines `#goal <hex>` / `#neg <hex>`, then one line
// per edge `from_hex to_hex action spe_from spe_to` (-1 when unreachable).
void write_graph_text(const std::string& path, const GoalGraph& graph, const SpeMap& spe);

// Dataset file, magic "BTD1": u32 pair count, then per pair g code bytes,
// u8 action, u32 provenance count. The latent shape comes from the caller.
void save_dataset_pairs(const std::string& path, const LatentShape& latent,
                        const std::vector<ImitationDataset::Pair>& pairs);
std::vector<ImitationDataset::Pair> load_dataset_pairs(const std::string& path,
                                                       const LatentShape& latent);

}  // namespace backtrack
