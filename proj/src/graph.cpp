#include "backtrack/graph.hpp"

#include <fstream>
#include <queue>
#include <unordered_map>

#include "backtrack/error.hpp"
#include "backtrack/io.hpp"

namespace backtrack {
namespace {

struct EdgeKey {
  std::uint32_t from;
  std::uint32_t to;
  std::uint8_t action;

  bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const {
    std::size_t h = k.from;
    h = h * 0x9e3779b97f4a7c15ULL + k.to;
    h = h * 0x9e3779b97f4a7c15ULL + k.action;
    return h;
  }
};

struct PairKey {
  std::uint32_t node;
  std::uint8_t action;

  bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const {
    return static_cast<std::size_t>(k.node) * 131 + k.action;
  }
};

}  // namespace

GoalGraph build_graph(const RolloutArchive& archive, const std::vector<LatentCode>& goals,
                      const std::vector<LatentCode>& negative_goals) {
  if (goals.empty()) throw ContractViolation("build_graph: no goals");

  GoalGraph graph;
  graph.latent = archive.latent;
  graph.codes = archive.codes;

  for (const LatentCode& g : goals) {
    const auto it = archive.index.find(g);
    if (it == archive.index.end()) {
      throw ConfigError("goal code " + g.to_hex() + " is not in the rollout archive");
    }
    graph.goal_nodes.push_back(it->second);
  }
  for (const LatentCode& g : negative_goals) {
    const auto it = archive.index.find(g);
    if (it == archive.index.end()) {
      throw ConfigError("negative goal code " + g.to_hex() + " is not in the rollout archive");
    }
    for (std::uint32_t gn : graph.goal_nodes) {
      if (gn == it->second) {
        throw ConfigError("code " + g.to_hex() + " is both a goal and a negative goal");
      }
    }
    graph.negative_nodes.push_back(it->second);
  }

  std::unordered_map<EdgeKey, std::size_t, EdgeKeyHash> seen;
  for (const RolloutArchive::Transition& t : archive.transitions) {
    const EdgeKey key{t.src, t.dst, t.action};
    const auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, graph.edges.size());
      graph.edges.push_back({t.src, t.dst, t.action, 1});
    } else {
      graph.edges[it->second].count += 1;
    }
  }
  return graph;
}

SpeMap shortest_to_nodes(const GoalGraph& graph, std::span<const std::uint32_t> sources) {
  const std::size_t n = graph.node_count();
  SpeMap dist(n, kUnreachable);

  // Reverse adjacency: following edges backwards from the sources yields the
  // forward distance of every node to its nearest source.
  std::vector<std::vector<std::uint32_t>> radj(n);
  for (const GoalGraph::Edge& e : graph.edges) radj[e.to].push_back(e.from);

  using HeapItem = std::pair<std::uint32_t, std::uint32_t>;  // (distance, node)
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>> heap;
  for (std::uint32_t s : sources) {
    if (s >= n) throw ContractViolation("shortest_to_nodes: source id out of range");
    if (dist[s] != 0) {
      dist[s] = 0;
      heap.emplace(0, s);
    }
  }
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (std::uint32_t w : radj[u]) {
      if (dist[w] == kUnreachable || dist[w] > d + 1) {
        dist[w] = d + 1;
        heap.emplace(d + 1, w);
      }
    }
  }
  return dist;
}

ImitationDataset filter_dataset(const GoalGraph& graph, const SpeMap& spe) {
  if (spe.size() != graph.node_count()) throw DimensionError("filter_dataset: SPE size mismatch");
  ImitationDataset out;
  out.latent = graph.latent;
  std::unordered_map<PairKey, std::size_t, PairKeyHash> seen;
  for (const GoalGraph::Edge& e : graph.edges) {
    if (spe[e.from] == kUnreachable || spe[e.to] == kUnreachable) continue;
    if (spe[e.from] <= spe[e.to]) continue;  // strict decrease only
    const PairKey key{e.from, e.action};
    const auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, out.pairs.size());
      out.pairs.push_back({graph.codes[e.from], e.action, e.count});
    } else {
      out.pairs[it->second].count += e.count;
    }
  }
  return out;
}

std::vector<GoalLabel> negative_goal_labels(const GoalGraph& graph, const SpeMap& spe_pos) {
  std::vector<GoalLabel> out;
  if (graph.negative_nodes.empty()) return out;
  const SpeMap spe_neg = shortest_to_nodes(graph, graph.negative_nodes);

  std::unordered_map<PairKey, std::size_t, PairKeyHash> seen;
  auto emit = [&](std::uint32_t node, std::uint8_t action, GoalLabelKind kind, std::uint32_t count) {
    const PairKey key{node, action};
    const auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, out.size());
      out.push_back({graph.codes[node], action, kind, count});
    } else {
      out[it->second].count += count;
    }
  };

  for (const GoalGraph::Edge& e : graph.edges) {
    const bool pos_from = spe_pos[e.from] != kUnreachable;
    const bool pos_to = spe_pos[e.to] != kUnreachable;
    const bool neg_from = spe_neg[e.from] != kUnreachable;
    const bool neg_to = spe_neg[e.to] != kUnreachable;
    if (pos_from && neg_from) {
      // Case 1: the node reaches both kinds of goal; keep steering toward
      // the positive goal with the standard rule.
      if (pos_to && spe_pos[e.from] > spe_pos[e.to]) {
        emit(e.from, e.action, GoalLabelKind::kApproach, e.count);
      }
    } else if (!pos_from && neg_from && neg_to && spe_neg[e.from] > spe_neg[e.to]) {
      // Case 2: only the negative goal is reachable; mark the actions that
      // move toward it as forbidden.
      emit(e.from, e.action, GoalLabelKind::kAvoid, e.count);
    }
  }
  return out;
}

void merge_avoid_labels(ImitationDataset& dataset, const std::vector<GoalLabel>& labels) {
  std::unordered_map<PairKey, std::size_t, PairKeyHash> avoid_seen;
  std::unordered_map<LatentCode, std::uint32_t, LatentCodeHash> code_ids;
  auto id_of = [&](const LatentCode& c) {
    const auto it = code_ids.find(c);
    if (it != code_ids.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(code_ids.size());
    code_ids.emplace(c, id);
    return id;
  };

  for (const GoalLabel& label : labels) {
    if (label.kind != GoalLabelKind::kAvoid) continue;
    const PairKey key{id_of(label.code), label.action};
    const auto it = avoid_seen.find(key);
    if (it == avoid_seen.end()) {
      avoid_seen.emplace(key, dataset.avoid.size());
      dataset.avoid.push_back({label.code, label.action, label.count});
    } else {
      dataset.avoid[it->second].count += label.count;
    }
  }

  // Avoid wins over approach on the same pair.
  std::vector<ImitationDataset::Pair> kept;
  kept.reserve(dataset.pairs.size());
  for (const ImitationDataset::Pair& p : dataset.pairs) {
    bool conflict = false;
    for (const ImitationDataset::Pair& a : dataset.avoid) {
      if (a.action == p.action && a.code == p.code) {
        conflict = true;
        break;
      }
    }
    if (conflict) {
      dataset.label_conflicts += 1;
    } else {
      kept.push_back(p);
    }
  }
  dataset.pairs = std::move(kept);
}

GraphStats graph_stats(const GoalGraph& graph, const SpeMap& spe) {
  GraphStats stats;
  stats.nodes = graph.node_count();
  stats.edges = graph.edges.size();
  std::size_t reachable = 0;
  for (std::uint32_t d : spe) {
    if (d == kUnreachable) continue;
    ++reachable;
    stats.max_spe = std::max(stats.max_spe, d);
    if (stats.spe_histogram.size() <= d) stats.spe_histogram.resize(d + 1, 0);
    stats.spe_histogram[d] += 1;
  }
  stats.reachable_fraction =
      stats.nodes == 0 ? 0.0 : static_cast<double>(reachable) / static_cast<double>(stats.nodes);
  return stats;
}

void write_graph_text(const std::string& path, const GoalGraph& graph, const SpeMap& spe) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::uint32_t g : graph.goal_nodes) out << "#goal " << graph.codes[g].to_hex() << "\n";
  for (std::uint32_t g : graph.negative_nodes) out << "#neg " << graph.codes[g].to_hex() << "\n";
  auto spe_str = [&](std::uint32_t node) {
    return spe[node] == kUnreachable ? std::string("-1") : std::to_string(spe[node]);
  };
  for (const GoalGraph::Edge& e : graph.edges) {
    out << graph.codes[e.from].to_hex() << ' ' << graph.codes[e.to].to_hex() << ' '
        << static_cast<int>(e.action) << ' ' << spe_str(e.from) << ' ' << spe_str(e.to) << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

void save_dataset_pairs(const std::string& path, const LatentShape& latent,
                        const std::vector<ImitationDataset::Pair>& pairs) {
  BinaryWriter w(path);
  w.magic("BTD1");
  w.u32(static_cast<std::uint32_t>(pairs.size()));
  for (const ImitationDataset::Pair& p : pairs) {
    if (p.code.size() != latent.groups) throw DimensionError("dataset pair has wrong code length");
    w.bytes(p.code.digits.data(), p.code.digits.size());
    w.u8(p.action);
    w.u32(p.count);
  }
  w.close();
}

std::vector<ImitationDataset::Pair> load_dataset_pairs(const std::string& path,
                                                       const LatentShape& latent) {
  BinaryReader r(path);
  r.expect_magic("BTD1");
  const std::uint32_t count = r.u32();
  std::vector<ImitationDataset::Pair> pairs(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> digits(static_cast<std::size_t>(latent.groups));
    r.read(digits.data(), digits.size());
    pairs[i].code = LatentCode(std::move(digits));
    pairs[i].action = r.u8();
    pairs[i].count = r.u32();
  }
  return pairs;
}

}  // namespace backtrack
