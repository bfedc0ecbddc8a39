#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "backtrack/error.hpp"
#include "backtrack/graph.hpp"
#include "support/oracles.hpp"

using namespace backtrack;

namespace {

LatentCode code_of(std::uint32_t id) {
  return LatentCode({static_cast<std::uint8_t>(id & 0xff), static_cast<std::uint8_t>(id >> 8)});
}

// Archive with explicitly listed forward transitions.
RolloutArchive make_archive(std::uint32_t nodes,
                            const std::vector<std::tuple<std::uint32_t, int, std::uint32_t>>& transitions) {
  RolloutArchive archive;
  archive.latent = LatentShape{2, 256};
  for (std::uint32_t i = 0; i < nodes; ++i) {
    archive.intern(code_of(i));
    archive.visits[i] = 1;
  }
  for (const auto& [src, action, dst] : transitions) {
    archive.transitions.push_back({src, static_cast<std::uint8_t>(action), dst});
  }
  return archive;
}

GoalGraph random_graph(int nodes, int edges, int goals, Rng& rng) {
  GoalGraph graph;
  graph.latent = LatentShape{2, 256};
  for (int i = 0; i < nodes; ++i) graph.codes.push_back(code_of(static_cast<std::uint32_t>(i)));
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint8_t>> seen;
  for (int e = 0; e < edges; ++e) {
    const auto u = static_cast<std::uint32_t>(rng.uniform_int(nodes));
    const auto v = static_cast<std::uint32_t>(rng.uniform_int(nodes));
    const auto a = static_cast<std::uint8_t>(rng.uniform_int(4));
    if (!seen.insert({u, v, a}).second) continue;
    graph.edges.push_back({u, v, a, 1});
  }
  std::set<std::uint32_t> goal_set;
  while (static_cast<int>(goal_set.size()) < goals) {
    goal_set.insert(static_cast<std::uint32_t>(rng.uniform_int(nodes)));
  }
  graph.goal_nodes.assign(goal_set.begin(), goal_set.end());
  return graph;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_pairs(const GoalGraph& graph) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const GoalGraph::Edge& e : graph.edges) out.emplace_back(e.from, e.to);
  return out;
}

}  // namespace

TEST_CASE("build_graph") {
  SUBCASE("chain rollout gives L edges and L+1 nodes") {
    // Backward rollout of length 3 from goal node 0: 3 transitions oriented
    // forward toward the goal.
    const auto archive = make_archive(4, {{1, 0, 0}, {2, 1, 1}, {3, 2, 2}});
    const GoalGraph graph = build_graph(*&archive, {code_of(0)});
    CHECK(graph.node_count() == 4);
    CHECK(graph.edges.size() == 3);
    CHECK(graph.goal_nodes == std::vector<std::uint32_t>{0});
  }

  SUBCASE("duplicate transitions collapse with provenance counts") {
    const auto archive = make_archive(2, {{1, 3, 0}, {1, 3, 0}, {1, 1, 0}});
    const GoalGraph graph = build_graph(archive, {code_of(0)});
    REQUIRE(graph.edges.size() == 2);
    CHECK(graph.edges[0].count == 2);
    CHECK(graph.edges[0].action == 3);
    CHECK(graph.edges[1].count == 1);
  }

  SUBCASE("absent goal is a config error naming the code") {
    const auto archive = make_archive(2, {{1, 0, 0}});
    try {
      build_graph(archive, {code_of(55)});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(code_of(55).to_hex()) != std::string::npos);
    }
  }

  SUBCASE("goal overlapping negative goal is rejected") {
    const auto archive = make_archive(2, {{1, 0, 0}});
    CHECK_THROWS_AS(build_graph(archive, {code_of(0)}, {code_of(0)}), ConfigError);
  }
}

TEST_CASE("compute_spe") {
  SUBCASE("goal at zero, chain counts up") {
    const auto archive = make_archive(3, {{1, 0, 2}, {0, 1, 1}});
    // forward: 0 -> 1 -> 2(goal)
    const GoalGraph graph = build_graph(archive, {code_of(2)});
    const SpeMap spe = compute_spe(graph);
    CHECK(spe[2] == 0);
    CHECK(spe[1] == 1);
    CHECK(spe[0] == 2);
  }

  SUBCASE("unreachable nodes keep the sentinel") {
    const auto archive = make_archive(3, {{1, 0, 0}});
    const GoalGraph graph = build_graph(archive, {code_of(0)});
    const SpeMap spe = compute_spe(graph);
    CHECK(spe[0] == 0);
    CHECK(spe[1] == 1);
    CHECK(spe[2] == kUnreachable);
  }

  SUBCASE("matches the reverse-BFS oracle on random graphs") {
    Rng rng(404);
    for (int trial = 0; trial < 40; ++trial) {
      const int nodes = 2 + rng.uniform_int(300);
      const int edges = rng.uniform_int(4 * nodes);
      const int goals = 1 + rng.uniform_int(std::min(nodes, 4));
      const GoalGraph graph = random_graph(nodes, edges, goals, rng);
      const SpeMap spe = compute_spe(graph);
      const auto oracle = testsupport::bfs_distance_to_sources(
          graph.node_count(), edge_pairs(graph), graph.goal_nodes);
      REQUIRE(spe.size() == oracle.size());
      for (std::size_t i = 0; i < spe.size(); ++i) {
        CHECK(spe[i] == oracle[i]);
      }
    }
  }

  SUBCASE("adding a goal never increases any distance") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      GoalGraph graph = random_graph(100, 300, 1, rng);
      const SpeMap base = compute_spe(graph);
      GoalGraph more = graph;
      std::uint32_t extra = static_cast<std::uint32_t>(rng.uniform_int(100));
      more.goal_nodes.push_back(extra);
      const SpeMap wider = compute_spe(more);
      for (std::size_t i = 0; i < base.size(); ++i) {
        if (base[i] == kUnreachable) continue;
        REQUIRE(wider[i] != kUnreachable);
        CHECK(wider[i] <= base[i]);
      }
    }
  }
}

TEST_CASE("filter_dataset") {
  SUBCASE("strict decrease boundary") {
    // 0 ->a0 1 ->a1 2(goal), plus a lateral edge 1 ->a2 3 where spe(3)=spe(1).
    const auto archive = make_archive(5, {{0, 0, 1}, {1, 1, 2}, {1, 2, 3}, {3, 3, 2}, {0, 1, 3}});
    const GoalGraph graph = build_graph(archive, {code_of(2)});
    const SpeMap spe = compute_spe(graph);
    REQUIRE(spe[1] == 1);
    REQUIRE(spe[3] == 1);
    const ImitationDataset data = filter_dataset(graph, spe);
    // Included: (0,a0) 2->1, (1,a1) 1->0, (3,a3) 1->0, (0,a1) 2->1.
    // Excluded: (1,a2): spe 1 -> spe 1 is not a strict decrease.
    CHECK(data.pairs.size() == 4);
    for (const auto& p : data.pairs) {
      CHECK(!(p.code == code_of(1) && p.action == 2));
    }
  }

  SUBCASE("cycles never survive the filter") {
    // 2-cycle u=0 <-> v=1, goal 2 reachable only from v.
    const auto archive = make_archive(3, {{0, 0, 1}, {1, 1, 0}, {1, 2, 2}});
    const GoalGraph graph = build_graph(archive, {code_of(2)});
    const SpeMap spe = compute_spe(graph);
    const ImitationDataset data = filter_dataset(graph, spe);
    // Only 0 ->a0 1 (spe 2->1) and 1 ->a2 2 (spe 1->0) survive; the cycle
    // edge 1 ->a1 0 increases distance and is dropped.
    CHECK(data.pairs.size() == 2);
    for (const auto& p : data.pairs) {
      CHECK(!(p.code == code_of(1) && p.action == 1));
    }
  }

  SUBCASE("potential property on random graphs: approved actions walk to a goal") {
    Rng rng(11);
    for (int trial = 0; trial < 15; ++trial) {
      const GoalGraph graph = random_graph(150, 600, 2, rng);
      const SpeMap spe = compute_spe(graph);
      const ImitationDataset data = filter_dataset(graph, spe);

      // Every dataset pair decreases SPE by at least one.
      std::set<std::pair<std::uint32_t, std::uint8_t>> approved;
      for (const auto& p : data.pairs) {
        std::uint32_t node = kUnreachable;
        for (std::uint32_t i = 0; i < graph.node_count(); ++i) {
          if (graph.codes[i] == p.code) {
            node = i;
            break;
          }
        }
        REQUIRE(node != kUnreachable);
        approved.insert({node, p.action});
      }
      // Walk: from every reachable node, greedily follow any approved edge
      // that decreases SPE; must hit a goal within SPE(start) steps.
      const std::set<std::uint32_t> goal_set(graph.goal_nodes.begin(), graph.goal_nodes.end());
      for (std::uint32_t start = 0; start < graph.node_count(); ++start) {
        if (spe[start] == kUnreachable) continue;
        std::uint32_t cur = start;
        std::uint32_t steps = 0;
        while (!goal_set.contains(cur)) {
          bool moved = false;
          for (const GoalGraph::Edge& e : graph.edges) {
            if (e.from != cur) continue;
            if (!approved.contains({e.from, e.action})) continue;
            if (spe[e.to] >= spe[e.from]) continue;
            cur = e.to;
            moved = true;
            break;
          }
          REQUIRE(moved);
          ++steps;
          REQUIRE(steps <= spe[start]);
        }
        CHECK(steps <= spe[start]);
      }
    }
  }

  SUBCASE("deterministic given the same inputs") {
    Rng rng(77);
    const GoalGraph graph = random_graph(100, 400, 2, rng);
    const SpeMap spe = compute_spe(graph);
    const ImitationDataset a = filter_dataset(graph, spe);
    const ImitationDataset b = filter_dataset(graph, spe);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      CHECK(a.pairs[i].code == b.pairs[i].code);
      CHECK(a.pairs[i].action == b.pairs[i].action);
      CHECK(a.pairs[i].count == b.pairs[i].count);
    }
  }
}

TEST_CASE("negative goals") {
  // Component A: 0 -> 1 -> 2(goal), also 1 -> 4(neg) so node 1 sees both.
  // Component B: 5 -> 6 -> 7, where 7 connects only to the negative goal 4
  // via 7 -> 4.
  const auto archive = make_archive(8, {{0, 0, 1},
                                        {1, 1, 2},
                                        {1, 2, 4},
                                        {5, 0, 6},
                                        {6, 1, 7},
                                        {7, 3, 4}});
  const GoalGraph graph = build_graph(archive, {code_of(2)}, {code_of(4)});
  const SpeMap spe = compute_spe(graph);

  SUBCASE("no negative goals means no labels") {
    const GoalGraph plain = build_graph(archive, {code_of(2)});
    CHECK(negative_goal_labels(plain, compute_spe(plain)).empty());
  }

  SUBCASE("case 1 keeps positive labels, case 2 emits avoid labels") {
    const auto labels = negative_goal_labels(graph, spe);
    bool node1_positive = false;
    bool node7_avoid = false;
    bool node6_avoid = false;
    for (const GoalLabel& label : labels) {
      if (label.code == code_of(1) && label.kind == GoalLabelKind::kApproach) {
        CHECK(label.action == 1);  // toward the goal, not toward the negative
        node1_positive = true;
      }
      CHECK(!(label.code == code_of(1) && label.kind == GoalLabelKind::kAvoid));
      if (label.code == code_of(7) && label.kind == GoalLabelKind::kAvoid) {
        CHECK(label.action == 3);
        node7_avoid = true;
      }
      if (label.code == code_of(6) && label.kind == GoalLabelKind::kAvoid) node6_avoid = true;
    }
    CHECK(node1_positive);
    CHECK(node7_avoid);
    CHECK(node6_avoid);  // 6 -> 7 decreases distance-to-negative, unreachable to goal
  }

  SUBCASE("avoid beats approach when merging") {
    ImitationDataset dataset;
    dataset.latent = graph.latent;
    dataset.pairs.push_back({code_of(7), 3, 5});
    dataset.pairs.push_back({code_of(0), 0, 2});
    std::vector<GoalLabel> labels = {{code_of(7), 3, GoalLabelKind::kAvoid, 4}};
    merge_avoid_labels(dataset, labels);
    CHECK(dataset.label_conflicts == 1);
    REQUIRE(dataset.pairs.size() == 1);
    CHECK(dataset.pairs[0].code == code_of(0));
    REQUIRE(dataset.avoid.size() == 1);
    CHECK(dataset.avoid[0].count == 4);
  }
}

TEST_CASE("graph stats") {
  const auto archive = make_archive(4, {{1, 0, 0}, {2, 0, 1}, {3, 0, 2}});
  const GoalGraph graph = build_graph(archive, {code_of(0)});
  const SpeMap spe = compute_spe(graph);
  const GraphStats stats = graph_stats(graph, spe);
  CHECK(stats.nodes == 4);
  CHECK(stats.edges == 3);
  CHECK(stats.reachable_fraction == 1.0);
  CHECK(stats.max_spe == 3);
  REQUIRE(stats.spe_histogram.size() == 4);
  CHECK(stats.spe_histogram[0] == graph.goal_nodes.size());
  CHECK(stats.spe_histogram[1] == 1);
}

TEST_CASE("graph text dump") {
  const auto archive = make_archive(3, {{1, 2, 0}, {2, 1, 1}});
  const GoalGraph graph = build_graph(archive, {code_of(0)}, {code_of(2)});
  const SpeMap spe = compute_spe(graph);
  const std::string path = (std::filesystem::temp_directory_path() / "bt_graph.txt").string();
  write_graph_text(path, graph, spe);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "#goal " + code_of(0).to_hex());
  std::getline(in, line);
  CHECK(line == "#neg " + code_of(2).to_hex());
  std::getline(in, line);
  CHECK(line == code_of(1).to_hex() + " " + code_of(0).to_hex() + " 2 1 0");
  std::filesystem::remove(path);
}

TEST_CASE("dataset file round trip") {
  std::vector<ImitationDataset::Pair> pairs = {{code_of(3), 1, 7}, {code_of(9), 0, 2}};
  const LatentShape latent{2, 256};
  const std::string path = (std::filesystem::temp_directory_path() / "bt_dataset.btd").string();
  save_dataset_pairs(path, latent, pairs);
  const auto loaded = load_dataset_pairs(path, latent);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].code == pairs[0].code);
  CHECK(loaded[0].action == 1);
  CHECK(loaded[0].count == 7);
  CHECK(loaded[1].code == pairs[1].code);
  std::filesystem::remove(path);
}
