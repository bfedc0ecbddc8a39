// Python bindings for the core operations: maze environment, shortest-path
// estimation, and the end-to-end pipeline.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "backtrack/config.hpp"
#include "backtrack/eval.hpp"
#include "backtrack/graph.hpp"
#include "backtrack/maze.hpp"
#include "backtrack/pipeline.hpp"

namespace py = pybind11;
using namespace backtrack;

namespace {

py::array_t<double> render_array(const Maze& maze, int cell) {
  const Observation obs = maze.render(cell);
  py::array_t<double> out({Observation::kSize, Observation::kSize, 3});
  std::copy(obs.pixels.begin(), obs.pixels.end(), out.mutable_data());
  return out;
}

// SPE on an explicit edge list; node ids become synthetic latent codes so the
// regular graph machinery applies.
std::vector<long long> spe_on_edges(int nodes,
                                    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                                    const std::vector<std::uint32_t>& goals) {
  if (nodes <= 0) throw ContractViolation("spe_on_edges: need at least one node");
  GoalGraph graph;
  graph.latent = LatentShape{4, 256};
  auto code_of = [](std::uint32_t id) {
    return LatentCode({static_cast<std::uint8_t>(id & 0xff), static_cast<std::uint8_t>((id >> 8) & 0xff),
                       static_cast<std::uint8_t>((id >> 16) & 0xff),
                       static_cast<std::uint8_t>((id >> 24) & 0xff)});
  };
  for (int i = 0; i < nodes; ++i) graph.codes.push_back(code_of(static_cast<std::uint32_t>(i)));
  for (const auto& [u, v] : edges) {
    if (u >= static_cast<std::uint32_t>(nodes) || v >= static_cast<std::uint32_t>(nodes)) {
      throw ContractViolation("spe_on_edges: edge endpoint out of range");
    }
    graph.edges.push_back({u, v, 0, 1});
  }
  for (std::uint32_t g : goals) {
    if (g >= static_cast<std::uint32_t>(nodes)) throw ContractViolation("spe_on_edges: goal out of range");
    graph.goal_nodes.push_back(g);
  }
  const SpeMap spe = compute_spe(graph);
  std::vector<long long> out(spe.size());
  for (std::size_t i = 0; i < spe.size(); ++i) {
    out[i] = spe[i] == kUnreachable ? -1 : static_cast<long long>(spe[i]);
  }
  return out;
}

PipelineConfig config_from_file(const std::string& path) { return load_config(path); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Goal-reaching maze policies distilled from backward world-model rollouts";

  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<Maze>(m, "Maze")
      .def_static(
          "generate",
          [](int width, int height, std::uint64_t seed) { return Maze::generate(width, height, seed); },
          py::arg("width"), py::arg("height"), py::arg("seed"))
      .def_property_readonly("width", &Maze::width)
      .def_property_readonly("height", &Maze::height)
      .def_property_readonly("seed", &Maze::seed)
      .def("free_cells", &Maze::free_cells)
      .def("is_free", py::overload_cast<int>(&Maze::is_free, py::const_), py::arg("cell"))
      .def("step", &Maze::step, py::arg("cell"), py::arg("action"))
      .def("render", &render_array, py::arg("cell"))
      .def("locate_agent",
           [](const Maze& maze, py::array_t<double> obs) {
             Observation o;
             if (obs.size() != static_cast<py::ssize_t>(o.pixels.size())) {
               throw ContractViolation("locate_agent: observation must be 64x64x3");
             }
             std::copy(obs.data(), obs.data() + obs.size(), o.pixels.begin());
             return maze.locate_agent(o);
           },
           py::arg("observation"))
      .def("shortest_distance", &Maze::shortest_distance, py::arg("from_cell"), py::arg("targets"))
      .def("cell_x", &Maze::cell_x)
      .def("cell_y", &Maze::cell_y)
      .def("index", &Maze::index, py::arg("x"), py::arg("y"));

  m.def(
      "collect_random_data",
      [](const Maze& maze, int episodes, std::uint64_t seed, int steps) {
        Rng rng(seed);
        const auto logs = collect_random_data(maze, episodes, rng, steps);
        std::vector<std::vector<std::tuple<int, int, int>>> out;
        out.reserve(logs.size());
        for (const EpisodeLog& log : logs) {
          std::vector<std::tuple<int, int, int>> ep;
          ep.reserve(log.steps.size());
          for (const EpisodeStep& s : log.steps) ep.emplace_back(s.from, s.action, s.to);
          out.push_back(std::move(ep));
        }
        return out;
      },
      py::arg("maze"), py::arg("episodes"), py::arg("seed"), py::arg("steps") = kEpisodeSteps);

  m.def("spe_on_edges", &spe_on_edges, py::arg("nodes"), py::arg("edges"), py::arg("goals"),
        "Shortest distance from every node to the nearest goal along forward edges; -1 if unreachable");

  py::enum_<PipelineMode>(m, "PipelineMode")
      .value("LEARNED", PipelineMode::kLearned)
      .value("ORACLE", PipelineMode::kOracle);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_static("from_file", &config_from_file, py::arg("path"))
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("mode", &PipelineConfig::mode)
      .def_readwrite("out_dir", &PipelineConfig::out_dir)
      .def_readwrite("maze_size", &PipelineConfig::maze_size)
      .def_readwrite("maze_seed", &PipelineConfig::maze_seed)
      .def_readwrite("data_episodes", &PipelineConfig::data_episodes)
      .def_readwrite("repr_epochs", &PipelineConfig::repr_epochs)
      .def_readwrite("wm_rollouts", &PipelineConfig::wm_rollouts)
      .def_readwrite("wm_horizon", &PipelineConfig::wm_horizon)
      .def_readwrite("policy_epochs", &PipelineConfig::policy_epochs)
      .def_readwrite("goals", &PipelineConfig::goals)
      .def_readwrite("negative_goals", &PipelineConfig::negative_goals)
      .def_readwrite("eval_trials", &PipelineConfig::eval_trials)
      .def_readwrite("eval_slack", &PipelineConfig::eval_slack);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("maze_size", &EvalReport::maze_size)
      .def_readonly("goal_cells", &EvalReport::goal_cells)
      .def_readonly("trials", &EvalReport::trials)
      .def_readonly("cells", &EvalReport::cells)
      .def_readonly("success", &EvalReport::success)
      .def_readonly("free_cell_count", &EvalReport::free_cell_count)
      .def_readonly("return_positions", &EvalReport::return_positions)
      .def_readonly("return_fraction", &EvalReport::return_fraction)
      .def_readonly("closest_goal_positions", &EvalReport::closest_goal_positions)
      .def_readonly("closest_goal_fraction", &EvalReport::closest_goal_fraction)
      .def_readonly("mean_success_steps", &EvalReport::mean_success_steps);

  m.def(
      "run_pipeline",
      [](const PipelineConfig& cfg) {
        OutputLock lock(cfg.out_dir);
        Pipeline pipeline(cfg);
        return pipeline.run();
      },
      py::arg("config"), "Run collect/train/rollout/graph/distill/eval and return the report");

  m.attr("__version__") = "0.1.0";
  m.attr("ACTION_COUNT") = kActionCount;
}
