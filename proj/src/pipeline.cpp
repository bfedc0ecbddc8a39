#include "backtrack/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>

#include "backtrack/error.hpp"

namespace backtrack {
namespace fs = std::filesystem;

namespace {

bool file_exists(const std::string& path) { return fs::exists(fs::path(path)); }

// Rng stream ids, one per stochastic stage.
constexpr std::uint64_t kStreamCollect = 1;
constexpr std::uint64_t kStreamInit = 2;
constexpr std::uint64_t kStreamTrain = 3;
constexpr std::uint64_t kStreamRollout = 4;
constexpr std::uint64_t kStreamDistill = 5;
constexpr std::uint64_t kStreamPolicyInit = 6;

template <typename Fn>
auto stage_guard(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;  // configuration problems keep their own exit code
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

OutputLock::OutputLock(const std::string& out_dir) {
  fs::create_directories(out_dir);
  path_ = (fs::path(out_dir) / ".lock").string();
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw StageError("lock", "output directory '" + out_dir +
                                 "' is in use (stale .lock file? remove it if no other run is active)");
  }
  ::close(fd);
}

OutputLock::~OutputLock() { ::unlink(path_.c_str()); }

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_(std::move(cfg)),
      hashes_(stage_hashes(cfg_)),
      maze_(Maze::generate(cfg_.maze_size, cfg_.maze_size, cfg_.maze_seed)) {
  fs::create_directories(cfg_.out_dir);
  if (cfg_.mode == PipelineMode::kOracle) {
    codec_ = std::make_unique<OracleCodec>(cfg_.latent);
    // The codec must be able to address every cell index.
    double capacity = 1.0;
    for (int gi = 0; gi < cfg_.latent.groups && capacity < 1e9; ++gi) capacity *= cfg_.latent.classes;
    if (capacity < maze_.cell_count()) {
      throw ConfigError("latent shape too small to address all maze cells in oracle mode");
    }
  }
}

std::string Pipeline::episodes_path() const {
  return cfg_.out_dir + "/episodes-" + hashes_.collect + ".bte";
}
std::string Pipeline::repr_path() const { return cfg_.out_dir + "/repr-" + hashes_.train + ".btw"; }
std::string Pipeline::wm_path() const { return cfg_.out_dir + "/wm-" + hashes_.train + ".btw"; }
std::string Pipeline::archive_path() const {
  return cfg_.out_dir + "/archive-" + hashes_.rollout + ".bta";
}
std::string Pipeline::graph_text_path() const {
  return cfg_.out_dir + "/graph-" + hashes_.graph + ".txt";
}
std::string Pipeline::dataset_path() const {
  return cfg_.out_dir + "/dataset-" + hashes_.graph + ".btd";
}
std::string Pipeline::dataset_avoid_path() const {
  return cfg_.out_dir + "/dataset-avoid-" + hashes_.graph + ".btd";
}
std::string Pipeline::policy_path() const {
  return cfg_.out_dir + "/policy-" + hashes_.distill + ".btw";
}
std::string Pipeline::report_path() const {
  return cfg_.out_dir + "/report-" + hashes_.eval + ".txt";
}
std::string Pipeline::stats_path() const { return cfg_.out_dir + "/stats-" + hashes_.eval + ".tsv"; }
std::string Pipeline::heatmap_path() const {
  return cfg_.out_dir + "/heatmap-" + hashes_.eval + ".ppm";
}

std::vector<int> Pipeline::cells_from_pairs(const std::vector<std::pair<int, int>>& coords,
                                            const char* what) const {
  std::vector<int> cells;
  for (const auto& [x, y] : coords) {
    if (!maze_.is_free(x, y)) {
      throw ConfigError(std::string(what) + " (" + std::to_string(x) + "," + std::to_string(y) +
                        ") is not a free cell");
    }
    cells.push_back(maze_.index(x, y));
  }
  return cells;
}

std::vector<int> Pipeline::goal_cells() const { return cells_from_pairs(cfg_.goals, "goal"); }

std::vector<int> Pipeline::negative_goal_cells() const {
  return cells_from_pairs(cfg_.negative_goals, "negative goal");
}

LatentCode Pipeline::code_for_cell(int cell) {
  if (cfg_.mode == PipelineMode::kOracle) return codec_->code_for_cell(cell);
  ensure_models();
  return repr_->encode_code(maze_.render(cell));
}

std::vector<LatentCode> Pipeline::goal_codes() {
  std::vector<LatentCode> codes;
  for (int cell : goal_cells()) codes.push_back(code_for_cell(cell));
  return codes;
}

std::vector<LatentCode> Pipeline::negative_goal_codes() {
  std::vector<LatentCode> codes;
  for (int cell : negative_goal_cells()) codes.push_back(code_for_cell(cell));
  return codes;
}

CodeEncoder Pipeline::make_encoder() {
  if (cfg_.mode == PipelineMode::kOracle) {
    const Maze* maze = &maze_;
    const OracleCodec* codec = codec_.get();
    return [maze, codec](const Observation& obs) {
      const int cell = maze->locate_agent(obs);
      if (cell < 0) throw ContractViolation("oracle encoder: no agent marker in observation");
      return codec->code_for_cell(cell);
    };
  }
  ensure_models();
  ReprModel* repr = repr_.get();
  return [repr](const Observation& obs) { return repr->encode_code(obs); };
}

void Pipeline::ensure_episodes() {
  if (episodes_) return;
  stage_guard("collect", [&] {
    const std::string path = episodes_path();
    if (file_exists(path)) {
      EpisodeFile file = load_episodes(path);
      if (file.width != maze_.width() || file.height != maze_.height() ||
          file.maze_seed != maze_.seed()) {
        throw IoError("episode file '" + path + "' does not match the configured maze");
      }
      episodes_ = std::move(file.episodes);
      return;
    }
    Rng rng = Rng(cfg_.seed).split(kStreamCollect);
    episodes_ = collect_random_data(maze_, cfg_.data_episodes, rng, cfg_.data_steps);
    save_episodes(path, maze_, *episodes_);
  });
}

void Pipeline::ensure_models() {
  if (cfg_.mode == PipelineMode::kOracle) return;
  if (repr_ && wm_) return;
  stage_guard("train", [&] {
    Rng init_rng = Rng(cfg_.seed).split(kStreamInit);
    ReprConfig rc;
    rc.latent = cfg_.latent;
    rc.hidden = cfg_.repr_hidden;
    rc.lr = cfg_.repr_lr;
    rc.batch = cfg_.repr_batch;
    rc.epochs = cfg_.repr_epochs;
    rc.schedule.terminal_epoch = cfg_.repr_epochs;
    rc.schedule.late_weight = cfg_.repr_entropy_weight;
    rc.schedule.phase_fraction = cfg_.repr_phase_fraction;
    rc.schedule.entropy_floor = cfg_.repr_entropy_floor;
    repr_ = std::make_unique<ReprModel>(rc, init_rng);

    BackwardModelConfig bc;
    bc.latent = cfg_.latent;
    bc.hidden = cfg_.wm_hidden;
    wm_ = std::make_unique<BackwardModel>(bc, init_rng);

    if (file_exists(repr_path()) && file_exists(wm_path())) {
      repr_->load(repr_path());
      wm_->load(wm_path());
      return;
    }

    ensure_episodes();
    JointTrainConfig tc;
    tc.w_wm = cfg_.wm_w;
    tc.epochs = cfg_.repr_epochs;
    tc.batch = cfg_.repr_batch;
    tc.repr_lr = cfg_.repr_lr;
    tc.wm_lr = cfg_.wm_lr;
    Rng rng = Rng(cfg_.seed).split(kStreamTrain);
    joint_train(*repr_, *wm_, maze_, *episodes_, tc, rc.schedule, rng);
    repr_->save(repr_path());
    wm_->save(wm_path());
  });
}

void Pipeline::ensure_archive() {
  if (archive_) return;
  stage_guard("rollout", [&] {
    const std::string path = archive_path();
    if (file_exists(path)) {
      archive_ = load_archive(path);
      if (!(archive_->latent == cfg_.latent)) {
        throw IoError("archive file '" + path + "' has a different latent shape");
      }
      return;
    }

    const PrevSampler* sampler = nullptr;
    if (cfg_.mode == PipelineMode::kOracle) {
      ensure_episodes();
      if (!tabular_) tabular_ = std::make_unique<TabularBackwardModel>(maze_, *codec_, *episodes_);
      sampler = tabular_.get();
    } else {
      ensure_models();
      sampler = wm_.get();
    }

    // Rollouts restart from positive and negative goals alike.
    std::vector<LatentCode> roots = goal_codes();
    for (LatentCode& c : negative_goal_codes()) roots.push_back(std::move(c));

    Rng rng = Rng(cfg_.seed).split(kStreamRollout);
    archive_ = backward_rollouts(*sampler, cfg_.latent, roots, cfg_.wm_rollouts, cfg_.wm_horizon, rng);
    save_archive(path, *archive_);
  });
}

void Pipeline::ensure_graph() {
  if (graph_ && spe_ && dataset_) return;
  stage_guard("graph", [&] {
    ensure_archive();
    graph_ = build_graph(*archive_, goal_codes(), negative_goal_codes());
    spe_ = compute_spe(*graph_);
    dataset_ = filter_dataset(*graph_, *spe_);
    if (!graph_->negative_nodes.empty()) {
      merge_avoid_labels(*dataset_, negative_goal_labels(*graph_, *spe_));
    }
    if (!file_exists(graph_text_path())) write_graph_text(graph_text_path(), *graph_, *spe_);
    if (!file_exists(dataset_path())) {
      save_dataset_pairs(dataset_path(), cfg_.latent, dataset_->pairs);
    }
    if (!dataset_->avoid.empty() && !file_exists(dataset_avoid_path())) {
      save_dataset_pairs(dataset_avoid_path(), cfg_.latent, dataset_->avoid);
    }
  });
}

void Pipeline::ensure_policy() {
  if (policy_) return;
  stage_guard("distill", [&] {
    Rng init_rng = Rng(cfg_.seed).split(kStreamPolicyInit);
    PolicyConfig pc;
    pc.c1 = cfg_.policy_c1;
    pc.avoid_weight = cfg_.policy_avoid_weight;
    pc.hidden = cfg_.policy_hidden;
    pc.lr = cfg_.policy_lr;
    pc.batch = cfg_.policy_batch;
    pc.epochs = cfg_.policy_epochs;
    policy_ = std::make_unique<PolicyNet>(cfg_.latent, kActionCount, pc, init_rng);

    if (file_exists(policy_path())) {
      policy_->load(policy_path());
      return;
    }
    ensure_graph();
    Rng rng = Rng(cfg_.seed).split(kStreamDistill);
    train_policy(*policy_, *dataset_, pc, rng);
    policy_->save(policy_path());
  });
}

void Pipeline::collect() { ensure_episodes(); }

void Pipeline::train() {
  if (cfg_.mode == PipelineMode::kOracle) return;  // nothing to train in oracle mode
  ensure_models();
}

void Pipeline::rollout() { ensure_archive(); }

void Pipeline::graph() { ensure_graph(); }

void Pipeline::distill() { ensure_policy(); }

EvalReport Pipeline::eval() {
  ensure_policy();
  ensure_graph();
  return stage_guard("eval", [&] {
    const CodeEncoder encoder = make_encoder();
    EvalReport report =
        evaluate_policy(maze_, encoder, *policy_, goal_cells(), cfg_.eval_trials, cfg_.eval_slack);

    const GraphStats gstats = graph_stats(*graph_, *spe_);
    std::vector<std::string> header;
    header.push_back("backtrack evaluation report");
    header.push_back("mode: " + std::string(mode_name(cfg_.mode)));
    header.push_back("stage hashes: collect=" + hashes_.collect + " train=" + hashes_.train +
                     " rollout=" + hashes_.rollout + " graph=" + hashes_.graph +
                     " distill=" + hashes_.distill + " eval=" + hashes_.eval);
    header.push_back("multi-run protocol: the master seed varies per run; rollouts and");
    header.push_back("distillation are re-run per seed against one trained world model.");
    header.push_back("config:");
    {
      std::istringstream cc(canonical_config(cfg_));
      std::string line;
      while (std::getline(cc, line)) header.push_back("  " + line);
    }
    write_report_text(report_path(), report, header);

    std::vector<std::pair<std::string, std::string>> extra;
    extra.emplace_back("graph_nodes", std::to_string(gstats.nodes));
    extra.emplace_back("graph_edges", std::to_string(gstats.edges));
    {
      std::ostringstream rf;
      rf.setf(std::ios::fixed);
      rf.precision(6);
      rf << gstats.reachable_fraction;
      extra.emplace_back("graph_reachable_fraction", rf.str());
    }
    extra.emplace_back("graph_max_spe", std::to_string(gstats.max_spe));
    extra.emplace_back("archive_codes", std::to_string(archive_->codes.size()));
    extra.emplace_back("archive_transitions", std::to_string(archive_->transitions.size()));
    extra.emplace_back("dataset_pairs", std::to_string(dataset_->pairs.size()));
    extra.emplace_back("dataset_avoid_pairs", std::to_string(dataset_->avoid.size()));
    extra.emplace_back("label_conflicts", std::to_string(dataset_->label_conflicts));
    write_stats_tsv(stats_path(), report, extra);

    emit_heatmap(maze_, report, heatmap_path());
    return report;
  });
}

}  // namespace backtrack
