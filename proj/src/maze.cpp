#include "backtrack/maze.hpp"

#include <algorithm>
#include <array>
#include <deque>

#include "backtrack/error.hpp"
#include "backtrack/io.hpp"

namespace backtrack {
namespace {

constexpr std::array<int, kActionCount> kDx = {0, 1, 0, -1};  // up, right, down, left
constexpr std::array<int, kActionCount> kDy = {-1, 0, 1, 0};

}  // namespace

Maze Maze::generate(int width, int height, std::uint64_t seed) {
  if (width < 5 || height < 5) throw ConfigError("maze size must be at least 5x5");
  if (width % 2 == 0 || height % 2 == 0) throw ConfigError("maze sizes must be odd");

  Maze m;
  m.width_ = width;
  m.height_ = height;
  m.seed_ = seed;
  m.walls_.assign(static_cast<std::size_t>(width) * height, 1);

  // Recursive backtracker over the room lattice (odd coordinates). Carving
  // the wall between visited rooms yields a spanning tree, i.e. a perfect
  // maze with all free cells mutually reachable.
  Rng rng = Rng(seed).split(0xA3);
  const int rx_count = (width - 1) / 2;
  const int ry_count = (height - 1) / 2;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(rx_count) * ry_count, 0);
  auto room_id = [rx_count](int rx, int ry) { return ry * rx_count + rx; };

  std::vector<std::pair<int, int>> stack;
  stack.emplace_back(0, 0);
  visited[0] = 1;
  m.walls_[static_cast<std::size_t>(m.index(1, 1))] = 0;

  while (!stack.empty()) {
    auto [rx, ry] = stack.back();
    std::array<int, 4> order = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    bool advanced = false;
    for (int dir : order) {
      const int nrx = rx + kDx[static_cast<std::size_t>(dir)];
      const int nry = ry + kDy[static_cast<std::size_t>(dir)];
      if (nrx < 0 || nrx >= rx_count || nry < 0 || nry >= ry_count) continue;
      if (visited[static_cast<std::size_t>(room_id(nrx, nry))]) continue;
      visited[static_cast<std::size_t>(room_id(nrx, nry))] = 1;
      const int cx = 1 + 2 * rx, cy = 1 + 2 * ry;
      const int wx = cx + kDx[static_cast<std::size_t>(dir)];
      const int wy = cy + kDy[static_cast<std::size_t>(dir)];
      m.walls_[static_cast<std::size_t>(m.index(wx, wy))] = 0;
      m.walls_[static_cast<std::size_t>(m.index(1 + 2 * nrx, 1 + 2 * nry))] = 0;
      stack.emplace_back(nrx, nry);
      advanced = true;
      break;
    }
    if (!advanced) stack.pop_back();
  }

  for (int c = 0; c < m.cell_count(); ++c) {
    if (m.walls_[static_cast<std::size_t>(c)] == 0) m.free_.push_back(c);
  }
  return m;
}

int Maze::step(int cell, int action) const {
  if (!is_free(cell)) throw ContractViolation("step: position is a wall cell");
  if (action < 0 || action >= kActionCount) throw ContractViolation("step: bad action id");
  const int nx = cell_x(cell) + kDx[static_cast<std::size_t>(action)];
  const int ny = cell_y(cell) + kDy[static_cast<std::size_t>(action)];
  return is_free(nx, ny) ? index(nx, ny) : cell;
}

int Maze::pixels_per_cell() const { return Observation::kSize / std::max(width_, height_); }

Observation Maze::render(int agent_cell) const {
  if (!is_free(agent_cell)) throw ContractViolation("render: agent on a wall cell");
  Observation obs;
  const int block = pixels_per_cell();
  for (int cy = 0; cy < height_; ++cy) {
    for (int cx = 0; cx < width_; ++cx) {
      const int cell = index(cx, cy);
      double r = 0.0, g = 0.0, b = 0.0;
      if (walls_[static_cast<std::size_t>(cell)]) {
        r = g = b = 1.0;
      } else if (cell == agent_cell) {
        g = 1.0;
      }
      if (r == 0.0 && g == 0.0 && b == 0.0) continue;
      for (int py = cy * block; py < (cy + 1) * block; ++py) {
        for (int px = cx * block; px < (cx + 1) * block; ++px) {
          obs.at(py, px, 0) = r;
          obs.at(py, px, 1) = g;
          obs.at(py, px, 2) = b;
        }
      }
    }
  }
  return obs;
}

int Maze::locate_agent(const Observation& obs) const {
  const int block = pixels_per_cell();
  for (int cell : free_) {
    const int py = cell_y(cell) * block + block / 2;
    const int px = cell_x(cell) * block + block / 2;
    if (obs.at(py, px, 1) > 0.5 && obs.at(py, px, 0) < 0.5 && obs.at(py, px, 2) < 0.5) {
      return cell;
    }
  }
  return -1;
}

std::vector<int> Maze::distances_to(const std::vector<int>& targets) const {
  if (targets.empty()) throw ContractViolation("distances_to: empty target set");
  std::vector<int> dist(static_cast<std::size_t>(cell_count()), kNoPath);
  std::deque<int> queue;
  for (int t : targets) {
    if (!is_free(t)) throw ContractViolation("distances_to: target is a wall cell");
    if (dist[static_cast<std::size_t>(t)] == 0) continue;
    dist[static_cast<std::size_t>(t)] = 0;
    queue.push_back(t);
  }
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    for (int a = 0; a < kActionCount; ++a) {
      const int nx = cell_x(cur) + kDx[static_cast<std::size_t>(a)];
      const int ny = cell_y(cur) + kDy[static_cast<std::size_t>(a)];
      if (!is_free(nx, ny)) continue;
      const int nxt = index(nx, ny);
      if (dist[static_cast<std::size_t>(nxt)] != kNoPath) continue;
      dist[static_cast<std::size_t>(nxt)] = dist[static_cast<std::size_t>(cur)] + 1;
      queue.push_back(nxt);
    }
  }
  return dist;
}

int Maze::shortest_distance(int from, const std::vector<int>& targets) const {
  if (!is_free(from)) throw ContractViolation("shortest_distance: start is a wall cell");
  return distances_to(targets)[static_cast<std::size_t>(from)];
}

std::vector<EpisodeLog> collect_random_data(const Maze& maze, int episodes, Rng& rng,
                                            int steps_per_episode) {
  if (episodes < 1) throw ContractViolation("collect_random_data: episodes must be >= 1");
  std::vector<EpisodeLog> logs;
  logs.reserve(static_cast<std::size_t>(episodes));
  const auto& free = maze.free_cells();
  for (int e = 0; e < episodes; ++e) {
    EpisodeLog log;
    log.steps.reserve(static_cast<std::size_t>(steps_per_episode));
    int pos = free[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(free.size())))];
    for (int t = 0; t < steps_per_episode; ++t) {
      const int action = rng.uniform_int(kActionCount);
      const int next = maze.step(pos, action);
      log.steps.push_back({static_cast<std::uint16_t>(pos), static_cast<std::uint8_t>(action),
                           static_cast<std::uint16_t>(next)});
      pos = next;
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

void save_episodes(const std::string& path, const Maze& maze, const std::vector<EpisodeLog>& episodes) {
  BinaryWriter w(path);
  w.magic("BTE1");
  w.u64(maze.seed());
  w.u16(static_cast<std::uint16_t>(maze.width()));
  w.u16(static_cast<std::uint16_t>(maze.height()));
  w.u32(static_cast<std::uint32_t>(episodes.size()));
  for (const EpisodeLog& ep : episodes) {
    w.u16(static_cast<std::uint16_t>(ep.steps.size()));
    for (const EpisodeStep& s : ep.steps) {
      w.u16(s.from);
      w.u8(s.action);
      w.u16(s.to);
    }
  }
  w.close();
}

EpisodeFile load_episodes(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("BTE1");
  EpisodeFile f;
  f.maze_seed = r.u64();
  f.width = r.u16();
  f.height = r.u16();
  const std::uint32_t count = r.u32();
  f.episodes.resize(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t steps = r.u16();
    f.episodes[e].steps.resize(steps);
    for (std::uint16_t t = 0; t < steps; ++t) {
      EpisodeStep& s = f.episodes[e].steps[t];
      s.from = r.u16();
      s.action = r.u8();
      s.to = r.u16();
    }
  }
  return f;
}

}  // namespace backtrack
