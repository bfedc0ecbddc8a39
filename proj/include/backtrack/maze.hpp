#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "backtrack/rng.hpp"

namespace backtrack {

// Actions are 4-connected lattice moves; moving into a wall is a no-op.
inline constexpr int kActionUp = 0;
inline constexpr int kActionRight = 1;
inline constexpr int kActionDown = 2;
inline constexpr int kActionLeft = 3;
inline constexpr int kActionCount = 4;

inline constexpr int kNoPath = std::numeric_limits<int>::max();

// Bird's-eye RGB frame of the whole maze: walls white, floor black, agent
// green. Channel values live in [0, 1].
struct Observation {
  static constexpr int kSize = 64;
  std::vector<double> pixels;  // kSize * kSize * 3, row-major (y, x, channel)

  Observation() : pixels(static_cast<std::size_t>(kSize) * kSize * 3, 0.0) {}
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * kSize + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }
  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * kSize + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }
};

// Perfect maze on an odd wall/corridor lattice. Immutable after generation;
// cells are addressed by index = y * width + x.
class Maze {
 public:
  static Maze generate(int width, int height, std::uint64_t seed);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint64_t seed() const { return seed_; }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }
  bool is_free(int x, int y) const { return in_bounds(x, y) && walls_[index(x, y)] == 0; }
  bool is_free(int cell) const { return walls_[static_cast<std::size_t>(cell)] == 0; }
  int index(int x, int y) const { return y * width_ + x; }
  int cell_x(int cell) const { return cell % width_; }
  int cell_y(int cell) const { return cell / width_; }
  int cell_count() const { return width_ * height_; }

  const std::vector<int>& free_cells() const { return free_; }

  // Deterministic forward dynamics; blocked moves keep the position.
  int step(int cell, int action) const;

  // Deterministic rendering; injective over free cells.
  Observation render(int agent_cell) const;
  int pixels_per_cell() const;

  // Recovers the agent cell from a rendered observation, -1 if no marker.
  int locate_agent(const Observation& obs) const;

  // BFS steps from every free cell to the nearest target; kNoPath where
  // unreachable (cannot happen in a generated maze).
  std::vector<int> distances_to(const std::vector<int>& targets) const;
  int shortest_distance(int from, const std::vector<int>& targets) const;

 private:
  Maze() = default;

  int width_ = 0;
  int height_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> walls_;  // 1 = wall
  std::vector<int> free_;            // ascending cell index
};

struct EpisodeStep {
  std::uint16_t from;
  std::uint8_t action;
  std::uint16_t to;
};

struct EpisodeLog {
  std::vector<EpisodeStep> steps;
};

inline constexpr int kEpisodeSteps = 20;

// Uniform random start, fixed-length uniform random action episodes with a
// reset between episodes so the data covers the whole maze.
std::vector<EpisodeLog> collect_random_data(const Maze& maze, int episodes, Rng& rng,
                                            int steps_per_episode = kEpisodeSteps);

struct EpisodeFile {
  std::uint64_t maze_seed = 0;
  int width = 0;
  int height = 0;
  std::vector<EpisodeLog> episodes;
};

// Episode archive, magic "BTE1". Observations are re-rendered on load rather
// than stored.
void save_episodes(const std::string& path, const Maze& maze, const std::vector<EpisodeLog>& episodes);
EpisodeFile load_episodes(const std::string& path);

}  // namespace backtrack
