#include "backtrack/heatmap.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "backtrack/error.hpp"

namespace backtrack {
namespace {

struct Rgb {
  unsigned char r, g, b;
};

// Marker colors follow the goal palette from the evaluation figures: a blue
// single goal, then dark orange / cyan / yellow / violet.
constexpr Rgb kSingleGoal{30, 60, 230};
constexpr std::array<Rgb, 4> kGoalPalette = {{{204, 102, 0}, {0, 153, 153}, {204, 204, 0}, {140, 30, 200}}};

constexpr Rgb kSingleField{0, 190, 0};
constexpr std::array<Rgb, 4> kFieldPalette = {{{255, 150, 40}, {40, 210, 210}, {235, 235, 60}, {190, 90, 250}}};

Rgb blend_to_white(Rgb color, double brightness) {
  auto mix = [brightness](unsigned char c) {
    const double v = 255.0 * (1.0 - brightness) + static_cast<double>(c) * brightness;
    return static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
  };
  return {mix(color.r), mix(color.g), mix(color.b)};
}

}  // namespace

void emit_heatmap(const Maze& maze, const EvalReport& report, const std::string& path, int block) {
  const int width = maze.width() * block;
  const int height = maze.height() * block;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * 3, 255);

  const bool multi = report.goal_cells.size() > 1;
  auto goal_index = [&](int cell) -> int {
    for (std::size_t i = 0; i < report.goal_cells.size(); ++i) {
      if (report.goal_cells[i] == cell) return static_cast<int>(i);
    }
    return -1;
  };

  auto paint = [&](int cx, int cy, Rgb color) {
    for (int py = cy * block; py < (cy + 1) * block; ++py) {
      for (int px = cx * block; px < (cx + 1) * block; ++px) {
        const std::size_t at = (static_cast<std::size_t>(py) * width + px) * 3;
        pixels[at] = color.r;
        pixels[at + 1] = color.g;
        pixels[at + 2] = color.b;
      }
    }
  };

  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const int cell = report.cells[i];
    const int cx = maze.cell_x(cell), cy = maze.cell_y(cell);
    const int gi = goal_index(cell);
    if (gi >= 0) {
      paint(cx, cy, multi ? kGoalPalette[static_cast<std::size_t>(gi) % kGoalPalette.size()]
                          : kSingleGoal);
      continue;
    }
    const double brightness =
        static_cast<double>(report.success[i]) / static_cast<double>(report.trials);
    Rgb field = kSingleField;
    if (multi && report.reached_goal[i] >= 0) {
      const int ri = goal_index(report.reached_goal[i]);
      if (ri >= 0) field = kFieldPalette[static_cast<std::size_t>(ri) % kFieldPalette.size()];
    }
    paint(cx, cy, blend_to_white(field, brightness));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace backtrack
