#pragma once

#include <string>

#include "backtrack/eval.hpp"
#include "backtrack/maze.hpp"

namespace backtrack {

// Success heatmap as binary PPM (P6), one block per maze cell. Walls are
// white, goals draw in their saturated palette color, and free cells fade
// from white (never reached) to the reached goal's field color (always
// reached). Single-goal runs use green fields and a blue goal marker.
void emit_heatmap(const Maze& maze, const EvalReport& report, const std::string& path,
                  int block = 8);

}  // namespace backtrack
