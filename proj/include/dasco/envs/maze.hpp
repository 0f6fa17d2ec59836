#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dasco::envs {

using Action = std::array<double, 2>;
using Observation = std::array<float, 4>;

enum class Cell : std::uint8_t { Wall, Free, Start, Goal };

struct GridPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// Rectangular grid maze parsed from ASCII ('#' wall, '.' free, 'S' start,
// 'G' goal). World x runs along columns and y along rows, both in units of
// cell_size, so cell (r, c) covers [c, c+1) x [r, r+1) scaled.
class MazeSpec {
 public:
  /// Throws ContractError for a ragged layout, unknown characters, anything
  /// but exactly one start and one goal cell, or no path between them.
  MazeSpec(std::string name, std::vector<std::string> layout, double cell_size, int max_episode_steps);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& layout() const { return layout_; }
  int rows() const { return static_cast<int>(layout_.size()); }
  int cols() const { return static_cast<int>(layout_.front().size()); }
  double cell_size() const { return cell_size_; }
  int max_episode_steps() const { return max_episode_steps_; }
  double width() const { return cols() * cell_size_; }
  double height() const { return rows() * cell_size_; }

  Cell cell(GridPos p) const;
  bool blocked(GridPos p) const { return cell(p) == Cell::Wall; }
  /// Positions outside the grid count as walls.
  bool blocked_at(double x, double y) const { return blocked(cell_of(x, y)); }
  GridPos cell_of(double x, double y) const;
  std::array<double, 2> center(GridPos p) const;

  GridPos start() const { return start_; }
  GridPos goal() const { return goal_; }
  std::array<double, 2> goal_center() const { return center(goal_); }
  double goal_radius() const { return 0.5 * cell_size_; }

  /// Shortest 4-connected path length (in cells) to the goal; nullopt if unreachable.
  std::optional<int> distance_to_goal(GridPos p) const;
  /// Breadth-first shortest path from `from` to the goal, both endpoints
  /// included. Neighbors are expanded up, down, left, right.
  std::vector<GridPos> path_to_goal(GridPos from) const;

 private:
  std::string name_;
  std::vector<std::string> layout_;
  double cell_size_;
  int max_episode_steps_;
  GridPos start_;
  GridPos goal_;
  std::vector<int> goal_distance_;  // -1 for unreachable or wall
};

/// Built-in layouts: "toy-open5" (5x5, no interior walls), "toy-medium"
/// (8x8) and "toy-large" (12x12).
MazeSpec builtin_maze(std::string_view name);
std::vector<std::string> builtin_maze_names();

struct MazeState {
  double x = 0.0;
  double y = 0.0;
  int steps = 0;
};

struct StepResult {
  MazeState state;
  double reward = 0.0;  // 1 inside the goal radius, else 0
  bool reached_goal = false;
  bool done = false;  // reached goal or hit the step limit
};

/// Moves by cell_size * 0.25 * clip(action). Each axis is resolved
/// separately; a move into a wall leaves that coordinate unchanged.
StepResult step_env(const MazeSpec& maze, const MazeState& state, const Action& action);

/// (x, y, goal x, goal y) scaled to [0, 1] by the maze extents.
Observation observe(const MazeSpec& maze, const MazeState& state);

/// Scripted waypoint controller: heads for the center of the next cell on the
/// shortest path (the goal center once inside the goal cell) with gain
/// 2 / cell_size, clipped to [-1, 1].
Action behavior_policy_action(const MazeSpec& maze, const MazeState& state);

inline double clip_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace dasco::envs
