#include "dasco/envs/maze.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "dasco/error.hpp"

namespace dasco::envs {

namespace {

constexpr GridPos kNeighbors[] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

Cell parse_cell(char c) {
  switch (c) {
    case '#': return Cell::Wall;
    case '.': return Cell::Free;
    case 'S': return Cell::Start;
    case 'G': return Cell::Goal;
    default: throw ContractError(std::string("maze layout: unknown cell character '") + c + "'");
  }
}

}  // namespace

MazeSpec::MazeSpec(std::string name, std::vector<std::string> layout, double cell_size, int max_episode_steps)
    : name_(std::move(name)), layout_(std::move(layout)), cell_size_(cell_size), max_episode_steps_(max_episode_steps) {
  if (layout_.empty() || layout_.front().empty()) throw ContractError("maze layout is empty");
  if (!(cell_size_ > 0.0)) throw ContractError("maze cell_size must be positive");
  if (max_episode_steps_ < 1) throw ContractError("maze max_episode_steps must be at least 1");
  int starts = 0, goals = 0;
  for (int r = 0; r < rows(); ++r) {
    if (static_cast<int>(layout_[r].size()) != cols()) throw ContractError("maze layout is not rectangular");
    for (int c = 0; c < cols(); ++c) {
      const Cell cell = parse_cell(layout_[r][c]);
      if (cell == Cell::Start) {
        ++starts;
        start_ = {r, c};
      } else if (cell == Cell::Goal) {
        ++goals;
        goal_ = {r, c};
      }
    }
  }
  if (starts != 1 || goals != 1) throw ContractError("maze needs exactly one start and one goal cell");

  goal_distance_.assign(static_cast<std::size_t>(rows() * cols()), -1);
  std::deque<GridPos> frontier{goal_};
  goal_distance_[goal_.row * cols() + goal_.col] = 0;
  while (!frontier.empty()) {
    const GridPos p = frontier.front();
    frontier.pop_front();
    const int d = goal_distance_[p.row * cols() + p.col];
    for (const auto& n : kNeighbors) {
      const GridPos q{p.row + n.row, p.col + n.col};
      if (blocked(q) || goal_distance_[q.row * cols() + q.col] >= 0) continue;
      goal_distance_[q.row * cols() + q.col] = d + 1;
      frontier.push_back(q);
    }
  }
  if (!distance_to_goal(start_)) throw ContractError("maze '" + name_ + "': goal unreachable from start");
}

Cell MazeSpec::cell(GridPos p) const {
  if (p.row < 0 || p.col < 0 || p.row >= rows() || p.col >= cols()) return Cell::Wall;
  return parse_cell(layout_[p.row][p.col]);
}

GridPos MazeSpec::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor(y / cell_size_)), static_cast<int>(std::floor(x / cell_size_))};
}

std::array<double, 2> MazeSpec::center(GridPos p) const {
  return {(p.col + 0.5) * cell_size_, (p.row + 0.5) * cell_size_};
}

std::optional<int> MazeSpec::distance_to_goal(GridPos p) const {
  if (blocked(p)) return std::nullopt;
  const int d = goal_distance_[p.row * cols() + p.col];
  if (d < 0) return std::nullopt;
  return d;
}

std::vector<GridPos> MazeSpec::path_to_goal(GridPos from) const {
  auto d = distance_to_goal(from);
  if (!d) throw ContractError("maze '" + name_ + "': goal unreachable from the current cell");
  std::vector<GridPos> path{from};
  GridPos p = from;
  while (*d > 0) {
    for (const auto& n : kNeighbors) {
      const GridPos q{p.row + n.row, p.col + n.col};
      auto dq = distance_to_goal(q);
      if (dq && *dq == *d - 1) {
        p = q;
        d = dq;
        break;
      }
    }
    path.push_back(p);
  }
  return path;
}

MazeSpec builtin_maze(std::string_view name) {
  if (name == "toy-open5") {
    return MazeSpec("toy-open5", {"S....", ".....", ".....", ".....", "....G"}, 1.0, 100);
  }
  if (name == "toy-medium") {
    return MazeSpec("toy-medium",
                    {"########",
                     "#S.#...#",
                     "#..#.#.#",
                     "#....#.#",
                     "###.##.#",
                     "#...#..#",
                     "#.#...G#",
                     "########"},
                    1.0, 100);
  }
  if (name == "toy-large") {
    return MazeSpec("toy-large",
                    {"############",
                     "#S...#.....#",
                     "#.##.#.###.#",
                     "#.#..#...#.#",
                     "#.#.####.#.#",
                     "#...#....#.#",
                     "###.#.####.#",
                     "#...#.#....#",
                     "#.###.#.##.#",
                     "#.....#..#.#",
                     "#.#.....#.G#",
                     "############"},
                    1.0, 200);
  }
  throw ContractError("unknown maze '" + std::string(name) + "'");
}

std::vector<std::string> builtin_maze_names() { return {"toy-open5", "toy-medium", "toy-large"}; }

StepResult step_env(const MazeSpec& maze, const MazeState& state, const Action& action) {
  const double stride = 0.25 * maze.cell_size();
  StepResult out;
  out.state = state;
  const double dx = std::isfinite(action[0]) ? stride * clip_unit(action[0]) : 0.0;
  const double dy = std::isfinite(action[1]) ? stride * clip_unit(action[1]) : 0.0;
  if (!maze.blocked_at(state.x + dx, state.y)) out.state.x = state.x + dx;
  if (!maze.blocked_at(out.state.x, state.y + dy)) out.state.y = state.y + dy;
  out.state.steps = state.steps + 1;
  const auto goal = maze.goal_center();
  out.reached_goal = std::hypot(out.state.x - goal[0], out.state.y - goal[1]) <= maze.goal_radius();
  out.reward = out.reached_goal ? 1.0 : 0.0;
  out.done = out.reached_goal || out.state.steps >= maze.max_episode_steps();
  return out;
}

Observation observe(const MazeSpec& maze, const MazeState& state) {
  const auto goal = maze.goal_center();
  return {static_cast<float>(state.x / maze.width()), static_cast<float>(state.y / maze.height()),
          static_cast<float>(goal[0] / maze.width()), static_cast<float>(goal[1] / maze.height())};
}

Action behavior_policy_action(const MazeSpec& maze, const MazeState& state) {
  const GridPos here = maze.cell_of(state.x, state.y);
  const auto path = maze.path_to_goal(here);
  const auto waypoint = maze.center(path.size() > 1 ? path[1] : path[0]);
  const double gain = 2.0 / maze.cell_size();
  return {clip_unit(gain * (waypoint[0] - state.x)), clip_unit(gain * (waypoint[1] - state.y))};
}

}  // namespace dasco::envs
