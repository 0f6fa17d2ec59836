#include "dasco/envs/environment.hpp"

#include <cmath>

#include "dasco/error.hpp"

namespace dasco::envs {

MazeState sample_start(const MazeSpec& maze, nn::Rng& rng) {
  const auto c = maze.center(maze.start());
  const double jitter = 0.25 * maze.cell_size();
  MazeState s;
  s.x = c[0] + rng.uniform(-jitter, jitter);
  s.y = c[1] + rng.uniform(-jitter, jitter);
  return s;
}

Observation MazeEnv::reset(nn::Rng& rng) {
  state_ = sample_start(spec_, rng);
  return observe(spec_, state_);
}

EnvStep MazeEnv::step(const Action& action) {
  const auto r = step_env(spec_, state_, action);
  state_ = r.state;
  return {observe(spec_, state_), r.reward, r.done, r.reached_goal};
}

Observation ReacherEnv::reset(nn::Rng& rng) {
  tx_ = rng.uniform(-0.8, 0.8);
  ty_ = rng.uniform(-0.8, 0.8);
  const auto fx = static_cast<float>(tx_), fy = static_cast<float>(ty_);
  return {fx, fy, fx, fy};
}

EnvStep ReacherEnv::step(const Action& action) {
  const double dist = std::hypot(clip_unit(action[0]) - tx_, clip_unit(action[1]) - ty_);
  const auto fx = static_cast<float>(tx_), fy = static_cast<float>(ty_);
  return {{fx, fy, fx, fy}, -dist, true, dist <= kSuccessRadius};
}

std::unique_ptr<Environment> make_env(std::string_view name) {
  if (name == "toy-reacher") return std::make_unique<ReacherEnv>();
  return std::make_unique<MazeEnv>(builtin_maze(name));
}

}  // namespace dasco::envs
