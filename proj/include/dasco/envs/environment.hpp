#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "dasco/envs/maze.hpp"
#include "dasco/nn/random.hpp"

namespace dasco::envs {

struct EnvStep {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

// Episodic task with 4-dimensional observations and actions in [-1, 1]^2.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t obs_dim() const { return 4; }
  virtual std::size_t act_dim() const { return 2; }
  virtual Observation reset(nn::Rng& rng) = 0;
  virtual EnvStep step(const Action& action) = 0;
};

class MazeEnv : public Environment {
 public:
  explicit MazeEnv(MazeSpec spec) : spec_(std::move(spec)) {}

  std::string name() const override { return spec_.name(); }
  Observation reset(nn::Rng& rng) override;
  EnvStep step(const Action& action) override;

  const MazeSpec& spec() const { return spec_; }
  const MazeState& state() const { return state_; }

 private:
  MazeSpec spec_;
  MazeState state_;
};

class ReacherEnv : public Environment {
 public:
  std::string name() const override { return "toy-reacher"; }
  Observation reset(nn::Rng& rng) override;
  EnvStep step(const Action& action) override;

  /// Success threshold on the distance to the target.
  static constexpr double kSuccessRadius = 0.1;

 private:
  double tx_ = 0.0, ty_ = 0.0;
};

/// A maze from builtin_maze() or "toy-reacher"; ContractError otherwise.
std::unique_ptr<Environment> make_env(std::string_view name);

/// Start-cell center plus uniform jitter of up to a quarter cell per axis.
MazeState sample_start(const MazeSpec& maze, nn::Rng& rng);

}  // namespace dasco::envs
