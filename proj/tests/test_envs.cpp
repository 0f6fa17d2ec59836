#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dasco/envs/dataset.hpp"
#include "dasco/envs/environment.hpp"
#include "dasco/error.hpp"

using namespace dasco;
using namespace dasco::envs;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dasco_test_envs";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Plain BFS over the ASCII layout, independent of MazeSpec.
std::vector<GridPos> bfs_oracle(const std::vector<std::string>& layout, GridPos from, GridPos goal) {
  const int rows = static_cast<int>(layout.size()), cols = static_cast<int>(layout[0].size());
  std::vector<int> parent(rows * cols, -1);
  std::vector<bool> seen(rows * cols, false);
  std::deque<GridPos> queue{from};
  seen[from.row * cols + from.col] = true;
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  while (!queue.empty()) {
    auto p = queue.front();
    queue.pop_front();
    if (p == goal) break;
    for (int k = 0; k < 4; ++k) {
      GridPos q{p.row + dr[k], p.col + dc[k]};
      if (q.row < 0 || q.col < 0 || q.row >= rows || q.col >= cols) continue;
      if (layout[q.row][q.col] == '#' || seen[q.row * cols + q.col]) continue;
      seen[q.row * cols + q.col] = true;
      parent[q.row * cols + q.col] = p.row * cols + p.col;
      queue.push_back(q);
    }
  }
  std::vector<GridPos> path;
  for (int id = goal.row * cols + goal.col; id != -1; id = parent[id]) {
    path.push_back({id / cols, id % cols});
    if (id == from.row * cols + from.col) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

OfflineDataset random_dataset(std::uint64_t seed) {
  nn::Rng rng(seed);
  OfflineDataset ds;
  const std::size_t n = rng.index(60);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 4; ++k) ds.observations.push_back(static_cast<float>(rng.normal()));
    for (int k = 0; k < 2; ++k) ds.actions.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
    ds.rewards.push_back(static_cast<float>(rng.normal()));
    ds.terminals.push_back(rng.index(2) ? 1 : 0);
    for (int k = 0; k < 4; ++k) ds.next_observations.push_back(static_cast<float>(rng.normal()));
    ds.episode_ends.push_back(i + 1 == n || rng.index(5) == 0 ? 1 : 0);
  }
  ds.metadata = {"toy-medium", "noisy", seed, kGeneratorVersion, rng.uniform()};
  return ds;
}

}  // namespace

TEST_CASE("maze_layout_validation") {
  CHECK_THROWS_AS(MazeSpec("m", {"S..", ".G"}, 1.0, 10), ContractError);
  CHECK_THROWS_AS(MazeSpec("m", {"S.x", "..G"}, 1.0, 10), ContractError);
  CHECK_THROWS_AS(MazeSpec("m", {"S..", "..."}, 1.0, 10), ContractError);
  CHECK_THROWS_AS(MazeSpec("m", {"S#.", "S#G"}, 1.0, 10), ContractError);
  CHECK_THROWS_AS(MazeSpec("m", {"S#.", ".#G"}, 1.0, 10), ContractError);
  for (const auto& name : builtin_maze_names()) CHECK_NOTHROW(builtin_maze(name));
  CHECK_THROWS_AS(builtin_maze("toy-nowhere"), ContractError);
}

TEST_CASE("step_env_kinematics") {
  const auto maze = builtin_maze("toy-open5");
  MazeState s{1.5, 1.5, 0};

  SUBCASE("zero action") {
    auto r = step_env(maze, s, {0.0, 0.0});
    CHECK(r.state.x == 1.5);
    CHECK(r.state.y == 1.5);
    CHECK(r.reward == 0.0);
    CHECK(r.state.steps == 1);
  }
  SUBCASE("outer wall blocks the normal component only") {
    MazeState edge{0.1, 2.5, 0};
    auto r = step_env(maze, edge, {-1.0, 0.6});
    CHECK(r.state.x == 0.1);
    CHECK(r.state.y == doctest::Approx(2.5 + 0.25 * 0.6));
  }
  SUBCASE("actions are clipped") {
    auto r = step_env(maze, s, {7.0, -3.0});
    CHECK(r.state.x == doctest::Approx(1.75));
    CHECK(r.state.y == doctest::Approx(1.25));
  }
  SUBCASE("interior wall") {
    MazeSpec walled("w", {"S#..", "...G"}, 2.0, 50);
    MazeState near{1.9, 1.0, 0};
    auto r = step_env(walled, near, {1.0, 0.0});
    CHECK(r.state.x == 1.9);
  }
}

TEST_CASE("straight_corridor_step_count") {
  // A long corridor whose goal is out of reach during the traversal.
  const std::string row = "S" + std::string(40, '.') + "G";
  for (double cs : {1.0, 2.5}) {
    MazeSpec corridor("c", {row}, cs, 1000);
    for (double k : {1.0, 2.3, 5.0, 7.9}) {
      MazeState s{0.5 * cs, 0.5 * cs, 0};
      const double target = s.x + k * cs - 1e-12 * cs;
      int steps = 0;
      while (s.x < target) {
        s = step_env(corridor, s, {1.0, 0.0}).state;
        ++steps;
      }
      CHECK(steps == static_cast<int>(std::ceil(k / 0.25 - 1e-9)));
    }
  }
}

TEST_CASE("goal_reward_and_done") {
  const auto maze = builtin_maze("toy-open5");
  auto g = maze.goal_center();
  auto r = step_env(maze, {g[0] - 0.6, g[1], 0}, {0.4, 0.0});
  CHECK(r.reached_goal);
  CHECK(r.done);
  CHECK(r.reward == 1.0);
  auto far = step_env(maze, {0.5, 0.5, maze.max_episode_steps() - 1}, {0.0, 0.0});
  CHECK_FALSE(far.reached_goal);
  CHECK(far.done);
}

TEST_CASE("behavior_policy_examples") {
  const auto maze = builtin_maze("toy-open5");
  SUBCASE("goal center gives a zero action") {
    auto g = maze.goal_center();
    auto a = behavior_policy_action(maze, {g[0], g[1], 0});
    CHECK(a[0] == 0.0);
    CHECK(a[1] == 0.0);
  }
  SUBCASE("one cell left of the goal points right, clipped") {
    auto c = maze.center({4, 3});
    auto a = behavior_policy_action(maze, {c[0], c[1], 0});
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.0);
  }
  SUBCASE("proportional inside the clip range") {
    auto c = maze.center({4, 3});
    auto a = behavior_policy_action(maze, {c[0] + 0.7, c[1] + 0.1, 0});
    CHECK(a[0] == doctest::Approx(2.0 * 0.3));
    CHECK(a[1] == doctest::Approx(-2.0 * 0.1));
  }
  SUBCASE("L-shaped wall routes to the corner waypoint") {
    const std::vector<std::string> layout{"G....", "####.", "S...."};
    MazeSpec lmaze("l", layout, 1.0, 100);
    auto oracle = bfs_oracle(layout, {2, 0}, {0, 0});
    auto path = lmaze.path_to_goal({2, 0});
    REQUIRE(path.size() == oracle.size());
    for (std::size_t i = 0; i < path.size(); ++i) CHECK(path[i] == oracle[i]);
    CHECK(lmaze.distance_to_goal({2, 0}).value() == static_cast<int>(oracle.size()) - 1);

    auto s = lmaze.center({2, 0});
    auto a = behavior_policy_action(lmaze, {s[0], s[1], 0});
    auto wp = lmaze.center(oracle[1]);
    CHECK(a[0] == doctest::Approx(std::clamp(2.0 * (wp[0] - s[0]), -1.0, 1.0)));
    CHECK(a[1] == doctest::Approx(std::clamp(2.0 * (wp[1] - s[1]), -1.0, 1.0)));
    // The goal lies straight up (negative y) but the wall forces a move right.
    CHECK(a[0] > 0.0);
    CHECK(a[1] == 0.0);
  }
}

TEST_CASE("bfs_matches_oracle_on_builtin_mazes") {
  for (const auto& name : builtin_maze_names()) {
    auto maze = builtin_maze(name);
    for (int r = 0; r < maze.rows(); ++r) {
      for (int c = 0; c < maze.cols(); ++c) {
        if (maze.blocked({r, c})) {
          CHECK_FALSE(maze.distance_to_goal({r, c}).has_value());
          continue;
        }
        auto oracle = bfs_oracle(maze.layout(), {r, c}, maze.goal());
        CHECK(maze.distance_to_goal({r, c}).value() == static_cast<int>(oracle.size()) - 1);
      }
    }
  }
}

TEST_CASE("clean_rollouts_make_progress") {
  for (const auto& name : builtin_maze_names()) {
    auto maze = builtin_maze(name);
    MazeState s{maze.center(maze.start())[0], maze.center(maze.start())[1], 0};
    int best = *maze.distance_to_goal(maze.start());
    bool reached = false;
    while (true) {
      auto r = step_env(maze, s, behavior_policy_action(maze, s));
      s = r.state;
      int d = *maze.distance_to_goal(maze.cell_of(s.x, s.y));
      CHECK(d <= best + 1);
      best = std::min(best, d);
      if (r.done) {
        reached = r.reached_goal;
        break;
      }
    }
    CHECK_MESSAGE(reached, name);
  }
}

TEST_CASE("corruption_bucket_examples") {
  const auto profile = CorruptionProfile::standard();
  const std::vector<double> noises{0.1, 0.0, 0.2, 0.05, 0.3, 0.1, 0.4, 0.2};
  const std::vector<double> biases{0.1, -0.1, 0.2, 0.0, 0.2, -0.3, 0.2, 0.0};
  CHECK(profile.noises == noises);
  CHECK(profile.biases == biases);

  CHECK(profile.bucket(-5.0) == 0);
  CHECK(profile.noises[profile.bucket(-5.0)] == 0.1);
  CHECK(profile.biases[profile.bucket(-5.0)] == 0.1);
  CHECK(profile.bucket(2.0) == 1);

  nn::Rng rng(3);
  auto a = corrupt_action({0.3, -0.4}, 2.0, profile, Variant::Biased, rng);
  CHECK(a[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(-0.3).epsilon(1e-12));

  auto clipped = corrupt_action({0.95, 0.95}, 2.0, profile, Variant::Biased, rng);
  CHECK(clipped[0] == 1.0);
  CHECK(clipped[1] == 1.0);

  auto clean = corrupt_action({0.2, 5.0}, 10.0, profile, Variant::Clean, rng);
  CHECK(clean[0] == 0.2);
  CHECK(clean[1] == 1.0);
  CHECK_THROWS_AS(profile.bucket(-21.0), ContractError);
  CHECK(parse_variant("noisy") == Variant::Noisy);
  CHECK_THROWS_AS(parse_variant("loud"), ContractError);
}

TEST_CASE("corruption_breakpoint_sweep") {
  const auto profile = CorruptionProfile::standard();
  for (std::size_t i = 0; i < profile.positions.size(); ++i) {
    const double p = profile.positions[i];
    CHECK(profile.bucket(p) == i);
    CHECK(profile.bucket(p + 0.5) == i);
    if (i > 0) CHECK(profile.bucket(std::nextafter(p, -1e9)) == i - 1);
  }
  CHECK(profile.bucket(1e6) == profile.positions.size() - 1);
  auto half = profile.scaled(0.5);
  CHECK(half.positions[2] == 2.0);
  CHECK(half.noises == profile.noises);

  CorruptionProfile bad = profile;
  bad.positions[3] = bad.positions[2];
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = profile;
  bad.noises[0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = profile;
  bad.biases.pop_back();
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("noisy_corruption_statistics") {
  // Bucket 6 has noise 0.4; sample mean and spread of an interior action.
  const auto profile = CorruptionProfile::standard();
  nn::Rng rng(11);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto a = corrupt_action({0.0, 0.0}, 21.0, profile, Variant::Noisy, rng);
    sum += a[0];
    sq += a[0] * a[0];
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.4).epsilon(0.03));
}

TEST_CASE("generate_dataset_invariants") {
  const auto maze = builtin_maze("toy-medium");
  for (auto variant : {Variant::Clean, Variant::Noisy, Variant::Biased}) {
    auto res = generate_dataset(maze, variant, 30, 5);
    const auto& ds = res.dataset;
    CHECK_NOTHROW(ds.validate());
    CHECK(ds.episode_count() == 30);
    CHECK(res.episodes == 30);
    CHECK(ds.metadata.variant == variant_name(variant));
    CHECK(ds.metadata.behavior_success_rate == doctest::Approx(res.successes / 30.0));
    for (float a : ds.actions) CHECK((a >= -1.0f && a <= 1.0f));
    for (float r : ds.rewards) CHECK((r == -1.0f || r == 0.0f));
    // terminal exactly when the reward is 0, and only on episode ends
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK((ds.terminals[i] == 1) == (ds.rewards[i] == 0.0f));
      if (ds.terminals[i]) CHECK(ds.episode_ends[i] == 1);
    }
    // consecutive transitions chain within an episode
    for (auto [b, e] : ds.episodes()) {
      for (std::size_t i = b + 1; i < e; ++i) {
        for (int k = 0; k < 4; ++k) CHECK(ds.observations[i * 4 + k] == ds.next_observations[(i - 1) * 4 + k]);
      }
    }
  }
  CHECK_THROWS_AS(generate_dataset(maze, Variant::Clean, 0, 1), ContractError);
}

TEST_CASE("clean_open5_success_rate") {
  auto res = generate_dataset(builtin_maze("toy-open5"), Variant::Clean, 100, 2024);
  CHECK(res.successes >= 95);
}

TEST_CASE("dataset_generation_is_deterministic") {
  const auto maze = builtin_maze("toy-medium");
  auto a = serialize_dataset(generate_dataset(maze, Variant::Noisy, 10, 77).dataset);
  auto b = serialize_dataset(generate_dataset(maze, Variant::Noisy, 10, 77).dataset);
  auto c = serialize_dataset(generate_dataset(maze, Variant::Noisy, 10, 78).dataset);
  CHECK(a == b);
  CHECK(a != c);

  auto path1 = temp_file("det1.dset"), path2 = temp_file("det2.dset");
  write_dataset(generate_dataset(maze, Variant::Biased, 5, 9).dataset, path1);
  write_dataset(generate_dataset(maze, Variant::Biased, 5, 9).dataset, path2);
  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("dataset_round_trip") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ds = random_dataset(seed);
    auto path = temp_file("rt.dset");
    write_dataset(ds, path);
    CHECK(read_dataset(path) == ds);
  }
  OfflineDataset empty;
  empty.metadata = {"toy-open5", "clean", 1, kGeneratorVersion, 0.0};
  auto path = temp_file("empty.dset");
  write_dataset(empty, path);
  auto back = read_dataset(path);
  CHECK(back == empty);
  CHECK(back.size() == 0);
}

TEST_CASE("dataset_format_errors") {
  auto ds = random_dataset(4);
  while (ds.size() < 5) ds = random_dataset(ds.metadata.seed + 100);
  auto bytes = serialize_dataset(ds);
  auto path = temp_file("bad.dset");
  auto dump = [&](std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(n));
  };

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{5}, std::size_t{40}, bytes.size() - 1,
                          bytes.size() - 13}) {
    dump(cut);
    CHECK_THROWS_AS(read_dataset(path), FormatError);
  }
  dump(bytes.size());
  CHECK_NOTHROW(read_dataset(path));

  bytes.push_back('x');
  dump(bytes.size());
  CHECK_THROWS_AS(read_dataset(path), FormatError);
  bytes.pop_back();

  bytes[0] = 'X';
  dump(bytes.size());
  CHECK_THROWS_AS(read_dataset(path), FormatError);

  // A truncated payload names the column it stopped in.
  bytes = serialize_dataset(ds);
  dump(bytes.size() - 1);
  try {
    read_dataset(path);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("episode_ends") != std::string::npos);
  }

  CHECK_THROWS_AS(read_dataset(temp_file("does_not_exist.dset")), IoError);

  OfflineDataset ragged = ds;
  ragged.actions.pop_back();
  CHECK_THROWS_AS(serialize_dataset(ragged), FormatError);
  OfflineDataset open = ds;
  open.episode_ends.back() = 0;
  CHECK_THROWS_AS(open.validate(), FormatError);
}

TEST_CASE("standardize_rewards") {
  SUBCASE("returns 10 and 0") {
    OfflineDataset ds;
    ds.rewards = {4.0f, 6.0f, 0.0f};
    ds.episode_ends = {0, 1, 1};
    ds.terminals = {0, 1, 1};
    ds.observations.assign(12, 0.0f);
    ds.next_observations.assign(12, 0.0f);
    ds.actions.assign(6, 0.0f);
    standardize_rewards(ds);
    CHECK(ds.rewards == std::vector<float>{0.4f, 0.6f, 0.0f});
  }
  SUBCASE("equal returns") {
    OfflineDataset ds;
    ds.rewards = {1.0f, 1.0f};
    ds.episode_ends = {1, 1};
    CHECK_THROWS_AS(standardize_rewards(ds), ContractError);
  }
  SUBCASE("random dataset has unit return range afterwards") {
    auto ds = generate_reacher_dataset(Variant::Noisy, 50, 3).dataset;
    standardize_rewards(ds);
    auto returns = ds.episode_returns();
    auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
    CHECK(*hi - *lo == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("environments") {
  auto maze = make_env("toy-medium");
  nn::Rng rng(1);
  auto obs = maze->reset(rng);
  CHECK(maze->obs_dim() == 4);
  CHECK(obs[2] == doctest::Approx(6.5 / 8.0));
  auto step = maze->step({0.0, 0.0});
  CHECK_FALSE(step.done);

  auto reacher = make_env("toy-reacher");
  obs = reacher->reset(rng);
  step = reacher->step({obs[0], obs[1]});
  CHECK(step.done);
  CHECK(step.success);
  CHECK(step.reward == doctest::Approx(0.0).epsilon(1e-6));
  CHECK_THROWS_AS(make_env("nope"), ContractError);

  auto res = generate_reacher_dataset(Variant::Clean, 40, 8);
  CHECK(res.successes == 40);
  CHECK(res.dataset.size() == 40);
}
