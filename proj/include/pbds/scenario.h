#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pbds/gds.h"
#include "pbds/simulator.h"
#include "pbds/tree.h"

namespace pbds {

enum class Engine { kPbds, kPbdsTree, kGds };

const char* to_string(Engine engine);
Engine parse_engine(const std::string& name);

struct TaskConfig {
  enum class Type { kAttractor, kDamping, kObstacle };
  Type type = Type::kDamping;
  Vector goal;            // attractor, embedded coordinates
  double c = 4.0;         // damping
  Vector center;          // obstacle, embedded coordinates
  double radius = 0.0;    // obstacle
  BarrierParams barrier;  // obstacle
};

struct ScenarioAssertions {
  std::optional<double> final_goal_distance_below;
  std::optional<double> min_obstacle_distance_above;
  std::optional<int> max_lyapunov_violations;
  std::optional<double> consistency_deviation_below;
  bool converged = false;
};

struct Scenario {
  explicit Scenario(Manifold m) : manifold(std::move(m)) {}

  std::string name = "scenario";
  Manifold manifold;
  std::vector<TaskConfig> tasks;
  Vector initial_position;                // embedded
  std::vector<Vector> initial_velocities; // embedded, at least one
  int random_starts = 0;
  std::uint64_t seed = 0;
  IntegratorConfig integrator;
  Engine engine = Engine::kPbds;
  ScenarioAssertions assertions;
};

// Throws Error(kSchema) naming the offending field or JSON position.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

std::vector<TaskSpec> build_tasks(const Scenario& s);
std::vector<GdsTask> build_gds_tasks(const Scenario& s);

// Root: damping leaf plus one intermediate embedding node carrying the
// attractor and obstacle leaves in ambient coordinates.
TaskTree build_tree(const Scenario& s);

// All flat tasks as leaves directly under the root.
TaskTree build_single_level_tree(const Scenario& s);

PolicyFn make_policy(const Scenario& s, Engine engine);

// Explicit initial velocities first, then seeded random starts at rest.
std::vector<TangentState> initial_states(const Scenario& s);

// Embedded velocity projected onto the tangent space in p's chart.
Vector chart_velocity(const Manifold& m, const ChartPoint& p, const Vector& embedded_velocity);

struct RunResult {
  explicit RunResult(Trajectory t) : trajectory(std::move(t)) {}

  Trajectory trajectory;
  ConvergenceReport convergence;
  double final_goal_distance = 0.0;
  std::vector<double> min_obstacle_distance;
  long policy_evaluations = 0;
  double mean_eval_us = 0.0;
  double p99_eval_us = 0.0;
};

struct RunReport {
  std::string scenario;
  Engine engine = Engine::kPbds;
  std::vector<RunResult> runs;
  double final_goal_distance = 0.0;                 // worst over runs
  std::optional<double> min_obstacle_distance;      // over runs and obstacles
  int lyapunov_violations = 0;
  double evals_per_second = 0.0;
  double mean_eval_us = 0.0;
  double p99_eval_us = 0.0;
  bool converged = false;
  bool aborted = false;
  std::vector<std::string> assertion_failures;
};

// pbds_tree checks tree/flat agreement at each initial state before
// integrating; a mismatch is an assertion failure.
RunReport run_scenario(const Scenario& s, std::optional<Engine> engine = std::nullopt);

std::string report_json(const RunReport& r);

struct ConsistencyReport {
  Engine engine = Engine::kPbds;
  std::vector<std::string> schemes;
  Matrix deviations;                 // pairwise, schemes x schemes
  double max_deviation = 0.0;
  bool aborted = false;
  std::string message;
  std::optional<double> bound;       // asserted for pbds engines only
  bool passed() const { return !aborted && (!bound || max_deviation < *bound); }
};

// Runs the first initial state under fixed-first, fixed-last and hemisphere
// chart schemes. Throws Error(kSchema) on single-chart manifolds.
ConsistencyReport consistency_test(const Scenario& s, std::optional<Engine> engine = std::nullopt);

std::string consistency_json(const ConsistencyReport& r);

struct TimingStats {
  double evals_per_second = 0.0;
  double mean_us = 0.0;
  double p99_us = 0.0;
};

struct BenchReport {
  long iterations = 0;
  int tasks = 0;
  TimingStats flat;
  TimingStats flat_parallel;
  TimingStats tree;
  TimingStats tree_single_level;
  double max_tree_flat_difference = 0.0;
};

// Policy-only timing at seeded random states.
BenchReport bench(const Scenario& s, long iterations, std::uint64_t seed);

std::string bench_json(const BenchReport& r);

// Random reachable states: outside every obstacle with a margin and away
// from the attractor antipode.
std::vector<TangentState> sample_states(const Scenario& s, int count, std::uint64_t seed,
                                        double speed = 1.0);

}  // namespace pbds
