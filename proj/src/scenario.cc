#include "pbds/scenario.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pbds/error.h"

namespace pbds {

using json = nlohmann::json;

const char* to_string(Engine engine) {
  switch (engine) {
    case Engine::kPbds: return "pbds";
    case Engine::kPbdsTree: return "pbds_tree";
    case Engine::kGds: return "gds";
  }
  return "unknown";
}

Engine parse_engine(const std::string& name) {
  if (name == "pbds") return Engine::kPbds;
  if (name == "pbds_tree") return Engine::kPbdsTree;
  if (name == "gds") return Engine::kGds;
  throw Error(ErrorKind::kSchema, "engine: expected pbds, pbds_tree or gds, got '" + name + "'");
}

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::kSchema, path + ": " + msg);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      schema_error(path + "." + key, "unknown field");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) schema_error(path + "." + key, "required field is missing");
  return obj.at(key);
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

Vector as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) schema_error(path, "expected a non-empty array of numbers");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Manifold parse_manifold(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  const json& kind = require(j, "kind", path);
  if (!kind.is_string()) schema_error(path + ".kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "sphere2") {
    check_keys(j, {"kind"}, path);
    return Manifold::Sphere2();
  }
  if (k == "circle") {
    check_keys(j, {"kind"}, path);
    return Manifold::Circle();
  }
  if (k == "positive_reals") {
    check_keys(j, {"kind"}, path);
    return Manifold::PositiveReals();
  }
  if (k == "euclidean") {
    check_keys(j, {"kind", "dim"}, path);
    const json& dim = require(j, "dim", path);
    if (!dim.is_number_integer() || dim.get<int>() < 1) {
      schema_error(path + ".dim", "expected an integer >= 1");
    }
    return Manifold::Euclidean(dim.get<int>());
  }
  if (k == "product") {
    check_keys(j, {"kind", "factors"}, path);
    const json& fs = require(j, "factors", path);
    if (!fs.is_array() || fs.empty()) schema_error(path + ".factors", "expected a non-empty array");
    std::vector<Manifold> factors;
    for (size_t i = 0; i < fs.size(); ++i) {
      factors.push_back(parse_manifold(fs[i], path + ".factors[" + std::to_string(i) + "]"));
    }
    return Manifold::Product(factors);
  }
  schema_error(path + ".kind", "unknown manifold kind '" + k + "'");
}

TaskConfig parse_task(const json& j, const std::string& path, const Manifold& m) {
  if (!j.is_object()) schema_error(path, "expected an object");
  const json& type = require(j, "type", path);
  if (!type.is_string()) schema_error(path + ".type", "expected a string");
  const std::string t = type.get<std::string>();
  TaskConfig c;
  const auto d = static_cast<Eigen::Index>(m.embedding_dimension());
  if (t == "attractor") {
    check_keys(j, {"type", "goal"}, path);
    c.type = TaskConfig::Type::kAttractor;
    c.goal = as_vector(require(j, "goal", path), path + ".goal");
    if (c.goal.size() != d) schema_error(path + ".goal", "length must equal the embedding dimension");
  } else if (t == "damping") {
    check_keys(j, {"type", "c"}, path);
    c.type = TaskConfig::Type::kDamping;
    c.c = as_number(require(j, "c", path), path + ".c");
    if (!(c.c > 0.0)) schema_error(path + ".c", "must be > 0");
  } else if (t == "obstacle") {
    check_keys(j, {"type", "center", "radius", "a", "b", "beta", "smooth", "eps"}, path);
    c.type = TaskConfig::Type::kObstacle;
    c.center = as_vector(require(j, "center", path), path + ".center");
    if (c.center.size() != d) {
      schema_error(path + ".center", "length must equal the embedding dimension");
    }
    c.radius = as_number(require(j, "radius", path), path + ".radius");
    if (!(c.radius >= 0.0)) schema_error(path + ".radius", "must be >= 0");
    if (j.contains("a")) c.barrier.a = as_number(j["a"], path + ".a");
    if (j.contains("b")) c.barrier.b = as_number(j["b"], path + ".b");
    if (j.contains("beta") && !j["beta"].is_null()) c.barrier.beta = as_number(j["beta"], path + ".beta");
    if (j.contains("smooth")) {
      if (!j["smooth"].is_boolean()) schema_error(path + ".smooth", "expected a boolean");
      c.barrier.smooth = j["smooth"].get<bool>();
    }
    if (j.contains("eps")) c.barrier.eps = as_number(j["eps"], path + ".eps");
    try {
      validate(c.barrier);
    } catch (const Error& e) {
      schema_error(path, e.what());
    }
  } else {
    schema_error(path + ".type", "unknown task type '" + t + "'");
  }
  return c;
}

ChartScheme parse_scheme(const json& j, const std::string& path, const Manifold& m) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "hemisphere") return ChartScheme::Hemisphere();
    if (s == "fixed_south") return ChartScheme::Fixed(kSouthChart);
    if (s == "fixed_north") {
      if (m.chart_count() < 2) schema_error(path, "fixed_north needs a two-chart manifold");
      return ChartScheme::Fixed(kNorthChart);
    }
  } else if (j.is_object()) {
    check_keys(j, {"fixed"}, path);
    const json& f = require(j, "fixed", path);
    if (!f.is_number_integer() || f.get<int>() < 0 || f.get<int>() >= m.chart_count()) {
      schema_error(path + ".fixed", "expected a chart id of the manifold");
    }
    return ChartScheme::Fixed(f.get<int>());
  }
  schema_error(path, "expected hemisphere, fixed_south, fixed_north or {\"fixed\": id}");
}

IntegratorConfig parse_integrator(const json& j, const std::string& path, const Manifold& m) {
  check_keys(j, {"dt", "horizon", "method", "chart_scheme", "velocity_stop_eps", "hysteresis"}, path);
  IntegratorConfig cfg;
  if (j.contains("dt")) cfg.dt = as_number(j["dt"], path + ".dt");
  if (j.contains("horizon")) cfg.horizon = as_number(j["horizon"], path + ".horizon");
  if (j.contains("method")) {
    const std::string method = j["method"].is_string() ? j["method"].get<std::string>() : "";
    if (method == "rk4") cfg.method = IntegrationMethod::kRk4;
    else if (method == "euler") cfg.method = IntegrationMethod::kEuler;
    else schema_error(path + ".method", "expected rk4 or euler");
  }
  if (j.contains("chart_scheme")) cfg.scheme = parse_scheme(j["chart_scheme"], path + ".chart_scheme", m);
  if (j.contains("velocity_stop_eps")) {
    cfg.velocity_stop_eps = as_number(j["velocity_stop_eps"], path + ".velocity_stop_eps");
  }
  if (j.contains("hysteresis")) cfg.hysteresis = as_number(j["hysteresis"], path + ".hysteresis");
  try {
    validate(cfg);
  } catch (const Error& e) {
    schema_error(path, e.what());
  }
  return cfg;
}

ScenarioAssertions parse_assertions(const json& j, const std::string& path) {
  check_keys(j, {"final_goal_distance_below", "min_obstacle_distance_above",
                 "max_lyapunov_violations", "consistency_deviation_below", "converged"},
             path);
  ScenarioAssertions a;
  if (j.contains("final_goal_distance_below")) {
    a.final_goal_distance_below =
        as_number(j["final_goal_distance_below"], path + ".final_goal_distance_below");
  }
  if (j.contains("min_obstacle_distance_above")) {
    a.min_obstacle_distance_above =
        as_number(j["min_obstacle_distance_above"], path + ".min_obstacle_distance_above");
  }
  if (j.contains("max_lyapunov_violations")) {
    if (!j["max_lyapunov_violations"].is_number_integer()) {
      schema_error(path + ".max_lyapunov_violations", "expected an integer");
    }
    a.max_lyapunov_violations = j["max_lyapunov_violations"].get<int>();
  }
  if (j.contains("consistency_deviation_below")) {
    a.consistency_deviation_below =
        as_number(j["consistency_deviation_below"], path + ".consistency_deviation_below");
  }
  if (j.contains("converged")) {
    if (!j["converged"].is_boolean()) schema_error(path + ".converged", "expected a boolean");
    a.converged = j["converged"].get<bool>();
  }
  return a;
}

bool inside_any_obstacle(const Scenario& s, const Vector& e, double margin) {
  for (const auto& t : s.tasks) {
    if (t.type != TaskConfig::Type::kObstacle) continue;
    if ((e - t.center).norm() - t.radius < margin) return true;
  }
  return false;
}

bool near_attractor_antipode(const Scenario& s, const Vector& e, double margin) {
  if (!s.manifold.is_sphere()) return false;
  for (const auto& t : s.tasks) {
    if (t.type != TaskConfig::Type::kAttractor) continue;
    if (sphere_angle(e, t.goal.normalized()).value > M_PI - margin) return true;
  }
  return false;
}

Vector random_embedded_point(const Manifold& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  switch (m.kind()) {
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2: {
      Vector e(m.embedding_dimension());
      do {
        for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
      } while (e.norm() < 1e-6);
      return e.normalized();
    }
    case ManifoldKind::kEuclidean: {
      Vector e(m.dimension());
      for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
      return e;
    }
    case ManifoldKind::kPositiveReals:
      return Vector::Constant(1, std::exp(normal(rng)));
    case ManifoldKind::kProduct: {
      Vector e(m.embedding_dimension());
      const auto offs = factor_embedding_offsets(m);
      for (size_t i = 0; i < m.factors().size(); ++i) {
        const auto& f = m.factors()[i];
        e.segment(offs[i], f.embedding_dimension()) = random_embedded_point(f, rng);
      }
      return e;
    }
  }
  return {};
}

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const size_t idx = static_cast<size_t>(std::ceil(q * static_cast<double>(xs.size()))) - 1;
  return xs[std::min(idx, xs.size() - 1)];
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

TimingStats stats_from(const std::vector<double>& us) {
  TimingStats t;
  if (us.empty()) return t;
  t.mean_us = mean(us);
  t.p99_us = percentile(us, 0.99);
  t.evals_per_second = t.mean_us > 0.0 ? 1e6 / t.mean_us : 0.0;
  return t;
}

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed JSON: ") + e.what());
  }
  const std::string root = "$";
  check_keys(j, {"name", "manifold", "tasks", "initial", "random_starts", "seed", "integrator",
                 "engine", "assertions", "description"},
             root);
  Scenario s(parse_manifold(require(j, "manifold", root), root + ".manifold"));
  if (j.contains("name")) {
    if (!j["name"].is_string()) schema_error(root + ".name", "expected a string");
    s.name = j["name"].get<std::string>();
  }
  const json& tasks = require(j, "tasks", root);
  if (!tasks.is_array() || tasks.empty()) schema_error(root + ".tasks", "expected a non-empty array");
  for (size_t i = 0; i < tasks.size(); ++i) {
    s.tasks.push_back(parse_task(tasks[i], root + ".tasks[" + std::to_string(i) + "]", s.manifold));
  }

  const std::string ip = root + ".initial";
  const json& initial = require(j, "initial", root);
  check_keys(initial, {"position", "velocity", "velocities"}, ip);
  s.initial_position = as_vector(require(initial, "position", ip), ip + ".position");
  if (s.initial_position.size() != s.manifold.embedding_dimension()) {
    schema_error(ip + ".position", "length must equal the embedding dimension");
  }
  try {
    embedding_to_chart(s.manifold, {s.initial_position});
  } catch (const Error& e) {
    schema_error(ip + ".position", e.what());
  }
  if (initial.contains("velocity") && initial.contains("velocities")) {
    schema_error(ip, "give either velocity or velocities, not both");
  }
  if (initial.contains("velocity")) {
    s.initial_velocities.push_back(as_vector(initial["velocity"], ip + ".velocity"));
  } else if (initial.contains("velocities")) {
    const json& vs = initial["velocities"];
    if (!vs.is_array() || vs.empty()) schema_error(ip + ".velocities", "expected a non-empty array");
    for (size_t i = 0; i < vs.size(); ++i) {
      s.initial_velocities.push_back(
          as_vector(vs[i], ip + ".velocities[" + std::to_string(i) + "]"));
    }
  } else {
    s.initial_velocities.push_back(Vector::Zero(s.manifold.embedding_dimension()));
  }
  for (const auto& v : s.initial_velocities) {
    if (v.size() != s.manifold.embedding_dimension()) {
      schema_error(ip, "velocity length must equal the embedding dimension");
    }
  }

  if (j.contains("random_starts")) {
    if (!j["random_starts"].is_number_integer() || j["random_starts"].get<int>() < 0) {
      schema_error(root + ".random_starts", "expected an integer >= 0");
    }
    s.random_starts = j["random_starts"].get<int>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) schema_error(root + ".seed", "expected an integer >= 0");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("integrator")) {
    s.integrator = parse_integrator(j["integrator"], root + ".integrator", s.manifold);
  }
  if (j.contains("engine")) {
    if (!j["engine"].is_string()) schema_error(root + ".engine", "expected a string");
    try {
      s.engine = parse_engine(j["engine"].get<std::string>());
    } catch (const Error& e) {
      schema_error(root + ".engine", e.what());
    }
  }
  if (j.contains("assertions")) s.assertions = parse_assertions(j["assertions"], root + ".assertions");

  // Surface constructor-level problems (unsupported manifold for a task,
  // goal off the manifold) as schema errors.
  try {
    build_tasks(s);
  } catch (const Error& e) {
    schema_error(root + ".tasks", e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kSchema, "cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::vector<TaskSpec> build_tasks(const Scenario& s) {
  std::vector<TaskSpec> out;
  for (const auto& t : s.tasks) {
    switch (t.type) {
      case TaskConfig::Type::kAttractor:
        out.push_back(make_attractor_task(s.manifold, EmbeddedPoint{t.goal}));
        break;
      case TaskConfig::Type::kDamping:
        out.push_back(make_damping_task(s.manifold, t.c));
        break;
      case TaskConfig::Type::kObstacle:
        out.push_back(make_obstacle_task(s.manifold, t.center, t.radius, t.barrier));
        break;
    }
  }
  return out;
}

std::vector<GdsTask> build_gds_tasks(const Scenario& s) {
  std::vector<GdsTask> out;
  const auto flat = build_tasks(s);
  for (size_t i = 0; i < s.tasks.size(); ++i) {
    if (s.tasks[i].type == TaskConfig::Type::kDamping) {
      out.push_back(gds_damping(s.manifold, s.tasks[i].c));
    } else {
      out.push_back(gds_from_pbds(flat[i]));
    }
  }
  return out;
}

TaskTree build_tree(const Scenario& s) {
  TaskTree tree{s.manifold, {}};
  std::vector<TreeNode> ambient;
  for (const auto& t : s.tasks) {
    switch (t.type) {
      case TaskConfig::Type::kDamping:
        tree.children.push_back(TreeNode::Leaf(make_damping_task(s.manifold, t.c)));
        break;
      case TaskConfig::Type::kAttractor: {
        const TaskMap dist = s.manifold.is_sphere() ? sphere_angle_map(t.goal.normalized())
                                                    : euclidean_distance_map(t.goal);
        ambient.push_back(TreeNode::Leaf(make_attractor_task(dist)));
        break;
      }
      case TaskConfig::Type::kObstacle: {
        TaskSpec leaf = make_constraint_task(ball_clearance_map(t.center, t.radius), t.barrier);
        leaf.name = "obstacle";
        ambient.push_back(TreeNode::Leaf(std::move(leaf)));
        break;
      }
    }
  }
  if (!ambient.empty()) {
    tree.children.push_back(TreeNode::Intermediate(embedding_map(s.manifold), std::move(ambient)));
  }
  return tree;
}

TaskTree build_single_level_tree(const Scenario& s) {
  TaskTree tree{s.manifold, {}};
  for (auto& t : build_tasks(s)) tree.children.push_back(TreeNode::Leaf(std::move(t)));
  return tree;
}

PolicyFn make_policy(const Scenario& s, Engine engine) {
  switch (engine) {
    case Engine::kPbds: {
      auto tasks = std::make_shared<const std::vector<TaskSpec>>(build_tasks(s));
      return [tasks](const TangentState& x) { return combine(*tasks, x.point, x.velocity); };
    }
    case Engine::kPbdsTree: {
      auto tree = std::make_shared<const TaskTree>(build_tree(s));
      return [tree](const TangentState& x) { return evaluate_tree(*tree, x.point, x.velocity); };
    }
    case Engine::kGds: {
      auto tasks = std::make_shared<const std::vector<GdsTask>>(build_gds_tasks(s));
      return [tasks](const TangentState& x) { return gds_combine(*tasks, x.point, x.velocity); };
    }
  }
  throw Error(ErrorKind::kSchema, "unknown engine");
}

Vector chart_velocity(const Manifold& m, const ChartPoint& p, const Vector& embedded_velocity) {
  const Matrix j = embedding_jacobian(m, p);
  return (j.transpose() * j).ldlt().solve(j.transpose() * embedded_velocity);
}

std::vector<TangentState> sample_states(const Scenario& s, int count, std::uint64_t seed,
                                        double speed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<TangentState> out;
  const int d = s.manifold.embedding_dimension();
  while (static_cast<int>(out.size()) < count) {
    const Vector e = random_embedded_point(s.manifold, rng);
    if (inside_any_obstacle(s, e, 0.05) || near_attractor_antipode(s, e, 0.05)) continue;
    const ChartPoint p = embedding_to_chart(s.manifold, {e});
    Vector ev(d);
    for (int i = 0; i < d; ++i) ev(i) = normal(rng);
    Vector v = chart_velocity(s.manifold, p, ev);
    const double sp = embedded_speed(s.manifold, {p, v});
    v = sp > 0.0 ? Vector(v * (speed / sp)) : Vector(v);
    out.push_back({p, v});
  }
  return out;
}

std::vector<TangentState> initial_states(const Scenario& s) {
  std::vector<TangentState> out;
  const ChartPoint p = embedding_to_chart(s.manifold, {s.initial_position});
  for (const auto& v : s.initial_velocities) {
    out.push_back({p, chart_velocity(s.manifold, p, v)});
  }
  for (auto& x : sample_states(s, s.random_starts, s.seed, 0.0)) out.push_back(std::move(x));
  return out;
}

RunReport run_scenario(const Scenario& s, std::optional<Engine> engine_override) {
  const Engine engine = engine_override.value_or(s.engine);
  RunReport report;
  report.scenario = s.name;
  report.engine = engine;
  const auto tasks = build_tasks(s);
  const auto states = initial_states(s);
  const int n = static_cast<int>(states.size());
  std::vector<std::optional<RunResult>> results(n);
  std::vector<std::vector<double>> eval_times(n);
  std::vector<std::string> failures(n);
  std::vector<std::exception_ptr> errors(n);

#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      const PolicyFn policy = make_policy(s, engine);
      if (engine == Engine::kPbdsTree) {
        const Vector a_tree = policy(states[i]).acceleration;
        const Vector a_flat = combine(tasks, states[i].point, states[i].velocity).acceleration;
        const double diff = (a_tree - a_flat).norm();
        if (diff > 1e-10 * std::max(1.0, a_flat.norm())) {
          std::ostringstream os;
          os << "run " << i << ": tree and flat policies disagree by " << diff;
          failures[i] = os.str();
          continue;
        }
      }
      auto& times = eval_times[i];
      times.reserve(static_cast<size_t>(4 * s.integrator.horizon / s.integrator.dt) + 8);
      const PolicyFn timed = [&policy, &times](const TangentState& x) {
        const auto start = Clock::now();
        PolicyOutput out = policy(x);
        times.push_back(micros_since(start));
        return out;
      };
      RunResult r(integrate(s.manifold, timed, tasks, states[i], s.integrator));
      r.convergence = check_convergence(r.trajectory, tasks, 0.1, s.integrator.velocity_stop_eps);
      const TangentState& last = r.trajectory.states.back();
      for (const auto& t : tasks) {
        if (t.role == TaskRole::kAttractor) {
          r.final_goal_distance =
              std::max(r.final_goal_distance, t.map.value(last.point).coords(0));
        }
      }
      for (const auto& t : tasks) {
        if (t.role != TaskRole::kConstraint) continue;
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& st : r.trajectory.states) {
          lowest = std::min(lowest, t.map.value(st.point).coords(0));
        }
        if (r.trajectory.status == TrajectoryStatus::kCollision) lowest = std::min(lowest, 0.0);
        r.min_obstacle_distance.push_back(lowest);
      }
      r.policy_evaluations = static_cast<long>(times.size());
      r.mean_eval_us = mean(times);
      r.p99_eval_us = percentile(times, 0.99);
      results[i].emplace(std::move(r));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> all_times;
  report.converged = true;
  for (int i = 0; i < n; ++i) {
    if (!failures[i].empty()) {
      report.assertion_failures.push_back(failures[i]);
      report.converged = false;
      continue;
    }
    RunResult& r = *results[i];
    report.final_goal_distance = std::max(report.final_goal_distance, r.final_goal_distance);
    for (double d : r.min_obstacle_distance) {
      report.min_obstacle_distance = std::min(report.min_obstacle_distance.value_or(d), d);
    }
    report.lyapunov_violations += r.convergence.lyapunov_violations;
    report.converged = report.converged && r.convergence.converged;
    report.aborted = report.aborted || !r.trajectory.completed();
    all_times.insert(all_times.end(), eval_times[i].begin(), eval_times[i].end());
    report.runs.push_back(std::move(r));
  }
  const TimingStats timing = stats_from(all_times);
  report.evals_per_second = timing.evals_per_second;
  report.mean_eval_us = timing.mean_us;
  report.p99_eval_us = timing.p99_us;

  const ScenarioAssertions& a = s.assertions;
  std::ostringstream os;
  if (a.final_goal_distance_below && !(report.final_goal_distance < *a.final_goal_distance_below)) {
    os.str("");
    os << "final goal distance " << report.final_goal_distance << " is not below "
       << *a.final_goal_distance_below;
    report.assertion_failures.push_back(os.str());
  }
  if (a.min_obstacle_distance_above && report.min_obstacle_distance &&
      !(*report.min_obstacle_distance > *a.min_obstacle_distance_above)) {
    os.str("");
    os << "min obstacle distance " << *report.min_obstacle_distance << " is not above "
       << *a.min_obstacle_distance_above;
    report.assertion_failures.push_back(os.str());
  }
  if (a.max_lyapunov_violations && report.lyapunov_violations > *a.max_lyapunov_violations) {
    os.str("");
    os << report.lyapunov_violations << " Lyapunov increases exceed the allowed "
       << *a.max_lyapunov_violations;
    report.assertion_failures.push_back(os.str());
  }
  if (a.converged && !report.converged) report.assertion_failures.push_back("not all runs converged");
  return report;
}

std::string report_json(const RunReport& r) {
  json j;
  j["scenario"] = r.scenario;
  j["engine"] = to_string(r.engine);
  j["final_goal_distance"] = r.final_goal_distance;
  j["min_obstacle_distance"] = r.min_obstacle_distance ? json(*r.min_obstacle_distance) : json(nullptr);
  j["lyapunov_violations"] = r.lyapunov_violations;
  j["evals_per_second"] = r.evals_per_second;
  j["mean_eval_us"] = r.mean_eval_us;
  j["p99_eval_us"] = r.p99_eval_us;
  j["converged"] = r.converged;
  j["aborted"] = r.aborted;
  j["assertion_failures"] = r.assertion_failures;
  json runs = json::array();
  for (const auto& run : r.runs) {
    json x;
    x["status"] = to_string(run.trajectory.status);
    if (!run.trajectory.message.empty()) x["message"] = run.trajectory.message;
    x["steps"] = run.trajectory.size();
    x["chart_switches"] = run.trajectory.chart_switches;
    x["final_goal_distance"] = run.final_goal_distance;
    x["min_obstacle_distance"] = run.min_obstacle_distance;
    x["converged"] = run.convergence.converged;
    x["max_tail_speed"] = run.convergence.max_tail_speed;
    x["max_tail_gradient"] = run.convergence.max_tail_gradient;
    x["lyapunov_violations"] = run.convergence.lyapunov_violations;
    x["non_strict_decreases"] = run.convergence.non_strict_decreases;
    x["max_lyapunov_increase"] = run.convergence.max_lyapunov_increase;
    runs.push_back(x);
  }
  j["runs"] = runs;
  return j.dump(2);
}

ConsistencyReport consistency_test(const Scenario& s, std::optional<Engine> engine_override) {
  if (s.manifold.chart_count() < 2) {
    throw Error(ErrorKind::kSchema,
                "consistency test needs a multi-chart manifold, got " + s.manifold.describe());
  }
  ConsistencyReport report;
  report.engine = engine_override.value_or(s.engine);
  if (report.engine != Engine::kGds) {
    report.bound = s.assertions.consistency_deviation_below.value_or(1e-6);
  }
  const std::vector<ChartScheme> schemes = {ChartScheme::Fixed(0),
                                            ChartScheme::Fixed(s.manifold.chart_count() - 1),
                                            ChartScheme::Hemisphere()};
  const auto tasks = build_tasks(s);
  const TangentState start = initial_states(s).front();
  const int n = static_cast<int>(schemes.size());
  std::vector<std::optional<Trajectory>> trajs(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      IntegratorConfig cfg = s.integrator;
      cfg.scheme = schemes[i];
      trajs[i].emplace(integrate(s.manifold, make_policy(s, report.engine), tasks, start, cfg));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.deviations = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    report.schemes.push_back(schemes[i].describe());
    if (!trajs[i]->completed()) {
      report.aborted = true;
      report.message += report.schemes.back() + ": " + trajs[i]->message + "; ";
    }
  }
  if (report.aborted) return report;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double d = trajectory_deviation(*trajs[i], *trajs[k]);
      report.deviations(i, k) = report.deviations(k, i) = d;
      report.max_deviation = std::max(report.max_deviation, d);
    }
  }
  return report;
}

std::string consistency_json(const ConsistencyReport& r) {
  json j;
  j["engine"] = to_string(r.engine);
  j["schemes"] = r.schemes;
  json pairs = json::array();
  for (size_t i = 0; i < r.schemes.size(); ++i) {
    for (size_t k = i + 1; k < r.schemes.size(); ++k) {
      if (r.deviations.size() == 0) break;
      pairs.push_back({{"a", r.schemes[i]},
                       {"b", r.schemes[k]},
                       {"deviation", r.deviations(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(k))}});
    }
  }
  j["pairs"] = pairs;
  j["max_deviation"] = r.max_deviation;
  j["bound"] = r.bound ? json(*r.bound) : json(nullptr);
  j["aborted"] = r.aborted;
  if (!r.message.empty()) j["message"] = r.message;
  j["passed"] = r.passed();
  return j.dump(2);
}

BenchReport bench(const Scenario& s, long iterations, std::uint64_t seed) {
  if (iterations < 0) throw Error(ErrorKind::kSchema, "iterations must be >= 0");
  BenchReport r;
  r.iterations = iterations;
  const auto tasks = build_tasks(s);
  r.tasks = static_cast<int>(tasks.size());
  if (iterations == 0) return r;
  const int distinct = static_cast<int>(std::min<long>(iterations, 1024));
  const auto states = sample_states(s, distinct, seed);
  const TaskTree tree = build_tree(s);
  const TaskTree single = build_single_level_tree(s);

  auto time_loop = [&](auto&& fn) {
    std::vector<double> us;
    us.reserve(iterations);
    for (long i = 0; i < iterations; ++i) {
      const TangentState& x = states[i % distinct];
      const auto start = Clock::now();
      fn(x);
      us.push_back(micros_since(start));
    }
    return stats_from(us);
  };
  double sink = 0.0;
  r.flat = time_loop([&](const TangentState& x) {
    sink += combine(tasks, x.point, x.velocity).acceleration(0);
  });
  r.flat_parallel = time_loop([&](const TangentState& x) {
    sink += combine_parallel(tasks, x.point, x.velocity).acceleration(0);
  });
  r.tree = time_loop([&](const TangentState& x) {
    sink += evaluate_tree(tree, x.point, x.velocity).acceleration(0);
  });
  r.tree_single_level = time_loop([&](const TangentState& x) {
    sink += evaluate_tree(single, x.point, x.velocity).acceleration(0);
  });
  for (const auto& x : states) {
    const Vector a = combine(tasks, x.point, x.velocity).acceleration;
    const Vector b = evaluate_tree(tree, x.point, x.velocity).acceleration;
    r.max_tree_flat_difference =
        std::max(r.max_tree_flat_difference, (a - b).norm() / std::max(1.0, a.norm()));
  }
  if (!std::isfinite(sink)) r.max_tree_flat_difference = std::numeric_limits<double>::infinity();
  return r;
}

std::string bench_json(const BenchReport& r) {
  auto t = [](const TimingStats& s) {
    return json{{"evals_per_second", s.evals_per_second}, {"mean_us", s.mean_us}, {"p99_us", s.p99_us}};
  };
  json j;
  j["iterations"] = r.iterations;
  j["tasks"] = r.tasks;
  j["flat"] = t(r.flat);
  j["flat_parallel"] = t(r.flat_parallel);
  j["tree"] = t(r.tree);
  j["tree_single_level"] = t(r.tree_single_level);
  j["evals_per_second"] = r.flat.evals_per_second;
  j["max_tree_flat_difference"] = r.max_tree_flat_difference;
  return j.dump(2);
}

}  // namespace pbds
