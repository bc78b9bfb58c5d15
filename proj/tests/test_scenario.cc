#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "pbds/error.h"
#include "pbds/scenario.h"
#include "support.h"

using namespace pbds;
using namespace pbds::testing;
using nlohmann::json;

namespace {

std::string scenario_path(const std::string& name) { return std::string(PBDS_SCENARIO_DIR) + "/" + name; }

json short_sphere() {
  return json::parse(R"({
    "name": "short",
    "manifold": {"kind": "sphere2"},
    "tasks": [
      {"type": "attractor", "goal": [0.0, 0.6, -0.8]},
      {"type": "damping", "c": 4.0},
      {"type": "obstacle", "center": [0.6, 0.8, 0.0], "radius": 0.1}
    ],
    "initial": {"position": [0.8, 0.0, 0.6], "velocity": [0.0, 0.5, 0.0]},
    "random_starts": 2,
    "seed": 3,
    "integrator": {"dt": 0.01, "horizon": 2.0}
  })");
}

std::string schema_message(const json& j) {
  try {
    parse_scenario(j.dump());
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchema);
    return e.what();
  }
  FAIL("expected a schema error");
  return "";
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("parse a valid scenario") {
  const Scenario s = parse_scenario(short_sphere().dump());
  CHECK(s.name == "short");
  CHECK(s.manifold.dimension() == 2);
  CHECK(s.tasks.size() == 3);
  CHECK(s.tasks[2].barrier.a == 2.0);
  CHECK(std::isinf(s.tasks[2].barrier.beta));
  CHECK(s.integrator.dt == 0.01);
  CHECK(s.engine == Engine::kPbds);
  CHECK(initial_states(s).size() == 3);
  CHECK(build_tasks(s).size() == 3);
  CHECK(flatten(build_tree(s)).size() == 3);
}

TEST_CASE("schema errors name the offending field") {
  json j = short_sphere();
  j["bogus"] = 1;
  CHECK(contains(schema_message(j), "bogus"));

  j = short_sphere();
  j["tasks"][1]["gain"] = 2.0;
  CHECK(contains(schema_message(j), "$.tasks[1]"));

  j = short_sphere();
  j["tasks"][1]["c"] = -1.0;
  CHECK(contains(schema_message(j), "$.tasks[1]"));

  j = short_sphere();
  j["initial"]["position"] = {1.0, 1.0, 0.0};
  CHECK(contains(schema_message(j), "$.initial.position"));

  j = short_sphere();
  j["manifold"]["kind"] = "torus";
  CHECK(contains(schema_message(j), "$.manifold"));

  j = short_sphere();
  j["integrator"]["dt"] = 0.0;
  CHECK(contains(schema_message(j), "dt"));

  j = short_sphere();
  j["engine"] = "rmp";
  CHECK(contains(schema_message(j), "engine"));

  j = short_sphere();
  j.erase("tasks");
  CHECK(contains(schema_message(j), "tasks"));

  try {
    parse_scenario("{\"name\": ");
    FAIL("malformed JSON accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchema);
    CHECK(contains(e.what(), "malformed JSON"));
  }
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), Error);
}

TEST_CASE("engine names") {
  CHECK(parse_engine("pbds") == Engine::kPbds);
  CHECK(parse_engine("pbds_tree") == Engine::kPbdsTree);
  CHECK(parse_engine("gds") == Engine::kGds);
  CHECK(std::string(to_string(Engine::kPbdsTree)) == "pbds_tree");
  CHECK_THROWS_AS(parse_engine("flat"), Error);
}

TEST_CASE("consistency needs several charts") {
  json j = short_sphere();
  j["manifold"] = {{"kind", "euclidean"}, {"dim", 3}};
  j["tasks"] = json::array({json{{"type", "damping"}, {"c", 1.0}}});
  j["initial"]["position"] = {0.0, 0.0, 0.0};
  const Scenario s = parse_scenario(j.dump());
  try {
    consistency_test(s);
    FAIL("single-chart consistency accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchema);
  }
}

TEST_CASE("chart velocity recovers tangent vectors") {
  Rng rng(70);
  const Manifold s2 = Manifold::Sphere2();
  for (int i = 0; i < 50; ++i) {
    const ChartPoint p = random_sphere_point(rng, i % 2, 2.0);
    const Vector v = random_vector(rng, 2);
    const Vector ev = embedding_jacobian(s2, p) * v;
    CHECK((chart_velocity(s2, p, ev) - v).norm() < 1e-10 * std::max(1.0, v.norm()));
    const Vector normal = chart_to_embedding(s2, p).coords;
    CHECK(chart_velocity(s2, p, normal).norm() < 1e-10);
  }
}

TEST_CASE("sampled states avoid obstacles and the antipode") {
  const Scenario s = parse_scenario(short_sphere().dump());
  const auto states = sample_states(s, 200, 11, 0.7);
  REQUIRE(states.size() == 200);
  const Vector goal = s.tasks[0].goal;
  for (const auto& st : states) {
    const Vector e = chart_to_embedding(s.manifold, st.point).coords;
    CHECK((e - s.tasks[2].center).norm() - s.tasks[2].radius > 0.05);
    CHECK(std::acos(std::clamp(e.dot(-goal), -1.0, 1.0)) > 0.05);
    CHECK(embedded_speed(s.manifold, st) == doctest::Approx(0.7).epsilon(1e-9));
  }
  const auto again = sample_states(s, 200, 11, 0.7);
  for (size_t i = 0; i < states.size(); ++i) CHECK((again[i].point.coords - states[i].point.coords).norm() == 0.0);
}

TEST_CASE("runs are deterministic and engines agree") {
  const Scenario s = parse_scenario(short_sphere().dump());
  const RunReport a = run_scenario(s);
  const RunReport b = run_scenario(s);
  const RunReport tree = run_scenario(s, Engine::kPbdsTree);
  REQUIRE(a.runs.size() == 3);
  CHECK_FALSE(a.aborted);
  CHECK(tree.assertion_failures.empty());
  for (size_t i = 0; i < a.runs.size(); ++i) {
    std::ostringstream x, y;
    write_csv(a.runs[i].trajectory, x);
    write_csv(b.runs[i].trajectory, y);
    CHECK(x.str() == y.str());
    CHECK(trajectory_deviation(a.runs[i].trajectory, tree.runs[i].trajectory) < 1e-8);
  }
  const json r = json::parse(report_json(a));
  CHECK(r["runs"].size() == 3);
  CHECK(r["engine"] == "pbds");
  CHECK(r.contains("evals_per_second"));
}

TEST_CASE("bench reports") {
  const Scenario s = parse_scenario(short_sphere().dump());
  const BenchReport empty = bench(s, 0, 1);
  CHECK(empty.iterations == 0);
  CHECK(empty.flat.evals_per_second == 0.0);
  CHECK_NOTHROW(json::parse(bench_json(empty)));
  const BenchReport r = bench(s, 200, 1);
  CHECK(r.iterations == 200);
  CHECK(r.tasks == 3);
  CHECK(r.flat.evals_per_second > 0.0);
  CHECK(r.max_tree_flat_difference < 1e-10);
  CHECK_THROWS_AS(bench(s, -1, 1), Error);
}

TEST_CASE("bundled attractor scenario passes its assertions") {
  const Scenario s = load_scenario(scenario_path("sphere_attractor.json"));
  const RunReport r = run_scenario(s);
  CHECK(r.assertion_failures.empty());
  CHECK(r.converged);
  CHECK(r.final_goal_distance < 1e-3);
  const ConsistencyReport c = consistency_test(s);
  CHECK(c.passed());
  CHECK(c.schemes.size() == 3);
}

TEST_CASE("bundled obstacle scenario passes its assertions") {
  const Scenario s = load_scenario(scenario_path("sphere_obstacles.json"));
  const RunReport r = run_scenario(s);
  for (const auto& f : r.assertion_failures) MESSAGE(f);
  CHECK(r.assertion_failures.empty());
  REQUIRE(r.min_obstacle_distance.has_value());
  CHECK(*r.min_obstacle_distance > 0.0);
  CHECK(r.runs.size() == 4);
}
