#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pbds/error.h"
#include "pbds/scenario.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitAbort = 3;
constexpr int kExitAssertion = 4;

struct Overrides {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
};

pbds::Scenario load(const std::string& path, const Overrides& o) {
  pbds::Scenario s = pbds::load_scenario(path);
  if (o.dt) s.integrator.dt = *o.dt;
  if (o.horizon) s.integrator.horizon = *o.horizon;
  if (o.seed) s.seed = *o.seed;
  pbds::validate(s.integrator);
  return s;
}

int cmd_run(const std::string& path, const std::string& out_dir,
            const std::optional<std::string>& engine_name, const Overrides& o) {
  const pbds::Scenario s = load(path, o);
  const pbds::Engine engine = engine_name ? pbds::parse_engine(*engine_name) : s.engine;
  const pbds::RunReport report = pbds::run_scenario(s, engine);
  std::filesystem::create_directories(out_dir);
  const std::string stem = s.name + "_" + pbds::to_string(engine);
  for (size_t i = 0; i < report.runs.size(); ++i) {
    std::ofstream csv(std::filesystem::path(out_dir) / (stem + "_run" + std::to_string(i) + ".csv"));
    pbds::write_csv(report.runs[i].trajectory, csv);
  }
  const std::string json = pbds::report_json(report);
  std::ofstream(std::filesystem::path(out_dir) / (stem + "_report.json")) << json << '\n';
  std::cout << json << '\n';
  if (report.aborted) return kExitAbort;
  return report.assertion_failures.empty() ? kExitOk : kExitAssertion;
}

int cmd_consistency(const std::string& path, const std::optional<std::string>& engine_name,
                    const Overrides& o) {
  const pbds::Scenario s = load(path, o);
  std::optional<pbds::Engine> engine;
  if (engine_name) engine = pbds::parse_engine(*engine_name);
  const pbds::ConsistencyReport r = pbds::consistency_test(s, engine);
  std::cout << pbds::consistency_json(r) << '\n';
  if (r.aborted) return kExitAbort;
  return r.passed() ? kExitOk : kExitAssertion;
}

int cmd_compare_gds(const std::string& path, const Overrides& o) {
  const pbds::Scenario s = load(path, o);
  const pbds::ConsistencyReport p = pbds::consistency_test(s, pbds::Engine::kPbds);
  const pbds::ConsistencyReport g = pbds::consistency_test(s, pbds::Engine::kGds);
  const double ratio = p.max_deviation > 0.0 ? g.max_deviation / p.max_deviation
                                             : std::numeric_limits<double>::infinity();
  nlohmann::json j;
  j["pbds"] = nlohmann::json::parse(pbds::consistency_json(p));
  j["gds"] = nlohmann::json::parse(pbds::consistency_json(g));
  j["ratio"] = std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json("inf");
  j["ratio_at_least_100"] = ratio >= 100.0;
  std::cout << j.dump(2) << '\n';
  if (p.aborted || g.aborted) return kExitAbort;
  return p.passed() && ratio >= 100.0 ? kExitOk : kExitAssertion;
}

int cmd_bench(const std::string& path, long iterations, const Overrides& o) {
  const pbds::Scenario s = load(path, o);
  std::cout << pbds::bench_json(pbds::bench(s, iterations, s.seed)) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pullback bundle dynamical systems: run, compare and benchmark scenarios"};
  app.require_subcommand(1);
  Overrides o;
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  auto* dt_opt = app.add_option("--dt", dt, "Override the integrator step")->check(CLI::PositiveNumber);
  auto* horizon_opt =
      app.add_option("--horizon", horizon, "Override the horizon")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Override the random-start seed");
  app.fallthrough();

  std::string scenario;
  std::string out_dir = "out";
  std::optional<std::string> engine;
  long iterations = 100000;

  auto* run = app.add_subcommand("run", "Integrate every initial state and write CSV + report");
  run->add_option("scenario", scenario, "Scenario JSON")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--engine", engine, "pbds, pbds_tree or gds");

  auto* cons = app.add_subcommand("consistency", "Compare trajectories across chart schemes");
  cons->add_option("scenario", scenario, "Scenario JSON")->required();
  cons->add_option("--engine", engine, "pbds, pbds_tree or gds");

  auto* cmp = app.add_subcommand("compare-gds", "Chart-scheme deviation of gds relative to pbds");
  cmp->add_option("scenario", scenario, "Scenario JSON")->required();

  auto* bench = app.add_subcommand("bench", "Time policy evaluations at random states");
  bench->add_option("scenario", scenario, "Scenario JSON")->required();
  bench->add_option("--iters", iterations, "Evaluations per engine")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; bad arguments share the schema code.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSchema;
  }
  if (*dt_opt) o.dt = dt;
  if (*horizon_opt) o.horizon = horizon;
  if (*seed_opt) o.seed = seed;

  try {
    if (*run) return cmd_run(scenario, out_dir, engine, o);
    if (*cons) return cmd_consistency(scenario, engine, o);
    if (*cmp) return cmd_compare_gds(scenario, o);
    if (*bench) return cmd_bench(scenario, iterations, o);
  } catch (const pbds::Error& e) {
    std::cerr << "error [" << pbds::to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.kind() == pbds::ErrorKind::kSchema ? kExitSchema : kExitAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAbort;
  }
  return kExitOk;
}
