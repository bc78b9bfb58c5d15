#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pbds/policy.h"

namespace pbds {

enum class IntegrationMethod { kRk4, kEuler };

struct IntegratorConfig {
  double dt = 1e-3;
  double horizon = 20.0;
  IntegrationMethod method = IntegrationMethod::kRk4;
  ChartScheme scheme = ChartScheme::Hemisphere();
  double velocity_stop_eps = 1e-4;
  // Band around the equator inside which the hemisphere scheme keeps the
  // current chart.
  double hysteresis = 0.01;
};

void validate(const IntegratorConfig& cfg);

using PolicyFn = std::function<PolicyOutput(const TangentState&)>;

enum class TrajectoryStatus { kCompleted, kCollision, kNonFinite, kSingular, kOutOfDomain };

const char* to_string(TrajectoryStatus status);

struct StepDiagnostics {
  double condition_number = 1.0;
  int active_tasks = 0;
};

struct Trajectory {
  explicit Trajectory(Manifold m) : manifold(std::move(m)) {}

  Manifold manifold;
  std::vector<double> times;
  std::vector<TangentState> states;
  std::vector<EmbeddedPoint> embedded;
  std::vector<double> lyapunov;
  std::vector<StepDiagnostics> diagnostics;
  TrajectoryStatus status = TrajectoryStatus::kCompleted;
  std::string message;
  int chart_switches = 0;

  bool completed() const { return status == TrajectoryStatus::kCompleted; }
  size_t size() const { return times.size(); }
};

// Sum over tasks of the kinetic term in each task metric plus the potential.
double lyapunov_value(const std::vector<TaskSpec>& tasks, const ChartPoint& p, const Vector& v);

// Hemisphere selection that keeps `current` inside the hysteresis band.
int select_chart_with_hysteresis(const Manifold& m, int current, const EmbeddedPoint& e,
                                 double band);

// Integrates the policy ODE in chart coordinates, switching charts only
// between steps. `tasks` supply the Lyapunov function and constraint
// clearance checks. Aborts keep the partial trajectory and set the status.
Trajectory integrate(const Manifold& m, const PolicyFn& policy, const std::vector<TaskSpec>& tasks,
                     const TangentState& initial, const IntegratorConfig& cfg);

struct ConvergenceReport {
  bool converged = false;
  bool velocity_settled = false;
  bool gradients_vanish = false;
  double max_tail_speed = 0.0;
  double max_tail_gradient = 0.0;
  int lyapunov_violations = 0;       // steps with V increase above tolerance
  int non_strict_decreases = 0;      // steps with speed > 1e-3 and no decrease
  double max_lyapunov_increase = 0.0;
};

inline constexpr double kLyapunovTolerance = 1e-8;
inline constexpr double kStrictDecreaseSpeed = 1e-3;

ConvergenceReport check_convergence(const Trajectory& traj, const std::vector<TaskSpec>& tasks,
                                    double tail_fraction = 0.1, double velocity_eps = 1e-4,
                                    double gradient_tol = 1e-6);

// Embedded speed |D(embedding) v|, independent of the chart.
double embedded_speed(const Manifold& m, const TangentState& s);

// Max over the shared time grid of the embedded distance.
double trajectory_deviation(const Trajectory& a, const Trajectory& b);

// Columns t, chart_id, q1..qm, v1..vm, e1..ed, V.
void write_csv(const Trajectory& traj, std::ostream& os);

}  // namespace pbds
