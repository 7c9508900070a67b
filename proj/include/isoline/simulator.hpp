#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "isoline/controller.hpp"
#include "isoline/dubins.hpp"
#include "isoline/errors.hpp"
#include "isoline/field.hpp"
#include "isoline/text.hpp"

namespace isoline {

/**
 * Complete description of one closed-loop experiment. The controller runs
 * every controller_dt (an integer multiple of sim_dt) with its command
 * held between ticks; the vehicle integrates at sim_dt. Measurement noise
 * is additive Gaussian on the concentration seen by the controller only;
 * logged samples carry the true field value.
 */
struct Scenario {
  ScalarField field = CircularField(1.0, 1.0, Vec2(0, 0));
  double s_d = 0;     // desired level
  RobotState initial;
  double v = 0;       // m/s
  ControllerParams params;
  double sim_dt = 0;
  double controller_dt = 0;
  double duration = 0;
  double noise_std = 0;
  std::uint64_t seed = 0;
};

struct TrajectorySample {
  double t = 0;
  double x = 0, y = 0, theta = 0;
  double s = 0;        // true concentration at the pose
  double epsilon = 0;  // s - s_d
  double e = 0;        // controller error term in effect
  double omega = 0;    // command in effect
  double sigma = 0;    // integrator state
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  bool completed = false;
  std::string failure_reason;
};

namespace detail {

/// Ratio controller_dt / sim_dt, which must be a whole number >= 1.
inline int controller_stride(const Scenario& sc) {
  const double ratio = sc.controller_dt / sc.sim_dt;
  const int m = static_cast<int>(std::llround(ratio));
  if (m < 1 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio)) return 0;
  return m;
}

}  // namespace detail

/// Throws InvalidScenario naming the offending field.
inline void validate(const Scenario& sc) {
  if (!(sc.sim_dt > 0.0)) throw InvalidScenario("sim_dt must be > 0");
  if (detail::controller_stride(sc) == 0)
    throw InvalidScenario("controller_dt must be an integer multiple of sim_dt");
  if (!(sc.duration >= 10.0 * sc.controller_dt))
    throw InvalidScenario("duration must be at least 10 * controller_dt");
  if (!(sc.v > 0.0)) throw InvalidScenario("v must be > 0");
  if (!(sc.noise_std >= 0.0)) throw InvalidScenario("noise_std must be >= 0");
  try {
    sc.params.validate();
  } catch (const std::invalid_argument& ex) {
    throw InvalidScenario(ex.what());
  }
  const Vec2 p0 = position(sc.initial);
  try {
    value(sc.field, p0);
    if (sc.params.derivative_mode == DerivativeMode::Oracle) gradient(sc.field, p0);
  } catch (const OutOfDomain&) {
    throw InitialOutOfDomain("initial position outside the field domain");
  } catch (const SingularPoint&) {
    throw InitialOutOfDomain("initial position at the field source");
  }
  if (auto d = source_distance(sc.field, p0); d && *d == 0.0)
    throw InitialOutOfDomain("initial position at the field source");
}

/**
 * Runs the closed loop and records one sample per sim_dt (duration/sim_dt
 * + 1 rows). Domain exits and singular points abort cleanly: the partial
 * trajectory is returned with completed = false and the reason recorded.
 * `initial_ctrl` presets integrator/filter memory; default is reset state.
 */
inline Trajectory run(const Scenario& sc, ControllerState initial_ctrl = ControllerState{}) {
  validate(sc);
  const int stride = detail::controller_stride(sc);
  const long steps = std::llround(sc.duration / sc.sim_dt);

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> noise(0.0, sc.noise_std > 0.0 ? sc.noise_std : 1.0);

  Trajectory traj;
  traj.samples.reserve(steps + 1);
  traj.completed = true;

  ControllerState ctrl = initial_ctrl;
  RobotState state = sc.initial;
  double omega = 0.0, e = 0.0;

  for (long i = 0; i <= steps; ++i) {
    TrajectorySample row;
    row.t = i * sc.sim_dt;
    row.x = state.x;
    row.y = state.y;
    row.theta = state.heading;
    try {
      row.s = value(sc.field, position(state));
      if (i % stride == 0) {
        double s_meas = row.s;
        if (sc.noise_std > 0.0) s_meas += noise(rng);
        std::optional<double> oracle;
        if (sc.params.derivative_mode == DerivativeMode::Oracle)
          oracle = analytic_sdot(sc.field, state, sc.v);
        const auto out = update(ctrl, sc.params, s_meas, sc.s_d, sc.controller_dt, oracle);
        omega = out.omega;
        e = out.e;
      }
    } catch (const OutOfDomain& ex) {
      traj.completed = false;
      traj.failure_reason = std::string("out of domain at t = ") + format_g9(row.t) + ": " +
                            ex.what();
      break;
    } catch (const SingularPoint& ex) {
      traj.completed = false;
      traj.failure_reason = std::string("singular point at t = ") + format_g9(row.t) + ": " +
                            ex.what();
      break;
    }
    row.epsilon = row.s - sc.s_d;
    row.e = e;
    row.omega = omega;
    row.sigma = ctrl.sigma;
    traj.samples.push_back(row);
    if (i < steps) state = step(state, omega, sc.v, sc.sim_dt);
  }
  return traj;
}

// ---- metrics ---------------------------------------------------------------

struct Metrics {
  double steady_state_error_max = 0;
  double steady_state_error_mean = 0;
  std::optional<double> convergence_time;  // absent if never settled in band
  bool completed = false;
  std::optional<std::string> failure_reason;
};

/**
 * Tail statistics of |epsilon| over the final `tail_fraction` of samples,
 * and the first time the error enters the band |epsilon| <= band and stays
 * there. Band defaults to 5% of |s_d|.
 */
inline Metrics compute_metrics(const Trajectory& traj, double s_d, double tail_fraction = 0.1,
                               std::optional<double> band = std::nullopt) {
  if (traj.samples.empty()) throw EmptyTrajectory("trajectory has no samples");
  if (!(tail_fraction > 0.0) || tail_fraction > 1.0)
    throw std::invalid_argument("tail_fraction must be in (0, 1]");
  const double band_width = band ? *band : 0.05 * std::abs(s_d);

  Metrics m;
  m.completed = traj.completed;
  if (!traj.completed) m.failure_reason = traj.failure_reason;

  const std::size_t n = traj.samples.size();
  const std::size_t tail =
      std::max<std::size_t>(1, static_cast<std::size_t>(tail_fraction * n));
  double sum = 0.0, worst = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) {
    const double a = std::abs(traj.samples[i].epsilon);
    sum += a;
    worst = std::max(worst, a);
  }
  m.steady_state_error_max = worst;
  m.steady_state_error_mean = sum / tail;

  // Last sample outside the band decides settling; the trajectory must
  // remain inside from the next sample onward.
  std::size_t last_out = n;
  for (std::size_t i = n; i-- > 0;) {
    if (std::abs(traj.samples[i].epsilon) > band_width) {
      last_out = i;
      break;
    }
  }
  if (last_out == n) {
    m.convergence_time = traj.samples.front().t;
  } else if (last_out + 1 < n) {
    m.convergence_time = traj.samples[last_out + 1].t;
  }
  return m;
}

// ---- parameter sweeps --------------------------------------------------

enum class SweepAxis { Kp, Ki, C1, C2, Speed, NoiseStd, InitialHeading };

inline const char* sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Kp: return "kp";
    case SweepAxis::Ki: return "ki";
    case SweepAxis::C1: return "c1";
    case SweepAxis::C2: return "c2";
    case SweepAxis::Speed: return "v";
    case SweepAxis::NoiseStd: return "noise_std";
    case SweepAxis::InitialHeading: return "initial.theta";
  }
  return "?";
}

inline std::optional<SweepAxis> sweep_axis_from_name(std::string_view name) {
  for (auto a : {SweepAxis::Kp, SweepAxis::Ki, SweepAxis::C1, SweepAxis::C2, SweepAxis::Speed,
                 SweepAxis::NoiseStd, SweepAxis::InitialHeading})
    if (name == sweep_axis_name(a)) return a;
  return std::nullopt;
}

inline Scenario with_axis_value(Scenario sc, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::Kp: sc.params.kp = v; break;
    case SweepAxis::Ki: sc.params.ki = v; break;
    case SweepAxis::C1: sc.params.c1 = v; break;
    case SweepAxis::C2: sc.params.c2 = v; break;
    case SweepAxis::Speed: sc.v = v; break;
    case SweepAxis::NoiseStd: sc.noise_std = v; break;
    case SweepAxis::InitialHeading: sc.initial.heading = wrap_angle(v); break;
  }
  return sc;
}

struct SweepEntry {
  double value = 0;
  Metrics metrics;
};

/// Runs the base scenario once per axis value. Invalid entries are
/// reported in-place (completed = false) without aborting the sweep;
/// results keep the input order.
inline std::vector<SweepEntry> sweep(const Scenario& base, SweepAxis axis,
                                     const std::vector<double>& values,
                                     double tail_fraction = 0.1,
                                     std::optional<double> band = std::nullopt) {
  std::vector<SweepEntry> out;
  out.reserve(values.size());
  for (double v : values) {
    SweepEntry entry;
    entry.value = v;
    try {
      const Scenario sc = with_axis_value(base, axis, v);
      entry.metrics = compute_metrics(run(sc), sc.s_d, tail_fraction, band);
    } catch (const InvalidScenario& ex) {
      entry.metrics.completed = false;
      entry.metrics.failure_reason = ex.what();
    }
    out.push_back(entry);
  }
  return out;
}

// ---- text formats ----------------------------------------------------------

inline constexpr const char* kTrajectoryCsvHeader = "t,x,y,theta,s,epsilon,e,omega,sigma";

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << kTrajectoryCsvHeader << '\n';
  for (const auto& r : traj.samples) {
    out << format_g9(r.t) << ',' << format_g9(r.x) << ',' << format_g9(r.y) << ','
        << format_g9(r.theta) << ',' << format_g9(r.s) << ',' << format_g9(r.epsilon) << ','
        << format_g9(r.e) << ',' << format_g9(r.omega) << ',' << format_g9(r.sigma) << '\n';
  }
  if (!out) throw IoError("failed writing trajectory CSV");
}

inline std::vector<TrajectorySample> read_trajectory_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty CSV");
  ++lineno;
  if (std::string(trim(line)) != kTrajectoryCsvHeader)
    throw ParseError(lineno, "bad trajectory CSV header");
  std::vector<TrajectorySample> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != 9) throw ParseError(lineno, "expected 9 columns");
    double v[9];
    for (int i = 0; i < 9; ++i)
      if (!parse_double(cells[i], v[i])) throw ParseError(lineno, "bad number '" + cells[i] + "'");
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  return rows;
}

inline void write_metrics(const Metrics& m, std::ostream& out) {
  out << "sse_max = " << format_g9(m.steady_state_error_max) << '\n';
  out << "sse_mean = " << format_g9(m.steady_state_error_mean) << '\n';
  out << "convergence_time = " << (m.convergence_time ? format_g9(*m.convergence_time) : "none")
      << '\n';
  out << "completed = " << (m.completed ? 1 : 0) << '\n';
  if (m.failure_reason) out << "failure_reason = " << *m.failure_reason << '\n';
}

inline constexpr const char* kSweepCsvHeader = "value,sse_max,sse_mean,convergence_time,completed";

inline void write_sweep_csv(const std::vector<SweepEntry>& entries, std::ostream& out) {
  out << kSweepCsvHeader << '\n';
  for (const auto& entry : entries) {
    const auto& m = entry.metrics;
    out << format_g9(entry.value) << ',' << format_g9(m.steady_state_error_max) << ','
        << format_g9(m.steady_state_error_mean) << ','
        << (m.convergence_time ? format_g9(*m.convergence_time) : "") << ','
        << (m.completed ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing sweep CSV");
}

struct SweepCsvRow {
  double value = 0;
  double sse_max = 0;
  double sse_mean = 0;
  std::optional<double> convergence_time;
  bool completed = false;
};

inline std::vector<SweepCsvRow> read_sweep_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty CSV");
  ++lineno;
  if (std::string(trim(line)) != kSweepCsvHeader)
    throw ParseError(lineno, "bad sweep CSV header");
  std::vector<SweepCsvRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != 5) throw ParseError(lineno, "expected 5 columns");
    SweepCsvRow r;
    double flag = 0;
    if (!parse_double(cells[0], r.value) || !parse_double(cells[1], r.sse_max) ||
        !parse_double(cells[2], r.sse_mean) || !parse_double(cells[4], flag))
      throw ParseError(lineno, "bad number in sweep row");
    if (!trim(cells[3]).empty()) {
      double ct = 0;
      if (!parse_double(cells[3], ct)) throw ParseError(lineno, "bad convergence_time");
      r.convergence_time = ct;
    }
    r.completed = flag != 0.0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace isoline
