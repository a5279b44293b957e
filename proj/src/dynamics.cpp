// Copyright 2026 The dkrc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dkrc/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "dkrc/errors.hpp"
#include "dkrc/random.hpp"

namespace dkrc {

void PendulumParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(dt)) throw InvalidArgument("PendulumParams: dt must be > 0");
  if (!positive(mass)) throw InvalidArgument("PendulumParams: mass must be > 0");
  if (!positive(length))
    throw InvalidArgument("PendulumParams: length must be > 0");
  if (!positive(max_torque))
    throw InvalidArgument("PendulumParams: max_torque must be > 0");
  if (!positive(max_speed))
    throw InvalidArgument("PendulumParams: max_speed must be > 0");
  if (!std::isfinite(gravity))
    throw InvalidArgument("PendulumParams: gravity must be finite");
}

double wrap_angle(double angle) {
  const double two_pi = 2.0 * M_PI;
  double wrapped = std::fmod(angle + M_PI, two_pi);
  if (wrapped <= 0.0) wrapped += two_pi;
  return wrapped - M_PI;
}

double State::wrapped_theta() const { return wrap_angle(theta); }

State step(const PendulumParams& params, const State& x, const Control& u) {
  params.validate();
  if (!std::isfinite(x.theta) || !std::isfinite(x.theta_dot)) {
    throw InvalidArgument("step: non-finite state");
  }
  if (!std::isfinite(u.torque)) {
    throw InvalidArgument("step: non-finite control");
  }
  const double torque =
      std::clamp(u.torque, -params.max_torque, params.max_torque);
  const double g = params.gravity;
  const double m = params.mass;
  const double l = params.length;
  const double accel = 3.0 * g / (2.0 * l) * std::sin(x.theta) +
                       3.0 / (m * l * l) * torque;
  State next;
  next.theta_dot = std::clamp(x.theta_dot + accel * params.dt,
                              -params.max_speed, params.max_speed);
  next.theta = x.theta + next.theta_dot * params.dt;
  return next;
}

double mechanical_energy(const PendulumParams& params, const State& x) {
  const double inertia =
      params.mass * params.length * params.length / 3.0;  // rod about its end
  const double kinetic = 0.5 * inertia * x.theta_dot * x.theta_dot;
  const double potential =
      0.5 * params.mass * params.gravity * params.length * std::cos(x.theta);
  return kinetic + potential;
}

Trajectory simulate(const PendulumParams& params, const State& x0,
                    const ControlPolicy& policy, int n_steps,
                    std::uint64_t seed) {
  params.validate();
  if (n_steps < 1) throw InvalidArgument("simulate: n_steps must be >= 1");
  if (const auto* replay = std::get_if<ReplayPolicy>(&policy)) {
    if (replay->torques.size() < static_cast<std::size_t>(n_steps)) {
      throw InvalidArgument(
          "simulate: replay sequence shorter than requested step count");
    }
  }

  std::mt19937_64 gen(seed);
  Trajectory traj;
  traj.dt = params.dt;
  traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.controls.reserve(static_cast<std::size_t>(n_steps));
  traj.states.push_back(x0);

  for (int k = 0; k < n_steps; ++k) {
    const double torque = std::visit(
        [&](const auto& p) -> double {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, ZeroPolicy>) {
            return 0.0;
          } else if constexpr (std::is_same_v<P, RandomUniformPolicy>) {
            return uniform(gen, -p.amplitude, p.amplitude);
          } else if constexpr (std::is_same_v<P, SinusoidalPolicy>) {
            const double t = traj.t0 + k * params.dt;
            return p.amplitude *
                   std::sin(2.0 * M_PI * p.frequency_hz * t + p.phase);
          } else {
            return p.torques[static_cast<std::size_t>(k)];
          }
        },
        policy);
    traj.controls.push_back(Control{torque});
    traj.states.push_back(step(params, traj.states.back(), Control{torque}));
  }
  return traj;
}

SnapshotDataset build_snapshots(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) {
    throw InsufficientData("build_snapshots: no trajectories given");
  }
  Eigen::Index total = 0;
  for (const auto& traj : trajectories) {
    if (traj.states.size() < 2) {
      throw InsufficientData(
          "build_snapshots: trajectory with fewer than 2 states");
    }
    if (traj.controls.size() + 1 != traj.states.size()) {
      throw DimensionError(
          "build_snapshots: control count must be state count - 1");
    }
    total += static_cast<Eigen::Index>(traj.states.size()) - 1;
  }

  SnapshotDataset data;
  data.X.resize(2, total);
  data.Y.resize(2, total);
  data.U.resize(1, total);
  Eigen::Index col = 0;
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t, ++col) {
      data.X(0, col) = traj.states[t].theta;
      data.X(1, col) = traj.states[t].theta_dot;
      data.Y(0, col) = traj.states[t + 1].theta;
      data.Y(1, col) = traj.states[t + 1].theta_dot;
      data.U(0, col) = traj.controls[t].torque;
    }
  }
  return data;
}

}  // namespace dkrc
