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

#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dkrc {

// Forced pendulum with the angle measured from the upright position.
// Defaults follow the common control benchmark stepped at 1 kHz.
struct PendulumParams {
  double gravity = 10.0;    // m/s^2
  double mass = 1.0;        // kg
  double length = 1.0;      // m
  double dt = 0.001;        // s per step
  double max_torque = 2.0;  // N*m
  double max_speed = 8.0;   // rad/s

  void validate() const;  // throws InvalidArgument on bad values
};

struct State {
  double theta = 0.0;      // rad from upright, unwrapped
  double theta_dot = 0.0;  // rad/s

  // theta reduced into (-pi, pi]. The stored value stays unwrapped so
  // downstream spectrogram frames see a continuous signal.
  double wrapped_theta() const;
};

struct Control {
  double torque = 0.0;  // N*m, clamped to +-max_torque inside step()
};

// Reduces an angle difference into (-pi, pi].
double wrap_angle(double angle);

// One semi-implicit Euler step: the velocity is updated (and clamped)
// first, then the angle advances with the new velocity.
State step(const PendulumParams& params, const State& x, const Control& u);

// Total mechanical energy of the rod pendulum; conserved by the
// unforced continuous dynamics, used as a drift oracle in tests.
double mechanical_energy(const PendulumParams& params, const State& x);

struct Trajectory {
  std::vector<State> states;      // n_steps + 1 entries
  std::vector<Control> controls;  // n_steps entries
  double t0 = 0.0;
  double dt = 0.001;

  std::size_t steps() const { return controls.size(); }
};

struct ZeroPolicy {};

// Torque resampled uniformly in [-amplitude, amplitude] every step.
struct RandomUniformPolicy {
  double amplitude = 2.0;
};

struct SinusoidalPolicy {
  double amplitude = 2.0;
  double frequency_hz = 1.0;
  double phase = 0.0;
};

// Replays a recorded torque sequence; must cover n_steps.
struct ReplayPolicy {
  std::vector<double> torques;
};

using ControlPolicy =
    std::variant<ZeroPolicy, RandomUniformPolicy, SinusoidalPolicy, ReplayPolicy>;

Trajectory simulate(const PendulumParams& params, const State& x0,
                    const ControlPolicy& policy, int n_steps,
                    std::uint64_t seed);

// Koopman snapshot data: column j of Y is the successor of column j of X
// under the control in column j of U.
struct SnapshotDataset {
  Eigen::MatrixXd X;  // n x M
  Eigen::MatrixXd Y;  // n x M
  Eigen::MatrixXd U;  // m x M

  Eigen::Index count() const { return X.cols(); }
  Eigen::Index state_dim() const { return X.rows(); }
  Eigen::Index control_dim() const { return U.rows(); }
};

// Concatenates (x_t, x_t+1, u_t) triples across trajectories. Boundary
// states of adjacent trajectories are never paired.
SnapshotDataset build_snapshots(const std::vector<Trajectory>& trajectories);

}  // namespace dkrc
