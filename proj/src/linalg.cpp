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

#include "dkrc/linalg.hpp"

#include <algorithm>
#include <limits>

#include "dkrc/errors.hpp"

namespace dkrc {

namespace {

double default_tol(const Eigen::MatrixXd& m, double sigma_max) {
  const double eps = std::numeric_limits<double>::epsilon();
  return static_cast<double>(std::max(m.rows(), m.cols())) * sigma_max * eps;
}

}  // namespace

Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return Eigen::MatrixXd(m.cols(), m.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (tol < 0.0) tol = default_tol(m, s.size() > 0 ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

int svd_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0) return 0;
  if (tol < 0.0) tol = default_tol(m, s(0));
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) ++rank;
  }
  return rank;
}

double rcond(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

Eigen::MatrixXd ridge_right_solve(const Eigen::MatrixXd& Y,
                                  const Eigen::MatrixXd& Z, double ridge) {
  if (Y.cols() != Z.cols()) {
    throw DimensionError("ridge_right_solve: Y and Z column counts differ");
  }
  if (ridge < 0.0) throw InvalidArgument("ridge_right_solve: negative ridge");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  Eigen::VectorXd damped = Eigen::VectorXd::Zero(s.size());
  if (ridge == 0.0) {
    const double tol = default_tol(Z, s.size() > 0 ? s(0) : 0.0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > tol) damped(i) = 1.0 / s(i);
    }
  } else {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      damped(i) = s(i) / (s(i) * s(i) + ridge);
    }
  }
  // Y Z^T (Z Z^T + ridge I)^-1 == Y V diag(s/(s^2+ridge)) U^T
  return Y * svd.matrixV() * damped.asDiagonal() * svd.matrixU().transpose();
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace dkrc
