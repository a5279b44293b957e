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

#include <Eigen/Dense>

namespace dkrc {

// Moore-Penrose pseudoinverse via SVD. Singular values below
// max(rows, cols) * sigma_max * eps are truncated; pass tol >= 0 to
// override the threshold.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double tol = -1.0);

// Numerical rank from the SVD with the same default threshold.
int svd_rank(const Eigen::MatrixXd& m, double tol = -1.0);

// Reciprocal condition estimate sigma_min / sigma_max (0 for a rank
// deficient or empty matrix).
double rcond(const Eigen::MatrixXd& m);

// Solves W * (Z Z^T + ridge I) = Y Z^T for W, i.e. the ridge
// least-squares fit of Y ~ W Z, through the SVD of Z. With ridge = 0 the
// solution is Y * pinv(Z).
Eigen::MatrixXd ridge_right_solve(const Eigen::MatrixXd& Y,
                                  const Eigen::MatrixXd& Z, double ridge);

bool all_finite(const Eigen::MatrixXd& m);

}  // namespace dkrc
