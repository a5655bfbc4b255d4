// Copyright 2026-present the meshboost authors
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

#include <Eigen/Sparse>

namespace meshboost::fem::detail {

/// Solves K x = b for symmetric positive-definite K (both triangles stored).
/// Throws SolverError with a conditioning estimate if the factorization fails.
Eigen::VectorXd
cholesky_solve(const Eigen::SparseMatrix<double>& k, const Eigen::VectorXd& b);

/// True iff K admits an LL^T factorization.
bool
is_positive_definite(const Eigen::SparseMatrix<double>& k);

}  // namespace meshboost::fem::detail
