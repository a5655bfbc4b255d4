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

#include "sparse_cholesky.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/CholmodSupport>

#include "meshboost/common.hpp"

namespace meshboost::fem::detail {

namespace {

using Factor = Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower>;

// Ratio of extreme diagonal entries; a cheap lower bound on cond(K).
double
diagonal_condition(const Eigen::SparseMatrix<double>& k) {
    const Eigen::VectorXd d = k.diagonal().cwiseAbs();
    if (d.size() == 0) {
        return 1.0;
    }
    const double lo = d.minCoeff();
    return lo > 0.0 ? d.maxCoeff() / lo : INFINITY;
}

void
factorize(Factor& llt, const Eigen::SparseMatrix<double>& k) {
    llt.cholmod().print = 0;
    llt.compute(k);
}

}  // namespace

Eigen::VectorXd
cholesky_solve(const Eigen::SparseMatrix<double>& k, const Eigen::VectorXd& b) {
    Factor llt;
    factorize(llt, k);
    if (llt.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "sparse Cholesky factorization failed on a " << k.rows() << "x" << k.cols()
            << " system (matrix not positive definite); diagonal condition estimate " << diagonal_condition(k);
        throw SolverError(msg.str());
    }
    Eigen::VectorXd x = llt.solve(b);
    if (llt.info() != Eigen::Success || !x.allFinite()) {
        std::ostringstream msg;
        msg << "sparse Cholesky back-substitution failed; diagonal condition estimate " << diagonal_condition(k);
        throw SolverError(msg.str());
    }
    return x;
}

bool
is_positive_definite(const Eigen::SparseMatrix<double>& k) {
    Factor llt;
    factorize(llt, k);
    return llt.info() == Eigen::Success;
}

}  // namespace meshboost::fem::detail
