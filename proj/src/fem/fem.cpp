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

#include "meshboost/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meshboost/common.hpp"
#include "sparse_cholesky.hpp"

namespace meshboost::fem {

namespace {

constexpr int kMaxElements = 4096;

int
node_index(int n, int i, int j) {
    return j * (n + 1) + i;
}

// Nodes of an edge, in increasing coordinate order along the edge.
std::vector<int>
edge_nodes(int n, Edge e) {
    std::vector<int> nodes;
    nodes.reserve(n + 1);
    for (int t = 0; t <= n; ++t) {
        switch (e) {
            case Edge::Top: nodes.push_back(node_index(n, t, n)); break;
            case Edge::Bottom: nodes.push_back(node_index(n, t, 0)); break;
            case Edge::Left: nodes.push_back(node_index(n, 0, t)); break;
            case Edge::Right: nodes.push_back(node_index(n, n, t)); break;
        }
    }
    return nodes;
}

int
corner_node(int n, Corner c) {
    switch (c) {
        case Corner::BottomLeft: return node_index(n, 0, 0);
        case Corner::BottomRight: return node_index(n, n, 0);
        case Corner::TopRight: return node_index(n, n, n);
        case Corner::TopLeft: return node_index(n, 0, n);
    }
    return 0;
}

EdgeCondition
rotate_condition(const EdgeCondition& ec) {
    using Kind = EdgeCondition::Kind;
    switch (ec.kind) {
        case Kind::FixedHorizontal: return EdgeCondition::fixed_vertical();
        case Kind::FixedVertical: return EdgeCondition::fixed_horizontal();
        case Kind::Traction: return EdgeCondition::traction(-ec.qy, ec.qx);
        default: return ec;
    }
}

// 2x2 Gauss points on [-1, 1].
constexpr double kGauss = 0.57735026918962576451;

}  // namespace

void
Material::validate() const {
    if (!(young_modulus > 0.0) || !std::isfinite(young_modulus)) {
        throw InvalidArgument("Material: young_modulus must be > 0, got " + std::to_string(young_modulus));
    }
    if (!(poisson_ratio > 0.0)) {
        throw InvalidArgument("Material: poisson_ratio must be > 0, got " + std::to_string(poisson_ratio));
    }
    if (!(poisson_ratio < 0.5)) {
        throw InvalidArgument("Material: poisson_ratio must be < 0.5, got " + std::to_string(poisson_ratio));
    }
}

const char*
to_string(EdgeCondition::Kind kind) {
    using Kind = EdgeCondition::Kind;
    switch (kind) {
        case Kind::FixedBoth: return "fixed_both";
        case Kind::FixedHorizontal: return "fixed_horizontal";
        case Kind::FixedVertical: return "fixed_vertical";
        case Kind::Free: return "free";
        case Kind::Traction: return "traction";
    }
    return "?";
}

const char*
to_string(Edge edge) {
    switch (edge) {
        case Edge::Top: return "top";
        case Edge::Bottom: return "bottom";
        case Edge::Left: return "left";
        case Edge::Right: return "right";
    }
    return "?";
}

PlaneStrainCase
PlaneStrainCase::rotated(int k) const {
    k = ((k % 4) + 4) % 4;
    PlaneStrainCase out = *this;
    for (int step = 0; step < k; ++step) {
        const PlaneStrainCase prev = out;
        // (x, y) -> (1 - y, x): right -> top, top -> left, left -> bottom, bottom -> right.
        out.edge(Edge::Top) = rotate_condition(prev.edge(Edge::Right));
        out.edge(Edge::Left) = rotate_condition(prev.edge(Edge::Top));
        out.edge(Edge::Bottom) = rotate_condition(prev.edge(Edge::Left));
        out.edge(Edge::Right) = rotate_condition(prev.edge(Edge::Bottom));
        if (prev.pinned_corner) {
            out.pinned_corner = static_cast<Corner>((static_cast<int>(*prev.pinned_corner) + 1) % 4);
        }
    }
    return out;
}

std::vector<int>
constrained_dofs(const PlaneStrainCase& c) {
    const int n = c.n_elements;
    std::vector<char> fixed(static_cast<std::size_t>(c.dof_count()), 0);
    for (Edge e : {Edge::Top, Edge::Bottom, Edge::Left, Edge::Right}) {
        const auto& ec = c.edge(e);
        for (int node : edge_nodes(n, e)) {
            if (ec.constrains_x()) {
                fixed[2 * node] = 1;
            }
            if (ec.constrains_y()) {
                fixed[2 * node + 1] = 1;
            }
        }
    }
    if (c.pinned_corner) {
        const int node = corner_node(n, *c.pinned_corner);
        fixed[2 * node] = 1;
        fixed[2 * node + 1] = 1;
    }
    std::vector<int> dofs;
    for (int d = 0; d < c.dof_count(); ++d) {
        if (fixed[d]) {
            dofs.push_back(d);
        }
    }
    return dofs;
}

std::optional<std::string>
unconstrained_mode(const PlaneStrainCase& c) {
    // Rigid motion u = (ax - b (y - 1/2), ay + b (x - 1/2)). Each fixed DOF is a
    // linear functional on (ax, ay, b); the motion is suppressed iff they span R^3.
    const int n = c.n_elements;
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    for (int dof : constrained_dofs(c)) {
        const int node = dof / 2;
        const double x = static_cast<double>(node % (n + 1)) / n - 0.5;
        const double y = static_cast<double>(node / (n + 1)) / n - 0.5;
        const Eigen::Vector3d row = (dof % 2 == 0) ? Eigen::Vector3d(1.0, 0.0, -y) : Eigen::Vector3d(0.0, 1.0, x);
        gram += row * row.transpose();
    }
    const double scale = std::max(1.0, gram.trace());
    constexpr const char* kNames[3] = {"x-translation", "y-translation", "rotation"};
    for (int m = 0; m < 3; ++m) {
        if (gram(m, m) <= 1e-12 * scale) {
            return std::string(kNames[m]);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram);
    if (eig.eigenvalues()(0) > 1e-10 * scale) {
        return std::nullopt;
    }
    const Eigen::Vector3d v = eig.eigenvectors().col(0);
    int dominant = 0;
    v.cwiseAbs().maxCoeff(&dominant);
    return std::string(kNames[dominant]);
}

void
validate_case(const PlaneStrainCase& c, const CaseChecks& checks) {
    if (c.n_elements < 1 || c.n_elements > kMaxElements) {
        throw InvalidArgument("PlaneStrainCase: n_elements must be in [1, " + std::to_string(kMaxElements) +
                              "], got " + std::to_string(c.n_elements));
    }
    c.material.validate();
    for (Edge e : {Edge::Top, Edge::Bottom, Edge::Left, Edge::Right}) {
        const auto& ec = c.edge(e);
        if (ec.kind != EdgeCondition::Kind::Traction) {
            continue;
        }
        if (checks.top_traction_only && e != Edge::Top) {
            throw InvalidArgument(std::string("PlaneStrainCase: traction is only allowed on the top edge, found on ") +
                                  to_string(e));
        }
        if (!std::isfinite(ec.qx) || !std::isfinite(ec.qy)) {
            throw InvalidArgument(std::string("PlaneStrainCase: non-finite traction on ") + to_string(e));
        }
    }
    if (checks.well_posed) {
        if (auto mode = unconstrained_mode(c)) {
            throw InvalidArgument("PlaneStrainCase: constraints leave the " + *mode + " rigid-body mode unconstrained");
        }
    }
}

PlaneStrainCase
make_case(int n_elements,
          const std::array<EdgeCondition, 4>& edges,
          const Material& material,
          std::optional<Corner> pinned_corner) {
    PlaneStrainCase c{n_elements, edges, material, pinned_corner};
    validate_case(c);
    return c;
}

Eigen::Matrix3d
constitutive_matrix(const Material& m) {
    const double nu = m.poisson_ratio;
    const double f = m.young_modulus / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Eigen::Matrix3d d;
    d << 1.0 - nu, nu, 0.0,
         nu, 1.0 - nu, 0.0,
         0.0, 0.0, (1.0 - 2.0 * nu) / 2.0;
    return f * d;
}

StrainMatrix
strain_displacement(double side, double xi, double eta) {
    // Natural coordinates of the nodes: BL, BR, TR, TL.
    constexpr double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    constexpr double es[4] = {-1.0, -1.0, 1.0, 1.0};
    const double jac = 2.0 / side;
    StrainMatrix b = StrainMatrix::Zero();
    for (int a = 0; a < 4; ++a) {
        const double dndx = 0.25 * xs[a] * (1.0 + es[a] * eta) * jac;
        const double dndy = 0.25 * es[a] * (1.0 + xs[a] * xi) * jac;
        b(0, 2 * a) = dndx;
        b(1, 2 * a + 1) = dndy;
        b(2, 2 * a) = dndy;
        b(2, 2 * a + 1) = dndx;
    }
    return b;
}

ElementMatrix
element_stiffness(const Material& material, double element_side) {
    material.validate();
    if (!(element_side > 0.0)) {
        throw InvalidArgument("element_stiffness: element_side must be > 0, got " + std::to_string(element_side));
    }
    const Eigen::Matrix3d d = constitutive_matrix(material);
    const double det_j = element_side * element_side / 4.0;
    ElementMatrix k = ElementMatrix::Zero();
    for (double xi : {-kGauss, kGauss}) {
        for (double eta : {-kGauss, kGauss}) {
            const StrainMatrix b = strain_displacement(element_side, xi, eta);
            k.noalias() += b.transpose() * d * b * det_j;
        }
    }
    // Exact symmetry; the quadrature sum is symmetric only up to round-off.
    return 0.5 * (k + k.transpose());
}

GlobalSystem
assemble(const PlaneStrainCase& c) {
    validate_case(c, {.well_posed = false, .top_traction_only = false});
    const int n = c.n_elements;
    const int ndof = c.dof_count();
    const double h = c.element_side();
    const ElementMatrix ke = element_stiffness(c.material, h);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * n * 64);
    std::array<int, 8> dofs{};
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int nodes[4] = {node_index(n, i, j), node_index(n, i + 1, j), node_index(n, i + 1, j + 1),
                                  node_index(n, i, j + 1)};
            for (int a = 0; a < 4; ++a) {
                dofs[2 * a] = 2 * nodes[a];
                dofs[2 * a + 1] = 2 * nodes[a] + 1;
            }
            for (int r = 0; r < 8; ++r) {
                for (int s = 0; s < 8; ++s) {
                    triplets.emplace_back(dofs[r], dofs[s], ke(r, s));
                }
            }
        }
    }

    GlobalSystem sys;
    sys.n_elements = n;
    sys.stiffness.resize(ndof, ndof);
    sys.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    sys.load = Eigen::VectorXd::Zero(ndof);

    for (Edge e : {Edge::Top, Edge::Bottom, Edge::Left, Edge::Right}) {
        const auto& ec = c.edge(e);
        if (ec.kind != EdgeCondition::Kind::Traction) {
            continue;
        }
        const auto nodes = edge_nodes(n, e);
        for (int seg = 0; seg < n; ++seg) {
            for (int node : {nodes[seg], nodes[seg + 1]}) {
                sys.load[2 * node] += ec.qx * h / 2.0;
                sys.load[2 * node + 1] += ec.qy * h / 2.0;
            }
        }
    }
    for (int dof : constrained_dofs(c)) {
        sys.constraints.emplace(dof, 0.0);
    }
    return sys;
}

ReducedSystem
apply_constraints(const GlobalSystem& system, const PlaneStrainCase& c, const CaseChecks& checks) {
    validate_case(c, checks);
    if (auto mode = unconstrained_mode(c)) {
        throw SolverError("apply_constraints: reduced system is singular, " + *mode + " is unconstrained");
    }
    const int ndof = static_cast<int>(system.load.size());
    std::vector<int> reduced_index(ndof, -1);
    ReducedSystem red;
    red.full_size = ndof;
    red.prescribed = system.constraints;
    for (int d = 0; d < ndof; ++d) {
        if (!system.constraints.contains(d)) {
            reduced_index[d] = static_cast<int>(red.free_dofs.size());
            red.free_dofs.push_back(d);
        }
    }
    const int nfree = static_cast<int>(red.free_dofs.size());

    Eigen::VectorXd u_prescribed = Eigen::VectorXd::Zero(ndof);
    for (const auto& [dof, value] : system.constraints) {
        u_prescribed[dof] = value;
    }
    const Eigen::VectorXd lifted = system.load - system.stiffness * u_prescribed;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(system.stiffness.nonZeros()));
    for (int col = 0; col < system.stiffness.outerSize(); ++col) {
        const int rc = reduced_index[col];
        if (rc < 0) {
            continue;
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(system.stiffness, col); it; ++it) {
            const int rr = reduced_index[it.row()];
            if (rr >= 0) {
                triplets.emplace_back(rr, rc, it.value());
            }
        }
    }
    red.stiffness.resize(nfree, nfree);
    red.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    red.load.resize(nfree);
    for (int r = 0; r < nfree; ++r) {
        red.load[r] = lifted[red.free_dofs[r]];
    }
    return red;
}

Eigen::VectorXd
solve_displacements(const ReducedSystem& reduced) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(reduced.full_size);
    for (const auto& [dof, value] : reduced.prescribed) {
        u[dof] = value;
    }
    if (reduced.free_dofs.empty()) {
        return u;
    }
    const Eigen::VectorXd ur = detail::cholesky_solve(reduced.stiffness, reduced.load);
    for (std::size_t r = 0; r < reduced.free_dofs.size(); ++r) {
        u[reduced.free_dofs[r]] = ur[static_cast<Eigen::Index>(r)];
    }
    return u;
}

Eigen::VectorXd
reaction_forces(const GlobalSystem& system, const Eigen::VectorXd& displacements) {
    return system.stiffness * displacements - system.load;
}

ElementStress
recover_stress(const Eigen::VectorXd& displacements, const PlaneStrainCase& c) {
    const int n = c.n_elements;
    if (displacements.size() != c.dof_count()) {
        throw InvalidArgument("recover_stress: expected " + std::to_string(c.dof_count()) +
                              " displacements, got " + std::to_string(displacements.size()));
    }
    const Eigen::Matrix<double, 3, 8> db = constitutive_matrix(c.material) *
                                            strain_displacement(c.element_side(), 0.0, 0.0);
    ElementStress out;
    out.n = n;
    const auto count = static_cast<std::size_t>(n) * n;
    out.sxx.resize(count);
    out.syy.resize(count);
    out.sxy.resize(count);
    Eigen::Matrix<double, 8, 1> ue;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int nodes[4] = {node_index(n, i, j), node_index(n, i + 1, j), node_index(n, i + 1, j + 1),
                                  node_index(n, i, j + 1)};
            for (int a = 0; a < 4; ++a) {
                ue[2 * a] = displacements[2 * nodes[a]];
                ue[2 * a + 1] = displacements[2 * nodes[a] + 1];
            }
            const Eigen::Vector3d s = db * ue;
            const auto idx = static_cast<std::size_t>(n - 1 - j) * n + i;
            out.sxx[idx] = s[0];
            out.syy[idx] = s[1];
            out.sxy[idx] = s[2];
        }
    }
    return out;
}

double
von_mises(double sxx, double syy, double sxy, const Material& material) {
    const double szz = material.poisson_ratio * (sxx + syy);
    const double a = sxx - syy;
    const double b = syy - szz;
    const double cc = szz - sxx;
    return std::sqrt(0.5 * (a * a + b * b + cc * cc) + 3.0 * sxy * sxy);
}

StressField
solve_case(const PlaneStrainCase& c, const CaseChecks& checks) {
    validate_case(c, checks);
    const GlobalSystem sys = assemble(c);
    const ReducedSystem red = apply_constraints(sys, c, checks);
    const Eigen::VectorXd u = solve_displacements(red);
    const ElementStress s = recover_stress(u, c);
    StressField field(c.n_elements);
    auto values = field.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = von_mises(s.sxx[k], s.syy[k], s.sxy[k], c.material);
    }
    field.validate();
    return field;
}

}  // namespace meshboost::fem
