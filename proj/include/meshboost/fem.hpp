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

// Plane-strain linear elasticity on a structured mesh of square Q4 elements
// over the unit square. Nodes are numbered row by row from the bottom-left
// corner; node (i, j) sits at (i / n, j / n) and owns DOFs 2k (ux) and
// 2k + 1 (uy) with k = j * (n + 1) + i.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "meshboost/stress_field.hpp"

namespace meshboost::fem {

struct Material {
    double young_modulus = 210000.0;  // MPa
    double poisson_ratio = 0.3;

    /// Throws InvalidArgument naming the violated bound.
    void
    validate() const;

    bool
    operator==(const Material&) const = default;
};

/// Structural steel. Used for every generated sample.
inline constexpr Material kSteel{210000.0, 0.3};

enum class Edge { Top = 0, Bottom = 1, Left = 2, Right = 3 };
enum class Corner { BottomLeft = 0, BottomRight = 1, TopRight = 2, TopLeft = 3 };

struct EdgeCondition {
    enum class Kind { FixedBoth, FixedHorizontal, FixedVertical, Free, Traction };

    Kind kind = Kind::Free;
    double qx = 0.0;  // MPa, global frame; Traction only
    double qy = 0.0;

    static EdgeCondition
    fixed_both() {
        return {Kind::FixedBoth};
    }
    static EdgeCondition
    fixed_horizontal() {
        return {Kind::FixedHorizontal};
    }
    static EdgeCondition
    fixed_vertical() {
        return {Kind::FixedVertical};
    }
    static EdgeCondition
    free() {
        return {Kind::Free};
    }
    static EdgeCondition
    traction(double qx, double qy) {
        return {Kind::Traction, qx, qy};
    }

    bool
    constrains_x() const {
        return kind == Kind::FixedBoth || kind == Kind::FixedHorizontal;
    }
    bool
    constrains_y() const {
        return kind == Kind::FixedBoth || kind == Kind::FixedVertical;
    }

    bool
    operator==(const EdgeCondition&) const = default;
};

const char*
to_string(EdgeCondition::Kind kind);
const char*
to_string(Edge edge);

/// The FEM problem statement. Body forces are always zero.
struct PlaneStrainCase {
    int n_elements = 32;
    std::array<EdgeCondition, 4> edges{};  // indexed by Edge
    Material material = kSteel;
    /// Corner whose two DOFs are fixed in addition to the edge conditions.
    std::optional<Corner> pinned_corner;

    const EdgeCondition&
    edge(Edge e) const {
        return edges[static_cast<int>(e)];
    }
    EdgeCondition&
    edge(Edge e) {
        return edges[static_cast<int>(e)];
    }

    double
    element_side() const {
        return 1.0 / n_elements;
    }
    int
    dof_count() const {
        return 2 * (n_elements + 1) * (n_elements + 1);
    }

    /// Same physical problem turned counter-clockwise by k quarter turns.
    PlaneStrainCase
    rotated(int k) const;

    bool
    operator==(const PlaneStrainCase&) const = default;
};

struct CaseChecks {
    /// Constraints must remove all three rigid-body modes.
    bool well_posed = true;
    /// Traction only on the top edge. Rotated cases relax this.
    bool top_traction_only = true;
};

/// Throws InvalidArgument on the first violated case invariant.
void
validate_case(const PlaneStrainCase& c, const CaseChecks& checks = {});

/// Validating constructor for the usual case shape.
PlaneStrainCase
make_case(int n_elements,
          const std::array<EdgeCondition, 4>& edges,
          const Material& material = kSteel,
          std::optional<Corner> pinned_corner = std::nullopt);

/// Name of a rigid-body mode the constraints leave free ("x-translation",
/// "y-translation", "rotation"), or nullopt when all three are removed.
std::optional<std::string>
unconstrained_mode(const PlaneStrainCase& c);

/// Prescribed-zero DOFs implied by the edges and the pinned corner, sorted.
std::vector<int>
constrained_dofs(const PlaneStrainCase& c);

using ElementMatrix = Eigen::Matrix<double, 8, 8>;
using StrainMatrix = Eigen::Matrix<double, 3, 8>;

/// Plane-strain constitutive matrix, engineering shear strain.
Eigen::Matrix3d
constitutive_matrix(const Material& material);

/// Strain-displacement matrix of a square element of side `side` at the
/// natural coordinates (xi, eta). Element DOFs are ordered counter-clockwise
/// from the bottom-left node, (ux, uy) per node.
StrainMatrix
strain_displacement(double side, double xi, double eta);

/// Q4 stiffness with 2x2 Gauss quadrature, unit thickness.
ElementMatrix
element_stiffness(const Material& material, double element_side);

struct GlobalSystem {
    int n_elements = 0;
    Eigen::SparseMatrix<double> stiffness;  // both triangles stored
    Eigen::VectorXd load;
    std::map<int, double> constraints;  // DOF -> prescribed displacement
};

GlobalSystem
assemble(const PlaneStrainCase& c);

struct ReducedSystem {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::VectorXd load;
    std::vector<int> free_dofs;  // reduced index -> full DOF
    std::map<int, double> prescribed;
    int full_size = 0;
};

ReducedSystem
apply_constraints(const GlobalSystem& system, const PlaneStrainCase& c, const CaseChecks& checks = {});

/// Sparse Cholesky solve of the reduced system, scattered back to all DOFs.
Eigen::VectorXd
solve_displacements(const ReducedSystem& reduced);

/// K u - f over all DOFs; nonzero only at constrained DOFs up to round-off.
Eigen::VectorXd
reaction_forces(const GlobalSystem& system, const Eigen::VectorXd& displacements);

/// Element-center stresses in image order (row 0 at the top).
struct ElementStress {
    int n = 0;
    std::vector<double> sxx, syy, sxy;
};

ElementStress
recover_stress(const Eigen::VectorXd& displacements, const PlaneStrainCase& c);

/// Von Mises stress including the plane-strain out-of-plane component
/// szz = nu * (sxx + syy).
double
von_mises(double sxx, double syy, double sxy, const Material& material);

StressField
solve_case(const PlaneStrainCase& c, const CaseChecks& checks = {});

}  // namespace meshboost::fem
