#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tagsim/errors.hpp"
#include "tagsim/ranging.hpp"

namespace tagsim::mlat {

// Singular-value gate for collinear (2D) / coplanar (3D) anchor layouts.
// Well below room-scale geometry, well above floating-point noise.
inline constexpr double kDegeneracyThreshold = 1e-6;  // meters

struct AnchorSet {
    std::vector<Eigen::Vector3d> positions;  // 2D sets carry z = 0
    std::vector<int> ids;

    static AnchorSet from_positions(std::vector<Eigen::Vector3d> positions);

    // Enforces the anchor-count minimum (dimension + 1) and the
    // non-collinearity / non-coplanarity gate. Throws GeometryError or
    // InsufficientData.
    void validate(int dimension, double sv_threshold = kDegeneracyThreshold) const;
};

struct PositionFix {
    Eigen::Vector3d position{0.0, 0.0, 0.0};  // z = 0 for 2D fixes
    double residual = 0.0;                     // squared-range cost at the optimum
    int n_anchors_used = 0;
    int dimension = 2;
    bool ambiguous = false;  // set when two global minima tie (gated geometries only)
};

// Squared-range cost f(x) = sum_i (||x - a_i||^2 - d_i^2)^2 over the first
// `dimension` coordinates. Exposed because PositionFix.residual is defined as
// this value and tests compare costs directly.
double squared_range_cost(const Eigen::Vector3d& point, const AnchorSet& anchors,
                          const std::vector<double>& distances, int dimension);

// Global minimizer of the squared-range cost. Closed-form linear algebra plus
// a one-dimensional root find on the constraint multiplier (GTRS); no local
// iteration, no initial guess.
//
// Preconditions: distances aligned with anchors, all >= 0, count >=
// dimension + 1, geometry passes the degeneracy gate. Instances whose ranges
// put the solution orders of magnitude outside the anchor envelope are
// numerically degenerate and rejected with GeometryError; the range-validity
// gate keeps the ranging pipeline far inside the robust region.
PositionFix solve(const AnchorSet& anchors, const std::vector<double>& distances,
                  int dimension);

// Filters invalid measurements and solves when at least dimension + 1 remain;
// otherwise returns nullopt (a no-fix outcome, not an error).
std::optional<PositionFix> gate_and_solve(const std::vector<ranging::RangeMeasurement>& ms,
                                          const AnchorSet& anchors, int dimension);

}  // namespace tagsim::mlat
