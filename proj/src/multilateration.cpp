#include "tagsim/multilateration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace tagsim::mlat {

AnchorSet AnchorSet::from_positions(std::vector<Eigen::Vector3d> positions) {
    AnchorSet set;
    set.ids.resize(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) set.ids[i] = static_cast<int>(i);
    set.positions = std::move(positions);
    return set;
}

void AnchorSet::validate(int dimension, double sv_threshold) const {
    if (dimension != 2 && dimension != 3)
        throw InvalidInput("AnchorSet: dimension must be 2 or 3");
    const int n = static_cast<int>(positions.size());
    if (n < dimension + 1)
        throw InsufficientData("AnchorSet: need at least " +
                               std::to_string(dimension + 1) + " anchors for " +
                               std::to_string(dimension) + "D");

    // Centered coordinate matrix; the d-th singular value vanishes exactly
    // when the anchors are collinear (d=2) or coplanar (d=3).
    Eigen::MatrixXd coords(n, dimension);
    for (int i = 0; i < n; ++i)
        coords.row(i) = positions[i].head(dimension).transpose();
    coords.rowwise() -= coords.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(coords);
    if (svd.singularValues()(dimension - 1) < sv_threshold)
        throw GeometryError(dimension == 2 ? "AnchorSet: anchors are collinear"
                                           : "AnchorSet: anchors are coplanar");
}

double squared_range_cost(const Eigen::Vector3d& point, const AnchorSet& anchors,
                          const std::vector<double>& distances, int dimension) {
    double cost = 0.0;
    for (std::size_t i = 0; i < anchors.positions.size(); ++i) {
        const Eigen::Vector3d& a = anchors.positions[i];
        const double dx = point.x() - a.x();
        const double dy = point.y() - a.y();
        const double dz = dimension == 3 ? point.z() - a.z() : 0.0;
        const double r = dx * dx + dy * dy + dz * dz - distances[i] * distances[i];
        cost += r * r;
    }
    return cost;
}

namespace {

// The squared-range problem in lifted form: with y = [x; alpha] and
// alpha = ||x||^2, the cost is ||A y - b||^2 subject to the quadratic
// constraint y'Dy + 2 f'y = 0 with D = diag(1..1,0), f = (0..0,-1/2).
// The minimizer over the constraint set is y(lambda) for the unique
// multiplier where the constraint holds; phi(lambda) is strictly decreasing
// on the interval where A'A + lambda D stays positive definite, so a
// bracketed bisection finds the global optimum.
struct LiftedSystem {
    Eigen::MatrixXd M;   // A'A
    Eigen::VectorXd c;   // A'b
    int d;               // spatial dimension

    Eigen::VectorXd y_at(double lambda) const {
        Eigen::MatrixXd K = M;
        for (int i = 0; i < d; ++i) K(i, i) += lambda;
        Eigen::VectorXd rhs = c;
        rhs(d) += lambda * 0.5;  // -lambda * f with f_last = -1/2
        return K.ldlt().solve(rhs);
    }

    double constraint_at(const Eigen::VectorXd& y) const {
        return y.head(d).squaredNorm() - y(d);
    }
};

}  // namespace

PositionFix solve(const AnchorSet& anchors, const std::vector<double>& distances,
                  int dimension) {
    anchors.validate(dimension);
    const int n = static_cast<int>(anchors.positions.size());
    if (static_cast<int>(distances.size()) != n)
        throw InvalidInput("solve: distances/anchors size mismatch");
    if (n < dimension + 1)
        throw InsufficientData("solve: fewer distances than dimension + 1");
    for (double d : distances)
        if (d < 0.0) throw InvalidInput("solve: negative distance");

    const int d = dimension;

    // Work in centroid coordinates at unit scale: the cost is equivariant
    // under rigid motions and uniform scaling, so this changes conditioning
    // only. Translation equivariance then holds by construction.
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : anchors.positions) centroid += p;
    centroid /= static_cast<double>(n);
    if (d == 2) centroid.z() = 0.0;

    // Unit: the anchor spread, so the lifted system is O(1) regardless of the
    // deployment's absolute coordinates.
    double unit = 0.0;
    for (int i = 0; i < n; ++i)
        unit = std::max(unit, (anchors.positions[i] - centroid).head(d).norm());
    unit = std::max(unit, 1e-6);

    Eigen::MatrixXd A(n, d + 1);
    Eigen::VectorXd b(n);
    double dscale = 1.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd a =
            ((anchors.positions[i] - centroid) / unit).head(d).eval();
        const double dist = distances[i] / unit;
        A.row(i).head(d) = -2.0 * a.transpose();
        A(i, d) = 1.0;
        b(i) = dist * dist - a.squaredNorm();
        dscale = std::max(dscale, dist * dist);
    }

    LiftedSystem sys{A.transpose() * A, A.transpose() * b, d};

    // Lower end of the multiplier interval: M + lambda*D is positive definite
    // for lambda > -1 / mu_max, with mu_max the largest eigenvalue of
    // D z = mu M z.
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d + 1, d + 1);
    for (int i = 0; i < d; ++i) D(i, i) = 1.0;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(D, sys.M);
    const double mu_max = ges.eigenvalues().maxCoeff();
    if (!(mu_max > 0.0) || !std::isfinite(mu_max))
        throw GeometryError("solve: lifted system is singular");
    const double lambda_min = -1.0 / mu_max;

    // Exact or near-exact distances: the unconstrained minimizer already
    // satisfies the constraint; return it without root finding.
    const double feas_tol = 1e-12 * dscale;
    Eigen::VectorXd y0 = sys.y_at(0.0);
    double phi0 = sys.constraint_at(y0);
    Eigen::VectorXd y_star;
    if (std::abs(phi0) <= feas_tol) {
        y_star = y0;
    } else {
        double lo, hi;
        if (phi0 > 0.0) {
            // Root lies above 0: phi decreases towards -alpha(inf) < 0.
            lo = 0.0;
            hi = 1.0;
            while (sys.constraint_at(sys.y_at(hi)) > 0.0) {
                lo = hi;
                hi *= 2.0;
                if (hi > 1e18) throw GeometryError("solve: multiplier bracket failed");
            }
        } else {
            // Root lies in (lambda_min, 0): phi -> +inf at the lower end.
            // Probing closer to lambda_min than its own numerical precision
            // is meaningless, so instances whose root collides with the
            // bound (ranges vastly beyond the anchor envelope) are rejected.
            hi = 0.0;
            double step = -lambda_min * 0.5;
            lo = lambda_min + step;
            while (sys.constraint_at(sys.y_at(lo)) < 0.0) {
                step *= 0.5;
                lo = lambda_min + step;
                if (step < 1e-12 * std::abs(lambda_min))
                    throw GeometryError(
                        "solve: degenerate instance, ranges far outside the anchor envelope");
            }
        }
        for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo));
             ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (sys.constraint_at(sys.y_at(mid)) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        y_star = sys.y_at(0.5 * (lo + hi));
    }

    PositionFix fix;
    fix.dimension = d;
    fix.n_anchors_used = n;
    fix.position = Eigen::Vector3d::Zero();
    fix.position.head(d) = y_star.head(d) * unit;
    fix.position += centroid;
    if (d == 2) fix.position.z() = 0.0;
    fix.residual = squared_range_cost(fix.position, anchors, distances, d);
    return fix;
}

std::optional<PositionFix> gate_and_solve(const std::vector<ranging::RangeMeasurement>& ms,
                                          const AnchorSet& anchors, int dimension) {
    if (ms.size() != anchors.positions.size())
        throw InvalidInput("gate_and_solve: measurements/anchors size mismatch");
    AnchorSet used;
    std::vector<double> distances;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        if (!ms[i].valid) continue;
        used.positions.push_back(anchors.positions[i]);
        used.ids.push_back(anchors.ids.empty() ? static_cast<int>(i) : anchors.ids[i]);
        distances.push_back(ms[i].distance_m);
    }
    if (static_cast<int>(distances.size()) < dimension + 1) return std::nullopt;
    return solve(used, distances, dimension);
}

}  // namespace tagsim::mlat
