#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace msmap {

struct LCurve {
    std::vector<double> mu;
    std::vector<double> residual_norm;  // |A x(mu) - b|
    std::vector<double> seminorm;       // |L x(mu)|
    std::size_t corner = 0;             // index into mu
    double mu_star = 0.0;
    /// True when no convex corner was found and the smallest mu was returned
    /// (typical for noiseless data).
    bool at_boundary = false;
};

/// Corner of a discrete L-curve on (log residual, log seminorm): the point
/// whose triangle with its separated neighbours has maximal convex
/// curvature. Points are ordered by increasing mu; ties go to smaller mu.
/// Returns the corner index; sets `at_boundary` (and returns 0) when no
/// convex triangle exists.
std::size_t lcurve_corner(std::span<const double> residual_norm, std::span<const double> seminorm, bool& at_boundary);

/// Sweep `mu_grid` with nnls_regularized and pick the corner.
LCurve lcurve_select_mu(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& L,
                        std::span<const double> mu_grid);

/// Validate a regularization grid (strictly increasing, positive, at least 8 points).
void validate_mu_grid(std::span<const double> mu_grid);

}  // namespace msmap
