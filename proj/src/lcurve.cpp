#include "msmap/lcurve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msmap/core.hpp"
#include "msmap/nnls.hpp"

namespace msmap {

void validate_mu_grid(std::span<const double> mu_grid) {
    if (mu_grid.size() < 8) throw_invalid("L-curve: need at least 8 regularization values");
    for (std::size_t i = 0; i < mu_grid.size(); ++i) {
        if (!(mu_grid[i] >= 0.0) || !std::isfinite(mu_grid[i])) throw_invalid("L-curve: mu values must be >= 0");
        if (i > 0 && !(mu_grid[i] > mu_grid[i - 1])) throw_invalid("L-curve: mu grid must be strictly increasing");
    }
}

std::size_t lcurve_corner(std::span<const double> residual_norm, std::span<const double> seminorm, bool& at_boundary) {
    const std::size_t n = residual_norm.size();
    if (n != seminorm.size() || n < 3) throw_invalid("L-curve: need at least three points");

    const auto [rmin, rmax] = std::minmax_element(residual_norm.begin(), residual_norm.end());
    if (!(*rmax - *rmin > 1e-12 * std::abs(*rmax))) throw_numerical("L-curve: no corner (flat residual)");

    constexpr double floor = 1e-300;
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = std::log(std::max(residual_norm[i], floor));
        ys[i] = std::log(std::max(seminorm[i], floor));
    }

    // Each point forms a triangle with its nearest neighbours on either side
    // that lie at least `min_sep` away; clustered points (where the curve
    // barely moves) would otherwise give meaningless angles. The corner is
    // the convex triangle with the largest circumscribed curvature.
    const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    const double min_sep = 0.01 * std::hypot(*xmax - *xmin, *ymax - *ymin);
    auto dist = [&](std::size_t a, std::size_t b) { return std::hypot(xs[a] - xs[b], ys[a] - ys[b]); };

    double best = 0.0;
    std::size_t corner = n;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        std::size_t j = k - 1;
        while (j > 0 && dist(j, k) < min_sep) --j;
        std::size_t l = k + 1;
        while (l + 1 < n && dist(l, k) < min_sep) ++l;
        const double a = dist(j, k), b = dist(l, k), c = dist(j, l);
        if (a < min_sep || b < min_sep || !(c > 0.0)) continue;  // no separated neighbour on one side
        const double w = (xs[j] - xs[k]) * (ys[l] - ys[k]) - (ys[j] - ys[k]) * (xs[l] - xs[k]);
        if (!(w < 0.0)) continue;  // bends away from the origin
        const double curvature = -2.0 * w / (a * b * c);
        if (curvature > best) {
            best = curvature;
            corner = k;
        }
    }
    at_boundary = corner == n;
    return at_boundary ? 0 : corner;
}

LCurve lcurve_select_mu(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& L,
                        std::span<const double> mu_grid) {
    validate_mu_grid(mu_grid);
    LCurve out;
    out.mu.assign(mu_grid.begin(), mu_grid.end());
    for (double mu : mu_grid) {
        const NnlsResult r = nnls_regularized(A, b, L, mu);
        out.residual_norm.push_back(r.residual_norm);
        out.seminorm.push_back((L * r.x).norm());
    }
    out.corner = lcurve_corner(out.residual_norm, out.seminorm, out.at_boundary);
    out.mu_star = out.mu[out.corner];
    return out;
}

}  // namespace msmap
