#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace msmap {

struct NnlsOptions {
    int max_iterations = 0;  // 0 selects max(3n, 30) least-squares solves
    double tolerance = 0.0;  // 0 selects 1e-10 * max(1, |A'b|_inf)
};

struct NnlsResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual_norm = 0.0;  // |Ax - b|; not available from the Gram form (set to -1)
};

/// Lawson-Hanson active-set solution of min |Ax - b|^2 subject to x >= 0.
/// Passive-set subproblems are solved by Householder QR on columns of A.
NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const NnlsOptions& opts = {});

/// The same active-set iteration driven by the normal equations (A'A, A'b).
/// `warm_start`, when non-empty, must be a non-negative vector; its support
/// seeds the passive set.
NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& atb, const Eigen::VectorXd& warm_start = {},
                     const NnlsOptions& opts = {});

/// (p-2) x p matrix with rows (..., 1, -2, 1, ...).
Eigen::MatrixXd second_difference_matrix(std::size_t p);

/// min |Ax - b|^2 + mu^2 |Lx|^2 subject to x >= 0, via nnls on [A; mu L], [b; 0].
NnlsResult nnls_regularized(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& L, double mu,
                            const NnlsOptions& opts = {});

}  // namespace msmap
