#include "msmap/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "msmap/core.hpp"

namespace msmap {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

// Active-set driver shared by the dense and Gram forms. `gradient(x, w)`
// writes the negative gradient A'(b - Ax); `solve(passive, z)` writes the
// unconstrained least-squares solution restricted to the passive columns.
template <class Gradient, class Solve>
int active_set(Eigen::Index n, double tol, int max_iter, Eigen::VectorXd& x, Gradient&& gradient, Solve&& solve) {
    std::vector<char> in_passive(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> passive;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (x[j] > 0.0) {
            in_passive[static_cast<std::size_t>(j)] = 1;
            passive.push_back(j);
        } else {
            x[j] = 0.0;
        }
    }

    Eigen::VectorXd w(n), z(n);
    int iterations = 0;

    auto fail = [&](const char* why) {
        std::ostringstream msg;
        msg << "nnls: " << why << " after " << iterations << " iterations (n=" << n << ", passive=" << passive.size()
            << ", tol=" << tol << ")";
        throw_numerical(msg.str());
    };

    // Step from a feasible x toward the passive-set solution until it is
    // strictly positive on the passive set.
    auto inner_loop = [&]() {
        for (;;) {
            if (++iterations > max_iter) fail("iteration cap exceeded");
            z.setZero();
            solve(passive, z);
            bool feasible = true;
            for (Eigen::Index j : passive)
                if (!(z[j] > 0.0)) feasible = false;
            if (feasible) {
                for (Eigen::Index j : passive) x[j] = z[j];
                return;
            }
            double alpha = 1.0;
            Eigen::Index blocking = -1;
            for (Eigen::Index j : passive) {
                if (!(z[j] > 0.0)) {
                    const double denom = x[j] - z[j];
                    const double a = denom > 0.0 ? x[j] / denom : 0.0;
                    if (blocking < 0 || a < alpha) {
                        alpha = a;
                        blocking = j;
                    }
                }
            }
            for (Eigen::Index j : passive) x[j] += alpha * (z[j] - x[j]);
            x[blocking] = 0.0;
            std::vector<Eigen::Index> kept;
            for (Eigen::Index j : passive) {
                if (x[j] <= 0.0) {
                    x[j] = 0.0;
                    in_passive[static_cast<std::size_t>(j)] = 0;
                } else {
                    kept.push_back(j);
                }
            }
            passive = std::move(kept);
            if (passive.empty()) return;
        }
    };

    if (!passive.empty()) inner_loop();

    std::vector<char> rejected(static_cast<std::size_t>(n), 0);
    for (;;) {
        if (static_cast<Eigen::Index>(passive.size()) == n) break;
        gradient(x, w);
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (!in_passive[ju] && !rejected[ju] && w[j] > wmax) {
                wmax = w[j];
                best = j;
            }
        }
        if (best < 0) break;

        passive.push_back(best);
        in_passive[static_cast<std::size_t>(best)] = 1;
        if (++iterations > max_iter) fail("iteration cap exceeded");
        z.setZero();
        solve(passive, z);
        if (!(z[best] > 0.0)) {
            // Numerically dependent column: its multiplier cannot become positive.
            passive.pop_back();
            in_passive[static_cast<std::size_t>(best)] = 0;
            rejected[static_cast<std::size_t>(best)] = 1;
            continue;
        }
        std::fill(rejected.begin(), rejected.end(), 0);
        bool feasible = true;
        for (Eigen::Index j : passive)
            if (!(z[j] > 0.0)) feasible = false;
        if (feasible) {
            for (Eigen::Index j : passive) x[j] = z[j];
            continue;
        }
        --iterations;  // inner_loop re-solves the same system
        inner_loop();
    }
    return iterations;
}

int default_cap(Eigen::Index n, const NnlsOptions& opts) {
    return opts.max_iterations > 0 ? opts.max_iterations : std::max<int>(30, 3 * static_cast<int>(n));
}

double default_tol(const Eigen::VectorXd& atb, const NnlsOptions& opts) {
    if (opts.tolerance > 0.0) return opts.tolerance;
    const double scale = atb.size() > 0 ? atb.cwiseAbs().maxCoeff() : 0.0;
    return 1e-10 * std::max(1.0, scale);
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const NnlsOptions& opts) {
    if (A.rows() < 1 || A.cols() < 1) throw_invalid("nnls: empty system");
    if (A.rows() != b.size()) throw_invalid("nnls: A and b have incompatible sizes");
    if (!all_finite(A) || !b.allFinite()) throw_numerical("nnls: non-finite input");

    const Eigen::Index n = A.cols();
    const Eigen::VectorXd atb = A.transpose() * b;
    NnlsResult res;
    res.x = Eigen::VectorXd::Zero(n);

    Eigen::MatrixXd sub;
    auto gradient = [&](const Eigen::VectorXd& x, Eigen::VectorXd& w) { w.noalias() = A.transpose() * (b - A * x); };
    auto solve = [&](const std::vector<Eigen::Index>& passive, Eigen::VectorXd& z) {
        const auto k = static_cast<Eigen::Index>(passive.size());
        sub.resize(A.rows(), k);
        for (Eigen::Index c = 0; c < k; ++c) sub.col(c) = A.col(passive[static_cast<std::size_t>(c)]);
        const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
        for (Eigen::Index c = 0; c < k; ++c) z[passive[static_cast<std::size_t>(c)]] = s[c];
    };
    res.iterations = active_set(n, default_tol(atb, opts), default_cap(n, opts), res.x, gradient, solve);
    res.residual_norm = (A * res.x - b).norm();
    return res;
}

NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& atb, const Eigen::VectorXd& warm_start,
                     const NnlsOptions& opts) {
    const Eigen::Index n = gram.cols();
    if (n < 1 || gram.rows() != n || atb.size() != n) throw_invalid("nnls_gram: incompatible sizes");
    if (!all_finite(gram) || !atb.allFinite()) throw_numerical("nnls_gram: non-finite input");

    NnlsResult res;
    if (warm_start.size() == n) res.x = warm_start.cwiseMax(0.0);
    else res.x = Eigen::VectorXd::Zero(n);
    res.residual_norm = -1.0;

    Eigen::MatrixXd sub;
    Eigen::VectorXd rhs;
    auto gradient = [&](const Eigen::VectorXd& x, Eigen::VectorXd& w) { w.noalias() = atb - gram * x; };
    auto solve = [&](const std::vector<Eigen::Index>& passive, Eigen::VectorXd& z) {
        const auto k = static_cast<Eigen::Index>(passive.size());
        sub.resize(k, k);
        rhs.resize(k);
        for (Eigen::Index r = 0; r < k; ++r) {
            const Eigen::Index pr = passive[static_cast<std::size_t>(r)];
            rhs[r] = atb[pr];
            for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = gram(pr, passive[static_cast<std::size_t>(c)]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        Eigen::VectorXd s;
        if (llt.info() == Eigen::Success) s = llt.solve(rhs);
        else s = sub.colPivHouseholderQr().solve(rhs);
        for (Eigen::Index c = 0; c < k; ++c) z[passive[static_cast<std::size_t>(c)]] = s[c];
    };
    res.iterations = active_set(n, default_tol(atb, opts), default_cap(n, opts), res.x, gradient, solve);
    return res;
}

Eigen::MatrixXd second_difference_matrix(std::size_t p) {
    if (p < 3) throw_invalid("second_difference_matrix: need p >= 3");
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n - 2, n);
    for (Eigen::Index r = 0; r < n - 2; ++r) {
        L(r, r) = 1.0;
        L(r, r + 1) = -2.0;
        L(r, r + 2) = 1.0;
    }
    return L;
}

NnlsResult nnls_regularized(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& L, double mu,
                            const NnlsOptions& opts) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw_invalid("nnls_regularized: mu must be finite and >= 0");
    if (L.cols() != A.cols()) throw_invalid("nnls_regularized: L and A column counts differ");
    Eigen::MatrixXd stacked(A.rows() + L.rows(), A.cols());
    stacked << A, mu * L;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(stacked.rows());
    rhs.head(b.size()) = b;
    NnlsResult res = nnls(stacked, rhs, opts);
    res.residual_norm = (A * res.x - b).norm();
    return res;
}

}  // namespace msmap
