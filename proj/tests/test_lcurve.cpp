#include <gtest/gtest.h>

#include <random>

#include "msmap/epg.hpp"
#include "msmap/lcurve.hpp"
#include "msmap/nnls.hpp"
#include "oracles.hpp"

using namespace msmap;

namespace {

struct TwoPeak {
    Eigen::MatrixXd D;
    Eigen::VectorXd clean;
    Eigen::MatrixXd L = second_difference_matrix(60);
};

TwoPeak two_peak() {
    TwoPeak t;
    const T2Grid grid = make_t2_grid(10, 2000, 60);
    t.D = build_dictionary(grid, AcquisitionMET2{}, 180).entries;
    EpgParams p;
    p.t2 = 20;
    const auto a = epg_echo_train(p);
    p.t2 = 80;
    const auto b = epg_echo_train(p);
    t.clean.resize(32);
    for (int n = 0; n < 32; ++n) t.clean[n] = 0.15 * a[n] + 0.85 * b[n];
    return t;
}

Eigen::VectorXd noisy(const Eigen::VectorXd& clean, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, sigma);
    Eigen::VectorXd s(clean.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = std::hypot(clean[i] + nd(rng), nd(rng));
    return s;
}

}  // namespace

// The selected mu must fall inside the peak of curvature found on a dense
// 512-point sweep: the contiguous run around the dense maximum where the
// curvature stays above half its peak value, widened by one coarse step.
TEST(LCurve, CornerInsideDenseCurvaturePeak) {
    const TwoPeak t = two_peak();
    const auto coarse = logspace(1e-6, 10, 64);
    const auto dense = logspace(1e-6, 10, 512);
    const double coarse_step = std::log(coarse[1] / coarse[0]);
    int inside = 0;
    const int trials = 5;
    for (int trial = 0; trial < trials; ++trial) {
        const Eigen::VectorXd s = noisy(t.clean, t.clean[0] / 100.0, 100 + trial);
        const LCurve lc = lcurve_select_mu(t.D, s, t.L, coarse);
        std::vector<double> rho, eta;
        for (double mu : dense) {
            const Eigen::VectorXd x = nnls_regularized(t.D, s, t.L, mu).x;
            rho.push_back((t.D * x - s).norm());
            eta.push_back((t.L * x).norm());
        }
        const auto kappa = oracle::dense_curvature(rho, eta);
        const auto peak = static_cast<std::size_t>(std::max_element(kappa.begin(), kappa.end()) - kappa.begin());
        std::size_t lo = peak, hi = peak;
        while (lo > 0 && kappa[lo - 1] >= 0.5 * kappa[peak]) --lo;
        while (hi + 1 < kappa.size() && kappa[hi + 1] >= 0.5 * kappa[peak]) ++hi;
        const double lmu = std::log(lc.mu_star);
        const bool ok = !lc.at_boundary && lmu >= std::log(dense[lo]) - coarse_step && lmu <= std::log(dense[hi]) + coarse_step;
        inside += ok;
        EXPECT_TRUE(ok) << "trial " << trial << ": mu* " << lc.mu_star << " dense peak " << dense[peak] << " ["
                        << dense[lo] << ", " << dense[hi] << "]";
    }
    EXPECT_EQ(inside, trials);
}

// Without noise the curve is a stationary plateau at small mu followed by a
// slope; the corner is the bend leaving the plateau, far below any noisy mu*.
TEST(LCurve, NoiselessCornerAtSmallMuEnd) {
    const TwoPeak t = two_peak();
    const auto mus = logspace(1e-6, 10, 64);
    const LCurve lc = lcurve_select_mu(t.D, t.clean, t.L, mus);
    EXPECT_FALSE(lc.at_boundary);
    EXPECT_LT(lc.corner, mus.size() / 2);
    double noisy_min = 1e300;
    for (double snr : {1000.0, 300.0, 100.0, 50.0})
        for (int trial = 0; trial < 3; ++trial)
            noisy_min = std::min(noisy_min,
                                 lcurve_select_mu(t.D, noisy(t.clean, t.clean[0] / snr, 100 + trial), t.L, mus).mu_star);
    EXPECT_LT(lc.mu_star, 0.1 * noisy_min);
    // the plateau itself is skipped: the corner sits after the curve starts moving
    EXPECT_GT(lc.residual_norm[lc.corner], 1.5 * lc.residual_norm[0]);
}

TEST(LCurve, TradeOffIsMonotone) {
    const TwoPeak t = two_peak();
    const Eigen::VectorXd s = noisy(t.clean, 0.008, 3);
    const LCurve lc = lcurve_select_mu(t.D, s, t.L, logspace(1e-6, 10, 64));
    for (std::size_t i = 1; i < lc.mu.size(); ++i) {
        EXPECT_GE(lc.residual_norm[i], lc.residual_norm[i - 1] * (1 - 1e-9));
        EXPECT_LE(lc.seminorm[i], lc.seminorm[i - 1] * (1 + 1e-9) + 1e-15);
    }
}

TEST(LCurve, CornerOfAnalyticCurve) {
    // log eta = 1 / log rho shifted: y = 1/x has its curvature maximum at x = 1.
    std::vector<double> rho, eta;
    for (double x : logspace(0.1, 10, 64)) {
        rho.push_back(std::exp(x));
        eta.push_back(std::exp(1.0 / x));
    }
    bool boundary = true;
    const std::size_t c = lcurve_corner(rho, eta, boundary);
    EXPECT_FALSE(boundary);
    EXPECT_NEAR(std::log(rho[c]), 1.0, 0.08);
}

TEST(LCurve, ConcaveCurveHasNoCorner) {
    std::vector<double> rho, eta;
    for (double x : logspace(0.1, 10, 32)) {
        rho.push_back(std::exp(x));
        eta.push_back(std::exp(-x * x));
    }
    bool boundary = false;
    EXPECT_EQ(lcurve_corner(rho, eta, boundary), 0u);
    EXPECT_TRUE(boundary);
}

TEST(LCurve, FlatResidualIsAnError) {
    const std::vector<double> rho(10, 1.0), eta{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
    bool boundary = false;
    EXPECT_THROW(lcurve_corner(rho, eta, boundary), Error);
}

TEST(LCurve, GridValidation) {
    EXPECT_THROW(validate_mu_grid(std::vector<double>{1, 2, 3}), Error);
    EXPECT_THROW(validate_mu_grid(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 7}), Error);
    EXPECT_NO_THROW(validate_mu_grid(logspace(1e-6, 10, 8)));
}
