#include <gtest/gtest.h>

#include <random>

#include "msmap/epg.hpp"
#include "msmap/met2.hpp"

using namespace msmap;

namespace {

std::vector<double> mixture(const std::vector<std::pair<double, double>>& parts, double fa) {
    std::vector<double> s(32, 0.0);
    for (const auto& [f, t2] : parts) {
        EpgParams p;
        p.t2 = t2;
        p.t1 = std::max(1000.0, t2);
        p.refocus_fa = fa;
        const auto e = epg_echo_train(p);
        for (int n = 0; n < 32; ++n) s[n] += f * e[n];
    }
    return s;
}

// Fraction of spectrum mass within `steps` grid points of the point nearest t2.
double mass_near(const T2Spectrum& sp, double t2, int steps) {
    const auto& pts = sp.grid.points();
    int c = 0;
    for (int j = 1; j < static_cast<int>(pts.size()); ++j)
        if (std::abs(std::log(pts[j] / t2)) < std::abs(std::log(pts[c] / t2))) c = j;
    double near = 0.0;
    for (int j = std::max(0, c - steps); j <= std::min<int>(static_cast<int>(pts.size()) - 1, c + steps); ++j)
        near += sp.amplitudes[j];
    return near / sp.amplitudes.sum();
}

}  // namespace

TEST(Met2Fit, FlipAngleAndSinglePeak) {
    const auto s = mixture({{1.0, 80.0}}, 150);
    const T2Grid grid = make_t2_grid(10, 2000, 60);
    const auto fas = fa_range(90, 180, 1);
    const Met2FitResult r = fit_voxel_spectrum(s, AcquisitionMET2{}, grid, fas);
    EXPECT_NEAR(r.fa, 150, 1);
    EXPECT_GE(mass_near(r.spectrum, 80.0, 1), 0.9);
    EXPECT_GE(r.spectrum.amplitudes.minCoeff(), 0.0);
}

TEST(Met2Fit, GridPointSpikeWithoutRegularization) {
    const T2Grid grid = make_t2_grid(10, 2000, 60);
    const double t2 = grid[25];
    const auto s = mixture({{1.0, t2}}, 180);
    Met2Config cfg;
    cfg.fixed_mu = 0.0;
    const Met2FitResult r = Met2Fitter(cfg).fit(s);
    EXPECT_DOUBLE_EQ(r.fa, 180);
    EXPECT_GE(r.spectrum.amplitudes[25] / r.spectrum.amplitudes.sum(), 0.999);
}

TEST(Met2Fit, TwoPeakMyelinMassMonteCarlo) {
    const auto clean = mixture({{0.15, 20.0}, {0.85, 80.0}}, 180);
    const double sigma = clean[0] / 100.0;
    const Met2Fitter fitter{Met2Config{}};
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd(0, sigma);
    const int draws = 100;
    double mean = 0.0;
    for (int d = 0; d < draws; ++d) {
        std::vector<double> s(32);
        for (int n = 0; n < 32; ++n) s[n] = std::hypot(clean[n] + nd(rng), nd(rng));
        mean += compartment_fractions(fitter.fit(s).spectrum).f_m / draws;
    }
    EXPECT_NEAR(mean, 0.15, 0.03);
}

TEST(Met2Fit, FlipAngleInvariantToScale) {
    const auto base = mixture({{0.2, 25.0}, {0.8, 70.0}}, 143);
    const Met2Fitter fitter{Met2Config{}};
    const double fa = fitter.fit(base).fa;
    for (double k : {0.01, 3.0, 1000.0}) {
        std::vector<double> s = base;
        for (double& v : s) v *= k;
        EXPECT_EQ(fitter.fit(s).fa, fa);
    }
}

TEST(Met2Fit, EmptyVoxel) {
    const std::vector<double> zero(32, 0.0);
    const T2Grid grid = make_t2_grid(10, 2000, 60);
    const auto fas = fa_range();
    EXPECT_THROW(fit_voxel_spectrum(zero, AcquisitionMET2{}, grid, fas), Error);
    try {
        fit_voxel_spectrum(zero, AcquisitionMET2{}, grid, fas);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Numerical);
    }
}

TEST(Fractions, WindowedSums) {
    const T2Grid grid(std::vector<double>{20.0, 80.0, 300.0});
    T2Spectrum sp{Eigen::Vector3d(0.2, 0.8, 0.0), grid};
    Fractions f = compartment_fractions(sp, {40, 200});
    EXPECT_DOUBLE_EQ(f.f_m, 0.2);
    EXPECT_DOUBLE_EQ(f.f_ie, 0.8);
    EXPECT_DOUBLE_EQ(f.f_csf, 0.0);
    sp.amplitudes = Eigen::Vector3d(0, 0, 1.0);
    f = compartment_fractions(sp);
    EXPECT_DOUBLE_EQ(f.f_csf, 1.0);
    EXPECT_DOUBLE_EQ(f.f_m + f.f_ie, 0.0);
}

TEST(Fractions, UniformSpectrumCountsPoints) {
    const T2Grid grid = make_t2_grid(10, 2000, 60);
    const T2Spectrum sp{Eigen::VectorXd::Ones(60), grid};
    int nm = 0, nie = 0, ncsf = 0;
    for (double t : grid.points()) (t < 40 ? nm : t < 200 ? nie : ncsf)++;
    const Fractions f = compartment_fractions(sp);
    EXPECT_NEAR(f.f_m, nm / 60.0, 1e-15);
    EXPECT_NEAR(f.f_ie, nie / 60.0, 1e-15);
    EXPECT_NEAR(f.f_csf, ncsf / 60.0, 1e-15);
}

TEST(Fractions, ZeroMass) {
    const T2Spectrum sp{Eigen::VectorXd::Zero(60), make_t2_grid(10, 2000, 60)};
    EXPECT_THROW(compartment_fractions(sp), Error);
}

TEST(Met2Volume, IdenticalVoxelsGiveSingleVoxelFit) {
    const auto s = mixture({{0.15, 20.0}, {0.85, 80.0}}, 160);
    Volume vol({8, 8, 8}, 32);
    for (std::size_t v = 0; v < vol.voxels(); ++v)
        for (int n = 0; n < 32; ++n) vol.value(v, n) = s[n];
    const Met2Config cfg;
    const Met2FitResult single = Met2Fitter(cfg).fit(s);
    const Fractions fr = compartment_fractions(single.spectrum);
    const Met2Maps maps = fit_met2_volume(vol, Mask({8, 8, 8}, true), cfg);
    for (std::size_t v = 0; v < vol.voxels(); ++v) {
        ASSERT_EQ(maps.f_m[v], fr.f_m);
        ASSERT_EQ(maps.f_ie[v], fr.f_ie);
        ASSERT_EQ(maps.f_csf[v], fr.f_csf);
        ASSERT_EQ(maps.fa_map[v], single.fa);
    }
}

TEST(Met2Volume, MaskedOutVoxelsAreZeroAndFractionsOnSimplex) {
    Volume vol({4, 4, 2}, 32);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.05, 0.3), fa(120, 180);
    for (std::size_t v = 0; v < vol.voxels(); ++v) {
        const double fm = u(rng);
        const auto s = mixture({{fm, 20.0}, {1 - fm, 80.0}}, fa(rng));
        for (int n = 0; n < 32; ++n) vol.value(v, n) = 500 * s[n];
    }
    Mask mask({4, 4, 2});
    for (std::size_t v = 0; v < mask.voxels(); v += 3) mask.set(v, true);
    const Met2Maps maps = fit_met2_volume(vol, mask, Met2Config{});
    for (std::size_t v = 0; v < vol.voxels(); ++v) {
        if (!mask[v]) {
            EXPECT_EQ(maps.f_m[v], 0.0);
            EXPECT_EQ(maps.f_ie[v], 0.0);
            EXPECT_EQ(maps.f_csf[v], 0.0);
            EXPECT_EQ(maps.fa_map[v], 0.0);
        } else {
            EXPECT_NEAR(maps.f_m[v] + maps.f_ie[v] + maps.f_csf[v], 1.0, 1e-9);
            for (double x : {maps.f_m[v], maps.f_ie[v], maps.f_csf[v]}) {
                EXPECT_GE(x, 0.0);
                EXPECT_LE(x, 1.0);
            }
        }
    }
}

TEST(Met2Volume, VoxelOrderDoesNotMatter) {
    Volume a({3, 2, 1}, 32), b({3, 2, 1}, 32);
    for (std::size_t v = 0; v < 6; ++v) {
        const auto s = mixture({{0.05 + 0.03 * v, 20.0}, {0.95 - 0.03 * v, 90.0}}, 130 + 8 * v);
        for (int n = 0; n < 32; ++n) {
            a.value(v, n) = s[n];
            b.value(5 - v, n) = s[n];
        }
    }
    const Mask all({3, 2, 1}, true);
    const Met2Maps ma = fit_met2_volume(a, all, Met2Config{}), mb = fit_met2_volume(b, all, Met2Config{});
    for (std::size_t v = 0; v < 6; ++v) {
        EXPECT_EQ(ma.f_m[v], mb.f_m[5 - v]);
        EXPECT_EQ(ma.fa_map[v], mb.fa_map[5 - v]);
    }
}

TEST(Met2Volume, DimensionMismatch) {
    const Volume vol({4, 4, 4}, 20);
    EXPECT_THROW(fit_met2_volume(vol, Mask({4, 4, 4}, true), Met2Config{}), Error);
    EXPECT_THROW(fit_met2_volume(Volume({4, 4, 4}, 32), Mask({4, 4, 5}, true), Met2Config{}), Error);
}
