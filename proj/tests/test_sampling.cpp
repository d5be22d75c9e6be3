#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "msmap/sampling.hpp"
#include "oracles.hpp"

using namespace msmap;

namespace {

std::vector<char> mask_vector(const Mask& m) {
    std::vector<char> out(m.voxels());
    for (std::size_t v = 0; v < m.voxels(); ++v) out[v] = m[v];
    return out;
}

Volume filled(Index3 dims, double value) {
    Volume v(dims);
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = value;
    return v;
}

}  // namespace

TEST(LesionThreshold, StrictInequality) {
    Volume s({4, 1, 1});
    s[0] = 0.0;
    s[1] = 0.5;
    s[2] = 0.76;
    s[3] = 1.0;
    EXPECT_EQ(extract_lesion_voxels(s), (std::vector<std::size_t>{2, 3}));
    s[2] = 0.75;
    EXPECT_EQ(extract_lesion_voxels(s), (std::vector<std::size_t>{3}));
    EXPECT_TRUE(extract_lesion_voxels(Volume({3, 3, 3})).empty());
}

TEST(LesionThreshold, MonotoneInThreshold) {
    Volume s({10, 10, 10});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t n = 0; n < s.size(); ++n) s[n] = u(rng);
    std::size_t prev = s.voxels() + 1;
    for (double t = 0.0; t <= 1.0; t += 0.05) {
        const std::size_t c = extract_lesion_voxels(s, t).size();
        EXPECT_LE(c, prev);
        prev = c;
    }
    EXPECT_THROW(extract_lesion_voxels(s, 1.5), Error);
}

TEST(DistanceTransform, CornerOfCentredVoxel) {
    Mask m({9, 9, 9});
    m.set(4 + 9 * (4 + 9 * 4), true);
    const Volume d = distance_transform_edt(m);
    EXPECT_NEAR(d.at(0, 0, 0), std::sqrt(48.0), 1e-12);
    EXPECT_EQ(d.at(4, 4, 4), 0.0);
    EXPECT_EQ(distance_transform_chebyshev(m).at(0, 0, 0), 4.0);
}

TEST(DistanceTransform, EmptyMask) {
    EXPECT_THROW(distance_transform_edt(Mask({3, 3, 3})), Error);
    EXPECT_THROW(distance_transform_chebyshev(Mask({3, 3, 3})), Error);
}

TEST(DistanceTransform, MatchesBruteForceOnRandomMasks) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0, 1);
        const double density = 0.002 + 0.02 * u(rng);
        Mask m({20, 20, 20});
        for (std::size_t v = 0; v < m.voxels(); ++v) m.set(v, u(rng) < density);
        if (m.empty()) m.set(seed * 37 % m.voxels(), true);
        const auto mv = mask_vector(m);
        const auto euclid = oracle::distance_bruteforce(mv, 20, 20, 20, false);
        const auto cheb = oracle::distance_bruteforce(mv, 20, 20, 20, true);
        const Volume de = distance_transform_edt(m), dc = distance_transform_chebyshev(m);
        for (std::size_t v = 0; v < m.voxels(); ++v) {
            ASSERT_EQ(de[v], euclid[v]) << "seed " << seed << " voxel " << v;
            ASSERT_EQ(dc[v], cheb[v]) << "seed " << seed << " voxel " << v;
        }
    }
}

TEST(DistanceTransform, AnisotropicGrid) {
    Mask m({13, 4, 7});
    m.set(0, true);
    m.set(12 + 13 * (3 + 4 * 6), true);
    const auto ref = oracle::distance_bruteforce(mask_vector(m), 13, 4, 7, false);
    const Volume d = distance_transform_edt(m);
    for (std::size_t v = 0; v < m.voxels(); ++v) EXPECT_EQ(d[v], ref[v]);
}

TEST(NawmRing, SingleLesionVoxelIn15Cube) {
    Volume scores({15, 15, 15});
    const std::size_t centre = 7 + 15 * (7 + 15 * 7);
    scores[centre] = 0.4;
    const Mask wm({15, 15, 15}, true);
    Mask lesion({15, 15, 15});
    lesion.set(centre, true);
    const auto brute = oracle::distance_bruteforce(mask_vector(lesion), 15, 15, 15, false);
    std::vector<std::size_t> expected;
    for (std::size_t v = 0; v < brute.size(); ++v)
        if (brute[v] >= 6.0) expected.push_back(v);
    const RingResult r = nawm_ring(scores, wm, 6.0);
    EXPECT_FALSE(r.no_lesion);
    EXPECT_EQ(r.voxels, expected);
    for (std::size_t v : r.voxels) {
        const Index3 c = scores.voxel_coords(v);
        EXPECT_GT(std::max({std::abs(int(c[0]) - 7), std::abs(int(c[1]) - 7), std::abs(int(c[2]) - 7)}), 1);
    }
}

TEST(NawmRing, RespectsWmMaskAndMetric) {
    Volume scores({15, 15, 15});
    scores[7 + 15 * (7 + 15 * 7)] = 1.0;
    Mask wm({15, 15, 15});
    for (std::size_t v = 0; v < wm.voxels(); v += 2) wm.set(v, true);
    const RingResult eu = nawm_ring(scores, wm, 6.0);
    const RingResult ch = nawm_ring(scores, wm, 6.0, DistanceMetric::Chebyshev);
    for (std::size_t v : eu.voxels) EXPECT_TRUE(wm[v]);
    // Chebyshev distance never exceeds Euclidean, so its ring is a subset.
    EXPECT_TRUE(std::includes(eu.voxels.begin(), eu.voxels.end(), ch.voxels.begin(), ch.voxels.end()));
    EXPECT_LT(ch.voxels.size(), eu.voxels.size());
}

TEST(NawmRing, EmptyScoreMapReturnsAllWm) {
    const Mask wm({5, 5, 5}, true);
    const RingResult r = nawm_ring(Volume({5, 5, 5}), wm, 6.0);
    EXPECT_TRUE(r.no_lesion);
    EXPECT_EQ(r.voxels.size(), 125u);
    EXPECT_THROW(nawm_ring(Volume({5, 5, 5}), wm, 0.0), Error);
    EXPECT_THROW(nawm_ring(Volume({5, 5, 4}), wm, 6.0), Error);
}

TEST(NawmRing, DisjointFromLesionSet) {
    Volume scores({20, 20, 20});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int blob = 0; blob < 3; ++blob) {
        const std::size_t c = static_cast<std::size_t>(u(rng) * 8000);
        scores[c] = 0.9;
        if (c + 1 < 8000) scores[c + 1] = 0.3;
    }
    const auto lesion = extract_lesion_voxels(scores);
    const auto ring = nawm_ring(scores, Mask({20, 20, 20}, true), 6.0).voxels;
    std::set<std::size_t> l(lesion.begin(), lesion.end());
    for (std::size_t v : ring) EXPECT_EQ(l.count(v), 0u);
}

TEST(ControlVoxels, FullAndEmpty) {
    EXPECT_EQ(control_voxels(Mask({10, 10, 10}, true)).size(), 1000u);
    EXPECT_THROW(control_voxels(Mask({10, 10, 10})), Error);
}

TEST(FeatureTable, GathersRows) {
    const Index3 dims{4, 3, 2};
    FeatureVolumes fv{filled(dims, 0), filled(dims, 0), filled(dims, 0), filled(dims, 0), filled(dims, 0)};
    const auto list = fv.list();
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        for (std::size_t v = 0; v < 24; ++v) const_cast<Volume*>(list[f])->value(v) = 100.0 * f + v;
    const FeatureTable t = build_feature_table(fv, {{Label::L, {1, 5}}, {Label::N, {7, 20, 23}}}, "s1");
    ASSERT_EQ(t.rows.size(), 5u);
    EXPECT_EQ(t.count(Label::L), 2u);
    EXPECT_EQ(t.count(Label::N), 3u);
    EXPECT_EQ(t.dropped, 0u);
    const FeatureRow& r = t.rows[3];
    EXPECT_EQ(r.label, Label::N);
    EXPECT_EQ(r.subject, "s1");
    EXPECT_EQ(r.i, 0u);
    EXPECT_EQ(r.j, 2u);
    EXPECT_EQ(r.k, 1u);
    for (std::size_t f = 0; f < kNumFeatures; ++f) EXPECT_EQ(r.features[f], 100.0 * f + 20);
}

TEST(FeatureTable, LabelConflict) {
    const Index3 dims{3, 3, 3};
    FeatureVolumes fv{filled(dims, 1), filled(dims, 1), filled(dims, 1), filled(dims, 1), filled(dims, 1)};
    EXPECT_THROW(build_feature_table(fv, {{Label::L, {1, 2}}, {Label::N, {2, 3}}}, "s"), Error);
}

TEST(FeatureTable, DropsNonFiniteRows) {
    const Index3 dims{3, 3, 3};
    FeatureVolumes fv{filled(dims, 1), filled(dims, 1), filled(dims, 1), filled(dims, 1), filled(dims, 1)};
    fv.met2_fm[4] = std::nan("");
    fv.smt_fe[9] = std::numeric_limits<double>::infinity();
    const FeatureTable t = build_feature_table(fv, {{Label::C, control_voxels(Mask(dims, true))}}, "c");
    EXPECT_EQ(t.dropped, 2u);
    EXPECT_EQ(t.rows.size(), 25u);
}

TEST(FeatureTable, DimensionMismatch) {
    const Index3 dims{3, 3, 3};
    FeatureVolumes fv{filled(dims, 1), filled(dims, 1), filled({3, 3, 2}, 1), filled(dims, 1), filled(dims, 1)};
    EXPECT_THROW(build_feature_table(fv, {{Label::L, {0}}}, "s"), Error);
}

TEST(Labels, ParseRoundTrip) {
    for (Label l : {Label::L, Label::N, Label::C}) EXPECT_EQ(parse_label(std::string(1, label_char(l))), l);
    EXPECT_THROW(parse_label("X"), Error);
    EXPECT_EQ(parse_metric("chebyshev"), DistanceMetric::Chebyshev);
    EXPECT_THROW(parse_metric("manhattan"), Error);
}
