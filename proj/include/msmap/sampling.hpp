#pragma once

#include <array>
#include <string>
#include <vector>

#include "msmap/core.hpp"

namespace msmap {

enum class Label { L, N, C };

char label_char(Label l) noexcept;
Label parse_label(const std::string& s);

enum class DistanceMetric { Euclidean, Chebyshev };

DistanceMetric parse_metric(const std::string& s);

/// Exact Euclidean distance (voxel units) from every voxel to the nearest
/// true voxel of `mask`. Separable lower-envelope algorithm.
Volume distance_transform_edt(const Mask& mask);

/// Chessboard distance to the nearest true voxel.
Volume distance_transform_chebyshev(const Mask& mask);

Volume distance_transform(const Mask& mask, DistanceMetric metric);

/// Flat voxel indices with score > threshold (strict).
std::vector<std::size_t> extract_lesion_voxels(const Volume& scores, double threshold = 0.75);

struct RingResult {
    std::vector<std::size_t> voxels;
    bool no_lesion = false;  // score map was all zero; every WM voxel returned
};

/// WM voxels whose distance to any voxel with score > 0 is at least min_dist.
RingResult nawm_ring(const Volume& scores, const Mask& wm_mask, double min_dist = 6.0,
                     DistanceMetric metric = DistanceMetric::Euclidean);

std::vector<std::size_t> control_voxels(const Mask& wm_mask);

inline constexpr std::size_t kNumFeatures = 5;
inline const std::array<std::string, kNumFeatures> kFeatureNames{"smt_fi", "smt_fe", "met2_fm", "met2_fie",
                                                                 "met2_fcsf"};

struct FeatureVolumes {
    Volume smt_fi;
    Volume smt_fe;
    Volume met2_fm;
    Volume met2_fie;
    Volume met2_fcsf;

    std::array<const Volume*, kNumFeatures> list() const { return {&smt_fi, &smt_fe, &met2_fm, &met2_fie, &met2_fcsf}; }
};

struct LabeledIndices {
    Label label;
    std::vector<std::size_t> voxels;
};

struct FeatureRow {
    std::string subject;
    std::size_t i = 0, j = 0, k = 0;
    Label label = Label::L;
    std::array<double, kNumFeatures> features{};
};

struct FeatureTable {
    std::vector<FeatureRow> rows;
    std::size_t dropped = 0;  // rows removed for non-finite features

    void append(const FeatureTable& other);
    std::size_t count(Label l) const;
};

/// One row per (voxel, label). Sets must be disjoint.
FeatureTable build_feature_table(const FeatureVolumes& features, const std::vector<LabeledIndices>& sets,
                                 const std::string& subject);

}  // namespace msmap
