#include "msmap/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace msmap {

char label_char(Label l) noexcept {
    switch (l) {
        case Label::L: return 'L';
        case Label::N: return 'N';
        case Label::C: return 'C';
    }
    return '?';
}

Label parse_label(const std::string& s) {
    if (s == "L") return Label::L;
    if (s == "N") return Label::N;
    if (s == "C") return Label::C;
    throw Error(ErrorKind::InputFormat, "unknown label '" + s + "' (expected L, N or C)");
}

DistanceMetric parse_metric(const std::string& s) {
    if (s == "euclidean") return DistanceMetric::Euclidean;
    if (s == "chebyshev") return DistanceMetric::Chebyshev;
    throw_invalid("unknown distance metric '" + s + "' (euclidean|chebyshev)");
}

std::vector<std::size_t> extract_lesion_voxels(const Volume& scores, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw_invalid("lesion threshold must lie in [0, 1]");
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < scores.voxels(); ++v)
        if (scores.value(v) > threshold) out.push_back(v);
    return out;
}

RingResult nawm_ring(const Volume& scores, const Mask& wm_mask, double min_dist, DistanceMetric metric) {
    if (!(min_dist > 0.0)) throw_invalid("ring distance must be > 0");
    require_same_grid(scores.dims(), wm_mask.dims(), "nawm_ring");
    Mask lesion(scores.dims());
    for (std::size_t v = 0; v < scores.voxels(); ++v) lesion.set(v, scores.value(v) > 0.0);

    RingResult out;
    if (lesion.empty()) {
        out.no_lesion = true;
        out.voxels = wm_mask.indices();
        return out;
    }
    const Volume dist = distance_transform(lesion, metric);
    for (std::size_t v = 0; v < wm_mask.voxels(); ++v)
        if (wm_mask[v] && dist[v] >= min_dist) out.voxels.push_back(v);
    return out;
}

std::vector<std::size_t> control_voxels(const Mask& wm_mask) {
    auto idx = wm_mask.indices();
    if (idx.empty()) throw_invalid("control WM mask is empty");
    return idx;
}

void FeatureTable::append(const FeatureTable& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    dropped += other.dropped;
}

std::size_t FeatureTable::count(Label l) const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [l](const FeatureRow& r) { return r.label == l; }));
}

FeatureTable build_feature_table(const FeatureVolumes& features, const std::vector<LabeledIndices>& sets,
                                 const std::string& subject) {
    const auto vols = features.list();
    const Index3 dims = vols[0]->dims();
    for (const Volume* v : vols) require_same_grid(dims, v->dims(), "build_feature_table");

    const std::size_t nvox = dims[0] * dims[1] * dims[2];
    std::vector<int> owner(nvox, -1);
    for (std::size_t s = 0; s < sets.size(); ++s)
        for (std::size_t v : sets[s].voxels) {
            if (v >= nvox) throw_dims("build_feature_table: voxel index outside the grid");
            if (owner[v] >= 0 && sets[static_cast<std::size_t>(owner[v])].label != sets[s].label)
                throw_invalid("build_feature_table: label conflict at voxel " + std::to_string(v));
            owner[v] = static_cast<int>(s);
        }

    FeatureTable table;
    for (const LabeledIndices& set : sets) {
        for (std::size_t v : set.voxels) {
            FeatureRow row;
            row.subject = subject;
            const Index3 c = vols[0]->voxel_coords(v);
            row.i = c[0];
            row.j = c[1];
            row.k = c[2];
            row.label = set.label;
            bool finite = true;
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                row.features[f] = vols[f]->value(v);
                finite = finite && std::isfinite(row.features[f]);
            }
            if (!finite) {
                ++table.dropped;
                continue;
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

}  // namespace msmap
