#include "msmap/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msmap {

namespace {

Eigen::Matrix4d spacing_affine(const Vec3& spacing) {
    Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
    for (int d = 0; d < 3; ++d) a(d, d) = spacing[d];
    return a;
}

}  // namespace

Volume::Volume(Index3 dims, std::size_t frames, Vec3 spacing)
    : Volume(dims, frames, spacing, spacing_affine(spacing)) {}

Volume::Volume(Index3 dims, std::size_t frames, Vec3 spacing, const Eigen::Matrix4d& affine)
    : dims_(dims), frames_(frames), spacing_(spacing), affine_(affine) {
    for (std::size_t d = 0; d < 3; ++d) {
        if (dims[d] == 0) throw_invalid("volume dimensions must be positive");
        if (!(spacing[d] > 0.0) || !std::isfinite(spacing[d])) throw_invalid("voxel spacing must be positive");
    }
    if (frames == 0) throw_invalid("volume must have at least one frame");
    data_.assign(dims[0] * dims[1] * dims[2] * frames, 0.0);
}

Volume Volume::like(const Volume& other, std::size_t frames) {
    return Volume(other.dims_, frames, other.spacing_, other.affine_);
}

Index3 Volume::voxel_coords(std::size_t voxel) const noexcept {
    const std::size_t i = voxel % dims_[0];
    const std::size_t rest = voxel / dims_[0];
    return {i, rest % dims_[1], rest / dims_[1]};
}

void Volume::series(std::size_t voxel, std::vector<double>& out) const {
    out.resize(frames_);
    const std::size_t stride = voxels();
    for (std::size_t t = 0; t < frames_; ++t) out[t] = data_[voxel + stride * t];
}

std::vector<double> Volume::series(std::size_t voxel) const {
    std::vector<double> out;
    series(voxel, out);
    return out;
}

Volume Volume::frame(std::size_t t) const {
    if (t >= frames_) throw_invalid("frame index out of range");
    Volume out = like(*this, 1);
    const std::size_t n = voxels();
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(n * t), n, out.data_.begin());
    return out;
}

void Volume::set_frame(std::size_t t, const Volume& src) {
    if (t >= frames_) throw_invalid("frame index out of range");
    require_same_grid(dims_, src.dims(), "set_frame");
    const std::size_t n = voxels();
    std::copy_n(src.data_.begin(), n, data_.begin() + static_cast<std::ptrdiff_t>(n * t));
}

Mask::Mask(Index3 dims, bool fill) : dims_(dims), data_(dims[0] * dims[1] * dims[2], fill ? 1 : 0) {}

Mask Mask::from_volume(const Volume& vol, double threshold) {
    Mask m(vol.dims());
    for (std::size_t v = 0; v < vol.voxels(); ++v) m.set(v, vol.value(v) > threshold);
    return m;
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Mask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < data_.size(); ++v)
        if (data_[v]) out.push_back(v);
    return out;
}

Volume Mask::to_volume(const Volume& geometry) const {
    require_same_grid(dims_, geometry.dims(), "mask to volume");
    Volume out = Volume::like(geometry, 1);
    for (std::size_t v = 0; v < data_.size(); ++v) out.value(v) = data_[v] ? 1.0 : 0.0;
    return out;
}

void require_same_grid(const Index3& a, const Index3& b, const std::string& what) {
    if (a != b) {
        throw_dims(what + ": grid mismatch (" + std::to_string(a[0]) + "x" + std::to_string(a[1]) + "x" +
                   std::to_string(a[2]) + " vs " + std::to_string(b[0]) + "x" + std::to_string(b[1]) + "x" +
                   std::to_string(b[2]) + ")");
    }
}

void AcquisitionMET2::validate() const {
    if (!(delta_te > 0.0) || !std::isfinite(delta_te)) throw_invalid("echo spacing must be positive");
    if (n_echoes < 2) throw_invalid("at least two echoes are required");
    if (!(prescribed_fa > 0.0 && prescribed_fa <= 180.0)) throw_invalid("prescribed flip angle must lie in (0, 180]");
}

std::vector<double> DiffusionScheme::shell_bvals() const {
    std::vector<double> out;
    out.reserve(shells.size());
    for (const auto& s : shells) out.push_back(s.nominal);
    return out;
}

ShellGrouping group_shells(std::span<const double> bvals, double tolerance) {
    if (bvals.empty()) throw_invalid("group_shells: no b-values");
    if (!(tolerance >= 0.0)) throw_invalid("group_shells: tolerance must be non-negative");
    for (double b : bvals)
        if (!(b >= 0.0) || !std::isfinite(b)) throw_invalid("group_shells: b-values must be finite and non-negative");

    ShellGrouping out;
    std::vector<std::size_t> weighted;
    for (std::size_t f = 0; f < bvals.size(); ++f) {
        if (bvals[f] <= tolerance) out.b0_indices.push_back(f);
        else weighted.push_back(f);
    }
    std::stable_sort(weighted.begin(), weighted.end(),
                     [&](std::size_t a, std::size_t b) { return bvals[a] < bvals[b]; });

    // Single-linkage clusters over the sorted weighted frames.
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t idx = 0; idx < weighted.size(); ++idx) {
        const std::size_t f = weighted[idx];
        if (clusters.empty() || bvals[f] - bvals[clusters.back().back()] > tolerance) clusters.emplace_back();
        clusters.back().push_back(f);
    }

    std::vector<double> nominals;
    if (!out.b0_indices.empty()) nominals.push_back(0.0);
    for (auto& members : clusters) {
        double sum = 0.0;
        for (std::size_t f : members) sum += bvals[f];
        Shell shell;
        shell.nominal = sum / static_cast<double>(members.size());
        std::sort(members.begin(), members.end());
        shell.frames = members;
        nominals.push_back(shell.nominal);
        out.shells.push_back(std::move(shell));
    }

    for (std::size_t f = 0; f < bvals.size(); ++f) {
        int matches = 0;
        for (double nominal : nominals)
            if (std::abs(bvals[f] - nominal) <= tolerance) ++matches;
        if (matches != 1) {
            throw_invalid("group_shells: frame " + std::to_string(f) + " (b=" + std::to_string(bvals[f]) +
                          ") matches " + std::to_string(matches) + " nominal b-values; grouping is ambiguous");
        }
    }
    return out;
}

DiffusionScheme make_scheme(std::vector<double> bvals, std::vector<Vec3> bvecs, double tolerance) {
    if (bvals.size() != bvecs.size()) throw_invalid("scheme: b-value and direction counts differ");
    ShellGrouping g = group_shells(bvals, tolerance);
    DiffusionScheme s;
    s.bvals = std::move(bvals);
    s.bvecs = std::move(bvecs);
    s.shells = std::move(g.shells);
    s.b0_indices = std::move(g.b0_indices);
    return s;
}

T2Grid::T2Grid(std::vector<double> points, bool log_spaced) : points_(std::move(points)), log_spaced_(log_spaced) {
    if (points_.empty()) throw_invalid("T2 grid is empty");
    for (std::size_t j = 0; j < points_.size(); ++j) {
        if (!(points_[j] > 0.0) || !std::isfinite(points_[j])) throw_invalid("T2 grid points must be positive");
        if (j > 0 && !(points_[j] > points_[j - 1])) throw_invalid("T2 grid must be strictly increasing");
    }
}

T2Grid make_t2_grid(double t2_min, double t2_max, std::size_t p) {
    if (!(t2_min > 0.0) || !(t2_max > t2_min) || !std::isfinite(t2_max))
        throw_invalid("make_t2_grid: need 0 < t2_min < t2_max");
    if (p < 2) throw_invalid("make_t2_grid: need at least two points");
    return T2Grid(logspace(t2_min, t2_max, p), true);
}

std::vector<double> logspace(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo)) throw_invalid("logspace: need 0 < lo <= hi");
    if (count == 0) return {};
    if (count == 1) return {lo};
    std::vector<double> out(count);
    const double llo = std::log(lo);
    const double step = (std::log(hi) - llo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(llo + step * static_cast<double>(i));
    out.front() = lo;
    out.back() = hi;
    return out;
}

}  // namespace msmap
