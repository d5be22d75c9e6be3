#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace msmap {

enum class ErrorKind {
    InvalidArgument,
    InputFormat,
    DimensionMismatch,
    Numerical,
};

/// CLI exit code contract: 1 usage, 2 input format, 3 numerical failure.
constexpr int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return 1;
        case ErrorKind::InputFormat:
        case ErrorKind::DimensionMismatch: return 2;
        case ErrorKind::Numerical: return 3;
    }
    return 3;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return exit_code_for(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); }
[[noreturn]] inline void throw_numerical(const std::string& what) { throw Error(ErrorKind::Numerical, what); }
[[noreturn]] inline void throw_dims(const std::string& what) { throw Error(ErrorKind::DimensionMismatch, what); }

using Index3 = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;

/// Scalar image on a regular grid, optionally with a fourth (frame) axis.
/// Storage is x-fastest: offset = i + nx*(j + ny*(k + nz*t)).
class Volume {
public:
    Volume() = default;
    Volume(Index3 dims, std::size_t frames = 1, Vec3 spacing = {1.0, 1.0, 1.0});
    Volume(Index3 dims, std::size_t frames, Vec3 spacing, const Eigen::Matrix4d& affine);

    /// Same grid and geometry, `frames` frames, zero-filled.
    static Volume like(const Volume& other, std::size_t frames = 1);

    const Index3& dims() const noexcept { return dims_; }
    std::size_t nx() const noexcept { return dims_[0]; }
    std::size_t ny() const noexcept { return dims_[1]; }
    std::size_t nz() const noexcept { return dims_[2]; }
    std::size_t frames() const noexcept { return frames_; }
    std::size_t voxels() const noexcept { return dims_[0] * dims_[1] * dims_[2]; }
    std::size_t size() const noexcept { return data_.size(); }
    const Vec3& spacing() const noexcept { return spacing_; }
    const Eigen::Matrix4d& affine() const noexcept { return affine_; }
    void set_affine(const Eigen::Matrix4d& affine) { affine_ = affine; }

    std::size_t offset(std::size_t i, std::size_t j, std::size_t k, std::size_t t = 0) const noexcept {
        return i + dims_[0] * (j + dims_[1] * (k + dims_[2] * t));
    }
    std::size_t voxel_index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return i + dims_[0] * (j + dims_[1] * k);
    }
    Index3 voxel_coords(std::size_t voxel) const noexcept;

    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t t = 0) { return data_[offset(i, j, k, t)]; }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t t = 0) const { return data_[offset(i, j, k, t)]; }

    double& operator[](std::size_t n) { return data_[n]; }
    double operator[](std::size_t n) const { return data_[n]; }

    /// Value of frame t at a flat voxel index.
    double value(std::size_t voxel, std::size_t t = 0) const { return data_[voxel + voxels() * t]; }
    double& value(std::size_t voxel, std::size_t t = 0) { return data_[voxel + voxels() * t]; }

    /// Copy all frames of one voxel into `out` (resized to frames()).
    void series(std::size_t voxel, std::vector<double>& out) const;
    std::vector<double> series(std::size_t voxel) const;

    Volume frame(std::size_t t) const;
    void set_frame(std::size_t t, const Volume& src);

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_grid(const Volume& other) const noexcept { return dims_ == other.dims_; }

private:
    Index3 dims_{0, 0, 0};
    std::size_t frames_ = 0;
    Vec3 spacing_{1.0, 1.0, 1.0};
    Eigen::Matrix4d affine_ = Eigen::Matrix4d::Identity();
    std::vector<double> data_;
};

/// Binary voxel mask.
class Mask {
public:
    Mask() = default;
    explicit Mask(Index3 dims, bool fill = false);
    /// Voxels of `vol` (frame 0) with value > threshold.
    static Mask from_volume(const Volume& vol, double threshold = 0.0);

    const Index3& dims() const noexcept { return dims_; }
    std::size_t voxels() const noexcept { return data_.size(); }
    bool operator[](std::size_t n) const { return data_[n] != 0; }
    void set(std::size_t n, bool v) { data_[n] = v ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    std::vector<std::size_t> indices() const;
    Volume to_volume(const Volume& geometry) const;

private:
    Index3 dims_{0, 0, 0};
    std::vector<std::uint8_t> data_;
};

/// Throw DimensionMismatch unless the spatial grids agree.
void require_same_grid(const Index3& a, const Index3& b, const std::string& what);

struct AcquisitionMET2 {
    double delta_te = 10.68;     // ms
    int n_echoes = 32;
    double prescribed_fa = 180.0;  // degrees

    void validate() const;
};

struct Shell {
    double nominal = 0.0;  // s/mm^2
    std::vector<std::size_t> frames;
};

struct ShellGrouping {
    std::vector<std::size_t> b0_indices;
    std::vector<Shell> shells;  // ascending nominal b
};

struct DiffusionScheme {
    std::vector<double> bvals;
    std::vector<Vec3> bvecs;
    std::vector<Shell> shells;
    std::vector<std::size_t> b0_indices;

    std::size_t frames() const noexcept { return bvals.size(); }
    std::vector<double> shell_bvals() const;
};

inline constexpr double kDefaultShellTolerance = 50.0;

/// Partition frames into a b0 set and shells of equal nominal b-value.
ShellGrouping group_shells(std::span<const double> bvals, double tolerance = kDefaultShellTolerance);

/// Build a scheme from per-frame b-values and unit directions.
DiffusionScheme make_scheme(std::vector<double> bvals, std::vector<Vec3> bvecs,
                            double tolerance = kDefaultShellTolerance);

/// Strictly increasing T2 axis (ms).
class T2Grid {
public:
    T2Grid() = default;
    explicit T2Grid(std::vector<double> points, bool log_spaced = false);

    const std::vector<double>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t j) const { return points_[j]; }
    bool log_spaced() const noexcept { return log_spaced_; }

private:
    std::vector<double> points_;
    bool log_spaced_ = false;
};

T2Grid make_t2_grid(double t2_min, double t2_max, std::size_t p);

/// Log-spaced list of `count` values from lo to hi inclusive.
std::vector<double> logspace(double lo, double hi, std::size_t count);

}  // namespace msmap
