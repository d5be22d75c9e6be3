#include <algorithm>
#include <cmath>
#include <limits>

#include "msmap/sampling.hpp"

namespace msmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of sampled function f (Felzenszwalb & Huttenlocher).
void dt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<std::size_t>& v, std::vector<double>& z) {
    const std::size_t n = f.size();
    d.assign(n, kInf);
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    std::size_t k = 0;
    std::size_t first = n;
    for (std::size_t q = 0; q < n; ++q)
        if (f[q] < kInf) {
            first = q;
            break;
        }
    if (first == n) return;
    v[0] = first;
    z[0] = -kInf;
    z[1] = kInf;
    for (std::size_t q = first + 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        const auto qd = static_cast<double>(q);
        auto intersect = [&](std::size_t r) {
            const auto vr = static_cast<double>(v[r]);
            return ((f[q] + qd * qd) - (f[v[r]] + vr * vr)) / (2.0 * qd - 2.0 * vr);
        };
        double s = intersect(k);
        while (s <= z[k]) s = intersect(--k);  // z[0] = -inf stops the loop
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const auto qd = static_cast<double>(q);
        while (z[k + 1] < qd) ++k;
        const double diff = qd - static_cast<double>(v[k]);
        d[q] = diff * diff + f[v[k]];
    }
}

}  // namespace

Volume distance_transform_edt(const Mask& mask) {
    if (mask.empty()) throw_invalid("distance transform: mask is empty");
    const Index3 dims = mask.dims();
    Volume out(dims);
    for (std::size_t n = 0; n < mask.voxels(); ++n) out[n] = mask[n] ? 0.0 : kInf;

    std::vector<double> f, d, z;
    std::vector<std::size_t> v;
    const std::array<std::size_t, 3> stride{1, dims[0], dims[0] * dims[1]};
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t len = dims[axis];
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        f.resize(len);
        for (std::size_t p = 0; p < dims[a1]; ++p) {
            for (std::size_t q = 0; q < dims[a2]; ++q) {
                const std::size_t base = p * stride[a1] + q * stride[a2];
                for (std::size_t t = 0; t < len; ++t) f[t] = out[base + t * stride[axis]];
                dt_1d(f, d, v, z);
                for (std::size_t t = 0; t < len; ++t) out[base + t * stride[axis]] = d[t];
            }
        }
    }
    for (double& x : out.data()) x = std::sqrt(x);
    return out;
}

Volume distance_transform_chebyshev(const Mask& mask) {
    if (mask.empty()) throw_invalid("distance transform: mask is empty");
    const Index3 dims = mask.dims();
    Volume out(dims);
    for (std::size_t n = 0; n < mask.voxels(); ++n) out[n] = mask[n] ? 0.0 : kInf;
    const auto nx = static_cast<long>(dims[0]), ny = static_cast<long>(dims[1]), nz = static_cast<long>(dims[2]);
    auto relax = [&](long i, long j, long k, int sign) {
        double& cur = out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k));
        for (long dk = -1; dk <= 1; ++dk)
            for (long dj = -1; dj <= 1; ++dj)
                for (long di = -1; di <= 1; ++di) {
                    // half-neighbourhood preceding the current voxel in scan order
                    const long lin = di + 3 * (dj + 3 * dk);
                    if (sign * lin >= 0) continue;
                    const long a = i + di, b = j + dj, c = k + dk;
                    if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz) continue;
                    cur = std::min(cur, out.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                                               static_cast<std::size_t>(c)) + 1.0);
                }
    };
    for (long k = 0; k < nz; ++k)
        for (long j = 0; j < ny; ++j)
            for (long i = 0; i < nx; ++i) relax(i, j, k, 1);
    for (long k = nz; k-- > 0;)
        for (long j = ny; j-- > 0;)
            for (long i = nx; i-- > 0;) relax(i, j, k, -1);
    return out;
}

Volume distance_transform(const Mask& mask, DistanceMetric metric) {
    return metric == DistanceMetric::Euclidean ? distance_transform_edt(mask) : distance_transform_chebyshev(mask);
}

}  // namespace msmap
