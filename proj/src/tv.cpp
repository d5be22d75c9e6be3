#include "msmap/tv.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace msmap {

namespace {

struct Grid {
    std::size_t nx, ny, nz;
    std::size_t sy, sz;  // strides
};

Grid grid_of(const Volume& v) { return {v.nx(), v.ny(), v.nz(), v.nx(), v.nx() * v.ny()}; }

// Forward-difference gradient with zero flux across the far boundary.
inline void gradient_at(const double* u, const Grid& g, std::size_t i, std::size_t j, std::size_t k, std::size_t n,
                        double& gx, double& gy, double& gz) {
    gx = i + 1 < g.nx ? u[n + 1] - u[n] : 0.0;
    gy = j + 1 < g.ny ? u[n + g.sy] - u[n] : 0.0;
    gz = k + 1 < g.nz ? u[n + g.sz] - u[n] : 0.0;
}

// Negative adjoint of gradient_at.
void divergence(const std::vector<double>& px, const std::vector<double>& py, const std::vector<double>& pz,
                const Grid& g, std::vector<double>& div) {
    std::size_t n = 0;
    for (std::size_t k = 0; k < g.nz; ++k) {
        for (std::size_t j = 0; j < g.ny; ++j) {
            for (std::size_t i = 0; i < g.nx; ++i, ++n) {
                double d = 0.0;
                if (i + 1 < g.nx) d += px[n];
                if (i > 0) d -= px[n - 1];
                if (j + 1 < g.ny) d += py[n];
                if (j > 0) d -= py[n - g.sy];
                if (k + 1 < g.nz) d += pz[n];
                if (k > 0) d -= pz[n - g.sz];
                div[n] = d;
            }
        }
    }
}

void require_finite(const Volume& v) {
    for (double x : v.data())
        if (!std::isfinite(x)) throw_numerical("TV denoising: non-finite voxel values");
}

}  // namespace

double tv_seminorm(const Volume& u, std::size_t frame) {
    const Grid g = grid_of(u);
    const double* data = u.data().data() + frame * u.voxels();
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < g.nz; ++k)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i, ++n) {
                double gx, gy, gz;
                gradient_at(data, g, i, j, k, n, gx, gy, gz);
                total += std::sqrt(gx * gx + gy * gy + gz * gz);
            }
    return total;
}

double tv_objective(const Volume& u, const Volume& f, double weight) {
    require_same_grid(u.dims(), f.dims(), "tv_objective");
    double fidelity = 0.0;
    for (std::size_t n = 0; n < u.voxels(); ++n) {
        const double d = u[n] - f[n];
        fidelity += d * d;
    }
    return 0.5 * fidelity + weight * tv_seminorm(u);
}

TvResult tv_denoise_3d(const Volume& vol, double weight, int max_iters, double tol) {
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw_invalid("TV denoising: weight must be >= 0");
    require_finite(vol);
    const Volume f = vol.frames() == 1 ? vol : vol.frame(0);
    TvResult res{f, 0, true};
    if (weight == 0.0) return res;

    const Grid g = grid_of(f);
    const std::size_t n_vox = f.voxels();
    std::vector<double> px(n_vox, 0.0), py(n_vox, 0.0), pz(n_vox, 0.0), div(n_vox, 0.0), term(n_vox);
    std::vector<double> u(f.data().begin(), f.data().end()), u_prev(n_vox);
    const double* fd = f.data().data();

    // tau <= 1/12 bounds |div|^2 in three dimensions and guarantees convergence.
    constexpr double tau = 1.0 / 12.0;
    double f_norm = 0.0;
    for (std::size_t n = 0; n < n_vox; ++n) f_norm += fd[n] * fd[n];
    f_norm = std::max(std::sqrt(f_norm), 1e-300);

    res.converged = false;
    for (int it = 0; it < max_iters; ++it) {
        for (std::size_t n = 0; n < n_vox; ++n) term[n] = div[n] - fd[n] / weight;
        std::size_t n = 0;
        for (std::size_t k = 0; k < g.nz; ++k)
            for (std::size_t j = 0; j < g.ny; ++j)
                for (std::size_t i = 0; i < g.nx; ++i, ++n) {
                    double gx, gy, gz;
                    gradient_at(term.data(), g, i, j, k, n, gx, gy, gz);
                    const double denom = 1.0 + tau * std::sqrt(gx * gx + gy * gy + gz * gz);
                    px[n] = (px[n] + tau * gx) / denom;
                    py[n] = (py[n] + tau * gy) / denom;
                    pz[n] = (pz[n] + tau * gz) / denom;
                }
        divergence(px, py, pz, g, div);
        u_prev.swap(u);
        double change = 0.0;
        for (std::size_t m = 0; m < n_vox; ++m) {
            u[m] = fd[m] - weight * div[m];
            const double d = u[m] - u_prev[m];
            change += d * d;
        }
        res.iterations = it + 1;
        if (std::sqrt(change) <= tol * f_norm) {
            res.converged = true;
            break;
        }
    }
    std::copy(u.begin(), u.end(), res.volume.data().begin());
    return res;
}

double estimate_noise_sigma(const Volume& vol, std::size_t frame) {
    const Grid g = grid_of(vol);
    if (g.nx < 2) return 0.0;
    const double* data = vol.data().data() + frame * vol.voxels();
    std::vector<double> diffs;
    diffs.reserve(vol.voxels());
    std::size_t n = 0;
    for (std::size_t k = 0; k < g.nz; ++k)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i, ++n)
                if (i + 1 < g.nx) diffs.push_back((data[n + 1] - data[n]) / std::sqrt(2.0));
    auto median = [](std::vector<double>& v) {
        const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        return *mid;
    };
    const double med = median(diffs);
    for (double& d : diffs) d = std::abs(d - med);
    return 1.4826 * median(diffs);
}

Volume tv_denoise_frames(const Volume& vol4d, const TvEchoOptions& opts) {
    require_finite(vol4d);
    Volume out = Volume::like(vol4d, vol4d.frames());
    for (std::size_t t = 0; t < vol4d.frames(); ++t) {
        const Volume frame = vol4d.frame(t);
        const double weight = opts.weight >= 0.0 ? opts.weight : opts.weight_factor * estimate_noise_sigma(frame);
        out.set_frame(t, tv_denoise_3d(frame, weight, opts.max_iters, opts.tol).volume);
    }
    return out;
}

}  // namespace msmap
