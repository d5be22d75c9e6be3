#pragma once

#include "msmap/core.hpp"

namespace msmap {

struct TvResult {
    Volume volume;
    int iterations = 0;
    bool converged = false;
};

/// Isotropic total variation with forward differences and Neumann boundary,
/// in voxel units.
double tv_seminorm(const Volume& u, std::size_t frame = 0);

/// 0.5*|u - f|^2 + weight*TV(u).
double tv_objective(const Volume& u, const Volume& f, double weight);

/// Dual projection (Chambolle) minimizer of tv_objective for a 3D volume.
/// Iterates until the relative L2 change of u drops below `tol`.
TvResult tv_denoise_3d(const Volume& vol, double weight, int max_iters = 200, double tol = 1e-4);

/// Robust Gaussian noise estimate: scaled median absolute deviation of
/// first differences along x.
double estimate_noise_sigma(const Volume& vol, std::size_t frame = 0);

struct TvEchoOptions {
    double weight = -1.0;          // < 0 selects weight_factor * per-frame noise estimate
    double weight_factor = 0.05;
    int max_iters = 200;
    double tol = 1e-4;
};

/// Denoise every frame of a 4D volume independently.
Volume tv_denoise_frames(const Volume& vol4d, const TvEchoOptions& opts = {});

}  // namespace msmap
