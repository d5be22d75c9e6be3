#pragma once

#include <span>
#include <vector>

#include "msmap/core.hpp"

namespace msmap {

struct ShellMeans {
    std::vector<double> b_list;          // s/mm^2, ascending
    std::vector<double> means;           // normalized by the mean b0 signal
    std::vector<std::size_t> n_dirs;
};

struct SmtBounds {
    double lambda_min = 0.1e-3;  // mm^2/s
    double lambda_max = 3.0e-3;
};

struct SmtFit {
    double f_i = 0.0;
    double f_e = 1.0;
    double lambda_par = 0.0;
    double residual_norm = 0.0;
    bool degenerate = false;  // no decay across shells; boundary fit
};

/// Direction-averaged signal per shell divided by the mean b0 signal.
ShellMeans spherical_mean_per_shell(std::span<const double> signal, const DiffusionScheme& scheme);

/// Spherical mean of a stick: integral over [0,1] of exp(-b*lambda*t^2).
double smt_stick_mean(double b, double lambda_par);

/// Spherical mean of an axially symmetric tensor (lambda_perp <= lambda_par).
double smt_zeppelin_mean(double b, double lambda_par, double lambda_perp);

/// Stick + tortuous zeppelin mixture, lambda_perp = (1 - f_i) * lambda_par.
std::vector<double> smt_predict(std::span<const double> b_list, double f_i, double lambda_par);

/// Per-shell weighted squared error between means and smt_predict.
double smt_objective(const ShellMeans& means, double f_i, double lambda_par);

/// Coarse grid search followed by a bounded simplex refinement.
/// Reusable across voxels that share the same shell structure.
class SmtFitter {
public:
    SmtFitter(std::vector<double> b_list, std::vector<std::size_t> n_dirs, SmtBounds bounds = {},
              std::size_t grid_size = 64);

    SmtFit fit(const ShellMeans& means) const;
    const SmtBounds& bounds() const noexcept { return bounds_; }

private:
    std::vector<double> b_list_;
    std::vector<double> weights_;
    SmtBounds bounds_;
    std::size_t grid_size_;
    std::vector<double> grid_pred_;  // [node][shell]
};

SmtFit fit_smt_voxel(const ShellMeans& means, const SmtBounds& bounds = {}, std::size_t grid_size = 64);

struct SmtConfig {
    SmtBounds bounds;
    std::size_t grid_size = 64;
};

struct SmtMaps {
    Volume f_i;
    Volume f_e;
    Volume lambda_par;
    Mask fitted;
    std::size_t failed_voxels = 0;
    std::size_t degenerate_voxels = 0;
};

SmtMaps fit_smt_volume(const Volume& dwi, const DiffusionScheme& scheme, const Mask& mask, const SmtConfig& config = {});

}  // namespace msmap
