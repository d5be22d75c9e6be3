#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "msmap/core.hpp"
#include "msmap/epg.hpp"

namespace msmap {

struct CompartmentCutoffs {
    double myelin_max = 40.0;  // ms; myelin window is [t2_min, myelin_max)
    double ie_max = 200.0;     // ms; intra/extra-cellular window is [myelin_max, ie_max)
};

struct T2Spectrum {
    Eigen::VectorXd amplitudes;
    T2Grid grid;
};

struct Met2FitResult {
    T2Spectrum spectrum;        // signal units
    double fa = 180.0;          // degrees
    double residual_norm = 0.0; // signal units
    double reg_mu = 0.0;
    bool lcurve_at_boundary = false;
};

struct Fractions {
    double f_m = 0.0;
    double f_ie = 0.0;
    double f_csf = 0.0;
};

/// Integer flip angles lo..hi in `step` increments.
std::vector<double> fa_range(double lo = 90.0, double hi = 180.0, double step = 1.0);

struct Met2Config {
    AcquisitionMET2 acquisition;
    T2Grid grid = make_t2_grid(10.0, 2000.0, 60);
    std::vector<double> fa_set = fa_range();
    double t1 = kDefaultT1;
    std::vector<double> mu_grid = logspace(1e-6, 1e1, 64);
    std::optional<double> fixed_mu;  // bypasses the L-curve
    CompartmentCutoffs cutoffs;
    double rician_sigma = 0.0;  // > 0 applies sqrt(max(s^2 - sigma^2, 0)) before fitting
};

/// Voxelwise fitter holding the flip-angle dictionaries and their Gram
/// matrices. Immutable after construction and safe to share.
class Met2Fitter {
public:
    explicit Met2Fitter(Met2Config config);

    Met2FitResult fit(std::span<const double> signal) const;
    const Met2Config& config() const noexcept { return config_; }
    const DictionaryMatrix& dictionary(std::size_t fa_index) const { return dicts_.at(fa_index); }

    /// Plain-NNLS mean squared error per flip angle for a normalized signal.
    std::vector<double> fa_mse(const Eigen::VectorXd& normalized) const;

private:
    Met2Config config_;
    std::vector<DictionaryMatrix> dicts_;
    std::vector<Eigen::MatrixXd> grams_;
    Eigen::MatrixXd lap_;
    Eigen::MatrixXd lap_gram_;
};

Met2FitResult fit_voxel_spectrum(std::span<const double> signal, const AcquisitionMET2& acq, const T2Grid& grid,
                                 std::span<const double> fa_set, double t1 = kDefaultT1);

Fractions compartment_fractions(const T2Spectrum& spectrum, const CompartmentCutoffs& cutoffs = {});

struct Met2Maps {
    Volume f_m;
    Volume f_ie;
    Volume f_csf;
    Volume fa_map;
    Volume mu_map;
    Mask fitted;                     // in-mask voxels with a successful fit
    std::size_t failed_voxels = 0;   // in-mask voxels rejected (e.g. empty signal)
};

/// Fit every in-mask voxel of a multi-echo series. Maps are zero outside
/// `fitted`. When `spectra` is non-null it receives a p-frame volume.
Met2Maps fit_met2_volume(const Volume& vol4d, const Mask& mask, const Met2Config& config, Volume* spectra = nullptr);

}  // namespace msmap
