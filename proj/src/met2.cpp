#include "msmap/met2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msmap/lcurve.hpp"
#include "msmap/nnls.hpp"

namespace msmap {

std::vector<double> fa_range(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw_invalid("fa_range: need lo <= hi and step > 0");
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
}

Met2Fitter::Met2Fitter(Met2Config config) : config_(std::move(config)) {
    config_.acquisition.validate();
    if (config_.fa_set.empty()) throw_invalid("MET2: flip-angle set is empty");
    if (!config_.fixed_mu) validate_mu_grid(config_.mu_grid);
    if (config_.grid.size() >= 3) {
        lap_ = second_difference_matrix(config_.grid.size());
        lap_gram_ = lap_.transpose() * lap_;
    }
    dicts_.reserve(config_.fa_set.size());
    grams_.reserve(config_.fa_set.size());
    for (double fa : config_.fa_set) {
        dicts_.push_back(build_dictionary(config_.grid, config_.acquisition, fa, config_.t1));
        grams_.push_back(dicts_.back().entries.transpose() * dicts_.back().entries);
    }
}

std::vector<double> Met2Fitter::fa_mse(const Eigen::VectorXd& normalized) const {
    std::vector<double> mse(dicts_.size());
    for (std::size_t f = 0; f < dicts_.size(); ++f) {
        const Eigen::MatrixXd& A = dicts_[f].entries;
        const NnlsResult r = nnls_gram(grams_[f], A.transpose() * normalized);
        mse[f] = (A * r.x - normalized).squaredNorm() / static_cast<double>(normalized.size());
    }
    return mse;
}

Met2FitResult Met2Fitter::fit(std::span<const double> signal) const {
    const auto n = static_cast<Eigen::Index>(config_.acquisition.n_echoes);
    if (static_cast<Eigen::Index>(signal.size()) != n) throw_invalid("MET2: signal length differs from echo count");
    Eigen::VectorXd b(n);
    for (Eigen::Index e = 0; e < n; ++e) {
        const double s = signal[static_cast<std::size_t>(e)];
        if (!std::isfinite(s) || s < 0.0) throw_invalid("MET2: signal must be finite and non-negative");
        b[e] = config_.rician_sigma > 0.0 ? std::sqrt(std::max(s * s - config_.rician_sigma * config_.rician_sigma, 0.0))
                                          : s;
    }
    const double scale = b[0] > 0.0 ? b[0] : b.maxCoeff();
    if (!(scale > 0.0)) throw_numerical("MET2: empty voxel (all-zero signal)");
    b /= scale;

    const std::vector<double> mse = fa_mse(b);
    std::size_t best = 0;
    for (std::size_t f = 1; f < mse.size(); ++f)
        if (mse[f] < mse[best]) best = f;

    const Eigen::MatrixXd& A = dicts_[best].entries;
    const Eigen::VectorXd atb = A.transpose() * b;

    Met2FitResult res;
    res.fa = config_.fa_set[best];
    res.spectrum.grid = config_.grid;

    auto solve_at = [&](double mu, const Eigen::VectorXd& warm) {
        if (mu == 0.0 || lap_.size() == 0) return nnls_gram(grams_[best], atb, warm);
        return nnls_gram(grams_[best] + (mu * mu) * lap_gram_, atb, warm);
    };

    Eigen::VectorXd x;
    if (config_.fixed_mu) {
        res.reg_mu = *config_.fixed_mu;
        x = solve_at(res.reg_mu, {}).x;
    } else {
        if (lap_.size() == 0) throw_invalid("MET2: regularization needs at least 3 T2 points");
        const std::size_t m = config_.mu_grid.size();
        std::vector<Eigen::VectorXd> xs(m);
        std::vector<double> rho(m), eta(m);
        Eigen::VectorXd warm;
        for (std::size_t i = m; i-- > 0;) {
            xs[i] = solve_at(config_.mu_grid[i], warm).x;
            warm = xs[i];
            rho[i] = (A * xs[i] - b).norm();
            eta[i] = (lap_ * xs[i]).norm();
        }
        const std::size_t corner = lcurve_corner(rho, eta, res.lcurve_at_boundary);
        res.reg_mu = config_.mu_grid[corner];
        x = std::move(xs[corner]);
    }
    res.residual_norm = (A * x - b).norm() * scale;
    res.spectrum.amplitudes = x * scale;
    return res;
}

Met2FitResult fit_voxel_spectrum(std::span<const double> signal, const AcquisitionMET2& acq, const T2Grid& grid,
                                 std::span<const double> fa_set, double t1) {
    Met2Config cfg;
    cfg.acquisition = acq;
    cfg.grid = grid;
    cfg.fa_set.assign(fa_set.begin(), fa_set.end());
    cfg.t1 = t1;
    return Met2Fitter(std::move(cfg)).fit(signal);
}

Fractions compartment_fractions(const T2Spectrum& spectrum, const CompartmentCutoffs& cutoffs) {
    if (static_cast<std::size_t>(spectrum.amplitudes.size()) != spectrum.grid.size())
        throw_invalid("compartment_fractions: spectrum and grid sizes differ");
    if (!(cutoffs.myelin_max < cutoffs.ie_max)) throw_invalid("compartment_fractions: cutoffs must increase");
    double m = 0.0, ie = 0.0, csf = 0.0;
    for (std::size_t j = 0; j < spectrum.grid.size(); ++j) {
        const double a = spectrum.amplitudes[static_cast<Eigen::Index>(j)];
        if (a < 0.0 || !std::isfinite(a)) throw_invalid("compartment_fractions: amplitudes must be finite and >= 0");
        const double t2 = spectrum.grid[j];
        if (t2 < cutoffs.myelin_max) m += a;
        else if (t2 < cutoffs.ie_max) ie += a;
        else csf += a;
    }
    const double total = m + ie + csf;
    if (!(total > 0.0)) throw_numerical("compartment_fractions: zero total spectrum mass");
    return {m / total, ie / total, csf / total};
}

Met2Maps fit_met2_volume(const Volume& vol4d, const Mask& mask, const Met2Config& config, Volume* spectra) {
    require_same_grid(vol4d.dims(), mask.dims(), "fit_met2_volume");
    if (vol4d.frames() != static_cast<std::size_t>(config.acquisition.n_echoes))
        throw_dims("fit_met2_volume: frame count " + std::to_string(vol4d.frames()) + " differs from echo count " +
                   std::to_string(config.acquisition.n_echoes));

    const Met2Fitter fitter(config);
    Met2Maps maps{Volume::like(vol4d), Volume::like(vol4d), Volume::like(vol4d),
                  Volume::like(vol4d), Volume::like(vol4d), Mask(vol4d.dims()), 0};
    if (spectra) *spectra = Volume::like(vol4d, config.grid.size());

    std::vector<double> signal;
    for (std::size_t v = 0; v < vol4d.voxels(); ++v) {
        if (!mask[v]) continue;
        vol4d.series(v, signal);
        for (double& s : signal) s = std::max(s, 0.0);  // TV output may dip below zero
        Met2FitResult fit;
        Fractions fr;
        try {
            fit = fitter.fit(signal);
            fr = compartment_fractions(fit.spectrum, config.cutoffs);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numerical && e.kind() != ErrorKind::InvalidArgument) throw;
            ++maps.failed_voxels;
            continue;
        }
        maps.fitted.set(v, true);
        maps.f_m.value(v) = fr.f_m;
        maps.f_ie.value(v) = fr.f_ie;
        maps.f_csf.value(v) = fr.f_csf;
        maps.fa_map.value(v) = fit.fa;
        maps.mu_map.value(v) = fit.reg_mu;
        if (spectra)
            for (std::size_t j = 0; j < config.grid.size(); ++j)
                spectra->value(v, j) = fit.spectrum.amplitudes[static_cast<Eigen::Index>(j)];
    }
    return maps;
}

}  // namespace msmap
