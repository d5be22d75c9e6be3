#include "msmap/smt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace msmap {

ShellMeans spherical_mean_per_shell(std::span<const double> signal, const DiffusionScheme& scheme) {
    if (signal.size() != scheme.frames()) throw_dims("spherical mean: signal length differs from scheme frame count");
    if (scheme.b0_indices.empty()) throw_invalid("spherical mean: scheme has no b0 frames");
    double b0 = 0.0;
    for (std::size_t f : scheme.b0_indices) b0 += signal[f];
    b0 /= static_cast<double>(scheme.b0_indices.size());
    if (!(b0 > 0.0) || !std::isfinite(b0)) throw_numerical("spherical mean: invalid voxel (b0 mean <= 0)");

    ShellMeans out;
    for (const Shell& shell : scheme.shells) {
        double sum = 0.0;
        for (std::size_t f : shell.frames) sum += signal[f];
        out.b_list.push_back(shell.nominal);
        out.means.push_back(sum / static_cast<double>(shell.frames.size()) / b0);
        out.n_dirs.push_back(shell.frames.size());
    }
    return out;
}

double smt_stick_mean(double b, double lambda_par) {
    if (!(b >= 0.0) || !(lambda_par >= 0.0)) throw_invalid("stick mean: b and lambda must be >= 0");
    const double x = b * lambda_par;
    if (x < 1e-9) return 1.0 - x / 3.0;
    return std::sqrt(std::numbers::pi / (4.0 * x)) * std::erf(std::sqrt(x));
}

double smt_zeppelin_mean(double b, double lambda_par, double lambda_perp) {
    if (!(lambda_perp >= 0.0)) throw_invalid("zeppelin mean: lambda_perp must be >= 0");
    if (lambda_perp > lambda_par) throw_invalid("zeppelin mean: lambda_perp exceeds lambda_par");
    return std::exp(-b * lambda_perp) * smt_stick_mean(b, lambda_par - lambda_perp);
}

std::vector<double> smt_predict(std::span<const double> b_list, double f_i, double lambda_par) {
    if (!(f_i >= 0.0 && f_i <= 1.0)) throw_invalid("smt_predict: f_i must lie in [0, 1]");
    const double lambda_perp = (1.0 - f_i) * lambda_par;
    std::vector<double> out;
    out.reserve(b_list.size());
    for (double b : b_list)
        out.push_back(f_i * smt_stick_mean(b, lambda_par) + (1.0 - f_i) * smt_zeppelin_mean(b, lambda_par, lambda_perp));
    return out;
}

namespace {

std::vector<double> shell_weights(std::span<const std::size_t> n_dirs) {
    double total = 0.0;
    for (std::size_t n : n_dirs) total += static_cast<double>(n);
    std::vector<double> w;
    for (std::size_t n : n_dirs) w.push_back(total > 0.0 ? static_cast<double>(n) / total : 0.0);
    return w;
}

double weighted_sse(std::span<const double> means, std::span<const double> pred, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        const double r = means[i] - pred[i];
        s += w[i] * r * r;
    }
    return s;
}

}  // namespace

double smt_objective(const ShellMeans& means, double f_i, double lambda_par) {
    const auto pred = smt_predict(means.b_list, f_i, lambda_par);
    return weighted_sse(means.means, pred, shell_weights(means.n_dirs));
}

SmtFitter::SmtFitter(std::vector<double> b_list, std::vector<std::size_t> n_dirs, SmtBounds bounds,
                     std::size_t grid_size)
    : b_list_(std::move(b_list)), weights_(shell_weights(n_dirs)), bounds_(bounds), grid_size_(grid_size) {
    if (b_list_.size() < 2) throw_invalid("SMT fit needs at least two shells");
    if (n_dirs.size() != b_list_.size()) throw_invalid("SMT fit: shell counts differ");
    if (!(bounds_.lambda_min > 0.0 && bounds_.lambda_max > bounds_.lambda_min))
        throw_invalid("SMT fit: need 0 < lambda_min < lambda_max");
    if (grid_size_ < 2) throw_invalid("SMT fit: grid size must be >= 2");
    const std::size_t s = b_list_.size();
    grid_pred_.resize(grid_size_ * grid_size_ * s);
    for (std::size_t a = 0; a < grid_size_; ++a) {
        const double f = static_cast<double>(a) / static_cast<double>(grid_size_ - 1);
        for (std::size_t l = 0; l < grid_size_; ++l) {
            const double lam = bounds_.lambda_min + (bounds_.lambda_max - bounds_.lambda_min) * static_cast<double>(l) /
                                                        static_cast<double>(grid_size_ - 1);
            const auto pred = smt_predict(b_list_, f, lam);
            std::copy(pred.begin(), pred.end(), grid_pred_.begin() + static_cast<std::ptrdiff_t>((a * grid_size_ + l) * s));
        }
    }
}

SmtFit SmtFitter::fit(const ShellMeans& means) const {
    if (means.means.size() != b_list_.size()) throw_invalid("SMT fit: shell count differs from fitter");
    for (double m : means.means)
        if (!std::isfinite(m)) throw_numerical("SMT fit: non-finite shell mean");

    const std::size_t s = b_list_.size();
    const double lam_span = bounds_.lambda_max - bounds_.lambda_min;
    const double step = 1.0 / static_cast<double>(grid_size_ - 1);

    auto objective = [&](double f, double u) {
        f = std::clamp(f, 0.0, 1.0);
        u = std::clamp(u, 0.0, 1.0);
        const auto pred = smt_predict(b_list_, f, bounds_.lambda_min + u * lam_span);
        return weighted_sse(means.means, pred, weights_);
    };

    SmtFit out;
    const bool no_decay = std::all_of(means.means.begin(), means.means.end(), [](double m) { return m >= 1.0; });

    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_l = 0;
    for (std::size_t a = 0; a < grid_size_; ++a) {
        for (std::size_t l = 0; l < grid_size_; ++l) {
            if (no_decay && l != 0) continue;
            const double e = weighted_sse(means.means,
                                          std::span<const double>(grid_pred_.data() + (a * grid_size_ + l) * s, s), weights_);
            if (e < best) {
                best = e;
                best_a = a;
                best_l = l;
            }
        }
    }
    double f_best = static_cast<double>(best_a) * step;
    double u_best = static_cast<double>(best_l) * step;

    if (no_decay) {
        out.degenerate = true;
    } else {
        // Nelder-Mead in (f_i, normalized lambda), clamped to the unit box.
        std::array<std::array<double, 2>, 3> simplex{{{f_best, u_best},
                                                      {std::clamp(f_best + step, 0.0, 1.0) == f_best ? f_best - step : f_best + step, u_best},
                                                      {f_best, std::clamp(u_best + step, 0.0, 1.0) == u_best ? u_best - step : u_best + step}}};
        std::array<double, 3> vals{};
        for (int i = 0; i < 3; ++i) {
            simplex[i][0] = std::clamp(simplex[i][0], 0.0, 1.0);
            simplex[i][1] = std::clamp(simplex[i][1], 0.0, 1.0);
            vals[i] = objective(simplex[i][0], simplex[i][1]);
        }
        for (int it = 0; it < 400; ++it) {
            std::array<int, 3> order{0, 1, 2};
            std::sort(order.begin(), order.end(), [&](int x, int y) { return vals[x] < vals[y]; });
            const int lo = order[0], mid = order[1], hi = order[2];
            const double spread = std::max(std::abs(simplex[hi][0] - simplex[lo][0]) + std::abs(simplex[mid][0] - simplex[lo][0]),
                                           std::abs(simplex[hi][1] - simplex[lo][1]) + std::abs(simplex[mid][1] - simplex[lo][1]));
            if (spread < 1e-10 || vals[hi] - vals[lo] < 1e-18) break;
            const double cx = 0.5 * (simplex[lo][0] + simplex[mid][0]);
            const double cy = 0.5 * (simplex[lo][1] + simplex[mid][1]);
            auto point = [&](double t) {
                return std::array<double, 2>{std::clamp(cx + t * (simplex[hi][0] - cx), 0.0, 1.0),
                                             std::clamp(cy + t * (simplex[hi][1] - cy), 0.0, 1.0)};
            };
            const auto refl = point(-1.0);
            const double fr = objective(refl[0], refl[1]);
            if (fr < vals[lo]) {
                const auto expd = point(-2.0);
                const double fe = objective(expd[0], expd[1]);
                if (fe < fr) {
                    simplex[hi] = expd;
                    vals[hi] = fe;
                } else {
                    simplex[hi] = refl;
                    vals[hi] = fr;
                }
            } else if (fr < vals[mid]) {
                simplex[hi] = refl;
                vals[hi] = fr;
            } else {
                const auto contr = fr < vals[hi] ? point(-0.5) : point(0.5);
                const double fc = objective(contr[0], contr[1]);
                if (fc < std::min(fr, vals[hi])) {
                    simplex[hi] = contr;
                    vals[hi] = fc;
                } else {
                    for (int i : {mid, hi}) {
                        simplex[i][0] = 0.5 * (simplex[i][0] + simplex[lo][0]);
                        simplex[i][1] = 0.5 * (simplex[i][1] + simplex[lo][1]);
                        vals[i] = objective(simplex[i][0], simplex[i][1]);
                    }
                }
            }
        }
        const int lo = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
        if (vals[lo] <= best) {
            best = vals[lo];
            f_best = simplex[lo][0];
            u_best = simplex[lo][1];
        }
    }

    out.f_i = f_best;
    out.f_e = 1.0 - f_best;
    out.lambda_par = bounds_.lambda_min + u_best * lam_span;
    out.residual_norm = std::sqrt(best);
    return out;
}

SmtFit fit_smt_voxel(const ShellMeans& means, const SmtBounds& bounds, std::size_t grid_size) {
    return SmtFitter(means.b_list, means.n_dirs, bounds, grid_size).fit(means);
}

SmtMaps fit_smt_volume(const Volume& dwi, const DiffusionScheme& scheme, const Mask& mask, const SmtConfig& config) {
    require_same_grid(dwi.dims(), mask.dims(), "fit_smt_volume");
    if (dwi.frames() != scheme.frames())
        throw_dims("fit_smt_volume: frame count " + std::to_string(dwi.frames()) + " differs from scheme (" +
                   std::to_string(scheme.frames()) + ")");
    std::vector<std::size_t> n_dirs;
    for (const Shell& s : scheme.shells) n_dirs.push_back(s.frames.size());
    const SmtFitter fitter(scheme.shell_bvals(), n_dirs, config.bounds, config.grid_size);

    SmtMaps maps{Volume::like(dwi), Volume::like(dwi), Volume::like(dwi), Mask(dwi.dims()), 0, 0};
    std::vector<double> signal;
    for (std::size_t v = 0; v < dwi.voxels(); ++v) {
        if (!mask[v]) continue;
        dwi.series(v, signal);
        SmtFit fit;
        try {
            fit = fitter.fit(spherical_mean_per_shell(signal, scheme));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numerical) throw;
            ++maps.failed_voxels;
            continue;
        }
        if (fit.degenerate) ++maps.degenerate_voxels;
        maps.fitted.set(v, true);
        maps.f_i.value(v) = fit.f_i;
        maps.f_e.value(v) = fit.f_e;
        maps.lambda_par.value(v) = fit.lambda_par;
    }
    return maps;
}

}  // namespace msmap
