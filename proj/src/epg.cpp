#include "msmap/epg.hpp"

#include <cmath>
#include <numbers>

namespace msmap {

void EpgParams::validate() const {
    const bool finite = std::isfinite(t2) && std::isfinite(t1) && std::isfinite(delta_te) && std::isfinite(refocus_fa);
    if (!finite) throw_numerical("EPG parameters must be finite");
    if (!(t2 > 0.0)) throw_invalid("EPG: T2 must be positive");
    if (!(t1 >= t2)) throw_invalid("EPG: T1 must be >= T2");
    if (!(delta_te > 0.0)) throw_invalid("EPG: echo spacing must be positive");
    if (n_echoes < 1) throw_invalid("EPG: need at least one echo");
    if (!(refocus_fa > 0.0 && refocus_fa <= 180.0)) throw_invalid("EPG: refocusing angle must lie in (0, 180]");
}

void epg_echo_train(const EpgParams& params, std::span<double> out) {
    params.validate();
    if (out.size() != static_cast<std::size_t>(params.n_echoes)) throw_invalid("EPG: output buffer size mismatch");

    // With refocusing about the excited axis every state stays real once the
    // longitudinal states are rotated by a quarter turn (Z = i*z).
    const std::size_t n_states = static_cast<std::size_t>(params.n_echoes) + 2;
    std::vector<double> fp(n_states, 0.0), fm(n_states, 0.0), z(n_states, 0.0);
    fp[0] = 1.0;
    fm[0] = 1.0;

    const double alpha = params.refocus_fa * std::numbers::pi / 180.0;
    const double c2 = std::cos(alpha / 2.0) * std::cos(alpha / 2.0);
    const double s2 = std::sin(alpha / 2.0) * std::sin(alpha / 2.0);
    const double sa = std::sin(alpha);
    const double ca = std::cos(alpha);
    const double tau = params.delta_te / 2.0;
    const double e2 = std::exp(-tau / params.t2);
    const double e1 = std::exp(-tau / params.t1);

    auto relax_and_shift = [&] {
        for (std::size_t k = 0; k < n_states; ++k) {
            fp[k] *= e2;
            fm[k] *= e2;
            z[k] *= e1;
        }
        for (std::size_t k = n_states - 1; k > 0; --k) fp[k] = fp[k - 1];
        for (std::size_t k = 0; k + 1 < n_states; ++k) fm[k] = fm[k + 1];
        fm[n_states - 1] = 0.0;
        fp[0] = fm[0];
    };

    for (int echo = 0; echo < params.n_echoes; ++echo) {
        relax_and_shift();
        for (std::size_t k = 0; k < n_states; ++k) {
            const double p = fp[k], m = fm[k], l = z[k];
            fp[k] = c2 * p + s2 * m + sa * l;
            fm[k] = s2 * p + c2 * m - sa * l;
            z[k] = 0.5 * sa * (m - p) + ca * l;
        }
        relax_and_shift();
        out[static_cast<std::size_t>(echo)] = std::abs(fp[0]);
    }
}

std::vector<double> epg_echo_train(const EpgParams& params) {
    params.validate();
    std::vector<double> out(static_cast<std::size_t>(params.n_echoes));
    epg_echo_train(params, out);
    return out;
}

DictionaryMatrix build_dictionary(const T2Grid& grid, const AcquisitionMET2& acq, double fa, double t1) {
    acq.validate();
    if (grid.size() == 0) throw_invalid("build_dictionary: empty T2 grid");
    DictionaryMatrix dict;
    dict.entries.resize(acq.n_echoes, static_cast<Eigen::Index>(grid.size()));
    dict.t2_grid = grid;
    dict.fa = fa;
    dict.acquisition = acq;

    EpgParams params;
    params.t1 = t1;
    params.delta_te = acq.delta_te;
    params.n_echoes = acq.n_echoes;
    params.refocus_fa = fa;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        params.t2 = grid[j];
        if (params.t1 < params.t2) params.t1 = params.t2;
        epg_echo_train(params, std::span<double>(dict.entries.col(static_cast<Eigen::Index>(j)).data(),
                                                 static_cast<std::size_t>(acq.n_echoes)));
    }
    return dict;
}

}  // namespace msmap
