#include "msmap/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "msmap/epg.hpp"

namespace msmap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

TissueParams lerp(const TissueParams& a, const TissueParams& b, double t) {
    auto m = [t](double x, double y) { return x + t * (y - x); };
    return {m(a.f_m, b.f_m),   m(a.f_ie, b.f_ie), m(a.f_csf, b.f_csf), m(a.t2_m, b.t2_m),
            m(a.t2_ie, b.t2_ie), m(a.t2_csf, b.t2_csf), m(a.f_i, b.f_i),   m(a.lambda_par, b.lambda_par)};
}

bool in_ellipsoid(double x, double y, double z, const Vec3& c, const Vec3& r) {
    const double a = (x - c[0]) / r[0], b = (y - c[1]) / r[1], d = (z - c[2]) / r[2];
    return a * a + b * b + d * d <= 1.0;
}

}  // namespace

const char* region_name(Region r) noexcept {
    switch (r) {
        case Region::Background: return "background";
        case Region::CSF: return "csf";
        case Region::WM: return "wm";
        case Region::NAWM: return "nawm";
        case Region::LesionRim: return "lesion_rim";
        case Region::LesionCore: return "lesion_core";
    }
    return "?";
}

void TissueParams::validate(const char* what) const {
    const std::string w(what);
    for (double f : {f_m, f_ie, f_csf})
        if (!(f >= 0.0 && f <= 1.0)) throw_invalid("phantom " + w + ": compartment fractions must lie in [0, 1]");
    if (std::abs(f_m + f_ie + f_csf - 1.0) > 1e-9) throw_invalid("phantom " + w + ": compartment fractions off the simplex");
    if (!(t2_m > 0.0 && t2_ie > 0.0 && t2_csf > 0.0)) throw_invalid("phantom " + w + ": T2 values must be > 0");
    if (!(f_i >= 0.0 && f_i <= 1.0)) throw_invalid("phantom " + w + ": f_i must lie in [0, 1]");
    if (!(lambda_par > 0.0)) throw_invalid("phantom " + w + ": lambda_par must be > 0");
}

void PhantomConfig::validate() const {
    if (size < 16) throw_invalid("phantom size must be >= 16");
    if (!(m0 > 0.0)) throw_invalid("phantom m0 must be > 0");
    if (!(fa_min >= 90.0 && fa_max <= 180.0 && fa_min <= fa_max)) throw_invalid("phantom FA range must lie in [90, 180]");
    wm.validate("wm");
    nawm.validate("nawm");
    lesion.validate("lesion");
    csf.validate("csf");
    for (const LesionSpec& l : lesions)
        if (!(l.core_radius > 0.0 && l.radius >= l.core_radius)) throw_invalid("phantom lesion radii must satisfy 0 < core <= rim");
}

Mask PhantomTruth::region_mask(Region r) const {
    Mask m(label.dims());
    for (std::size_t v = 0; v < label.voxels(); ++v) m.set(v, static_cast<int>(label[v]) == static_cast<int>(r));
    return m;
}

Mask PhantomTruth::wm_mask() const {
    Mask m(label.dims());
    for (std::size_t v = 0; v < label.voxels(); ++v) m.set(v, label[v] >= static_cast<double>(Region::WM));
    return m;
}

Mask PhantomTruth::brain_mask() const {
    Mask m(label.dims());
    for (std::size_t v = 0; v < label.voxels(); ++v) m.set(v, label[v] > 0.0);
    return m;
}

PhantomTruth make_phantom(const PhantomConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t n = config.size;
    const double s = static_cast<double>(n) / 48.0;
    const double c = 0.5 * (static_cast<double>(n) - 1.0);
    const Index3 dims{n, n, n};

    PhantomTruth t;
    for (Volume* v : {&t.f_m, &t.f_ie, &t.f_csf, &t.t2_m, &t.t2_ie, &t.t2_csf, &t.f_i, &t.lambda_par, &t.label, &t.fa,
                      &t.m0, &t.score})
        *v = Volume(dims);
    t.fiber = Volume(dims, 3);

    std::mt19937_64 rng(stream_seed(seed, 1, 0));
    std::uniform_real_distribution<double> jitter(-1.5, 1.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    if (!config.control) {
        if (config.lesions.empty()) {
            const std::array<Vec3, 4> centers{Vec3{13.0, 16.0, 24.0}, Vec3{34.0, 31.0, 21.0}, Vec3{23.0, 13.0, 30.0},
                                              Vec3{25.0, 34.0, 20.0}};
            const std::array<double, 4> radii{5.0, 5.0, 4.0, 4.5};
            for (std::size_t l = 0; l < centers.size(); ++l) {
                LesionSpec spec;
                for (int a = 0; a < 3; ++a) spec.center[a] = (centers[l][a] - 23.5) * s + c + jitter(rng) * s;
                spec.radius = radii[l] * s * (0.9 + 0.2 * unit(rng));
                spec.core_radius = 0.6 * spec.radius;
                t.lesions.push_back(spec);
            }
        } else {
            t.lesions = config.lesions;
        }
    }

    const Vec3 center{c, c, c};
    const Vec3 brain_r{20.0 * s, 18.0 * s, 16.0 * s};
    const Vec3 outer_r{21.5 * s, 19.5 * s, 17.5 * s};
    const Vec3 vent_r{2.5 * s, 6.0 * s, 3.5 * s};
    const Vec3 vent_l{c - 4.0 * s, c, c}, vent_rr{c + 4.0 * s, c, c};
    const double phase_a = 2.0 * std::numbers::pi * unit(rng);
    const double phase_b = 2.0 * std::numbers::pi * unit(rng);
    const TissueParams& healthy = config.control ? config.wm : config.nawm;
    const Region healthy_region = config.control ? Region::WM : Region::NAWM;

    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t v = t.label.voxel_index(i, j, k);
                const double x = static_cast<double>(i), y = static_cast<double>(j), z = static_cast<double>(k);
                Region region = Region::Background;
                TissueParams tp{};
                double score = 0.0;
                if (in_ellipsoid(x, y, z, center, brain_r)) {
                    region = healthy_region;
                    tp = healthy;
                    if (in_ellipsoid(x, y, z, vent_l, vent_r) || in_ellipsoid(x, y, z, vent_rr, vent_r)) {
                        region = Region::CSF;
                        tp = config.csf;
                    } else {
                        for (const LesionSpec& l : t.lesions) {
                            const double d = std::sqrt((x - l.center[0]) * (x - l.center[0]) +
                                                       (y - l.center[1]) * (y - l.center[1]) +
                                                       (z - l.center[2]) * (z - l.center[2]));
                            if (d > l.radius) continue;
                            double sc;
                            TissueParams lt;
                            Region lr;
                            if (d <= l.core_radius) {
                                sc = 0.8 + 0.2 * (1.0 - d / l.core_radius);
                                lt = config.lesion;
                                lr = Region::LesionCore;
                            } else {
                                const double u = (d - l.core_radius) / (l.radius - l.core_radius);
                                sc = 0.02 + 0.68 * (1.0 - u);
                                lt = lerp(config.lesion, healthy, u);
                                lr = Region::LesionRim;
                            }
                            if (sc > score) {
                                score = sc;
                                tp = lt;
                                region = lr;
                            }
                        }
                    }
                } else if (in_ellipsoid(x, y, z, center, outer_r)) {
                    region = Region::CSF;
                    tp = config.csf;
                }

                t.label[v] = static_cast<double>(region);
                t.score[v] = score;
                const double u = x / static_cast<double>(n - 1), w = y / static_cast<double>(n - 1),
                             q = z / static_cast<double>(n - 1);
                const double shape = 0.5 + 0.5 * std::sin(std::numbers::pi * (u - 0.5) + phase_a) *
                                               std::cos(0.5 * std::numbers::pi * (w - 0.5) + 0.3 * std::sin(phase_b + q));
                t.fa[v] = config.fa_min + (config.fa_max - config.fa_min) * std::clamp(shape, 0.0, 1.0);

                const double theta = std::numbers::pi * (0.8 * u + 0.4 * q) + phase_b;
                const double tilt = 0.4 * std::sin(std::numbers::pi * w);
                Vec3 dir{std::cos(theta), std::sin(theta), tilt};
                const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
                for (int a = 0; a < 3; ++a) t.fiber.value(v, static_cast<std::size_t>(a)) = dir[a] / norm;

                if (region == Region::Background) continue;
                t.m0[v] = config.m0;
                t.f_m[v] = tp.f_m;
                t.f_ie[v] = tp.f_ie;
                t.f_csf[v] = tp.f_csf;
                t.t2_m[v] = tp.t2_m;
                t.t2_ie[v] = tp.t2_ie;
                t.t2_csf[v] = tp.t2_csf;
                t.f_i[v] = tp.f_i;
                t.lambda_par[v] = tp.lambda_par;
            }
    return t;
}

double wm_reference_first_echo(const PhantomConfig& config, const AcquisitionMET2& acq) {
    const TissueParams& wm = config.wm;
    double s = 0.0;
    const std::array<std::pair<double, double>, 3> comps{{{wm.f_m, wm.t2_m}, {wm.f_ie, wm.t2_ie}, {wm.f_csf, wm.t2_csf}}};
    for (const auto& [f, t2] : comps) {
        if (f <= 0.0) continue;
        EpgParams p;
        p.t2 = t2;
        p.t1 = std::max(kDefaultT1, t2);
        p.delta_te = acq.delta_te;
        p.n_echoes = acq.n_echoes;
        p.refocus_fa = acq.prescribed_fa;
        s += f * epg_echo_train(p)[0];
    }
    return s;
}

std::vector<double> met2_voxel_signal(const PhantomTruth& truth, std::size_t voxel, const AcquisitionMET2& acq, double t1) {
    std::vector<double> sig(static_cast<std::size_t>(acq.n_echoes), 0.0);
    const double m0 = truth.m0[voxel];
    if (m0 == 0.0) return sig;
    std::vector<double> train(sig.size());
    const std::array<std::pair<double, double>, 3> comps{{{truth.f_m[voxel], truth.t2_m[voxel]},
                                                          {truth.f_ie[voxel], truth.t2_ie[voxel]},
                                                          {truth.f_csf[voxel], truth.t2_csf[voxel]}}};
    for (const auto& [f, t2] : comps) {
        if (f <= 0.0) continue;
        EpgParams p;
        p.t2 = t2;
        p.t1 = std::max(t1, t2);
        p.delta_te = acq.delta_te;
        p.n_echoes = acq.n_echoes;
        p.refocus_fa = truth.fa[voxel];
        epg_echo_train(p, train);
        for (std::size_t e = 0; e < sig.size(); ++e) sig[e] += m0 * f * train[e];
    }
    return sig;
}

void add_rician_noise(Volume& vol, double sigma, std::uint64_t seed, std::uint64_t stream) {
    if (!(sigma > 0.0)) return;
    const std::size_t nv = vol.voxels();
    for (std::size_t v = 0; v < nv; ++v) {
        std::mt19937_64 rng(stream_seed(seed, stream, v));
        std::normal_distribution<double> noise(0.0, sigma);
        for (std::size_t t = 0; t < vol.frames(); ++t) {
            const double re = vol.value(v, t) + noise(rng);
            const double im = noise(rng);
            vol.value(v, t) = std::hypot(re, im);
        }
    }
}

Volume simulate_met2(const PhantomTruth& truth, const PhantomConfig& config, const AcquisitionMET2& acq, double snr,
                     std::uint64_t seed, double t1) {
    acq.validate();
    Volume out = Volume::like(truth.label, static_cast<std::size_t>(acq.n_echoes));
    for (std::size_t v = 0; v < truth.label.voxels(); ++v) {
        if (truth.m0[v] == 0.0) continue;
        const auto sig = met2_voxel_signal(truth, v, acq, t1);
        for (std::size_t e = 0; e < sig.size(); ++e) out.value(v, e) = sig[e];
    }
    if (snr > 0.0 && std::isfinite(snr))
        add_rician_noise(out, config.m0 * wm_reference_first_echo(config, acq) / snr, seed, 2);
    return out;
}

double dwi_signal(double b, const Vec3& g, const Vec3& n, double f_i, double lambda_par) {
    const double c = g[0] * n[0] + g[1] * n[1] + g[2] * n[2];
    const double c2 = c * c;
    const double lambda_perp = (1.0 - f_i) * lambda_par;
    return f_i * std::exp(-b * lambda_par * c2) +
           (1.0 - f_i) * std::exp(-b * (lambda_perp + (lambda_par - lambda_perp) * c2));
}

Volume simulate_dwi(const PhantomTruth& truth, const DiffusionScheme& scheme, double snr, std::uint64_t seed,
                    double dispersion_deg) {
    if (scheme.bvecs.size() != scheme.bvals.size()) throw_dims("simulate_dwi: bvecs and bvals differ in length");
    Volume out = Volume::like(truth.label, scheme.frames());
    const double tilt = dispersion_deg * std::numbers::pi / 180.0;
    for (std::size_t v = 0; v < truth.label.voxels(); ++v) {
        if (truth.m0[v] == 0.0) continue;
        const Vec3 n{truth.fiber.value(v, 0), truth.fiber.value(v, 1), truth.fiber.value(v, 2)};
        std::vector<Vec3> fibers{n};
        if (tilt > 0.0) {
            // any unit vector orthogonal to n
            Vec3 p = std::abs(n[2]) < 0.9 ? Vec3{-n[1], n[0], 0.0} : Vec3{0.0, -n[2], n[1]};
            const double pn = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            for (double& x : p) x /= pn;
            fibers.clear();
            for (double sgn : {-1.0, 1.0})
                fibers.push_back({std::cos(tilt) * n[0] + sgn * std::sin(tilt) * p[0],
                                  std::cos(tilt) * n[1] + sgn * std::sin(tilt) * p[1],
                                  std::cos(tilt) * n[2] + sgn * std::sin(tilt) * p[2]});
        }
        for (std::size_t f = 0; f < scheme.frames(); ++f) {
            double sig = 0.0;
            for (const Vec3& fib : fibers) sig += dwi_signal(scheme.bvals[f], scheme.bvecs[f], fib, truth.f_i[v], truth.lambda_par[v]);
            out.value(v, f) = sig / static_cast<double>(fibers.size());
        }
    }
    if (snr > 0.0 && std::isfinite(snr)) add_rician_noise(out, 1.0 / snr, seed, 3);
    return out;
}

std::vector<Vec3> repulsion_directions(std::size_t n, std::uint64_t seed) {
    if (n == 0) return {};
    std::vector<Vec3> p(n);
    // Fibonacci start on the upper hemisphere, rotated by the seed
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double offset = 2.0 * std::numbers::pi * static_cast<double>(splitmix64(seed) % 1000) / 1000.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double r = std::sqrt(1.0 - z * z);
        const double phi = golden * static_cast<double>(i) + offset;
        p[i] = {r * std::cos(phi), r * std::sin(phi), z};
    }
    if (n == 1) return p;
    // Projected gradient descent on the antipodally symmetric Coulomb energy,
    // with a step that grows on success and halves on failure.
    auto energy = [&](const std::vector<Vec3>& q) {
        double e = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                double dm = 0.0, dp = 0.0;
                for (int c = 0; c < 3; ++c) {
                    dm += (q[a][c] - q[b][c]) * (q[a][c] - q[b][c]);
                    dp += (q[a][c] + q[b][c]) * (q[a][c] + q[b][c]);
                }
                e += 1.0 / std::sqrt(dm) + 1.0 / std::sqrt(dp);
            }
        return e;
    };
    double e = energy(p);
    double step = 0.1 / static_cast<double>(n);
    std::vector<Vec3> trial(n);
    for (int it = 0; it < 3000 && step > 1e-14; ++it) {
        std::vector<Vec3> force(n, Vec3{0.0, 0.0, 0.0});
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                for (double sgn : {1.0, -1.0}) {
                    Vec3 d{p[a][0] - sgn * p[b][0], p[a][1] - sgn * p[b][1], p[a][2] - sgn * p[b][2]};
                    const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    const double inv = 1.0 / (r2 * std::sqrt(r2));
                    for (int c = 0; c < 3; ++c) force[a][c] += d[c] * inv;
                }
            }
        for (std::size_t a = 0; a < n; ++a) {
            const double radial = force[a][0] * p[a][0] + force[a][1] * p[a][1] + force[a][2] * p[a][2];
            for (int c = 0; c < 3; ++c) trial[a][c] = p[a][c] + step * (force[a][c] - radial * p[a][c]);
            const double tn = std::sqrt(trial[a][0] * trial[a][0] + trial[a][1] * trial[a][1] + trial[a][2] * trial[a][2]);
            for (double& x : trial[a]) x /= tn;
        }
        const double et = energy(trial);
        if (et < e) {
            p.swap(trial);
            e = et;
            step *= 1.2;
        } else {
            step *= 0.5;
        }
    }
    for (Vec3& v : p)
        if (v[2] < 0.0)
            for (double& x : v) x = -x;
    return p;
}

DiffusionScheme default_scheme() {
    const std::array<std::pair<double, std::size_t>, 4> shells{{{700.0, 6}, {1000.0, 20}, {2000.0, 46}, {3000.0, 66}}};
    std::vector<double> dw_b;
    std::vector<Vec3> dw_g;
    std::uint64_t s = 11;
    for (const auto& [b, count] : shells) {
        const auto dirs = repulsion_directions(count, s++);
        for (const Vec3& g : dirs) {
            dw_b.push_back(b);
            dw_g.push_back(g);
        }
    }
    // 11 b0 frames spread through the 138 weighted frames
    std::vector<double> bvals;
    std::vector<Vec3> bvecs;
    const std::size_t n_b0 = 11;
    const std::size_t total = dw_b.size() + n_b0;
    std::size_t next_dw = 0, placed_b0 = 0;
    for (std::size_t f = 0; f < total; ++f) {
        const bool b0_slot = placed_b0 < n_b0 && f * n_b0 >= placed_b0 * total;
        if (b0_slot) {
            bvals.push_back(0.0);
            bvecs.push_back({0.0, 0.0, 0.0});
            ++placed_b0;
        } else {
            bvals.push_back(dw_b[next_dw]);
            bvecs.push_back(dw_g[next_dw]);
            ++next_dw;
        }
    }
    return make_scheme(std::move(bvals), std::move(bvecs));
}

}  // namespace msmap
