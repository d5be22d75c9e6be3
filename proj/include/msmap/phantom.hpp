#pragma once

#include <cstdint>
#include <vector>

#include "msmap/core.hpp"

namespace msmap {

enum class Region : int { Background = 0, CSF = 1, WM = 2, NAWM = 3, LesionRim = 4, LesionCore = 5 };

const char* region_name(Region r) noexcept;

struct TissueParams {
    double f_m = 0.15;
    double f_ie = 0.85;
    double f_csf = 0.0;
    double t2_m = 20.0;
    double t2_ie = 80.0;
    double t2_csf = 1500.0;
    double f_i = 0.65;
    double lambda_par = 1.7e-3;

    void validate(const char* what) const;
};

struct LesionSpec {
    Vec3 center;     // voxel coordinates
    double radius;   // outer (rim) radius, voxels
    double core_radius;
};

struct PhantomConfig {
    std::size_t size = 48;
    bool control = false;  // no lesions; WM carries the healthy tissue values
    double m0 = 1000.0;    // MET2 proton-density scale
    double fa_min = 135.0;
    double fa_max = 170.0;
    TissueParams wm{};                                                      // control WM
    TissueParams nawm{0.13, 0.87, 0.0, 20.0, 80.0, 1500.0, 0.60, 1.7e-3};  // patient non-lesional WM
    TissueParams lesion{0.03, 0.92, 0.05, 20.0, 110.0, 1500.0, 0.30, 2.0e-3};
    TissueParams csf{0.0, 0.0, 1.0, 20.0, 80.0, 1500.0, 0.0, 3.0e-3};
    /// Empty: a default set of lesions is placed (jittered by the seed).
    std::vector<LesionSpec> lesions;

    void validate() const;
};

struct PhantomTruth {
    Volume f_m, f_ie, f_csf;
    Volume t2_m, t2_ie, t2_csf;
    Volume f_i, lambda_par;
    Volume fiber;  // 3 frames: unit direction
    Volume label;  // Region codes
    Volume fa;     // degrees
    Volume m0;
    Volume score;  // lesion score in [0, 1]
    std::vector<LesionSpec> lesions;

    Mask region_mask(Region r) const;
    Mask wm_mask() const;     // WM, NAWM, rim and core
    Mask brain_mask() const;  // every non-background voxel
};

PhantomTruth make_phantom(const PhantomConfig& config, std::uint64_t seed);

/// First-echo signal at the prescribed angle of the control WM tissue (unit m0).
double wm_reference_first_echo(const PhantomConfig& config, const AcquisitionMET2& acq);

/// Noise-free per-voxel echo train: m0 * sum_c f_c * epg(T2_c, fa).
std::vector<double> met2_voxel_signal(const PhantomTruth& truth, std::size_t voxel, const AcquisitionMET2& acq,
                                      double t1 = 1000.0);

/// snr <= 0 or infinite means noiseless.
Volume simulate_met2(const PhantomTruth& truth, const PhantomConfig& config, const AcquisitionMET2& acq, double snr,
                     std::uint64_t seed, double t1 = 1000.0);

/// Stick + tortuous zeppelin signal for one direction g, fiber n.
double dwi_signal(double b, const Vec3& g, const Vec3& n, double f_i, double lambda_par);

/// Unit b0 signal in tissue; sigma = 1/snr. dispersion_deg > 0 splits each
/// fiber into two populations tilted by +/- that angle (model mismatch).
Volume simulate_dwi(const PhantomTruth& truth, const DiffusionScheme& scheme, double snr, std::uint64_t seed,
                    double dispersion_deg = 0.0);

/// Four-shell protocol: 11 interspersed b0 + 6@700, 20@1000, 46@2000, 66@3000.
DiffusionScheme default_scheme();

/// n well-spread unit vectors on the hemisphere (antipodal repulsion).
std::vector<Vec3> repulsion_directions(std::size_t n, std::uint64_t seed = 1);

/// Rician magnitude |(s + n1) + i n2| with n1, n2 ~ N(0, sigma).
void add_rician_noise(Volume& vol, double sigma, std::uint64_t seed, std::uint64_t stream);

}  // namespace msmap
