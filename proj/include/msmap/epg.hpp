#pragma once

#include <vector>

#include <Eigen/Core>

#include "msmap/core.hpp"

namespace msmap {

inline constexpr double kDefaultT1 = 1000.0;  // ms

struct EpgParams {
    double t2 = 80.0;          // ms
    double t1 = kDefaultT1;    // ms
    double delta_te = 10.68;   // ms
    int n_echoes = 32;
    double refocus_fa = 180.0; // degrees

    void validate() const;
};

/// CPMG echo amplitudes |F0| at n*delta_te for unit initial transverse magnetization.
///
/// Ideal 90 degree excitation, refocusing pulses of angle refocus_fa about the
/// axis of the excited magnetization, T2/T1 decay over each half echo
/// spacing (no longitudinal recovery).
std::vector<double> epg_echo_train(const EpgParams& params);

/// Same as above, writing into a preallocated buffer of n_echoes values.
void epg_echo_train(const EpgParams& params, std::span<double> out);

struct DictionaryMatrix {
    Eigen::MatrixXd entries;  // n_echoes x p
    T2Grid t2_grid;
    double fa = 180.0;
    AcquisitionMET2 acquisition;
};

DictionaryMatrix build_dictionary(const T2Grid& grid, const AcquisitionMET2& acq, double fa, double t1 = kDefaultT1);

}  // namespace msmap
