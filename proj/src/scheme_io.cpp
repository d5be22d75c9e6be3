#include <cmath>
#include <fstream>
#include <sstream>

#include "msmap/io.hpp"

namespace msmap {

namespace {

std::vector<std::vector<double>> read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InputFormat, "cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::vector<double> row;
        std::string tok;
        while (ss >> tok) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw Error(ErrorKind::InputFormat, path + ":" + std::to_string(lineno) + ": not a number: '" + tok + "'");
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

DiffusionScheme read_scheme(const std::string& bval_path, const std::string& bvec_path, double tolerance,
                            SchemeReadInfo* info) {
    const auto brows = read_rows(bval_path);
    std::vector<double> bvals;
    for (const auto& r : brows) bvals.insert(bvals.end(), r.begin(), r.end());
    if (bvals.empty()) throw Error(ErrorKind::InputFormat, "'" + bval_path + "': no b-values");

    const auto grows = read_rows(bvec_path);
    if (grows.size() != 3)
        throw Error(ErrorKind::InputFormat, "'" + bvec_path + "': expected three rows (x, y, z), found " +
                                                std::to_string(grows.size()));
    for (const auto& r : grows)
        if (r.size() != bvals.size())
            throw Error(ErrorKind::InputFormat, "frame count mismatch: " + std::to_string(bvals.size()) + " b-values vs " +
                                                    std::to_string(r.size()) + " gradient entries");

    std::vector<Vec3> bvecs(bvals.size());
    std::size_t renormalized = 0;
    for (std::size_t f = 0; f < bvals.size(); ++f) {
        if (!(bvals[f] >= 0.0) || !std::isfinite(bvals[f]))
            throw Error(ErrorKind::InputFormat, "b-value of frame " + std::to_string(f) + " is negative or non-finite");
        Vec3 g{grows[0][f], grows[1][f], grows[2][f]};
        const double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        if (bvals[f] > tolerance) {
            if (!(n > 0.0)) throw Error(ErrorKind::InputFormat, "zero gradient vector on diffusion-weighted frame " + std::to_string(f));
            if (std::abs(n - 1.0) > 1e-3) ++renormalized;
            for (double& x : g) x /= n;
        }
        bvecs[f] = g;
    }
    if (info) info->renormalized = renormalized;
    try {
        return make_scheme(std::move(bvals), std::move(bvecs), tolerance);
    } catch (const Error& e) {
        throw Error(ErrorKind::InputFormat, e.what());
    }
}

void write_scheme(const DiffusionScheme& scheme, const std::string& bval_path, const std::string& bvec_path) {
    std::ostringstream b, g;
    for (std::size_t f = 0; f < scheme.frames(); ++f) b << (f ? " " : "") << format_double(scheme.bvals[f]);
    b << '\n';
    for (int c = 0; c < 3; ++c) {
        for (std::size_t f = 0; f < scheme.frames(); ++f)
            g << (f ? " " : "") << format_double(scheme.bvecs[f][static_cast<std::size_t>(c)]);
        g << '\n';
    }
    write_text_atomic(bval_path, b.str());
    write_text_atomic(bvec_path, g.str());
}

}  // namespace msmap
