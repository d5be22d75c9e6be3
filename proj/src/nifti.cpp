#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <zlib.h>

#include "msmap/io.hpp"

namespace msmap {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
T get(const unsigned char* buf, std::size_t off, bool swap) {
    T v;
    std::memcpy(&v, buf + off, sizeof(T));
    if (swap) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
    }
    return v;
}

template <typename T>
void put(unsigned char* buf, std::size_t off, T v) {
    std::memcpy(buf + off, &v, sizeof(T));
}

void swap_bytes(unsigned char* p, std::size_t width, std::size_t count) {
    for (std::size_t n = 0; n < count; ++n, p += width)
        for (std::size_t i = 0; i < width / 2; ++i) std::swap(p[i], p[width - 1 - i]);
}

std::size_t datatype_width(short dt) {
    switch (dt) {
        case 2: return 1;
        case 4: return 2;
        case 16: return 4;
        case 64: return 8;
        default: return 0;
    }
}

struct GzFile {
    gzFile f = nullptr;
    ~GzFile() {
        if (f) gzclose(f);
    }
};

// Read up to `n` bytes; returns the count actually read.
std::size_t read_bytes(gzFile f, unsigned char* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n - got, 1u << 30));
        const int r = gzread(f, dst + got, chunk);
        if (r < 0) {
            int errnum = 0;
            throw NiftiError(NiftiErrorCode::Truncated, std::string("corrupt compressed stream: ") + gzerror(f, &errnum));
        }
        if (r == 0) break;
        got += static_cast<std::size_t>(r);
    }
    return got;
}

Eigen::Matrix4d quatern_to_affine(float qb, float qc, float qd, float qx, float qy, float qz, float dx, float dy,
                                  float dz, float qfac) {
    double b = qb, c = qc, d = qd;
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        const double s = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= s;
        c *= s;
        d *= s;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    const double xd = dx > 0 ? dx : 1.0, yd = dy > 0 ? dy : 1.0;
    double zd = dz > 0 ? dz : 1.0;
    if (qfac < 0) zd = -zd;
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = (a * a + b * b - c * c - d * d) * xd;
    m(0, 1) = 2.0 * (b * c - a * d) * yd;
    m(0, 2) = 2.0 * (b * d + a * c) * zd;
    m(1, 0) = 2.0 * (b * c + a * d) * xd;
    m(1, 1) = (a * a + c * c - b * b - d * d) * yd;
    m(1, 2) = 2.0 * (c * d - a * b) * zd;
    m(2, 0) = 2.0 * (b * d - a * c) * xd;
    m(2, 1) = 2.0 * (c * d + a * b) * yd;
    m(2, 2) = (a * a + d * d - c * c - b * b) * zd;
    m(0, 3) = qx;
    m(1, 3) = qy;
    m(2, 3) = qz;
    return m;
}

// Quaternion parameters (b, c, d, qfac) of the rotation part of an affine.
std::array<double, 4> affine_to_quatern(const Eigen::Matrix4d& m) {
    Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    for (int col = 0; col < 3; ++col) {
        const double n = r.col(col).norm();
        r.col(col) = n > 0 ? (r.col(col) / n).eval() : Eigen::Vector3d::Unit(col);
    }
    double qfac = 1.0;
    if (r.determinant() < 0) {
        r.col(2) = -r.col(2);
        qfac = -1.0;
    }
    // nearest orthogonal matrix
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    double a = r(0, 0) + r(1, 1) + r(2, 2) + 1.0, b, c, d;
    if (a > 0.5) {
        a = 0.5 * std::sqrt(a);
        b = 0.25 * (r(2, 1) - r(1, 2)) / a;
        c = 0.25 * (r(0, 2) - r(2, 0)) / a;
        d = 0.25 * (r(1, 0) - r(0, 1)) / a;
    } else {
        const double xd = 1.0 + r(0, 0) - (r(1, 1) + r(2, 2));
        const double yd = 1.0 + r(1, 1) - (r(0, 0) + r(2, 2));
        const double zd = 1.0 + r(2, 2) - (r(0, 0) + r(1, 1));
        if (xd > 1.0) {
            b = 0.5 * std::sqrt(xd);
            c = 0.25 * (r(0, 1) + r(1, 0)) / b;
            d = 0.25 * (r(0, 2) + r(2, 0)) / b;
            a = 0.25 * (r(2, 1) - r(1, 2)) / b;
        } else if (yd > 1.0) {
            c = 0.5 * std::sqrt(yd);
            b = 0.25 * (r(0, 1) + r(1, 0)) / c;
            d = 0.25 * (r(1, 2) + r(2, 1)) / c;
            a = 0.25 * (r(0, 2) - r(2, 0)) / c;
        } else {
            d = 0.5 * std::sqrt(zd);
            b = 0.25 * (r(0, 2) + r(2, 0)) / d;
            c = 0.25 * (r(1, 2) + r(2, 1)) / d;
            a = 0.25 * (r(1, 0) - r(0, 1)) / d;
        }
        if (a < 0.0) {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    return {b, c, d, qfac};
}

}  // namespace

Volume read_nifti(const std::string& path) {
    if (!std::filesystem::exists(path)) throw NiftiError(NiftiErrorCode::Io, "cannot open '" + path + "': no such file");
    GzFile file;
    file.f = gzopen(path.c_str(), "rb");
    if (!file.f) throw NiftiError(NiftiErrorCode::Io, "cannot open '" + path + "'");

    unsigned char hdr[kHeaderSize];
    if (read_bytes(file.f, hdr, kHeaderSize) != kHeaderSize)
        throw NiftiError(NiftiErrorCode::Truncated, "'" + path + "': truncated header");

    bool swap = false;
    int sizeof_hdr = get<int>(hdr, 0, false);
    if (sizeof_hdr != kHeaderSize) {
        swap = true;
        sizeof_hdr = get<int>(hdr, 0, true);
        if (sizeof_hdr != kHeaderSize) throw NiftiError(NiftiErrorCode::BadHeader, "'" + path + "': sizeof_hdr is not 348");
    }
    if (std::memcmp(hdr + 344, "n+1\0", 4) != 0)
        throw NiftiError(NiftiErrorCode::BadMagic,
                         "'" + path + "': unsupported format (magic is not \"n+1\"; only single-file NIfTI-1 is read)");

    std::array<short, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[static_cast<std::size_t>(i)] = get<short>(hdr, 40 + 2 * static_cast<std::size_t>(i), swap);
    if (dim[0] < 1 || dim[0] > 7) throw NiftiError(NiftiErrorCode::BadHeader, "'" + path + "': invalid dim[0]");
    for (int i = 1; i <= dim[0]; ++i)
        if (dim[static_cast<std::size_t>(i)] < 1) throw NiftiError(NiftiErrorCode::BadHeader, "'" + path + "': non-positive dimension");
    for (int i = 5; i <= dim[0]; ++i)
        if (dim[static_cast<std::size_t>(i)] != 1)
            throw NiftiError(NiftiErrorCode::BadHeader, "'" + path + "': more than four dimensions are not supported");
    auto d = [&](int i) -> std::size_t { return i <= dim[0] ? static_cast<std::size_t>(dim[static_cast<std::size_t>(i)]) : 1; };

    const short datatype = get<short>(hdr, 70, swap);
    const std::size_t width = datatype_width(datatype);
    if (width == 0)
        throw NiftiError(NiftiErrorCode::UnsupportedDatatype,
                         "'" + path + "': unsupported datatype code " + std::to_string(datatype));

    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[static_cast<std::size_t>(i)] = get<float>(hdr, 76 + 4 * static_cast<std::size_t>(i), swap);
    const float vox_offset = get<float>(hdr, 108, swap);
    float slope = get<float>(hdr, 112, swap);
    const float inter = get<float>(hdr, 116, swap);
    if (!(slope != 0.0f) || !std::isfinite(slope)) slope = 1.0f;
    const short qform_code = get<short>(hdr, 252, swap);
    const short sform_code = get<short>(hdr, 254, swap);

    Vec3 spacing{};
    for (int i = 0; i < 3; ++i) {
        const double p = std::abs(pixdim[static_cast<std::size_t>(i + 1)]);
        spacing[static_cast<std::size_t>(i)] = p > 0 ? p : 1.0;
    }
    Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
    if (sform_code > 0) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) affine(r, c) = get<float>(hdr, 280 + 16 * static_cast<std::size_t>(r) + 4 * static_cast<std::size_t>(c), swap);
    } else if (qform_code > 0) {
        affine = quatern_to_affine(get<float>(hdr, 256, swap), get<float>(hdr, 260, swap), get<float>(hdr, 264, swap),
                                   get<float>(hdr, 268, swap), get<float>(hdr, 272, swap), get<float>(hdr, 276, swap),
                                   pixdim[1], pixdim[2], pixdim[3], pixdim[0]);
    } else {
        for (int i = 0; i < 3; ++i) affine(i, i) = spacing[static_cast<std::size_t>(i)];
    }

    const auto offset = static_cast<std::size_t>(vox_offset < kHeaderSize ? kVoxOffset : vox_offset);
    std::vector<unsigned char> skip(offset - kHeaderSize);
    if (read_bytes(file.f, skip.data(), skip.size()) != skip.size())
        throw NiftiError(NiftiErrorCode::Truncated, "'" + path + "': truncated before voxel data");

    Volume vol({d(1), d(2), d(3)}, d(4), spacing, affine);
    const std::size_t count = vol.size();
    std::vector<unsigned char> raw(count * width);
    if (read_bytes(file.f, raw.data(), raw.size()) != raw.size())
        throw NiftiError(NiftiErrorCode::Truncated, "'" + path + "': truncated voxel data");
    if (swap && width > 1) swap_bytes(raw.data(), width, count);

    auto out = vol.data();
    const bool scaled = slope != 1.0f || inter != 0.0f;
    for (std::size_t n = 0; n < count; ++n) {
        double v = 0.0;
        switch (datatype) {
            case 2: v = raw[n]; break;
            case 4: {
                std::int16_t x;
                std::memcpy(&x, raw.data() + 2 * n, 2);
                v = x;
                break;
            }
            case 16: {
                float x;
                std::memcpy(&x, raw.data() + 4 * n, 4);
                v = x;
                break;
            }
            case 64: std::memcpy(&v, raw.data() + 8 * n, 8); break;
            default: break;
        }
        out[n] = scaled ? v * slope + inter : v;
    }
    return vol;
}

Mask read_mask(const std::string& path) { return Mask::from_volume(read_nifti(path), 0.0); }

void write_nifti(const Volume& vol, const std::string& path, NiftiDatatype type) {
    const auto dt = static_cast<short>(type);
    const std::size_t width = datatype_width(dt);
    unsigned char hdr[kVoxOffset] = {};
    put<int>(hdr, 0, kHeaderSize);
    hdr[38] = 'r';
    const short ndim = vol.frames() > 1 ? 4 : 3;
    const std::array<short, 8> dim{ndim, static_cast<short>(vol.nx()), static_cast<short>(vol.ny()),
                                   static_cast<short>(vol.nz()), static_cast<short>(vol.frames()), 1, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) put<short>(hdr, 40 + 2 * i, dim[i]);
    put<short>(hdr, 70, dt);
    put<short>(hdr, 72, static_cast<short>(8 * width));

    const Eigen::Matrix4d& A = vol.affine();
    const auto q = affine_to_quatern(A);
    const std::array<float, 8> pixdim{static_cast<float>(q[3]), static_cast<float>(vol.spacing()[0]),
                                      static_cast<float>(vol.spacing()[1]), static_cast<float>(vol.spacing()[2]),
                                      1.0f, 1.0f, 1.0f, 1.0f};
    for (std::size_t i = 0; i < 8; ++i) put<float>(hdr, 76 + 4 * i, pixdim[i]);
    put<float>(hdr, 108, static_cast<float>(kVoxOffset));
    put<float>(hdr, 112, 1.0f);
    hdr[123] = 2;  // mm
    std::snprintf(reinterpret_cast<char*>(hdr + 148), 80, "msmap");
    put<short>(hdr, 252, 1);
    put<short>(hdr, 254, 1);
    put<float>(hdr, 256, static_cast<float>(q[0]));
    put<float>(hdr, 260, static_cast<float>(q[1]));
    put<float>(hdr, 264, static_cast<float>(q[2]));
    put<float>(hdr, 268, static_cast<float>(A(0, 3)));
    put<float>(hdr, 272, static_cast<float>(A(1, 3)));
    put<float>(hdr, 276, static_cast<float>(A(2, 3)));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            put<float>(hdr, 280 + 16 * r + 4 * c, static_cast<float>(A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    std::memcpy(hdr + 344, "n+1\0", 4);

    const auto data = vol.data();
    std::vector<unsigned char> raw(data.size() * width);
    for (std::size_t n = 0; n < data.size(); ++n) {
        const double v = data[n];
        switch (type) {
            case NiftiDatatype::Uint8: raw[n] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L)); break;
            case NiftiDatatype::Int16: {
                const auto x = static_cast<std::int16_t>(std::clamp(std::lround(v), -32768L, 32767L));
                std::memcpy(raw.data() + 2 * n, &x, 2);
                break;
            }
            case NiftiDatatype::Float32: {
                const auto x = static_cast<float>(v);
                std::memcpy(raw.data() + 4 * n, &x, 4);
                break;
            }
            case NiftiDatatype::Float64: std::memcpy(raw.data() + 8 * n, &v, 8); break;
        }
    }

    const std::string tmp = path + ".tmp";
    const bool gz = ends_with(path, ".gz");
    {
        GzFile file;
        file.f = gzopen(tmp.c_str(), gz ? "wb6" : "wbT");
        if (!file.f) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
        bool ok = gzwrite(file.f, hdr, kVoxOffset) == kVoxOffset;
        std::size_t done = 0;
        while (ok && done < raw.size()) {
            const auto chunk = static_cast<unsigned>(std::min<std::size_t>(raw.size() - done, 1u << 30));
            ok = gzwrite(file.f, raw.data() + done, chunk) == static_cast<int>(chunk);
            done += chunk;
        }
        const int rc = gzclose(file.f);
        file.f = nullptr;
        if (!ok || rc != Z_OK) {
            std::filesystem::remove(tmp);
            throw Error(ErrorKind::InvalidArgument, "failed writing '" + path + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace msmap
