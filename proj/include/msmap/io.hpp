#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "msmap/core.hpp"
#include "msmap/learn.hpp"
#include "msmap/phantom.hpp"
#include "msmap/sampling.hpp"

namespace msmap {

using Json = nlohmann::json;

// ---- NIfTI-1 ----

enum class NiftiErrorCode { BadMagic = 1, UnsupportedDatatype = 2, Truncated = 3, BadHeader = 4, Io = 5 };

class NiftiError : public Error {
public:
    NiftiError(NiftiErrorCode code, const std::string& what) : Error(ErrorKind::InputFormat, what), code_(code) {}
    NiftiErrorCode code() const noexcept { return code_; }

private:
    NiftiErrorCode code_;
};

enum class NiftiDatatype : short { Uint8 = 2, Int16 = 4, Float32 = 16, Float64 = 64 };

/// Single-file NIfTI-1 (".nii" or gzip-compressed ".nii.gz").
Volume read_nifti(const std::string& path);
void write_nifti(const Volume& vol, const std::string& path, NiftiDatatype type = NiftiDatatype::Float32);

Mask read_mask(const std::string& path);

// ---- diffusion scheme text files ----

struct SchemeReadInfo {
    std::size_t renormalized = 0;  // b > 0 vectors whose norm deviated from 1 by > 1e-3
};

DiffusionScheme read_scheme(const std::string& bval_path, const std::string& bvec_path,
                            double tolerance = kDefaultShellTolerance, SchemeReadInfo* info = nullptr);
void write_scheme(const DiffusionScheme& scheme, const std::string& bval_path, const std::string& bvec_path);

// ---- feature tables ----

inline constexpr const char* kTableHeader = "subject,i,j,k,label,smt_fi,smt_fe,met2_fm,met2_fie,met2_fcsf";

void write_table(const FeatureTable& table, const std::string& path);
FeatureTable read_table(const std::string& path);

// ---- JSON documents ----

Json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const Json& j);
Json model_to_json(const BoostModel& model);
BoostModel model_from_json(const Json& j);

Json confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const Json& j);

Json phantom_config_to_json(const PhantomConfig& config);
PhantomConfig phantom_config_from_json(const Json& j);

Json read_json(const std::string& path);
void write_json(const Json& j, const std::string& path);

/// Write `content` to a temporary sibling file, then rename over `path`.
void write_text_atomic(const std::string& path, const std::string& content);

std::string format_double(double v);

}  // namespace msmap
