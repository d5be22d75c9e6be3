#pragma once

#include <string>
#include <vector>

#include "msmap/io.hpp"
#include "msmap/learn.hpp"

namespace msmap {

/// Machine-readable record of one training run (cross-validation, held-out
/// evaluation, importances, optional feature ablation).
Json experiment_report_json(const ExperimentResult& result, const ExperimentConfig& config,
                            const std::vector<AblationRow>* ablation = nullptr);

struct RenderedReport {
    Json tables;
    std::string text;
};

/// Combine per-experiment reports into the cross-validation table (fold
/// columns + mean accuracy) and the feature-subset ablation table.
RenderedReport render_report(const std::vector<Json>& experiment_reports);

/// Throws InputFormat unless `tables` has the expected layout.
void validate_report_schema(const Json& tables);

}  // namespace msmap
