#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msmap/sampling.hpp"

namespace msmap {

struct LabeledDataset {
    Eigen::MatrixXd features;  // n x d
    std::vector<int> labels;   // indices into classes
    std::vector<std::string> classes;
    std::vector<std::string> feature_names;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t num_classes() const noexcept { return classes.size(); }
    void validate() const;
    LabeledDataset subset(const std::vector<std::size_t>& rows) const;
    std::vector<std::size_t> class_counts() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
    double gain = 0.0;  // weighted impurity decrease of this split
    std::vector<double> class_mass;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int predict(const double* x) const;
    int depth() const;
    std::size_t leaf_count() const;
};

struct CartOptions {
    int max_depth = 2;
    std::size_t min_leaf = 1;
};

/// Per-feature row orders sorted by value, reusable across boosting rounds.
std::vector<std::vector<std::size_t>> presort_features(const Eigen::MatrixXd& x);

/// Weighted-Gini CART with exact midpoint threshold search.
DecisionTree train_cart(const LabeledDataset& data, const std::vector<double>& weights, const CartOptions& opts = {},
                        const std::vector<std::vector<std::size_t>>* presorted = nullptr);

struct BoostOptions {
    int n_estimators = 100;
    CartOptions tree;
};

struct BoostModel {
    std::vector<std::string> classes;
    std::vector<std::string> feature_names;
    std::vector<DecisionTree> trees;
    std::vector<double> alphas;
    std::vector<double> errors;  // weighted training error per kept stage
    BoostOptions options;
    std::uint64_t seed = 0;
    std::vector<std::size_t> feature_subset;  // columns of the full table used by this model
};

inline constexpr double kAlphaCapLog = 27.631021115928547;  // ln(1e12)

/// ln((1 - err)/err) + ln(K - 1); err <= 0 gives the capped value.
double samme_alpha(double err, std::size_t k);

/// Called after each kept, non-final stage with the renormalized weights.
using RoundObserver = std::function<void(int stage, double err, double alpha, const std::vector<double>& weights)>;

/// Discrete SAMME boosting. Deterministic; `seed` is recorded in the model.
BoostModel train_samme(const LabeledDataset& data, const BoostOptions& opts, std::uint64_t seed,
                       const RoundObserver& observer = {});

/// Normalized weighted votes. With no positive stage weight the result is
/// uniform and `uniform` (if given) is set.
std::vector<double> predict_proba(const BoostModel& model, const double* x, bool* uniform = nullptr);
int predict_label(const BoostModel& model, const double* x);

/// Alpha-weighted impurity decrease per feature, normalized to sum 1.
std::vector<double> feature_importance(const BoostModel& model);

LabeledDataset balance_classes(const LabeledDataset& data, std::uint64_t seed);

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<long>> counts;  // [true][pred]

    std::vector<std::vector<double>> rates() const;  // row-normalized
    double accuracy() const;
    long total() const;
};

ConfusionMatrix confusion_matrix(const std::vector<std::string>& truth, const std::vector<std::string>& pred,
                                 const std::vector<std::string>& classes);
ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred,
                                 const std::vector<std::string>& classes);

enum class Experiment { LNC, LN, LC };

std::string experiment_name(Experiment e);  // "L-N-C", "L-N", "L-C"
Experiment parse_experiment(const std::string& s);
std::vector<Label> experiment_labels(Experiment e);

struct ExperimentConfig {
    std::size_t k = 5;
    BoostOptions boost;
    std::uint64_t seed = 0;
    std::vector<std::size_t> feature_subset{0, 1, 2, 3, 4};
    std::vector<std::string> holdout_subjects;
};

struct ExperimentResult {
    Experiment experiment = Experiment::LN;
    std::vector<std::string> classes;
    std::vector<std::string> feature_names;
    std::vector<double> fold_scores;
    double mean_accuracy = 0.0;
    std::vector<ConfusionMatrix> fold_confusions;
    ConfusionMatrix pooled_confusion;
    BoostModel model;  // trained on every non-held-out row
    std::vector<double> importances;
    std::optional<ConfusionMatrix> holdout_confusion;
    std::size_t holdout_rows = 0;
    std::vector<std::size_t> class_rows;  // rows per class entering cross-validation
};

/// Rows of the experiment's classes, restricted to `feature_subset` columns.
LabeledDataset dataset_from_table(const FeatureTable& table, Experiment experiment,
                                  const std::vector<std::size_t>& feature_subset,
                                  const std::vector<std::string>& include_subjects,
                                  const std::vector<std::string>& exclude_subjects);

ExperimentResult run_experiment(const FeatureTable& table, Experiment experiment, const ExperimentConfig& config);

struct AblationRow {
    std::string name;  // "Diff", "MET2", "Diff+MET2"
    std::vector<std::size_t> features;
    std::vector<double> fold_scores;
    double mean_accuracy = 0.0;
};

/// Cross-validated accuracy for diffusion-only, MET2-only and combined features.
std::vector<AblationRow> run_ablation(const FeatureTable& table, Experiment experiment, const ExperimentConfig& config);

}  // namespace msmap
