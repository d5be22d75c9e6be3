#include <algorithm>
#include <numeric>
#include <random>

#include "msmap/learn.hpp"

namespace msmap {

LabeledDataset balance_classes(const LabeledDataset& data, std::uint64_t seed) {
    const std::size_t k = data.num_classes();
    if (k < 2) throw_invalid("balance_classes needs at least two classes");
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t s = 0; s < data.size(); ++s) by_class[static_cast<std::size_t>(data.labels[s])].push_back(s);
    std::size_t target = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (by_class[c].empty()) throw_invalid("balance_classes: class '" + data.classes[c] + "' has no rows");
        target = std::max(target, by_class[c].size());
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t need = target - by_class[c].size();
        std::vector<std::size_t> pool = by_class[c];
        while (need > 0) {
            std::shuffle(pool.begin(), pool.end(), rng);
            const std::size_t take = std::min(need, pool.size());
            rows.insert(rows.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
            need -= take;
        }
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    return data.subset(rows);
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw_invalid("kfold_split: k must be >= 2");
    if (n < k) throw_invalid("kfold_split: fewer samples than folds");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(folds[f].begin(), folds[f].end());
        pos += size;
    }
    return folds;
}

std::vector<std::vector<double>> ConfusionMatrix::rates() const {
    std::vector<std::vector<double>> r(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const long row = std::accumulate(counts[i].begin(), counts[i].end(), 0L);
        for (long c : counts[i]) r[i].push_back(row > 0 ? static_cast<double>(c) / static_cast<double>(row) : 0.0);
    }
    return r;
}

long ConfusionMatrix::total() const {
    long t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
}

double ConfusionMatrix::accuracy() const {
    const long t = total();
    if (t == 0) return 0.0;
    long diag = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
    return static_cast<double>(diag) / static_cast<double>(t);
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred,
                                 const std::vector<std::string>& classes) {
    if (truth.size() != pred.size()) throw_dims("confusion_matrix: label vectors differ in length");
    const auto k = static_cast<int>(classes.size());
    ConfusionMatrix cm{classes, std::vector<std::vector<long>>(classes.size(), std::vector<long>(classes.size(), 0))};
    for (std::size_t s = 0; s < truth.size(); ++s) {
        if (truth[s] < 0 || truth[s] >= k || pred[s] < 0 || pred[s] >= k) throw_invalid("confusion_matrix: unknown label");
        ++cm.counts[static_cast<std::size_t>(truth[s])][static_cast<std::size_t>(pred[s])];
    }
    return cm;
}

ConfusionMatrix confusion_matrix(const std::vector<std::string>& truth, const std::vector<std::string>& pred,
                                 const std::vector<std::string>& classes) {
    auto index = [&](const std::string& s) {
        const auto it = std::find(classes.begin(), classes.end(), s);
        if (it == classes.end()) throw_invalid("confusion_matrix: unknown label '" + s + "'");
        return static_cast<int>(it - classes.begin());
    };
    if (truth.size() != pred.size()) throw_dims("confusion_matrix: label vectors differ in length");
    std::vector<int> t, p;
    for (std::size_t s = 0; s < truth.size(); ++s) {
        t.push_back(index(truth[s]));
        p.push_back(index(pred[s]));
    }
    return confusion_matrix(t, p, classes);
}

std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::LNC: return "L-N-C";
        case Experiment::LN: return "L-N";
        case Experiment::LC: return "L-C";
    }
    return "?";
}

Experiment parse_experiment(const std::string& s) {
    if (s == "LNC" || s == "L-N-C") return Experiment::LNC;
    if (s == "LN" || s == "L-N") return Experiment::LN;
    if (s == "LC" || s == "L-C") return Experiment::LC;
    throw_invalid("unknown experiment '" + s + "' (LNC|LN|LC)");
}

std::vector<Label> experiment_labels(Experiment e) {
    switch (e) {
        case Experiment::LNC: return {Label::L, Label::N, Label::C};
        case Experiment::LN: return {Label::L, Label::N};
        case Experiment::LC: return {Label::L, Label::C};
    }
    return {};
}

LabeledDataset dataset_from_table(const FeatureTable& table, Experiment experiment,
                                  const std::vector<std::size_t>& feature_subset,
                                  const std::vector<std::string>& include_subjects,
                                  const std::vector<std::string>& exclude_subjects) {
    if (feature_subset.empty()) throw_invalid("feature subset is empty");
    for (std::size_t f : feature_subset)
        if (f >= kNumFeatures) throw_invalid("feature index out of range");
    const auto labels = experiment_labels(experiment);
    LabeledDataset ds;
    for (Label l : labels) ds.classes.emplace_back(1, label_char(l));
    for (std::size_t f : feature_subset) ds.feature_names.push_back(kFeatureNames[f]);

    auto listed = [](const std::vector<std::string>& list, const std::string& s) {
        return std::find(list.begin(), list.end(), s) != list.end();
    };
    std::vector<std::size_t> rows;
    std::vector<int> y;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const FeatureRow& row = table.rows[r];
        if (!include_subjects.empty() && !listed(include_subjects, row.subject)) continue;
        if (listed(exclude_subjects, row.subject)) continue;
        const auto it = std::find(labels.begin(), labels.end(), row.label);
        if (it == labels.end()) continue;
        rows.push_back(r);
        y.push_back(static_cast<int>(it - labels.begin()));
    }
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_subset.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t f = 0; f < feature_subset.size(); ++f)
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) =
                table.rows[rows[r]].features[feature_subset[f]];
    ds.labels = std::move(y);
    return ds;
}

namespace {

std::vector<int> predict_all(const BoostModel& model, const LabeledDataset& data) {
    std::vector<int> out(data.size());
    Eigen::RowVectorXd row;
    for (std::size_t s = 0; s < data.size(); ++s) {
        row = data.features.row(static_cast<Eigen::Index>(s));
        out[s] = predict_label(model, row.data());
    }
    return out;
}

void require_classes(const LabeledDataset& ds, Experiment e) {
    const auto counts = ds.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0)
            throw Error(ErrorKind::InputFormat,
                        "experiment " + experiment_name(e) + ": feature table has no '" + ds.classes[c] + "' rows");
}

struct CvOutcome {
    std::vector<double> scores;
    std::vector<ConfusionMatrix> confusions;
};

CvOutcome cross_validate(const LabeledDataset& ds, const ExperimentConfig& config) {
    CvOutcome out;
    const auto folds = kfold_split(ds.size(), config.k, config.seed);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train_rows;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
        std::sort(train_rows.begin(), train_rows.end());
        const LabeledDataset train = balance_classes(ds.subset(train_rows), config.seed + 1 + f);
        const LabeledDataset test = ds.subset(folds[f]);
        const BoostModel model = train_samme(train, config.boost, config.seed);
        const ConfusionMatrix cm = confusion_matrix(test.labels, predict_all(model, test), ds.classes);
        out.scores.push_back(cm.accuracy());
        out.confusions.push_back(cm);
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const FeatureTable& table, Experiment experiment, const ExperimentConfig& config) {
    const LabeledDataset ds = dataset_from_table(table, experiment, config.feature_subset, {}, config.holdout_subjects);
    require_classes(ds, experiment);

    ExperimentResult res;
    res.experiment = experiment;
    res.classes = ds.classes;
    res.feature_names = ds.feature_names;
    res.class_rows = ds.class_counts();

    CvOutcome cv = cross_validate(ds, config);
    res.fold_scores = cv.scores;
    res.mean_accuracy = std::accumulate(cv.scores.begin(), cv.scores.end(), 0.0) / static_cast<double>(cv.scores.size());
    res.pooled_confusion = confusion_matrix(std::vector<int>{}, std::vector<int>{}, ds.classes);
    for (const auto& cm : cv.confusions)
        for (std::size_t i = 0; i < cm.counts.size(); ++i)
            for (std::size_t j = 0; j < cm.counts.size(); ++j) res.pooled_confusion.counts[i][j] += cm.counts[i][j];
    res.fold_confusions = std::move(cv.confusions);

    res.model = train_samme(balance_classes(ds, config.seed), config.boost, config.seed);
    res.model.feature_subset = config.feature_subset;
    try {
        res.importances = feature_importance(res.model);
    } catch (const Error&) {
        res.importances.assign(ds.feature_names.size(), 0.0);
    }

    if (!config.holdout_subjects.empty()) {
        const LabeledDataset held =
            dataset_from_table(table, experiment, config.feature_subset, config.holdout_subjects, {});
        res.holdout_rows = held.size();
        if (held.size() > 0) res.holdout_confusion = confusion_matrix(held.labels, predict_all(res.model, held), ds.classes);
    }
    return res;
}

std::vector<AblationRow> run_ablation(const FeatureTable& table, Experiment experiment, const ExperimentConfig& config) {
    const std::vector<std::pair<std::string, std::vector<std::size_t>>> subsets{
        {"Diff", {0, 1}}, {"MET2", {2, 3, 4}}, {"Diff+MET2", {0, 1, 2, 3, 4}}};
    std::vector<AblationRow> rows;
    for (const auto& [name, features] : subsets) {
        const LabeledDataset ds = dataset_from_table(table, experiment, features, {}, config.holdout_subjects);
        require_classes(ds, experiment);
        const CvOutcome cv = cross_validate(ds, config);
        AblationRow row{name, features, cv.scores, 0.0};
        row.mean_accuracy = std::accumulate(cv.scores.begin(), cv.scores.end(), 0.0) / static_cast<double>(cv.scores.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace msmap
