#include <cmath>
#include <numeric>

#include "msmap/learn.hpp"

namespace msmap {

double samme_alpha(double err, std::size_t k) {
    if (k < 2) throw_invalid("SAMME needs at least two classes");
    const double log_k1 = std::log(static_cast<double>(k) - 1.0);
    if (err <= 0.0) return kAlphaCapLog + log_k1;
    return std::log((1.0 - err) / err) + log_k1;
}

BoostModel train_samme(const LabeledDataset& data, const BoostOptions& opts, std::uint64_t seed,
                       const RoundObserver& observer) {
    data.validate();
    const std::size_t k = data.num_classes();
    const std::size_t n = data.size();
    if (k < 2) throw_invalid("SAMME needs at least two classes");
    if (opts.n_estimators < 1) throw_invalid("SAMME needs n_estimators >= 1");
    if (n == 0) throw_invalid("SAMME: empty training set");

    BoostModel model;
    model.classes = data.classes;
    model.feature_names = data.feature_names;
    model.options = opts;
    model.seed = seed;

    const auto presorted = presort_features(data.features);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<char> miss(n);

    for (int m = 0; m < opts.n_estimators; ++m) {
        DecisionTree tree = train_cart(data, w, opts.tree, &presorted);
        double err = 0.0, total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            miss[s] = tree.predict(data.features.row(static_cast<Eigen::Index>(s)).eval().data()) != data.labels[s];
            total += w[s];
            if (miss[s]) err += w[s];
        }
        err /= total;
        if (err >= 1.0 - 1.0 / static_cast<double>(k)) break;  // no better than chance: discard and stop
        if (err <= 0.0) {
            model.trees.push_back(std::move(tree));
            model.alphas.push_back(samme_alpha(0.0, k));
            model.errors.push_back(0.0);
            break;
        }
        const double alpha = samme_alpha(err, k);
        const double boost = std::exp(alpha);
        double sum = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            if (miss[s]) w[s] *= boost;
            sum += w[s];
        }
        for (double& x : w) x /= sum;
        model.trees.push_back(std::move(tree));
        model.alphas.push_back(alpha);
        model.errors.push_back(err);
        if (observer) observer(m, err, alpha, w);
    }
    return model;
}

std::vector<double> predict_proba(const BoostModel& model, const double* x, bool* uniform) {
    const std::size_t k = model.classes.size();
    std::vector<double> p(k, 0.0);
    double total = 0.0;
    for (std::size_t m = 0; m < model.trees.size(); ++m) {
        if (model.alphas[m] <= 0.0) continue;
        p[static_cast<std::size_t>(model.trees[m].predict(x))] += model.alphas[m];
        total += model.alphas[m];
    }
    if (uniform) *uniform = !(total > 0.0);
    if (!(total > 0.0)) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(k));
        return p;
    }
    for (double& v : p) v /= total;
    return p;
}

int predict_label(const BoostModel& model, const double* x) {
    const auto p = predict_proba(model, x);
    int best = 0;
    for (std::size_t c = 1; c < p.size(); ++c)
        if (p[c] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

std::vector<double> feature_importance(const BoostModel& model) {
    std::vector<double> imp(model.feature_names.size(), 0.0);
    bool any_split = false;
    for (std::size_t m = 0; m < model.trees.size(); ++m)
        for (const TreeNode& node : model.trees[m].nodes) {
            if (node.feature < 0) continue;
            any_split = true;
            if (static_cast<std::size_t>(node.feature) >= imp.size()) imp.resize(static_cast<std::size_t>(node.feature) + 1, 0.0);
            imp[static_cast<std::size_t>(node.feature)] += model.alphas[m] * node.gain;
        }
    if (!any_split) throw_invalid("feature importance: model has no splits");
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (!(total > 0.0)) throw_numerical("feature importance: zero total gain");
    for (double& v : imp) v /= total;
    return imp;
}

}  // namespace msmap
