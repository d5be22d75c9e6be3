#include <algorithm>
#include <cmath>
#include <numeric>

#include "msmap/learn.hpp"

namespace msmap {

void LabeledDataset::validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw_dims("dataset: feature rows differ from label count");
    if (!feature_names.empty() && static_cast<std::size_t>(features.cols()) != feature_names.size())
        throw_dims("dataset: feature columns differ from feature names");
    if (!features.allFinite()) throw_invalid("dataset: non-finite feature values");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes.size()) throw_invalid("dataset: label outside class list");
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
    LabeledDataset out;
    out.classes = classes;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(rows[r]));
        out.labels.push_back(labels[rows[r]]);
    }
    return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> c(classes.size(), 0);
    for (int y : labels) ++c[static_cast<std::size_t>(y)];
    return c;
}

int DecisionTree::predict(const double* x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
        const TreeNode& node = nodes[static_cast<std::size_t>(n)];
        n = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].label;
}

int DecisionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        best = std::max(best, d[n]);
        if (nodes[n].feature >= 0) {
            d[static_cast<std::size_t>(nodes[n].left)] = d[n] + 1;
            d[static_cast<std::size_t>(nodes[n].right)] = d[n] + 1;
        }
    }
    return best;
}

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::vector<std::vector<std::size_t>> presort_features(const Eigen::MatrixXd& x) {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& order = out[static_cast<std::size_t>(f)];
        order.resize(static_cast<std::size_t>(x.rows()));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
        });
    }
    return out;
}

namespace {

// W * Gini for class masses summing to W.
double weighted_gini(const double* mass, std::size_t k, double total) {
    if (total <= 0.0) return 0.0;
    double sq = 0.0;
    for (std::size_t c = 0; c < k; ++c) sq += mass[c] * mass[c];
    return total - sq / total;
}

int majority(const std::vector<double>& mass, int fallback) {
    int best = fallback;
    double best_mass = 0.0;
    for (std::size_t c = 0; c < mass.size(); ++c)
        if (mass[c] > best_mass) {
            best_mass = mass[c];
            best = static_cast<int>(c);
        }
    return best;
}

struct SplitState {
    std::vector<double> left_mass;
    double left_total = 0.0;
    std::size_t left_count = 0;
    double prev = 0.0;
    bool has_prev = false;
};

struct BestSplit {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

}  // namespace

DecisionTree train_cart(const LabeledDataset& data, const std::vector<double>& weights, const CartOptions& opts,
                        const std::vector<std::vector<std::size_t>>* presorted) {
    const std::size_t n = data.size();
    const std::size_t k = data.num_classes();
    const auto d = static_cast<std::size_t>(data.features.cols());
    if (weights.size() != n) throw_dims("train_cart: weight count differs from sample count");
    if (n == 0 || k == 0) throw_invalid("train_cart: empty dataset");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw_invalid("train_cart: weights must be finite and >= 0");
        wsum += w;
    }
    if (!(wsum > 0.0)) throw_invalid("train_cart: weights must sum to > 0");
    if (opts.max_depth < 0) throw_invalid("train_cart: max_depth must be >= 0");

    std::vector<std::vector<std::size_t>> local;
    if (!presorted) {
        local = presort_features(data.features);
        presorted = &local;
    }

    DecisionTree tree;
    std::vector<int> node_of(n, 0);
    std::vector<std::size_t> count_of;

    auto make_node = [&](std::vector<double> mass, std::size_t count, int fallback) {
        TreeNode node;
        node.label = majority(mass, fallback);
        node.class_mass = std::move(mass);
        tree.nodes.push_back(std::move(node));
        count_of.push_back(count);
        return static_cast<int>(tree.nodes.size() - 1);
    };

    {
        std::vector<double> mass(k, 0.0);
        for (std::size_t s = 0; s < n; ++s) mass[static_cast<std::size_t>(data.labels[s])] += weights[s];
        make_node(std::move(mass), n, 0);
    }

    std::vector<int> frontier{0};
    for (int depth = 0; depth < opts.max_depth && !frontier.empty(); ++depth) {
        // frontier node id -> slot
        std::vector<int> slot(tree.nodes.size(), -1);
        for (std::size_t a = 0; a < frontier.size(); ++a) slot[static_cast<std::size_t>(frontier[a])] = static_cast<int>(a);
        std::vector<BestSplit> best(frontier.size());
        std::vector<double> parent_imp(frontier.size());
        std::vector<double> parent_total(frontier.size());
        for (std::size_t a = 0; a < frontier.size(); ++a) {
            const auto& m = tree.nodes[static_cast<std::size_t>(frontier[a])].class_mass;
            parent_total[a] = std::accumulate(m.begin(), m.end(), 0.0);
            parent_imp[a] = weighted_gini(m.data(), k, parent_total[a]);
        }

        std::vector<SplitState> state(frontier.size());
        std::vector<double> right_mass(k);
        for (std::size_t f = 0; f < d; ++f) {
            for (auto& st : state) {
                st.left_mass.assign(k, 0.0);
                st.left_total = 0.0;
                st.left_count = 0;
                st.has_prev = false;
            }
            for (std::size_t s : (*presorted)[f]) {
                const int a_raw = node_of[s] >= 0 ? slot[static_cast<std::size_t>(node_of[s])] : -1;
                if (a_raw < 0) continue;
                const auto a = static_cast<std::size_t>(a_raw);
                SplitState& st = state[a];
                const double x = data.features(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(f));
                if (st.has_prev && x > st.prev) {
                    const std::size_t right_count = count_of[static_cast<std::size_t>(frontier[a])] - st.left_count;
                    if (st.left_count >= opts.min_leaf && right_count >= opts.min_leaf) {
                        const auto& pm = tree.nodes[static_cast<std::size_t>(frontier[a])].class_mass;
                        for (std::size_t c = 0; c < k; ++c) right_mass[c] = pm[c] - st.left_mass[c];
                        const double right_total = parent_total[a] - st.left_total;
                        const double gain = parent_imp[a] - weighted_gini(st.left_mass.data(), k, st.left_total) -
                                            weighted_gini(right_mass.data(), k, right_total);
                        if (gain > best[a].gain + 1e-14 * parent_total[a]) {
                            double thr = 0.5 * (st.prev + x);
                            if (!(thr < x)) thr = st.prev;
                            best[a] = {gain, static_cast<int>(f), thr};
                        }
                    }
                }
                st.left_mass[static_cast<std::size_t>(data.labels[s])] += weights[s];
                st.left_total += weights[s];
                ++st.left_count;
                st.prev = x;
                st.has_prev = true;
            }
        }

        std::vector<int> next;
        std::vector<int> left_of(frontier.size(), -1);
        for (std::size_t a = 0; a < frontier.size(); ++a) {
            if (best[a].feature < 0) continue;
            const auto id = static_cast<std::size_t>(frontier[a]);
            std::vector<double> lm(k, 0.0), rm(k, 0.0);
            std::size_t lc = 0, rc = 0;
            for (std::size_t s = 0; s < n; ++s) {
                if (node_of[s] != frontier[a]) continue;
                const double x = data.features(static_cast<Eigen::Index>(s), best[a].feature);
                if (x <= best[a].threshold) {
                    lm[static_cast<std::size_t>(data.labels[s])] += weights[s];
                    ++lc;
                } else {
                    rm[static_cast<std::size_t>(data.labels[s])] += weights[s];
                    ++rc;
                }
            }
            const int parent_label = tree.nodes[id].label;
            const int l = make_node(std::move(lm), lc, parent_label);
            const int r = make_node(std::move(rm), rc, parent_label);
            TreeNode& node = tree.nodes[id];
            node.feature = best[a].feature;
            node.threshold = best[a].threshold;
            node.gain = best[a].gain;
            node.left = l;
            node.right = r;
            left_of[a] = l;
            next.push_back(l);
            next.push_back(r);
        }
        for (std::size_t s = 0; s < n; ++s) {
            const int a = node_of[s] >= 0 ? slot[static_cast<std::size_t>(node_of[s])] : -1;
            if (a < 0) continue;
            const int l = left_of[static_cast<std::size_t>(a)];
            if (l < 0) {
                node_of[s] = -1;  // settled in a leaf
                continue;
            }
            const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_of[s])];
            node_of[s] = data.features(static_cast<Eigen::Index>(s), node.feature) <= node.threshold ? l : l + 1;
        }
        frontier = std::move(next);
    }
    return tree;
}

}  // namespace msmap
