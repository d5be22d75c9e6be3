#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "msmap/learn.hpp"
#include "oracles.hpp"

using namespace msmap;

namespace {

LabeledDataset make_dataset(const Eigen::MatrixXd& x, std::vector<int> y, std::size_t k) {
    LabeledDataset d;
    d.features = x;
    d.labels = std::move(y);
    for (std::size_t c = 0; c < k; ++c) d.classes.push_back(std::string(1, static_cast<char>('a' + c)));
    for (Eigen::Index f = 0; f < x.cols(); ++f) d.feature_names.push_back("x" + std::to_string(f));
    return d;
}

LabeledDataset blobs(std::size_t per_class, double sigma, std::uint64_t seed) {
    const double centres[3][2] = {{0, 0}, {3, 0}, {0, 3}};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, sigma);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(3 * per_class), 2);
    std::vector<int> y;
    for (int c = 0; c < 3; ++c)
        for (std::size_t s = 0; s < per_class; ++s) {
            const auto r = static_cast<Eigen::Index>(y.size());
            x(r, 0) = centres[c][0] + nd(rng);
            x(r, 1) = centres[c][1] + nd(rng);
            y.push_back(c);
        }
    return make_dataset(x, y, 3);
}

DecisionTree leaf(int label) {
    DecisionTree t;
    TreeNode n;
    n.label = label;
    t.nodes.push_back(n);
    return t;
}

DecisionTree stump(int feature, double thr, int left, int right, double gain) {
    DecisionTree t;
    TreeNode root;
    root.feature = feature;
    root.threshold = thr;
    root.left = 1;
    root.right = 2;
    root.gain = gain;
    t.nodes.push_back(root);
    TreeNode l, r;
    l.label = left;
    r.label = right;
    t.nodes.push_back(l);
    t.nodes.push_back(r);
    return t;
}

BoostModel hand_model(std::vector<DecisionTree> trees, std::vector<double> alphas, std::size_t k) {
    BoostModel m;
    for (std::size_t c = 0; c < k; ++c) m.classes.push_back(std::string(1, static_cast<char>('a' + c)));
    m.feature_names = {"f0", "f1", "f2", "f3", "f4"};
    m.trees = std::move(trees);
    m.alphas = std::move(alphas);
    return m;
}

}  // namespace

TEST(Balance, OversamplesMinority) {
    Eigen::MatrixXd x(8, 1);
    for (int i = 0; i < 8; ++i) x(i, 0) = i;
    const LabeledDataset d = make_dataset(x, {0, 0, 1, 1, 1, 1, 1, 1}, 2);
    const LabeledDataset b = balance_classes(d, 3);
    EXPECT_EQ(b.class_counts(), (std::vector<std::size_t>{6, 6}));
    std::map<double, int> seen;
    for (std::size_t s = 0; s < b.size(); ++s) ++seen[b.features(static_cast<Eigen::Index>(s), 0)];
    EXPECT_EQ(seen[0.0] + seen[1.0], 6);
    EXPECT_GE(seen[0.0], 3);
    EXPECT_GE(seen[1.0], 3);
    for (int i = 2; i < 8; ++i) EXPECT_EQ(seen[double(i)], 1);
}

TEST(Balance, BalancedKeepsMultiset) {
    Eigen::MatrixXd x(6, 1);
    for (int i = 0; i < 6; ++i) x(i, 0) = i;
    const LabeledDataset b = balance_classes(make_dataset(x, {0, 1, 2, 0, 1, 2}, 3), 9);
    std::vector<double> v(b.features.data(), b.features.data() + b.size());
    std::sort(v.begin(), v.end());
    EXPECT_EQ(v, (std::vector<double>{0, 1, 2, 3, 4, 5}));
}

TEST(Balance, MissingClass) {
    EXPECT_THROW(balance_classes(make_dataset(Eigen::MatrixXd::Zero(3, 1), {0, 0, 0}, 2), 1), Error);
}

TEST(KFold, Sizes) {
    for (const auto& f : kfold_split(10, 5, 1)) EXPECT_EQ(f.size(), 2u);
    std::vector<std::size_t> sizes;
    for (const auto& f : kfold_split(11, 5, 1)) sizes.push_back(f.size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 2, 2, 2, 2}));
    EXPECT_THROW(kfold_split(3, 5, 1), Error);
}

TEST(KFold, PartitionProperty) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = 2 + rng() % 9;
        const std::size_t n = k + rng() % 200;
        std::vector<int> hit(n, 0);
        for (const auto& f : kfold_split(n, k, trial))
            for (std::size_t v : f) ++hit[v];
        for (int h : hit) EXPECT_EQ(h, 1);
    }
}

TEST(Cart, SeparableOneDimensional) {
    Eigen::MatrixXd x(6, 1);
    x << 0.1, 0.2, 0.3, 0.7, 0.8, 0.9;
    const LabeledDataset d = make_dataset(x, {0, 0, 0, 1, 1, 1}, 2);
    const DecisionTree t = train_cart(d, std::vector<double>(6, 1.0 / 6), {1, 1});
    EXPECT_EQ(t.depth(), 1);
    EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5);
    for (int s = 0; s < 6; ++s) EXPECT_EQ(t.predict(&x(s, 0)), d.labels[s]);
}

TEST(Cart, UniformLabelsGiveLeaf) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 3, 4, 5, 6, 7, 8;
    const DecisionTree t = train_cart(make_dataset(x, {1, 1, 1, 1}, 2), std::vector<double>(4, 0.25));
    EXPECT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.nodes[0].label, 1);
}

TEST(Cart, ThresholdSidedness) {
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 2.0;
    const DecisionTree t = train_cart(make_dataset(x, {0, 1}, 2), {0.5, 0.5}, {1, 1});
    const double at = t.nodes[0].threshold;
    EXPECT_EQ(t.predict(&at), 0);
}

TEST(Cart, DepthOneMatchesExhaustiveSearch) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0, 1);
        Eigen::MatrixXd x(20, 3);
        std::vector<int> y;
        std::vector<double> w;
        for (int s = 0; s < 20; ++s) {
            for (int f = 0; f < 3; ++f) x(s, f) = std::round(u(rng) * 50) / 10;
            y.push_back(static_cast<int>(rng() % 3));
            w.push_back(0.1 + u(rng));
        }
        const LabeledDataset d = make_dataset(x, y, 3);
        const DecisionTree t = train_cart(d, w, {1, 1});
        const oracle::Split best = oracle::best_split_bruteforce(x, y, w, 3);
        ASSERT_GE(t.nodes[0].feature, 0) << seed;
        const double got = oracle::split_gain(x, y, w, 3, t.nodes[0].feature, t.nodes[0].threshold);
        EXPECT_NEAR(got, best.gain, 1e-12) << seed;
        EXPECT_NEAR(t.nodes[0].gain, best.gain, 1e-12) << seed;
    }
}

TEST(Cart, MinLeafAndDepthRespected) {
    const LabeledDataset d = blobs(30, 1.0, 3);
    const DecisionTree t = train_cart(d, std::vector<double>(d.size(), 1.0), {3, 10});
    EXPECT_LE(t.depth(), 3);
    std::vector<int> count(t.nodes.size(), 0);
    for (std::size_t s = 0; s < d.size(); ++s) {
        int n = 0;
        const Eigen::RowVectorXd row = d.features.row(static_cast<Eigen::Index>(s));
        while (t.nodes[n].feature >= 0) n = row[t.nodes[n].feature] <= t.nodes[n].threshold ? t.nodes[n].left : t.nodes[n].right;
        ++count[n];
    }
    for (std::size_t n = 0; n < t.nodes.size(); ++n)
        if (t.nodes[n].feature < 0) {
            EXPECT_GE(count[n], 10);
        }
}

TEST(Samme, AlphaFormula) {
    EXPECT_DOUBLE_EQ(samme_alpha(0.5, 2), 0.0);
    EXPECT_NEAR(samme_alpha(0.5, 3), std::log(2.0), 1e-15);
    EXPECT_NEAR(samme_alpha(0.2, 2), std::log(4.0), 1e-15);
    EXPECT_DOUBLE_EQ(samme_alpha(0.0, 3), kAlphaCapLog + std::log(2.0));
}

TEST(Samme, BlobsHeldOut) {
    const LabeledDataset train = blobs(500, 0.5, 1), test = blobs(500, 0.5, 2);
    BoostOptions o;
    o.n_estimators = 50;
    o.tree.max_depth = 1;
    const BoostModel m = train_samme(train, o, 5);
    long correct = 0;
    for (std::size_t s = 0; s < test.size(); ++s) {
        const Eigen::RowVectorXd row = test.features.row(static_cast<Eigen::Index>(s));
        correct += predict_label(m, row.data()) == test.labels[s];
    }
    EXPECT_GE(correct / double(test.size()), 0.95);
}

TEST(Samme, WeightsNormalizedAndSignLaw) {
    const LabeledDataset d = blobs(60, 1.5, 7);
    BoostOptions o;
    o.n_estimators = 40;
    o.tree.max_depth = 1;
    int rounds = 0;
    const BoostModel m = train_samme(d, o, 1, [&](int, double err, double alpha, const std::vector<double>& w) {
        ++rounds;
        double sum = 0.0;
        for (double x : w) {
            EXPECT_GE(x, 0.0);
            sum += x;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_EQ(alpha > 0.0, err < 1.0 - 1.0 / 3.0);
    });
    EXPECT_GT(rounds, 0);
    for (std::size_t s = 0; s < m.alphas.size(); ++s) EXPECT_EQ(m.alphas[s] > 0.0, m.errors[s] < 2.0 / 3.0);
}

TEST(Samme, PerfectStageStops) {
    Eigen::MatrixXd x(4, 1);
    x << 0, 1, 2, 3;
    BoostOptions o;
    o.n_estimators = 10;
    const BoostModel m = train_samme(make_dataset(x, {0, 0, 1, 1}, 2), o, 1);
    ASSERT_EQ(m.trees.size(), 1u);
    EXPECT_DOUBLE_EQ(m.alphas[0], kAlphaCapLog);
}

TEST(Samme, Deterministic) {
    const LabeledDataset d = blobs(80, 1.2, 9);
    BoostOptions o;
    o.n_estimators = 30;
    const BoostModel a = train_samme(d, o, 4), b = train_samme(d, o, 4);
    ASSERT_EQ(a.trees.size(), b.trees.size());
    EXPECT_EQ(a.alphas, b.alphas);
    for (std::size_t t = 0; t < a.trees.size(); ++t)
        for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
            EXPECT_EQ(a.trees[t].nodes[n].feature, b.trees[t].nodes[n].feature);
            EXPECT_EQ(a.trees[t].nodes[n].threshold, b.trees[t].nodes[n].threshold);
        }
}

TEST(PredictProba, SingleStageOneHot) {
    const BoostModel m = hand_model({stump(0, 0.5, 2, 1, 1.0)}, {0.7}, 3);
    const double lo = 0.0, hi = 1.0;
    EXPECT_EQ(predict_proba(m, &lo), (std::vector<double>{0, 0, 1}));
    EXPECT_EQ(predict_proba(m, &hi), (std::vector<double>{0, 1, 0}));
}

TEST(PredictProba, VoteShares) {
    const double x = 0.0;
    EXPECT_EQ(predict_proba(hand_model({leaf(0), leaf(1)}, {1, 1}, 3), &x), (std::vector<double>{0.5, 0.5, 0}));
    EXPECT_EQ(predict_proba(hand_model({leaf(0), leaf(1), leaf(1)}, {2, 1, 1}, 3), &x),
              (std::vector<double>{0.5, 0.5, 0}));
    EXPECT_EQ(predict_proba(hand_model({leaf(0), leaf(1), leaf(2)}, {2, 1, 1}, 3), &x),
              (std::vector<double>{0.5, 0.25, 0.25}));
    const auto p = predict_proba(hand_model({leaf(2), leaf(1), leaf(2)}, {0.3, 1.1, 0.4}, 3), &x);
    EXPECT_NEAR(p[0], 0.0, 1e-15);
    EXPECT_NEAR(p[1], 1.1 / 1.8, 1e-15);
    EXPECT_NEAR(p[2], 0.7 / 1.8, 1e-15);
}

TEST(PredictProba, RelabelingPermutesOutput) {
    const double pts[3] = {-1.0, 0.5, 2.0};
    const BoostModel a = hand_model({stump(0, 0.0, 0, 1, 1), stump(0, 1.0, 1, 2, 1)}, {0.8, 1.3}, 3);
    const BoostModel b = hand_model({stump(0, 0.0, 2, 0, 1), stump(0, 1.0, 0, 1, 1)}, {0.8, 1.3}, 3);
    for (double x : pts) {
        const auto pa = predict_proba(a, &x), pb = predict_proba(b, &x);
        EXPECT_NEAR(pa[0] + pa[1] + pa[2], 1.0, 1e-15);
        EXPECT_EQ(pa[0], pb[2]);
        EXPECT_EQ(pa[1], pb[0]);
        EXPECT_EQ(pa[2], pb[1]);
    }
}

TEST(PredictProba, NoPositiveWeightIsUniform) {
    const double x = 0.0;
    bool uniform = false;
    const auto p = predict_proba(hand_model({leaf(0)}, {0.0}, 2), &x, &uniform);
    EXPECT_TRUE(uniform);
    EXPECT_EQ(p, (std::vector<double>{0.5, 0.5}));
}

TEST(Importance, SingleFeature) {
    const BoostModel m = hand_model({stump(0, 0.5, 0, 1, 0.3), stump(0, 0.2, 1, 0, 0.1)}, {1.0, 2.0}, 2);
    EXPECT_EQ(feature_importance(m), (std::vector<double>{1, 0, 0, 0, 0}));
}

TEST(Importance, EqualStumps) {
    const BoostModel m = hand_model({stump(0, 0.5, 0, 1, 0.3), stump(1, 0.2, 1, 0, 0.3)}, {1.0, 1.0}, 2);
    EXPECT_EQ(feature_importance(m), (std::vector<double>{0.5, 0.5, 0, 0, 0}));
    EXPECT_THROW(feature_importance(hand_model({leaf(0)}, {1.0}, 2)), Error);
}

TEST(Confusion, PerfectAndConstant) {
    const std::vector<std::string> cls{"L", "N", "C"};
    const ConfusionMatrix p = confusion_matrix(std::vector<std::string>{"L", "N", "C", "L"},
                                               std::vector<std::string>{"L", "N", "C", "L"}, cls);
    EXPECT_DOUBLE_EQ(p.accuracy(), 1.0);
    EXPECT_EQ(p.counts, (std::vector<std::vector<long>>{{2, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
    const ConfusionMatrix c = confusion_matrix(std::vector<int>{0, 1, 2, 2}, std::vector<int>{1, 1, 1, 1}, cls);
    EXPECT_EQ(c.counts, (std::vector<std::vector<long>>{{0, 1, 0}, {0, 1, 0}, {0, 2, 0}}));
    EXPECT_DOUBLE_EQ(c.accuracy(), 0.25);
    EXPECT_DOUBLE_EQ(c.rates()[2][1], 1.0);
    EXPECT_THROW(confusion_matrix(std::vector<std::string>{"X"}, std::vector<std::string>{"L"}, cls), Error);
}

namespace {

FeatureTable synthetic_table(std::uint64_t seed, bool with_c) {
    FeatureTable t;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, 0.03);
    auto add = [&](const std::string& subj, Label l, int n, std::array<double, 5> mean) {
        for (int s = 0; s < n; ++s) {
            FeatureRow r;
            r.subject = subj;
            r.i = static_cast<std::size_t>(s);
            r.label = l;
            for (std::size_t f = 0; f < 5; ++f) r.features[f] = mean[f] + nd(rng);
            t.rows.push_back(r);
        }
    };
    for (const std::string subj : {"p1", "p2"}) {
        add(subj, Label::L, 30, {0.3, 0.7, 0.03, 0.9, 0.07});
        add(subj, Label::N, 90, {0.6, 0.4, 0.13, 0.87, 0.0});
    }
    if (with_c) add("c1", Label::C, 80, {0.65, 0.35, 0.15, 0.85, 0.0});
    return t;
}

}  // namespace

TEST(Experiment, NamesAndLabels) {
    EXPECT_EQ(experiment_name(Experiment::LNC), "L-N-C");
    EXPECT_EQ(experiment_name(parse_experiment("LN")), "L-N");
    EXPECT_EQ(parse_experiment("L-C"), Experiment::LC);
    EXPECT_THROW(parse_experiment("NC"), Error);
    EXPECT_EQ(experiment_labels(Experiment::LC), (std::vector<Label>{Label::L, Label::C}));
}

TEST(Experiment, SeparableLn) {
    ExperimentConfig cfg;
    cfg.seed = 3;
    cfg.boost.n_estimators = 20;
    cfg.holdout_subjects = {"p2"};
    const ExperimentResult r = run_experiment(synthetic_table(1, true), Experiment::LN, cfg);
    EXPECT_EQ(r.fold_scores.size(), 5u);
    EXPECT_GE(r.mean_accuracy, 0.95);
    EXPECT_EQ(r.class_rows, (std::vector<std::size_t>{30, 90}));
    EXPECT_EQ(r.holdout_rows, 120u);
    ASSERT_TRUE(r.holdout_confusion.has_value());
    EXPECT_GE(r.holdout_confusion->accuracy(), 0.95);
    EXPECT_EQ(r.pooled_confusion.total(), 120);
    EXPECT_EQ(r.feature_names, (std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end())));
}

TEST(Experiment, MissingClassIsInputError) {
    ExperimentConfig cfg;
    try {
        run_experiment(synthetic_table(1, false), Experiment::LC, cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InputFormat);
    }
}

TEST(Experiment, AblationShape) {
    ExperimentConfig cfg;
    cfg.boost.n_estimators = 10;
    const auto rows = run_ablation(synthetic_table(2, true), Experiment::LNC, cfg);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].name, "Diff");
    EXPECT_EQ(rows[1].features, (std::vector<std::size_t>{2, 3, 4}));
    for (const auto& r : rows) EXPECT_EQ(r.fold_scores.size(), 5u);
}

TEST(Experiment, DeterministicAcrossRuns) {
    ExperimentConfig cfg;
    cfg.seed = 11;
    cfg.boost.n_estimators = 15;
    const FeatureTable t = synthetic_table(5, true);
    const ExperimentResult a = run_experiment(t, Experiment::LNC, cfg), b = run_experiment(t, Experiment::LNC, cfg);
    EXPECT_EQ(a.fold_scores, b.fold_scores);
    EXPECT_EQ(a.model.alphas, b.model.alphas);
    EXPECT_EQ(a.importances, b.importances);
}
