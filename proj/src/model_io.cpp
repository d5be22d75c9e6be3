#include <fstream>
#include <sstream>

#include "msmap/io.hpp"

namespace msmap {

Json tree_to_json(const DecisionTree& tree) {
    Json nodes = Json::array();
    for (const TreeNode& n : tree.nodes) {
        Json j{{"feature", n.feature}, {"label", n.label}, {"class_mass", n.class_mass}};
        if (n.feature >= 0) {
            j["threshold"] = n.threshold;
            j["left"] = n.left;
            j["right"] = n.right;
            j["gain"] = n.gain;
        }
        nodes.push_back(std::move(j));
    }
    return Json{{"nodes", nodes}};
}

DecisionTree tree_from_json(const Json& j) {
    DecisionTree t;
    for (const Json& n : j.at("nodes")) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.label = n.at("label").get<int>();
        node.class_mass = n.value("class_mass", std::vector<double>{});
        if (node.feature >= 0) {
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
            node.gain = n.value("gain", 0.0);
        }
        t.nodes.push_back(std::move(node));
    }
    const auto count = static_cast<int>(t.nodes.size());
    if (count == 0) throw Error(ErrorKind::InputFormat, "model: tree without nodes");
    for (const TreeNode& n : t.nodes)
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
            throw Error(ErrorKind::InputFormat, "model: child index out of range");
    return t;
}

Json model_to_json(const BoostModel& m) {
    Json stages = Json::array();
    for (std::size_t s = 0; s < m.trees.size(); ++s)
        stages.push_back({{"alpha", m.alphas[s]}, {"error", m.errors[s]}, {"tree", tree_to_json(m.trees[s])}});
    return Json{{"format", "msmap-boost-model"},
                {"classes", m.classes},
                {"feature_names", m.feature_names},
                {"feature_subset", m.feature_subset},
                {"stages", stages},
                {"config",
                 {{"n_estimators", m.options.n_estimators},
                  {"max_depth", m.options.tree.max_depth},
                  {"min_leaf", m.options.tree.min_leaf}}},
                {"seed", m.seed}};
}

BoostModel model_from_json(const Json& j) {
    try {
        BoostModel m;
        m.classes = j.at("classes").get<std::vector<std::string>>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.feature_subset = j.value("feature_subset", std::vector<std::size_t>{});
        const Json& cfg = j.at("config");
        m.options.n_estimators = cfg.at("n_estimators").get<int>();
        m.options.tree.max_depth = cfg.at("max_depth").get<int>();
        m.options.tree.min_leaf = cfg.at("min_leaf").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const Json& s : j.at("stages")) {
            m.alphas.push_back(s.at("alpha").get<double>());
            m.errors.push_back(s.value("error", 0.0));
            m.trees.push_back(tree_from_json(s.at("tree")));
        }
        if (m.classes.size() < 2) throw Error(ErrorKind::InputFormat, "model: fewer than two classes");
        for (const auto& t : m.trees)
            for (const auto& n : t.nodes)
                if (n.label < 0 || static_cast<std::size_t>(n.label) >= m.classes.size() ||
                    (n.feature >= 0 && static_cast<std::size_t>(n.feature) >= m.feature_names.size()))
                    throw Error(ErrorKind::InputFormat, "model: node refers to an unknown class or feature");
        return m;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InputFormat, std::string("model: ") + e.what());
    }
}

Json confusion_to_json(const ConfusionMatrix& cm) {
    return Json{{"classes", cm.classes}, {"counts", cm.counts}, {"rates", cm.rates()}, {"accuracy", cm.accuracy()}};
}

ConfusionMatrix confusion_from_json(const Json& j) {
    return {j.at("classes").get<std::vector<std::string>>(), j.at("counts").get<std::vector<std::vector<long>>>()};
}

namespace {

Json tissue_to_json(const TissueParams& t) {
    return Json{{"f_m", t.f_m},     {"f_ie", t.f_ie},     {"f_csf", t.f_csf}, {"t2_m", t.t2_m},
                {"t2_ie", t.t2_ie}, {"t2_csf", t.t2_csf}, {"f_i", t.f_i},     {"lambda_par", t.lambda_par}};
}

TissueParams tissue_from_json(const Json& j, TissueParams t) {
    t.f_m = j.value("f_m", t.f_m);
    t.f_ie = j.value("f_ie", t.f_ie);
    t.f_csf = j.value("f_csf", t.f_csf);
    t.t2_m = j.value("t2_m", t.t2_m);
    t.t2_ie = j.value("t2_ie", t.t2_ie);
    t.t2_csf = j.value("t2_csf", t.t2_csf);
    t.f_i = j.value("f_i", t.f_i);
    t.lambda_par = j.value("lambda_par", t.lambda_par);
    return t;
}

}  // namespace

Json phantom_config_to_json(const PhantomConfig& c) {
    Json lesions = Json::array();
    for (const LesionSpec& l : c.lesions)
        lesions.push_back({{"center", l.center}, {"radius", l.radius}, {"core_radius", l.core_radius}});
    return Json{{"size", c.size},
                {"control", c.control},
                {"m0", c.m0},
                {"fa_min", c.fa_min},
                {"fa_max", c.fa_max},
                {"wm", tissue_to_json(c.wm)},
                {"nawm", tissue_to_json(c.nawm)},
                {"lesion", tissue_to_json(c.lesion)},
                {"csf", tissue_to_json(c.csf)},
                {"lesions", lesions}};
}

PhantomConfig phantom_config_from_json(const Json& j) {
    try {
        PhantomConfig c;
        c.size = j.value("size", c.size);
        c.control = j.value("control", c.control);
        c.m0 = j.value("m0", c.m0);
        c.fa_min = j.value("fa_min", c.fa_min);
        c.fa_max = j.value("fa_max", c.fa_max);
        if (j.contains("wm")) c.wm = tissue_from_json(j["wm"], c.wm);
        if (j.contains("nawm")) c.nawm = tissue_from_json(j["nawm"], c.nawm);
        if (j.contains("lesion")) c.lesion = tissue_from_json(j["lesion"], c.lesion);
        if (j.contains("csf")) c.csf = tissue_from_json(j["csf"], c.csf);
        if (j.contains("lesions"))
            for (const Json& l : j["lesions"])
                c.lesions.push_back({l.at("center").get<Vec3>(), l.at("radius").get<double>(), l.at("core_radius").get<double>()});
        return c;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InputFormat, std::string("phantom config: ") + e.what());
    }
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InputFormat, "cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InputFormat, "'" + path + "': " + e.what());
    }
}

void write_json(const Json& j, const std::string& path) { write_text_atomic(path, j.dump(2) + "\n"); }

}  // namespace msmap
