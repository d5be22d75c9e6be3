#include "msmap/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace msmap {

Json experiment_report_json(const ExperimentResult& r, const ExperimentConfig& config,
                            const std::vector<AblationRow>* ablation) {
    Json folds = Json::array();
    for (const auto& cm : r.fold_confusions) folds.push_back(confusion_to_json(cm));
    Json imp = Json::object();
    for (std::size_t f = 0; f < r.feature_names.size() && f < r.importances.size(); ++f) imp[r.feature_names[f]] = r.importances[f];
    Json j{{"format", "msmap-experiment-report"},
           {"experiment", experiment_name(r.experiment)},
           {"classes", r.classes},
           {"feature_names", r.feature_names},
           {"class_rows", r.class_rows},
           {"k", config.k},
           {"fold_scores", r.fold_scores},
           {"mean_accuracy", r.mean_accuracy},
           {"fold_confusions", folds},
           {"pooled_confusion", confusion_to_json(r.pooled_confusion)},
           {"importances", imp},
           {"holdout_subjects", config.holdout_subjects},
           {"holdout_rows", r.holdout_rows},
           {"config",
            {{"n_estimators", config.boost.n_estimators},
             {"max_depth", config.boost.tree.max_depth},
             {"min_leaf", config.boost.tree.min_leaf},
             {"seed", config.seed}}}};
    if (r.holdout_confusion) j["holdout_confusion"] = confusion_to_json(*r.holdout_confusion);
    if (ablation) {
        Json rows = Json::array();
        for (const AblationRow& a : *ablation)
            rows.push_back({{"name", a.name}, {"features", a.features}, {"fold_scores", a.fold_scores}, {"mean_accuracy", a.mean_accuracy}});
        j["ablation"] = rows;
    }
    return j;
}

namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string rule(const std::vector<std::size_t>& widths) {
    std::string s = "+";
    for (std::size_t w : widths) s += std::string(w + 2, '-') + "+";
    return s + "\n";
}

std::string row(const std::vector<std::string>& cells, const std::vector<std::size_t>& widths) {
    std::string s = "|";
    for (std::size_t c = 0; c < cells.size(); ++c) s += " " + cells[c] + std::string(widths[c] - cells[c].size(), ' ') + " |";
    return s + "\n";
}

std::string grid(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& r : cells)
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
    std::string s = rule(widths) + row(cells[0], widths) + rule(widths);
    for (std::size_t r = 1; r < cells.size(); ++r) s += row(cells[r], widths);
    return s + rule(widths);
}

const std::vector<std::string> kAblationNames{"Diff", "MET2", "Diff+MET2"};

}  // namespace

RenderedReport render_report(const std::vector<Json>& reports) {
    if (reports.empty()) throw_invalid("report: no experiment reports given");
    const std::vector<std::string> order{"L-N-C", "L-N", "L-C"};
    std::vector<const Json*> sorted;
    for (const std::string& name : order)
        for (const Json& r : reports)
            if (r.value("experiment", std::string{}) == name) sorted.push_back(&r);
    if (sorted.size() != reports.size())
        throw Error(ErrorKind::InputFormat, "report: inputs must be experiment reports with distinct experiments L-N-C, L-N or L-C");
    for (std::size_t a = 1; a < sorted.size(); ++a)
        if (sorted[a]->at("experiment") == sorted[a - 1]->at("experiment"))
            throw Error(ErrorKind::InputFormat, "report: experiment listed twice");

    std::size_t k = 0;
    for (const Json* r : sorted) {
        const std::size_t rk = r->at("fold_scores").size();
        if (k != 0 && rk != k) throw Error(ErrorKind::InputFormat, "report: experiments use different fold counts");
        k = rk;
    }

    RenderedReport out;
    Json t1cols = Json::array();
    for (std::size_t f = 0; f < k; ++f) t1cols.push_back("k-" + std::to_string(f + 1));
    t1cols.push_back("mean accuracy");
    Json t1rows = Json::array();
    std::vector<std::vector<std::string>> t1{{"Test scores"}};
    for (const auto& c : t1cols) t1[0].push_back(c.get<std::string>());
    for (const Json* r : sorted) {
        const auto scores = r->at("fold_scores").get<std::vector<double>>();
        const double mean = r->at("mean_accuracy").get<double>();
        t1rows.push_back({{"experiment", r->at("experiment")}, {"scores", scores}, {"mean_accuracy", mean}});
        std::vector<std::string> cells{r->at("experiment").get<std::string>()};
        for (double s : scores) cells.push_back(fmt3(s));
        cells.push_back(fmt3(mean));
        t1.push_back(std::move(cells));
    }
    out.tables["table1"] = {{"title", "cross-validation scores and mean accuracy"}, {"columns", t1cols}, {"rows", t1rows}};

    Json t2rows = Json::array();
    std::vector<std::vector<std::string>> t2{{"Mean accuracy", "Diff", "MET2", "Diff+MET2"}};
    for (const Json* r : sorted) {
        if (!r->contains("ablation")) continue;
        std::vector<double> vals;
        for (const std::string& name : kAblationNames) {
            const auto& ab = r->at("ablation");
            const auto it = std::find_if(ab.begin(), ab.end(), [&](const Json& a) { return a.at("name") == name; });
            if (it == ab.end()) throw Error(ErrorKind::InputFormat, "report: ablation row '" + name + "' missing");
            vals.push_back(it->at("mean_accuracy").get<double>());
        }
        t2rows.push_back({{"experiment", r->at("experiment")}, {"values", vals}});
        t2.push_back({r->at("experiment").get<std::string>(), fmt3(vals[0]), fmt3(vals[1]), fmt3(vals[2])});
    }
    out.tables["table2"] = {{"title", "mean cross-validation accuracy by feature subset"},
                            {"columns", kAblationNames},
                            {"rows", t2rows}};

    Json extras = Json::array();
    std::ostringstream text;
    text << "Cross-validation scores and mean accuracy\n" << grid(t1) << "\n";
    if (!t2rows.empty()) text << "Mean cross-validation accuracy by feature subset\n" << grid(t2) << "\n";
    for (const Json* r : sorted) {
        Json e{{"experiment", r->at("experiment")},
               {"pooled_confusion", r->at("pooled_confusion")},
               {"importances", r->at("importances")}};
        if (r->contains("holdout_confusion")) e["holdout_confusion"] = r->at("holdout_confusion");
        extras.push_back(e);

        const auto classes = r->at("pooled_confusion").at("classes").get<std::vector<std::string>>();
        const auto rates = r->at("pooled_confusion").at("rates").get<std::vector<std::vector<double>>>();
        std::vector<std::vector<std::string>> cm{{"true \\ predicted"}};
        for (const auto& c : classes) cm[0].push_back(c);
        for (std::size_t i = 0; i < classes.size(); ++i) {
            std::vector<std::string> cells{classes[i]};
            for (double v : rates[i]) cells.push_back(fmt3(v));
            cm.push_back(std::move(cells));
        }
        text << "Confusion matrix (row-normalized), " << r->at("experiment").get<std::string>() << "\n" << grid(cm);
        std::vector<std::vector<std::string>> imp{{"feature", "importance"}};
        const auto names = r->value("feature_names", std::vector<std::string>{});
        for (const std::string& name : names)
            if (r->at("importances").contains(name)) imp.push_back({name, fmt3(r->at("importances").at(name).get<double>())});
        text << "Feature importance, " << r->at("experiment").get<std::string>() << "\n" << grid(imp) << "\n";
    }
    out.tables["experiments"] = extras;
    out.text = text.str();
    validate_report_schema(out.tables);
    return out;
}

void validate_report_schema(const Json& t) {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InputFormat, "report schema: " + what); };
    if (!t.contains("table1") || !t.contains("table2")) fail("missing table1 or table2");
    const Json& t1 = t["table1"];
    if (!t1.contains("columns") || !t1["columns"].is_array() || t1["columns"].size() < 3) fail("table1 columns");
    const std::size_t k = t1["columns"].size() - 1;
    for (std::size_t f = 0; f < k; ++f)
        if (t1["columns"][f] != "k-" + std::to_string(f + 1)) fail("table1 fold column names");
    if (t1["columns"][k] != "mean accuracy") fail("table1 last column");
    for (const Json& r : t1.at("rows")) {
        if (!r.contains("experiment") || !r.contains("scores") || !r.contains("mean_accuracy")) fail("table1 row fields");
        if (r["scores"].size() != k) fail("table1 row width");
    }
    const Json& t2 = t["table2"];
    if (t2.at("columns") != Json(kAblationNames)) fail("table2 columns");
    for (const Json& r : t2.at("rows"))
        if (!r.contains("experiment") || r.at("values").size() != 3) fail("table2 row fields");
}

}  // namespace msmap
