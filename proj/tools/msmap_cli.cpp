#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <zlib.h>

#include "CLI11.hpp"

#include "msmap/io.hpp"
#include "msmap/learn.hpp"
#include "msmap/met2.hpp"
#include "msmap/phantom.hpp"
#include "msmap/report.hpp"
#include "msmap/sampling.hpp"
#include "msmap/smt.hpp"
#include "msmap/tv.hpp"

namespace fs = std::filesystem;
using namespace msmap;

namespace {

std::vector<std::string> g_argv;

void warn(const std::string& msg) { std::cerr << "msmap: warning: " << msg << "\n"; }

Json file_record(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::InputFormat, "cannot open '" + path + "'");
    uLong crc = crc32(0L, Z_NULL, 0);
    std::uintmax_t bytes = 0;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
        bytes += static_cast<std::uintmax_t>(got);
    }
    char hex[16];
    std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
    return Json{{"path", path}, {"bytes", bytes}, {"crc32", hex}};
}

struct Manifest {
    explicit Manifest(std::string cmd) : command(std::move(cmd)) {}

    std::string command;
    Json inputs = Json::array();
    Json outputs = Json::array();
    Json config = Json::object();
    std::optional<std::uint64_t> seed;

    void input(const std::string& path) { inputs.push_back(file_record(path)); }
    void output(const std::string& path) { outputs.push_back(path); }

    void write(const std::string& path) const {
        Json j{{"format", "msmap-manifest"},
               {"tool", "msmap"},
               {"version", MSMAP_VERSION},
               {"command", command},
               {"argv", g_argv},
               {"inputs", inputs},
               {"outputs", outputs},
               {"config", config},
               {"seed", seed ? Json(*seed) : Json(nullptr)}};
        write_json(j, path);
    }
};

std::string manifest_path_for(const std::string& output) { return output + ".manifest.json"; }

void ensure_parent(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw Error(ErrorKind::InvalidArgument, "output directory '" + parent.string() + "' does not exist");
}

Mask mask_or_all(const std::string& path, const Volume& ref, Manifest& man) {
    if (path.empty()) return Mask(ref.dims(), true);
    man.input(path);
    Mask m = read_mask(path);
    require_same_grid(ref.dims(), m.dims(), "mask");
    return m;
}

// ---- feature volume arguments shared by sample and predict ----

struct FeatureArgs {
    std::string smt_prefix, met2_prefix;
    std::array<std::string, kNumFeatures> explicit_paths;

    void add(CLI::App* app) {
        app->add_option("--smt-prefix", smt_prefix, "prefix of fit-smt outputs (<prefix>_fi, <prefix>_fe)");
        app->add_option("--met2-prefix", met2_prefix, "prefix of fit-met2 outputs (<prefix>_fm, _fie, _fcsf)");
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            std::string flag = "--" + kFeatureNames[f];
            std::replace(flag.begin(), flag.end(), '_', '-');
            app->add_option(flag, explicit_paths[f], "override path of the " + kFeatureNames[f] + " map");
        }
    }

    std::string path(std::size_t f) const {
        if (!explicit_paths[f].empty()) return explicit_paths[f];
        static const std::array<const char*, kNumFeatures> suffix{"_fi", "_fe", "_fm", "_fie", "_fcsf"};
        const std::string& prefix = f < 2 ? smt_prefix : met2_prefix;
        if (prefix.empty())
            throw Error(ErrorKind::InvalidArgument, "no path for feature " + kFeatureNames[f] +
                                                        " (give --smt-prefix/--met2-prefix or an explicit path)");
        return prefix + suffix[f] + ".nii.gz";
    }

    FeatureVolumes load(Manifest& man) const {
        FeatureVolumes fv;
        std::array<Volume*, kNumFeatures> slots{&fv.smt_fi, &fv.smt_fe, &fv.met2_fm, &fv.met2_fie, &fv.met2_fcsf};
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            const std::string p = path(f);
            man.input(p);
            *slots[f] = read_nifti(p);
            if (slots[f]->frames() != 1) throw_dims("feature map '" + p + "' must be 3D");
            require_same_grid(slots[0]->dims(), slots[f]->dims(), "feature map '" + p + "'");
        }
        return fv;
    }
};

// ---- phantom ----

struct PhantomArgs {
    std::string out_dir, config_path;
    std::optional<std::uint64_t> seed;
    std::size_t size = 0;
    bool control = false;
    double met2_snr = 100.0, dwi_snr = 50.0, dispersion = 0.0, t1 = kDefaultT1;
};

int run_phantom(const PhantomArgs& a) {
    Manifest man("phantom");
    man.seed = *a.seed;
    PhantomConfig cfg;
    if (!a.config_path.empty()) {
        man.input(a.config_path);
        cfg = phantom_config_from_json(read_json(a.config_path));
    }
    if (a.size) cfg.size = a.size;
    if (a.control) cfg.control = true;
    if (!(a.met2_snr > 0.0) || !(a.dwi_snr > 0.0)) throw_invalid("snr must be > 0 (use inf for noiseless)");

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    auto out = [&](const std::string& name) {
        const std::string p = (dir / name).string();
        man.output(p);
        return p;
    };

    const PhantomTruth truth = make_phantom(cfg, *a.seed);
    PhantomConfig effective = cfg;
    effective.lesions = truth.lesions;
    const AcquisitionMET2 acq;
    const Volume met2 = simulate_met2(truth, cfg, acq, a.met2_snr, *a.seed, a.t1);
    const DiffusionScheme scheme = default_scheme();
    const Volume dwi = simulate_dwi(truth, scheme, a.dwi_snr, *a.seed, a.dispersion);

    write_nifti(met2, out("met2.nii.gz"));
    write_nifti(dwi, out("dwi.nii.gz"));
    write_scheme(scheme, out("dwi.bval"), out("dwi.bvec"));
    write_nifti(truth.score, out("score.nii.gz"));
    write_nifti(truth.label, out("label.nii.gz"), NiftiDatatype::Uint8);
    write_nifti(truth.wm_mask().to_volume(truth.label), out("wm_mask.nii.gz"), NiftiDatatype::Uint8);
    write_nifti(truth.brain_mask().to_volume(truth.label), out("brain_mask.nii.gz"), NiftiDatatype::Uint8);
    write_nifti(truth.f_m, out("truth_fm.nii.gz"));
    write_nifti(truth.f_ie, out("truth_fie.nii.gz"));
    write_nifti(truth.f_csf, out("truth_fcsf.nii.gz"));
    write_nifti(truth.f_i, out("truth_fi.nii.gz"));
    write_nifti(truth.lambda_par, out("truth_lambda.nii.gz"));
    write_nifti(truth.fa, out("truth_fa.nii.gz"));
    write_json(phantom_config_to_json(effective), out("phantom_config.json"));

    man.config = {{"phantom", phantom_config_to_json(cfg)},
                  {"met2_snr", a.met2_snr},
                  {"dwi_snr", a.dwi_snr},
                  {"dispersion_deg", a.dispersion},
                  {"t1", a.t1},
                  {"delta_te", acq.delta_te},
                  {"n_echoes", acq.n_echoes},
                  {"prescribed_fa", acq.prescribed_fa}};
    man.write((dir / "manifest.json").string());
    return 0;
}

// ---- denoise-tv ----

struct TvArgs {
    std::string in, out;
    double weight = -1.0;
    TvEchoOptions opts;
};

int run_denoise(const TvArgs& a) {
    Manifest man("denoise-tv");
    ensure_parent(a.out);
    man.input(a.in);
    const Volume vol = read_nifti(a.in);
    TvEchoOptions opts = a.opts;
    opts.weight = a.weight;
    if (!(opts.weight_factor >= 0.0)) throw_invalid("--weight-factor must be >= 0");
    if (opts.max_iters < 1) throw_invalid("--max-iters must be >= 1");
    Json weights = Json::array();
    for (std::size_t t = 0; t < vol.frames(); ++t)
        weights.push_back(opts.weight >= 0.0 ? opts.weight : opts.weight_factor * estimate_noise_sigma(vol, t));
    const Volume den = tv_denoise_frames(vol, opts);
    write_nifti(den, a.out);
    man.output(a.out);
    man.config = {{"weight", a.weight < 0 ? Json(nullptr) : Json(a.weight)},
                  {"weight_factor", opts.weight_factor},
                  {"frame_weights", weights},
                  {"max_iters", opts.max_iters},
                  {"tol", opts.tol}};
    man.write(manifest_path_for(a.out));
    return 0;
}

// ---- fit-met2 ----

struct Met2Args {
    std::string in, mask, prefix, spectra;
    double t2_min = 10.0, t2_max = 2000.0;
    std::size_t t2_points = 60;
    double fa_min = 90.0, fa_max = 180.0, fa_step = 1.0;
    double mu_min = 1e-6, mu_max = 10.0;
    std::size_t mu_points = 64;
    std::optional<double> mu;
    double delta_te = 10.68, t1 = kDefaultT1, rician_sigma = 0.0;
    double myelin_max = 40.0, ie_max = 200.0;
};

int run_fit_met2(const Met2Args& a) {
    Manifest man("fit-met2");
    ensure_parent(a.prefix);
    man.input(a.in);
    const Volume vol = read_nifti(a.in);
    const Mask mask = mask_or_all(a.mask, vol, man);

    Met2Config cfg;
    cfg.acquisition.delta_te = a.delta_te;
    cfg.acquisition.n_echoes = vol.frames();
    cfg.grid = make_t2_grid(a.t2_min, a.t2_max, a.t2_points);
    cfg.fa_set = fa_range(a.fa_min, a.fa_max, a.fa_step);
    cfg.t1 = a.t1;
    cfg.mu_grid = logspace(a.mu_min, a.mu_max, a.mu_points);
    cfg.fixed_mu = a.mu;
    cfg.cutoffs = {a.myelin_max, a.ie_max};
    cfg.rician_sigma = a.rician_sigma;

    Volume spectra;
    const Met2Maps maps = fit_met2_volume(vol, mask, cfg, a.spectra.empty() ? nullptr : &spectra);
    if (maps.failed_voxels) warn(std::to_string(maps.failed_voxels) + " in-mask voxels could not be fitted");
    if (maps.fitted.empty() && !mask.empty()) throw_numerical("no voxel could be fitted");

    auto out = [&](const Volume& v, const std::string& suffix, NiftiDatatype t = NiftiDatatype::Float32) {
        const std::string p = a.prefix + suffix;
        write_nifti(v, p, t);
        man.output(p);
    };
    out(maps.f_m, "_fm.nii.gz");
    out(maps.f_ie, "_fie.nii.gz");
    out(maps.f_csf, "_fcsf.nii.gz");
    out(maps.fa_map, "_fa.nii.gz");
    out(maps.mu_map, "_mu.nii.gz");
    out(maps.fitted.to_volume(maps.f_m), "_fitted.nii.gz", NiftiDatatype::Uint8);
    if (!a.spectra.empty()) {
        write_nifti(spectra, a.spectra);
        man.output(a.spectra);
    }
    man.config = {{"t2_grid", {{"min", a.t2_min}, {"max", a.t2_max}, {"points", a.t2_points}}},
                  {"fa", {{"min", a.fa_min}, {"max", a.fa_max}, {"step", a.fa_step}}},
                  {"mu_grid", {{"min", a.mu_min}, {"max", a.mu_max}, {"points", a.mu_points}}},
                  {"fixed_mu", a.mu ? Json(*a.mu) : Json(nullptr)},
                  {"delta_te", a.delta_te},
                  {"n_echoes", vol.frames()},
                  {"t1", a.t1},
                  {"rician_sigma", a.rician_sigma},
                  {"cutoffs", {{"myelin_max", a.myelin_max}, {"ie_max", a.ie_max}}},
                  {"fitted_voxels", maps.fitted.count()},
                  {"failed_voxels", maps.failed_voxels}};
    man.write(manifest_path_for(a.prefix));
    return 0;
}

// ---- fit-smt ----

struct SmtArgs {
    std::string in, bval, bvec, mask, prefix;
    double lambda_min = 0.1e-3, lambda_max = 3e-3, shell_tol = kDefaultShellTolerance;
    std::size_t grid = 64;
};

int run_fit_smt(const SmtArgs& a) {
    Manifest man("fit-smt");
    ensure_parent(a.prefix);
    man.input(a.in);
    man.input(a.bval);
    man.input(a.bvec);
    SchemeReadInfo info;
    const DiffusionScheme scheme = read_scheme(a.bval, a.bvec, a.shell_tol, &info);
    if (info.renormalized) warn(std::to_string(info.renormalized) + " gradient vectors were renormalized to unit length");
    const Volume dwi = read_nifti(a.in);
    if (dwi.frames() != scheme.frames())
        throw_dims("diffusion volume has " + std::to_string(dwi.frames()) + " frames, scheme has " +
                   std::to_string(scheme.frames()));
    const Mask mask = mask_or_all(a.mask, dwi, man);

    SmtConfig cfg;
    cfg.bounds = {a.lambda_min, a.lambda_max};
    cfg.grid_size = a.grid;
    const SmtMaps maps = fit_smt_volume(dwi, scheme, mask, cfg);
    if (maps.failed_voxels) warn(std::to_string(maps.failed_voxels) + " in-mask voxels could not be fitted");
    if (maps.degenerate_voxels) warn(std::to_string(maps.degenerate_voxels) + " voxels had no diffusion decay");
    if (maps.fitted.empty() && !mask.empty()) throw_numerical("no voxel could be fitted");

    auto out = [&](const Volume& v, const std::string& suffix, NiftiDatatype t = NiftiDatatype::Float32) {
        const std::string p = a.prefix + suffix;
        write_nifti(v, p, t);
        man.output(p);
    };
    out(maps.f_i, "_fi.nii.gz");
    out(maps.f_e, "_fe.nii.gz");
    out(maps.lambda_par, "_lambda.nii.gz");
    out(maps.fitted.to_volume(maps.f_i), "_fitted.nii.gz", NiftiDatatype::Uint8);
    man.config = {{"lambda_min", a.lambda_min}, {"lambda_max", a.lambda_max}, {"grid", a.grid},
                  {"shell_tolerance", a.shell_tol}, {"shells", scheme.shell_bvals()},
                  {"fitted_voxels", maps.fitted.count()}, {"failed_voxels", maps.failed_voxels},
                  {"degenerate_voxels", maps.degenerate_voxels}};
    man.write(manifest_path_for(a.prefix));
    return 0;
}

// ---- sample ----

struct SampleArgs {
    std::string subject, wm_mask, scores, out, metric = "euclidean";
    bool control = false;
    double threshold = 0.75, ring = 6.0;
    FeatureArgs features;
};

int run_sample(const SampleArgs& a) {
    Manifest man("sample");
    ensure_parent(a.out);
    if (a.control == !a.scores.empty()) throw_invalid("give exactly one of --scores (patient) or --control");
    const DistanceMetric metric = parse_metric(a.metric);
    const FeatureVolumes fv = a.features.load(man);
    man.input(a.wm_mask);
    const Mask wm = read_mask(a.wm_mask);
    require_same_grid(fv.smt_fi.dims(), wm.dims(), "WM mask");

    std::vector<LabeledIndices> sets;
    if (a.control) {
        sets.push_back({Label::C, control_voxels(wm)});
    } else {
        man.input(a.scores);
        const Volume scores = read_nifti(a.scores);
        require_same_grid(fv.smt_fi.dims(), scores.dims(), "lesion scores");
        sets.push_back({Label::L, extract_lesion_voxels(scores, a.threshold)});
        RingResult ring = nawm_ring(scores, wm, a.ring, metric);
        if (ring.no_lesion) warn("subject has no lesion voxels; no NAWM ring sampled");
        else sets.push_back({Label::N, std::move(ring.voxels)});
        if (sets[0].voxels.empty()) warn("no voxel has a lesion score above the threshold");
    }
    const FeatureTable table = build_feature_table(fv, sets, a.subject);
    if (table.dropped) warn(std::to_string(table.dropped) + " rows dropped for non-finite features");
    write_table(table, a.out);
    man.output(a.out);
    man.config = {{"subject", a.subject},
                  {"control", a.control},
                  {"threshold", a.threshold},
                  {"ring_distance", a.ring},
                  {"metric", a.metric},
                  {"rows", {{"L", table.count(Label::L)}, {"N", table.count(Label::N)}, {"C", table.count(Label::C)}}},
                  {"dropped", table.dropped}};
    man.write(manifest_path_for(a.out));
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::vector<std::string> tables, holdout, features;
    std::string experiment, model_out, report_out;
    std::optional<std::uint64_t> seed;
    std::size_t folds = 5;
    int n_estimators = 100, max_depth = 2;
    std::size_t min_leaf = 1;
    bool ablation = false;
};

std::vector<std::size_t> parse_feature_subset(const std::vector<std::string>& names) {
    if (names.empty()) return {0, 1, 2, 3, 4};
    std::vector<std::size_t> out;
    for (const std::string& n : names) {
        const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), n);
        if (it == kFeatureNames.end()) throw_invalid("unknown feature '" + n + "'");
        out.push_back(static_cast<std::size_t>(it - kFeatureNames.begin()));
    }
    return out;
}

int run_train(const TrainArgs& a) {
    Manifest man("train");
    man.seed = *a.seed;
    ensure_parent(a.model_out);
    if (!a.report_out.empty()) ensure_parent(a.report_out);
    const Experiment exp = parse_experiment(a.experiment);

    FeatureTable table;
    for (const std::string& t : a.tables) {
        man.input(t);
        table.append(read_table(t));
    }
    if (table.dropped) warn(std::to_string(table.dropped) + " table rows dropped for non-finite features");

    ExperimentConfig cfg;
    cfg.k = a.folds;
    cfg.boost.n_estimators = a.n_estimators;
    cfg.boost.tree.max_depth = a.max_depth;
    cfg.boost.tree.min_leaf = a.min_leaf;
    cfg.seed = *a.seed;
    cfg.feature_subset = parse_feature_subset(a.features);
    cfg.holdout_subjects = a.holdout;

    const ExperimentResult res = run_experiment(table, exp, cfg);
    std::vector<AblationRow> ablation;
    if (a.ablation) ablation = run_ablation(table, exp, cfg);

    write_json(model_to_json(res.model), a.model_out);
    man.output(a.model_out);
    if (!a.report_out.empty()) {
        write_json(experiment_report_json(res, cfg, a.ablation ? &ablation : nullptr), a.report_out);
        man.output(a.report_out);
    }
    std::cout << experiment_name(exp) << " mean cross-validation accuracy " << format_double(res.mean_accuracy) << "\n";
    if (res.holdout_confusion)
        std::cout << "held-out accuracy " << format_double(res.holdout_confusion->accuracy()) << " over "
                  << res.holdout_rows << " rows\n";

    man.config = {{"experiment", experiment_name(exp)},
                  {"folds", a.folds},
                  {"n_estimators", a.n_estimators},
                  {"max_depth", a.max_depth},
                  {"min_leaf", a.min_leaf},
                  {"features", res.feature_names},
                  {"holdout_subjects", a.holdout},
                  {"ablation", a.ablation}};
    man.write(manifest_path_for(a.model_out));
    return 0;
}

// ---- predict ----

struct PredictArgs {
    std::string model, mask, out, cls = "L";
    FeatureArgs features;
};

int run_predict(const PredictArgs& a) {
    Manifest man("predict");
    ensure_parent(a.out);
    man.input(a.model);
    const BoostModel model = model_from_json(read_json(a.model));
    const auto cit = std::find(model.classes.begin(), model.classes.end(), a.cls);
    if (cit == model.classes.end()) throw_invalid("class '" + a.cls + "' is not one of the model's classes");
    const auto cls = static_cast<std::size_t>(cit - model.classes.begin());
    std::vector<std::size_t> subset = model.feature_subset;
    if (subset.empty())
        for (std::size_t f = 0; f < model.feature_names.size(); ++f) subset.push_back(f);
    for (std::size_t c = 0; c < subset.size(); ++c)
        if (subset[c] >= kNumFeatures || c >= model.feature_names.size() || model.feature_names[c] != kFeatureNames[subset[c]])
            throw Error(ErrorKind::InputFormat, "model feature list does not match the known feature maps");

    const FeatureVolumes fv = a.features.load(man);
    const Mask mask = mask_or_all(a.mask, fv.smt_fi, man);
    const auto maps = fv.list();
    Volume prob = Volume::like(fv.smt_fi, 1);
    std::vector<double> x(subset.size());
    std::size_t nonfinite = 0, uniform_count = 0;
    double mean = 0.0;
    for (std::size_t v : mask.indices()) {
        bool ok = true;
        for (std::size_t c = 0; c < subset.size(); ++c) {
            x[c] = maps[subset[c]]->value(v);
            ok = ok && std::isfinite(x[c]);
        }
        if (!ok) {
            ++nonfinite;
            continue;
        }
        bool uniform = false;
        prob.value(v) = predict_proba(model, x.data(), &uniform)[cls];
        uniform_count += uniform;
        mean += prob.value(v);
    }
    if (nonfinite) warn(std::to_string(nonfinite) + " voxels with non-finite features set to probability 0");
    if (uniform_count) warn("model has no usable stages; probabilities are uniform");
    write_nifti(prob, a.out);
    man.output(a.out);
    const std::size_t n = mask.count();
    std::cout << "mean P(" << a.cls << ") over mask " << format_double(n ? mean / static_cast<double>(n) : 0.0) << "\n";
    man.config = {{"class", a.cls}, {"classes", model.classes}, {"features", model.feature_names},
                  {"mask_voxels", n}, {"nonfinite_voxels", nonfinite}};
    man.write(manifest_path_for(a.out));
    return 0;
}

// ---- report ----

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out_json, out_text;
};

int run_report(const ReportArgs& a) {
    Manifest man("report");
    ensure_parent(a.out_json);
    if (!a.out_text.empty()) ensure_parent(a.out_text);
    std::vector<Json> reports;
    for (const std::string& p : a.inputs) {
        man.input(p);
        reports.push_back(read_json(p));
        if (reports.back().value("format", std::string{}) != "msmap-experiment-report")
            throw Error(ErrorKind::InputFormat, "'" + p + "' is not an experiment report");
    }
    RenderedReport r;
    try {
        r = render_report(reports);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InputFormat, std::string("report: ") + e.what());
    }
    write_json(r.tables, a.out_json);
    man.output(a.out_json);
    if (!a.out_text.empty()) {
        write_text_atomic(a.out_text, r.text);
        man.output(a.out_text);
    } else {
        std::cout << r.text;
    }
    man.write(manifest_path_for(a.out_json));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    g_argv.assign(argv, argv + argc);
    CLI::App app{"msmap: myelin and microstructure mapping with voxelwise lesion classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", MSMAP_VERSION);

    PhantomArgs ph;
    auto* c_ph = app.add_subcommand("phantom", "generate a synthetic subject with ground truth");
    c_ph->add_option("--out", ph.out_dir, "output directory")->required();
    c_ph->add_option("--seed", ph.seed, "random seed")->required();
    c_ph->add_option("--config", ph.config_path, "phantom config JSON");
    c_ph->add_option("--size", ph.size, "grid size (voxels per side, >= 16)");
    c_ph->add_flag("--control", ph.control, "lesion-free control subject");
    c_ph->add_option("--met2-snr", ph.met2_snr, "MET2 SNR (inf for noiseless)")->capture_default_str();
    c_ph->add_option("--dwi-snr", ph.dwi_snr, "diffusion SNR (inf for noiseless)")->capture_default_str();
    c_ph->add_option("--dispersion", ph.dispersion, "fiber dispersion angle in degrees")->capture_default_str();
    c_ph->add_option("--t1", ph.t1, "T1 in ms for the EPG simulation")->capture_default_str();

    TvArgs tv;
    auto* c_tv = app.add_subcommand("denoise-tv", "3D total-variation denoising of every frame");
    c_tv->add_option("--in", tv.in, "input NIfTI")->required();
    c_tv->add_option("--out", tv.out, "output NIfTI")->required();
    c_tv->add_option("--weight", tv.weight, "absolute TV weight (default: factor times estimated noise)");
    c_tv->add_option("--weight-factor", tv.opts.weight_factor, "weight relative to the per-frame noise estimate")
        ->capture_default_str();
    c_tv->add_option("--max-iters", tv.opts.max_iters)->capture_default_str();
    c_tv->add_option("--tol", tv.opts.tol)->capture_default_str();

    Met2Args m2;
    auto* c_m2 = app.add_subcommand("fit-met2", "T2 spectrum fit and compartment fractions");
    c_m2->add_option("--in", m2.in, "multi-echo NIfTI (echoes as frames)")->required();
    c_m2->add_option("--out-prefix", m2.prefix, "output prefix")->required();
    c_m2->add_option("--mask", m2.mask, "voxels to fit (default: all)");
    c_m2->add_option("--spectra", m2.spectra, "also write T2 spectra as a 4D NIfTI");
    c_m2->add_option("--t2-min", m2.t2_min)->capture_default_str();
    c_m2->add_option("--t2-max", m2.t2_max)->capture_default_str();
    c_m2->add_option("--t2-points", m2.t2_points)->capture_default_str();
    c_m2->add_option("--fa-min", m2.fa_min)->capture_default_str();
    c_m2->add_option("--fa-max", m2.fa_max)->capture_default_str();
    c_m2->add_option("--fa-step", m2.fa_step)->capture_default_str();
    c_m2->add_option("--mu-min", m2.mu_min)->capture_default_str();
    c_m2->add_option("--mu-max", m2.mu_max)->capture_default_str();
    c_m2->add_option("--mu-points", m2.mu_points)->capture_default_str();
    c_m2->add_option("--mu", m2.mu, "fixed regularization weight (skips the L-curve)");
    c_m2->add_option("--delta-te", m2.delta_te, "echo spacing in ms")->capture_default_str();
    c_m2->add_option("--t1", m2.t1)->capture_default_str();
    c_m2->add_option("--rician-sigma", m2.rician_sigma, "noise level for magnitude bias correction")->capture_default_str();
    c_m2->add_option("--myelin-max", m2.myelin_max, "upper T2 of the myelin window (ms)")->capture_default_str();
    c_m2->add_option("--ie-max", m2.ie_max, "upper T2 of the intra/extra-cellular window (ms)")->capture_default_str();

    SmtArgs sm;
    auto* c_sm = app.add_subcommand("fit-smt", "spherical mean technique fit");
    c_sm->add_option("--in", sm.in, "diffusion NIfTI")->required();
    c_sm->add_option("--bval", sm.bval)->required();
    c_sm->add_option("--bvec", sm.bvec)->required();
    c_sm->add_option("--out-prefix", sm.prefix, "output prefix")->required();
    c_sm->add_option("--mask", sm.mask, "voxels to fit (default: all)");
    c_sm->add_option("--lambda-min", sm.lambda_min, "mm^2/s")->capture_default_str();
    c_sm->add_option("--lambda-max", sm.lambda_max, "mm^2/s")->capture_default_str();
    c_sm->add_option("--grid", sm.grid, "initial grid points per parameter")->capture_default_str();
    c_sm->add_option("--shell-tol", sm.shell_tol, "b-value tolerance for shell grouping")->capture_default_str();

    SampleArgs sa;
    auto* c_sa = app.add_subcommand("sample", "extract labeled voxel feature rows");
    c_sa->add_option("--subject", sa.subject, "subject id")->required();
    c_sa->add_option("--wm-mask", sa.wm_mask, "white-matter mask")->required();
    c_sa->add_option("--out", sa.out, "output CSV table")->required();
    c_sa->add_option("--scores", sa.scores, "lesion score map (patients)");
    c_sa->add_flag("--control", sa.control, "control subject: all WM voxels are labeled C");
    c_sa->add_option("--threshold", sa.threshold, "lesion score threshold (strict)")->capture_default_str();
    c_sa->add_option("--ring-distance", sa.ring, "minimum distance of NAWM voxels from any lesion")->capture_default_str();
    c_sa->add_option("--metric", sa.metric, "euclidean or chebyshev")->capture_default_str();
    sa.features.add(c_sa);

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "cross-validated boosting experiment and final model");
    c_tr->add_option("--table", tr.tables, "feature table(s)")->required();
    c_tr->add_option("--experiment", tr.experiment, "LNC, LN or LC")->required();
    c_tr->add_option("--seed", tr.seed, "random seed")->required();
    c_tr->add_option("--model", tr.model_out, "output model JSON")->required();
    c_tr->add_option("--report", tr.report_out, "output experiment report JSON");
    c_tr->add_option("--folds", tr.folds)->capture_default_str();
    c_tr->add_option("--n-estimators", tr.n_estimators)->capture_default_str();
    c_tr->add_option("--max-depth", tr.max_depth)->capture_default_str();
    c_tr->add_option("--min-leaf", tr.min_leaf)->capture_default_str();
    c_tr->add_option("--features", tr.features, "feature subset (default: all five)");
    c_tr->add_option("--holdout", tr.holdout, "subjects excluded from training and evaluated separately");
    c_tr->add_flag("--ablation", tr.ablation, "also cross-validate Diff, MET2 and combined feature subsets");

    PredictArgs pr;
    auto* c_pr = app.add_subcommand("predict", "voxelwise class probability map");
    c_pr->add_option("--model", pr.model, "model JSON")->required();
    c_pr->add_option("--out", pr.out, "output probability NIfTI")->required();
    c_pr->add_option("--mask", pr.mask, "voxels to classify (default: all)");
    c_pr->add_option("--class", pr.cls, "class whose probability is written")->capture_default_str();
    pr.features.add(c_pr);

    ReportArgs rp;
    auto* c_rp = app.add_subcommand("report", "render experiment reports as tables");
    c_rp->add_option("--in", rp.inputs, "experiment report JSON(s)")->required();
    c_rp->add_option("--out-json", rp.out_json, "output tables JSON")->required();
    c_rp->add_option("--out-text", rp.out_text, "output text tables (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*c_ph) return run_phantom(ph);
        if (*c_tv) return run_denoise(tv);
        if (*c_m2) return run_fit_met2(m2);
        if (*c_sm) return run_fit_smt(sm);
        if (*c_sa) return run_sample(sa);
        if (*c_tr) return run_train(tr);
        if (*c_pr) return run_predict(pr);
        if (*c_rp) return run_report(rp);
    } catch (const Error& e) {
        std::cerr << "msmap: error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "msmap: error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "msmap: error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
