#include "sicu/pipeline.hpp"

#include <cstdlib>
#include <fstream>

#include "sicu/error.hpp"
#include "sicu/runtime.hpp"

namespace sicu {

using nlohmann::json;

const char* method_name(Method m) { return m == Method::Sic ? "SIC" : "SICU-Net"; }

Method method_from_name(const std::string& name) {
    if (name == "SIC") return Method::Sic;
    if (name == "SICU-Net") return Method::Unet;
    throw InvalidInput("unknown method '" + name + "' (expected SIC or SICU-Net)");
}

void to_json(json& j, const SicDefaults& s) {
    j = {{"force_cancel", s.force_cancel}, {"max_passes", s.max_passes},
         {"edge_exclusion_symbols", s.edge_exclusion_symbols}};
}

void from_json(const json& j, SicDefaults& s) {
    SicDefaults d;
    d.force_cancel = j.value("force_cancel", d.force_cancel);
    d.max_passes = j.value("max_passes", d.max_passes);
    d.edge_exclusion_symbols = j.value("edge_exclusion_symbols", d.edge_exclusion_symbols);
    if (d.max_passes < 1) throw ConfigError("sic.max_passes must be >= 1");
    s = d;
}

void to_json(json& j, const PipelineOptions& o) { j = {{"sic", o.sic}, {"method_uses_sir", o.method_uses_sir}}; }

void from_json(const json& j, PipelineOptions& o) {
    PipelineOptions d;
    if (j.contains("sic")) d.sic = j.at("sic").get<SicDefaults>();
    d.method_uses_sir = j.value("method_uses_sir", d.method_uses_sir);
    o = d;
}

std::vector<float> method_side_inputs(const PipelineOptions& options, int sps, int sir_db) {
    std::vector<float> side{sps_side_input(sps)};
    if (options.method_uses_sir) side.push_back(sir_side_input(sir_db));
    return side;
}

Bits run_sic_method(const ScenarioConfig& scenario, const SicDefaults& sic, const IqFrame& mixture, int sps,
                    int sir_db) {
    SicConfig c = make_sic_config(scenario, sps, sir_db);
    c.force_cancel = sic.force_cancel;
    c.max_passes = sic.max_passes;
    c.edge_exclusion_symbols = sic.edge_exclusion_symbols;
    return sic_cancel(mixture, c).soi_bits;
}

Bits run_unet_method(const ScenarioConfig& scenario, const ModelBank& bank, const IqFrame& mixture, int sps) {
    const auto& model = bank.get(sps);
    const auto estimate = unet_denoise(model, mixture);
    const auto shape = design_rrc(scenario.roll_off, scenario.span_symbols, scenario.soi_sps);
    return recover_bits_from_denoised(estimate, scenario.soi_sps, shape);
}

// ---- pipeline ----------------------------------------------------------------------

namespace {

void check_stage_model(const nn::Layer<float>* model, const char* stage, std::size_t channels, std::size_t classes) {
    if (!model) throw ConfigError(std::string(stage) + " model is not loaded");
    nn::Tensor<float> probe({1, channels, kClassifierInputLength});
    nn::Tensor<float> out;
    try {
        out = model->infer(probe);
    } catch (const std::exception& e) {
        throw ConfigError(std::string(stage) + " model does not accept " + std::to_string(channels) +
                          "-channel input: " + e.what());
    }
    if (out.rank() != 2 || out.dim(1) != classes) {
        throw ConfigError(std::string(stage) + " model has " + nn::shape_string(out.shape()) + " outputs, expected " +
                          std::to_string(classes) + " classes");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

RecommenderPipeline::RecommenderPipeline(ScenarioConfig scenario, std::shared_ptr<const nn::Layer<float>> sps_model,
                                         std::shared_ptr<const nn::Layer<float>> sir_model,
                                         std::shared_ptr<const nn::Layer<float>> method_model,
                                         std::shared_ptr<const ModelBank> bank, PipelineOptions options)
    : scenario_(std::move(scenario)),
      sps_model_(std::move(sps_model)),
      sir_model_(std::move(sir_model)),
      method_model_(std::move(method_model)),
      bank_(std::move(bank)),
      options_(options) {
    scenario_.validate();
    if (scenario_.frame_len != static_cast<int>(kClassifierInputLength)) {
        throw ConfigError("pipeline: classifiers take " + std::to_string(kClassifierInputLength) +
                          "-sample frames, scenario has " + std::to_string(scenario_.frame_len));
    }
    check_stage_model(sps_model_.get(), "Stage-1 SPS", 2, scenario_.interferer_sps_set.size());
    check_stage_model(sir_model_.get(), "Stage-2 SIR", 2, scenario_.sir_bins_db.size());
    check_stage_model(method_model_.get(), "Stage-3 method", options_.method_input_channels(), 2);
    if (!bank_) throw ConfigError("pipeline: no U-Net bank");
    bank_->require_complete(scenario_.interferer_sps_set);
}

RecommenderPipeline RecommenderPipeline::from_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw MissingModel("pipeline manifest " + manifest.string() + " not found");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("pipeline manifest " + manifest.string() + ": " + e.what());
    }
    const auto base = manifest.parent_path();
    try {
        auto scenario = j.at("scenario").get<ScenarioConfig>();
        auto options = j.value("options", json::object()).get<PipelineOptions>();
        auto sps = load_classifier(resolve(base, j.at("sps_model").get<std::string>()),
                                   scenario.interferer_sps_set.size());
        auto sir = load_classifier(resolve(base, j.at("sir_model").get<std::string>()), scenario.sir_bins_db.size());
        auto method = load_classifier(resolve(base, j.at("method_model").get<std::string>()), 2);
        auto bank = std::make_shared<const ModelBank>(
            ModelBank::from_manifest(resolve(base, j.at("unet_bank").get<std::string>())));
        return RecommenderPipeline(std::move(scenario), std::move(sps), std::move(sir), std::move(method),
                                   std::move(bank), options);
    } catch (const json::exception& e) {
        throw FormatError("pipeline manifest " + manifest.string() + ": " + e.what());
    }
}

void write_pipeline_manifest(const std::filesystem::path& manifest, const ScenarioConfig& scenario,
                             const std::filesystem::path& sps_model, const std::filesystem::path& sir_model,
                             const std::filesystem::path& method_model, const std::filesystem::path& bank_manifest,
                             const PipelineOptions& options) {
    const auto base = manifest.parent_path();
    auto rel = [&](const std::filesystem::path& p) { return std::filesystem::relative(p, base).generic_string(); };
    const json j = {{"scenario", scenario},           {"sps_model", rel(sps_model)},
                    {"sir_model", rel(sir_model)},     {"method_model", rel(method_model)},
                    {"unet_bank", rel(bank_manifest)}, {"options", options}};
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write pipeline manifest " + manifest.string());
    out << j.dump(2) << "\n";
}

Bits RecommenderPipeline::run_method(Method m, const IqFrame& mixture, int sps, int sir_db) const {
    return m == Method::Sic ? run_sic(mixture, sps, sir_db) : run_unet(mixture, sps);
}

PipelineOutput RecommenderPipeline::run(const IqFrame& mixture, const StageOverrides& overrides) const {
    if (mixture.size() != static_cast<std::size_t>(scenario_.frame_len)) {
        throw InvalidInput("pipeline: mixture has " + std::to_string(mixture.size()) + " samples, expected " +
                           std::to_string(scenario_.frame_len));
    }
    PipelineOutput out;
    StageTrace& t = out.trace;

    auto s1 = classify(*sps_model_, mixture);
    t.sps_posteriors = std::move(s1.posteriors);
    t.predicted_sps = scenario_.interferer_sps_set.at(static_cast<std::size_t>(s1.decision));
    if (overrides.sps) {
        scenario_.sps_class_of(*overrides.sps);  // rejects SPS values outside the set
        t.predicted_sps = *overrides.sps;
        t.sps_overridden = true;
    }

    auto s2 = classify(*sir_model_, mixture);
    t.sir_posteriors = std::move(s2.posteriors);
    t.predicted_sir_db = scenario_.sir_bins_db.at(static_cast<std::size_t>(s2.decision));
    if (overrides.sir_db) {
        t.predicted_sir_db = *overrides.sir_db;
        t.sir_overridden = true;
    }

    const auto side = method_side_inputs(options_, t.predicted_sps, t.predicted_sir_db);
    auto s3 = classify(*method_model_, mixture, side);
    t.method_posteriors = std::move(s3.posteriors);
    t.chosen_method = static_cast<Method>(s3.decision);
    if (overrides.method) {
        t.chosen_method = *overrides.method;
        t.method_overridden = true;
    }

    out.soi_bits = run_method(t.chosen_method, mixture, t.predicted_sps, t.predicted_sir_db);
    return out;
}

// ---- ground truth ------------------------------------------------------------------

std::vector<int> MethodGroundTruth::labels() const {
    std::vector<int> l;
    l.reserve(outcomes.size());
    for (const auto& o : outcomes) l.push_back(static_cast<int>(o.label));
    return l;
}

std::string MethodGroundTruth::winner_table_csv() const {
    std::string s = "sps,sir_bin_db,sic_wins,unet_wins,ties\n";
    for (const auto& [key, w] : winners) {
        s += std::to_string(key.first) + "," + std::to_string(key.second) + "," + std::to_string(w.sic) + "," +
             std::to_string(w.unet) + "," + std::to_string(w.ties) + "\n";
    }
    return s;
}

void to_json(json& j, const MethodGroundTruth& g) {
    json outcomes = json::array();
    for (const auto& o : g.outcomes) {
        outcomes.push_back({{"example_id", o.example_id},
                            {"sps", o.sps},
                            {"sir_bin_db", o.sir_bin_db},
                            {"sic_errors", o.sic.errors},
                            {"unet_errors", o.unet.errors},
                            {"bits", o.sic.bits},
                            {"label", method_name(o.label)},
                            {"tie", o.tie}});
    }
    json winners = json::array();
    for (const auto& [key, w] : g.winners) {
        winners.push_back(
            {{"sps", key.first}, {"sir_bin_db", key.second}, {"sic", w.sic}, {"unet", w.unet}, {"ties", w.ties}});
    }
    j = {{"outcomes", outcomes}, {"winners", winners}};
}

void from_json(const json& j, MethodGroundTruth& g) {
    g = MethodGroundTruth{};
    for (const auto& o : j.at("outcomes")) {
        MethodOutcome m;
        m.example_id = o.at("example_id").get<std::uint64_t>();
        m.sps = o.at("sps").get<int>();
        m.sir_bin_db = o.at("sir_bin_db").get<int>();
        const auto bits = o.at("bits").get<std::uint64_t>();
        m.sic = {o.at("sic_errors").get<std::uint64_t>(), bits};
        m.unet = {o.at("unet_errors").get<std::uint64_t>(), bits};
        m.label = method_from_name(o.at("label").get<std::string>());
        m.tie = o.at("tie").get<bool>();
        g.outcomes.push_back(m);
    }
    for (const auto& w : j.at("winners")) {
        g.winners[{w.at("sps").get<int>(), w.at("sir_bin_db").get<int>()}] =
            WinnerCounts{w.at("sic").get<std::uint64_t>(), w.at("unet").get<std::uint64_t>(),
                         w.at("ties").get<std::uint64_t>()};
    }
}

namespace {

MethodOutcome oracle_outcome(const ScenarioConfig& sc, const ModelBank& bank, const SicDefaults& sic,
                             const LabeledExample& ex) {
    MethodOutcome o;
    o.example_id = ex.example_id;
    o.sps = sc.interferer_sps_set.at(ex.sps_class);
    o.sir_bin_db = sc.sir_bins_db.at(ex.sir_class);
    const IqFrame frame = ex.frame(sc.soi_sps);
    o.sic = ber(ex.soi_bits, run_sic_method(sc, sic, frame, o.sps, o.sir_bin_db));
    o.unet = ber(ex.soi_bits, run_unet_method(sc, bank, frame, o.sps));
    o.tie = o.sic.errors == o.unet.errors;
    o.label = o.sic.errors < o.unet.errors ? Method::Sic : Method::Unet;
    return o;
}

}  // namespace

MethodGroundTruth build_method_ground_truth(const Dataset& dataset, const ModelBank& bank, const SicDefaults& sic,
                                            unsigned threads) {
    const auto& sc = dataset.manifest.config;
    bank.require_complete(sc.interferer_sps_set);
    MethodGroundTruth g;
    g.outcomes.resize(dataset.examples.size());
    parallel_for(dataset.examples.size(), threads,
                 [&](std::size_t i) { g.outcomes[i] = oracle_outcome(sc, bank, sic, dataset.examples[i]); });
    for (const auto& o : g.outcomes) {
        auto& w = g.winners[{o.sps, o.sir_bin_db}];
        if (o.tie) {
            ++w.ties;
        } else if (o.label == Method::Sic) {
            ++w.sic;
        } else {
            ++w.unet;
        }
    }
    return g;
}

// ---- evaluation --------------------------------------------------------------------

namespace {

std::vector<std::string> int_names(const std::vector<int>& values) {
    std::vector<std::string> names;
    for (int v : values) names.push_back(std::to_string(v));
    return names;
}

int index_of(const std::vector<int>& values, int v) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] == v) return static_cast<int>(i);
    }
    throw InvalidInput("value " + std::to_string(v) + " is not a known class");
}

}  // namespace

EvalReport evaluate_pipeline(const RecommenderPipeline& pipeline, const Dataset& dataset, const EvalOptions& options,
                             std::vector<EvalRecord>* records) {
    const auto& sc = pipeline.scenario();
    const auto& dc = dataset.manifest.config;
    if (dc.interferer_sps_set != sc.interferer_sps_set || dc.sir_bins_db != sc.sir_bins_db ||
        dc.frame_len != sc.frame_len || dc.soi_sps != sc.soi_sps) {
        throw ConfigError("evaluate: dataset classes or framing differ from the pipeline's scenario");
    }
    const auto* gt = options.ground_truth;
    if (gt && gt->outcomes.size() != dataset.examples.size()) {
        throw ConfigError("evaluate: ground truth has " + std::to_string(gt->outcomes.size()) + " labels for " +
                          std::to_string(dataset.examples.size()) + " examples");
    }
    if (options.oracle_method && !gt) throw ConfigError("evaluate: oracle Stage 3 needs ground-truth labels");

    std::vector<EvalRecord> recs(dataset.examples.size());
    parallel_for(dataset.examples.size(), options.threads, [&](std::size_t i) {
        const auto& ex = dataset.examples[i];
        if (gt && gt->outcomes[i].example_id != ex.example_id) {
            throw ConfigError("evaluate: ground truth is not aligned with the dataset at index " + std::to_string(i));
        }
        const IqFrame frame = ex.frame(sc.soi_sps);
        const int true_sps = sc.interferer_sps_set.at(ex.sps_class);
        const int true_sir = sc.sir_bins_db.at(ex.sir_class);
        MethodOutcome truth = gt ? gt->outcomes[i] : MethodOutcome{};
        if (!gt) truth = oracle_outcome(sc, pipeline.bank(), pipeline.options().sic, ex);

        StageOverrides ov;
        if (options.oracle_sps) ov.sps = true_sps;
        if (options.oracle_sir) ov.sir_db = true_sir;
        if (options.oracle_method) ov.method = truth.label;
        const auto out = pipeline.run(frame, ov);
        const auto& t = out.trace;

        EvalRecord r;
        r.example_id = ex.example_id;
        r.sps_label = ex.sps_class;
        r.sps_pred = index_of(sc.interferer_sps_set, t.predicted_sps);
        r.sir_label = ex.sir_class;
        r.sir_pred = index_of(sc.sir_bins_db, t.predicted_sir_db);
        r.method_label = static_cast<int>(truth.label);
        r.method_pred = static_cast<int>(t.chosen_method);
        r.full = ber(ex.soi_bits, out.soi_bits);
        // The chosen method already ran with exactly these parameters.
        r.sic_only = t.chosen_method == Method::Sic
                         ? r.full
                         : ber(ex.soi_bits, pipeline.run_sic(frame, t.predicted_sps, t.predicted_sir_db));
        r.unet_only = t.chosen_method == Method::Unet ? r.full
                                                      : ber(ex.soi_bits, pipeline.run_unet(frame, t.predicted_sps));
        recs[i] = r;
    });

    EvalReport report;
    ConfusionMatrix c1(sc.interferer_sps_set.size(), int_names(sc.interferer_sps_set));
    ConfusionMatrix c2(sc.sir_bins_db.size(), int_names(sc.sir_bins_db));
    ConfusionMatrix c3(2, {method_name(Method::Sic), method_name(Method::Unet)});
    BerCurve full{kFullCurve, {}}, sic{kSicCurve, {}}, unet{kUnetCurve, {}};
    StageAccuracy within1{"stage2_sir_within_1", 0, 0};
    for (const auto& r : recs) {
        c1.add(r.sps_label, r.sps_pred);
        c2.add(r.sir_label, r.sir_pred);
        c3.add(r.method_label, r.method_pred);
        within1.correct += std::abs(r.sir_label - r.sir_pred) <= 1;
        ++within1.total;
        const int sps = sc.interferer_sps_set[static_cast<std::size_t>(r.sps_label)];
        const int bin = sc.sir_bins_db[static_cast<std::size_t>(r.sir_label)];
        full.add(sps, bin, r.full);
        sic.add(sps, bin, r.sic_only);
        unet.add(sps, bin, r.unet_only);
    }
    report.accuracies = {{"stage1_sps", c1.correct(), c1.total()},
                         {"stage2_sir", c2.correct(), c2.total()},
                         within1,
                         {"stage3_method", c3.correct(), c3.total()}};
    report.confusions.emplace("stage1_sps", std::move(c1));
    report.confusions.emplace("stage2_sir", std::move(c2));
    report.confusions.emplace("stage3_method", std::move(c3));
    report.curves = {std::move(full), std::move(sic), std::move(unet)};
    report.seed = dc.seed;
    report.config = {{"scenario", dc},
                     {"options", pipeline.options()},
                     {"oracle", {{"sps", options.oracle_sps}, {"sir", options.oracle_sir}, {"method", options.oracle_method}}}};
    if (records) *records = std::move(recs);
    return report;
}

}  // namespace sicu
