#include "sicu/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "sicu/eval.hpp"
#include "sicu/models.hpp"
#include "sicu/nn/checkpoint.hpp"
#include "sicu/pipeline.hpp"
#include "sicu/runtime.hpp"
#include "sicu/study.hpp"

namespace sicu {

using nlohmann::json;

int exit_code_for(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const WorkspaceLocked&) {
        return kExitLocked;
    } catch (const MissingModel&) {
        return kExitModel;
    } catch (const ModelError&) {
        return kExitModel;
    } catch (const ConfigError&) {
        return kExitConfig;
    } catch (const InvalidInput&) {
        return kExitConfig;
    } catch (const FormatError&) {
        return kExitData;
    } catch (const IoError&) {
        return kExitData;
    } catch (...) {
        return kExitFailure;
    }
}

int run_guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(std::current_exception());
    } catch (...) {
        err << "error: unknown failure\n";
        return kExitFailure;
    }
}

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void print_header(const char* command, const RunConfig& c, std::ostream& log) {
    log << "sicu " << command << "\n"
        << "workspace: " << c.workspace.string() << "\n"
        << "seed: " << c.seed << "\n"
        << "resolved config:\n"
        << json(c).dump(2) << "\n";
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void require_data(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw MissingData(path.string() + " not found; run `sicu " + producer + "` first");
    }
}

void require_model(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw MissingModel(path.string() + " not found; run `sicu " + producer + "` first");
    }
}

Dataset load_dataset_for(const std::filesystem::path& path, const ScenarioConfig& expected) {
    require_data(path, "generate");
    Dataset ds = read_dataset(path);
    if (json(ds.manifest.config) != json(expected)) {
        throw ConfigError(path.string() +
                          " was generated from a different scenario config; re-run `sicu generate` with this config");
    }
    return ds;
}

/// Loads through `fn`, reclassifying unusable checkpoints as model errors.
template <typename F>
auto load_model(const std::filesystem::path& path, F&& fn) {
    try {
        return fn();
    } catch (const FormatError& e) {
        throw ModelError(path.string() + ": " + e.what());
    }
}

void save_model(nn::Layer<float>& model, const RunConfig& c, Stage stage, const json& extra,
                const std::filesystem::path& path) {
    json meta = {{"stage", stage_name(stage)}, {"training", c.training[stage]}, {"run_config", c}};
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    nn::save_checkpoint<float>(model, meta, path);
}

nn::EpochCallback epoch_logger(std::ostream& log, const std::string& tag, const Stopwatch& clock) {
    return [&log, tag, &clock](int epoch, double loss, double lr) {
        log << tag << " epoch " << epoch + 1 << " loss " << std::setprecision(6) << loss << " lr " << lr << " ("
            << std::fixed << std::setprecision(1) << clock.seconds() << " s)" << std::defaultfloat << "\n"
            << std::flush;
    };
}

void train_classifier_stage(const RunConfig& c, const Workspace& ws, Stage stage, std::ostream& log) {
    const Dataset ds = load_dataset_for(ws.train_dataset(), c.scenario);
    ClassifierSpec spec;
    nn::TrainingSet<float> set;
    switch (stage) {
        case Stage::Sps:
            set = sps_training_set(ds);
            spec.num_classes = c.scenario.interferer_sps_set.size();
            break;
        case Stage::Sir:
            set = sir_training_set(ds);
            spec.num_classes = c.scenario.sir_bins_db.size();
            break;
        case Stage::Method: {
            require_data(ws.method_labels(), "labels");
            const json labels = read_json_file(ws.method_labels());
            MethodGroundTruth truth;
            try {
                truth = labels.at("ground_truth").get<MethodGroundTruth>();
            } catch (const json::exception& e) {
                throw FormatError(ws.method_labels().string() + ": " + e.what());
            }
            set = method_training_set(ds, truth, c.pipeline);
            spec.num_classes = 2;
            break;
        }
        case Stage::Unet:
            throw InvalidInput("U-Net stage is not a classifier");
    }
    spec.head = c.heads[stage];
    log << "training " << stage_name(stage) << " classifier (" << head_name(spec.head) << " head) on " << set.size() << " examples\n";
    Stopwatch clock;
    auto model = train_classifier(set, spec, c.training[stage], epoch_logger(log, stage_name(stage), clock));
    const double acc = nn::accuracy<float>(*model, set.inputs, set.labels);
    log << stage_name(stage) << " training-set accuracy " << std::fixed << std::setprecision(4) << acc
        << std::defaultfloat << "\n";
    save_model(*model, c, stage, {{"classifier", spec}}, ws.stage_checkpoint(stage));
    log << "wrote " << ws.stage_checkpoint(stage).string() << "\n";
}

void train_unet_stage(const RunConfig& c, const Workspace& ws, std::ostream& log) {
    const Dataset ds = load_dataset_for(ws.train_dataset(), c.scenario);
    Stopwatch clock;
    const auto models = train_unet_bank(ds, c.unet, c.training.unet, [&](int sps, int e, double loss, double lr) {
        epoch_logger(log, "unet sps " + std::to_string(sps), clock)(e, loss, lr);
    });
    std::vector<ModelBank::Entry> entries;
    for (const auto& [sps, model] : models) {
        const auto path = ws.unet_checkpoint(sps);
        save_model(*model, c, Stage::Unet, {{"sps", sps}}, path);
        entries.push_back({sps, path, json(c.training.unet)});
        log << "wrote " << path.string() << "\n";
    }
    ModelBank(std::move(entries)).write_manifest(ws.bank_manifest());
    log << "wrote " << ws.bank_manifest().string() << "\n";
}

std::shared_ptr<const ModelBank> load_bank(const Workspace& ws) {
    require_model(ws.bank_manifest(), "train --stage unet");
    return load_model(ws.bank_manifest(), [&] { return std::make_shared<const ModelBank>(ModelBank::from_manifest(ws.bank_manifest())); });
}

void print_accuracies(const EvalReport& report, std::ostream& log) {
    for (const auto& a : report.accuracies) {
        log << std::left << std::setw(22) << a.stage << std::right << a.correct << "/" << a.total << "  "
            << std::fixed << std::setprecision(4) << a.accuracy() << std::defaultfloat << "\n";
    }
}

}  // namespace

void cmd_generate(const RunConfig& c, std::ostream& log) {
    const Workspace ws{c.workspace};
    WorkspaceLock lock(ws);
    print_header("generate", c, log);
    ws.create_layout();
    const Dataset train = generate_dataset(c.scenario, c.threads);
    write_dataset(train, ws.train_dataset());
    log << "wrote " << ws.train_dataset().string() << " (" << train.examples.size() << " examples)\n";
    const Dataset test = generate_dataset(c.test_scenario(), c.threads);
    write_dataset(test, ws.test_dataset());
    log << "wrote " << ws.test_dataset().string() << " (" << test.examples.size() << " examples)\n";
    write_json_file(ws.datasets() / "manifest.json",
                    {{"command", "generate"},
                     {"run_config", c},
                     {"train", {{"file", ws.train_dataset().filename().string()}, {"manifest", read_dataset(ws.train_dataset()).manifest}}},
                     {"test", {{"file", ws.test_dataset().filename().string()}, {"manifest", read_dataset(ws.test_dataset()).manifest}}}});
}

void cmd_train(const RunConfig& c, Stage stage, std::ostream& log) {
    const Workspace ws{c.workspace};
    WorkspaceLock lock(ws);
    print_header((std::string("train --stage ") + stage_name(stage)).c_str(), c, log);
    ws.create_layout();
    tune_allocator_for_training();
    if (stage == Stage::Unet) {
        train_unet_stage(c, ws, log);
    } else {
        train_classifier_stage(c, ws, stage, log);
    }
}

void cmd_labels(const RunConfig& c, std::ostream& log) {
    const Workspace ws{c.workspace};
    WorkspaceLock lock(ws);
    print_header("labels", c, log);
    const Dataset ds = load_dataset_for(ws.train_dataset(), c.scenario);
    const auto bank = load_bank(ws);
    MethodGroundTruth truth;
    load_model(ws.bank_manifest(), [&] {
        truth = build_method_ground_truth(ds, *bank, c.pipeline.sic, c.threads);
        return 0;
    });
    write_json_file(ws.method_labels(), {{"command", "labels"}, {"run_config", c}, {"ground_truth", truth}});
    write_text_file(ws.winner_table(), truth.winner_table_csv());
    std::uint64_t sic = 0, unet = 0, ties = 0;
    for (const auto& [key, w] : truth.winners) {
        sic += w.sic;
        unet += w.unet;
        ties += w.ties;
    }
    log << "labels: " << sic << " SIC, " << unet + ties << " SICU-Net (" << ties << " ties)\n"
        << "wrote " << ws.method_labels().string() << "\n"
        << "wrote " << ws.winner_table().string() << "\n";
}

void cmd_evaluate(const RunConfig& c, std::ostream& log) {
    const Workspace ws{c.workspace};
    WorkspaceLock lock(ws);
    print_header("evaluate", c, log);
    for (Stage s : {Stage::Sps, Stage::Sir, Stage::Method}) {
        require_model(ws.stage_checkpoint(s), std::string("train --stage ") + stage_name(s));
    }
    const auto bank = load_bank(ws);
    const Dataset test = load_dataset_for(ws.test_dataset(), c.test_scenario());
    auto load_stage = [&](Stage s, std::size_t classes) {
        return load_model(ws.stage_checkpoint(s), [&] { return load_classifier(ws.stage_checkpoint(s), classes); });
    };
    auto sps = load_stage(Stage::Sps, c.scenario.interferer_sps_set.size());
    auto sir = load_stage(Stage::Sir, c.scenario.sir_bins_db.size());
    auto method = load_stage(Stage::Method, 2);
    const RecommenderPipeline pipeline = load_model(ws.bank_manifest(), [&] {
        RecommenderPipeline p(c.scenario, sps, sir, method, bank, c.pipeline);
        bank->require_complete(c.scenario.interferer_sps_set);
        for (int s : c.scenario.interferer_sps_set) bank->get(s);
        return p;
    });
    write_pipeline_manifest(ws.pipeline_manifest(), c.scenario, ws.stage_checkpoint(Stage::Sps),
                            ws.stage_checkpoint(Stage::Sir), ws.stage_checkpoint(Stage::Method), ws.bank_manifest(),
                            c.pipeline);

    EvalOptions opts;
    opts.threads = c.threads;
    EvalReport report = evaluate_pipeline(pipeline, test, opts);
    report.config["run_config"] = c;
    ws.create_layout();
    const auto files = emit_report(report, ws.reports());
    json names = json::array();
    for (const auto& f : files) names.push_back(f.filename().string());
    write_json_file(ws.reports() / "manifest.json", {{"command", "evaluate"}, {"run_config", c}, {"files", names}});
    print_accuracies(report, log);
    log << "wrote " << files.size() << " report files to " << ws.reports().string() << "\n";
}

void cmd_report(const std::filesystem::path& report_json, const std::optional<std::filesystem::path>& out_dir,
                std::ostream& log) {
    require_data(report_json, "evaluate");
    EvalReport report;
    try {
        report = read_json_file(report_json).get<EvalReport>();
    } catch (const json::exception& e) {
        throw FormatError(report_json.string() + ": " + e.what());
    }
    const auto dir = out_dir.value_or(report_json.parent_path().empty() ? "." : report_json.parent_path());
    log << "sicu report\nseed: " << report.seed << "\nresolved config:\n" << report.config.dump(2) << "\n";
    const bool same_dir = std::filesystem::exists(dir / "report.json") &&
                          std::filesystem::equivalent(dir / "report.json", report_json);
    const auto files = emit_report(report, dir, !same_dir);
    print_accuracies(report, log);
    log << "wrote " << files.size() << " files to " << dir.string() << "\n";
}

}  // namespace sicu
