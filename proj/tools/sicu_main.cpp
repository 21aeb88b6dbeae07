#include <iostream>

#include "CLI11.hpp"

#include "sicu/commands.hpp"

namespace {

struct Flags {
    std::string config, profile, workspace;
    std::uint64_t seed = 0;
    int epochs = 0, batch = 0;
    double lr = 0.0;
    unsigned threads = 0;
};

sicu::CliOverrides overrides_from(const CLI::App& app, const Flags& f) {
    sicu::CliOverrides o;
    if (app.count("--config")) o.config = f.config;
    if (app.count("--profile")) o.profile = f.profile;
    if (app.count("--workspace")) o.workspace = f.workspace;
    if (app.count("--seed")) o.seed = f.seed;
    if (app.count("--threads")) o.threads = f.threads;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recommender study for SIC versus U-Net interference mitigation"};
    app.require_subcommand(1);
    Flags f;
    app.add_option("--config", f.config, "Run config JSON")->check(CLI::ExistingFile);
    app.add_option("--profile", f.profile, "integer_sir or fractional_sir")
        ->check(CLI::IsMember({"integer_sir", "fractional_sir"}));
    app.add_option("--workspace", f.workspace, "Workspace directory (default: $SICU_WORKSPACE)");
    app.add_option("--seed", f.seed, "Master seed");
    app.add_option("--threads", f.threads, "Worker threads (0 = all cores)");

    auto* generate = app.add_subcommand("generate", "Generate training and test datasets");
    std::string stage;
    auto* train = app.add_subcommand("train", "Train one stage");
    train->add_option("--stage", stage, "sps, sir, unet or method")
        ->required()
        ->check(CLI::IsMember({"sps", "sir", "unet", "method"}));
    train->add_option("--epochs", f.epochs, "Epoch override")->check(CLI::PositiveNumber);
    train->add_option("--batch", f.batch, "Batch size override")->check(CLI::PositiveNumber);
    train->add_option("--lr", f.lr, "Learning rate override")->check(CLI::PositiveNumber);
    auto* labels = app.add_subcommand("labels", "Build Stage-3 method labels");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate the pipeline on the test set");
    std::string report_path, out_dir;
    auto* report = app.add_subcommand("report", "Re-emit CSV/SVG from a report.json");
    report->add_option("report", report_path, "Path to report.json")->required();
    report->add_option("--out", out_dir, "Output directory");
    for (auto* sub : {generate, train, labels, evaluate, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : sicu::kExitUsage;
    }

    return sicu::run_guarded(std::cerr, [&] {
        if (report->parsed()) {
            std::optional<std::filesystem::path> out;
            if (!out_dir.empty()) out = out_dir;
            sicu::cmd_report(report_path, out, std::cout);
            return;
        }
        std::optional<sicu::Stage> st;
        if (train->parsed()) st = sicu::stage_from_name(stage);
        auto o = overrides_from(app, f);
        if (train->parsed()) {
            if (train->count("--epochs")) o.epochs = f.epochs;
            if (train->count("--batch")) o.batch = f.batch;
            if (train->count("--lr")) o.lr = f.lr;
        }
        const auto config = sicu::resolve_run_config(o, st);
        if (generate->parsed()) sicu::cmd_generate(config, std::cout);
        if (train->parsed()) sicu::cmd_train(config, *st, std::cout);
        if (labels->parsed()) sicu::cmd_labels(config, std::cout);
        if (evaluate->parsed()) sicu::cmd_evaluate(config, std::cout);
    });
}
