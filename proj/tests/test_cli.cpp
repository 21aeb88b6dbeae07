#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "sicu/commands.hpp"
#include "sicu/error.hpp"
#include "sicu/run_config.hpp"
#include "test_util.hpp"

using namespace sicu;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

int guarded(const std::function<void()>& body, std::string* message = nullptr) {
    std::ostringstream err;
    const int rc = run_guarded(err, body);
    if (message) *message = err.str();
    return rc;
}

/// Smallest configuration that still exercises every command.
RunConfig tiny_config(const std::filesystem::path& ws) {
    CliOverrides o;
    o.workspace = ws;
    RunConfig c = resolve_run_config(o);
    c.scenario.examples_per_bin = 1;
    c.test_examples_per_bin = 1;
    for (Stage s : {Stage::Sps, Stage::Sir, Stage::Unet, Stage::Method}) {
        c.training[s].epochs = 1;
        c.training[s].batch_size = 8;
    }
    c.unet.depth = 2;
    c.unet.base_channels = 4;
    c.threads = 2;
    return c;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(SICU_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config precedence: flags over file over profile defaults") {
    test::TempDir dir;
    const auto defaults = profile_defaults(Profile::IntegerSir);
    CliOverrides none;
    none.workspace = dir.path();
    const auto base = resolve_run_config(none);
    CHECK(base.training.sps.epochs == defaults.training.sps.epochs);
    CHECK(base.scenario.examples_per_bin == defaults.scenario.examples_per_bin);
    CHECK(!base.scenario.fractional_offsets);

    write_text(dir.path() / "c.json",
               R"({"seed": 9, "training": {"sps": {"epochs": 3}, "sir": {"lr": 0.01}}, "test_examples_per_bin": 5,
                   "heads": {"sir": "flatten"}})");
    CliOverrides file;
    file.workspace = dir.path();
    file.config = dir.path() / "c.json";
    const auto f = resolve_run_config(file);
    CHECK(f.seed == 9);
    CHECK(f.training.sps.epochs == 3);
    CHECK(f.training.sir.lr == 0.01);
    CHECK(f.training.sir.epochs == defaults.training.sir.epochs);
    CHECK(f.test_examples_per_bin == 5);
    CHECK(f.heads.sir == ClassifierHead::Flatten);
    CHECK(f.heads.method == defaults.heads.method);

    CliOverrides flags = file;
    flags.seed = 11;
    flags.epochs = 7;
    const auto g = resolve_run_config(flags, Stage::Sps);
    CHECK(g.seed == 11);
    CHECK(g.training.sps.epochs == 7);
    CHECK(g.training.sir.epochs == defaults.training.sir.epochs);  // only the selected stage
    CHECK(g.scenario.seed != f.scenario.seed);                   // derived from the master seed

    flags.profile = "fractional_sir";
    CHECK(resolve_run_config(flags).scenario.fractional_offsets);
    flags.profile = "bogus";
    CHECK_THROWS_AS(resolve_run_config(flags), ConfigError);

    write_text(dir.path() / "bad.json", R"({"scenario": {"frame_len": 512}})");
    CliOverrides bad;
    bad.config = dir.path() / "bad.json";
    CHECK_THROWS_AS(resolve_run_config(bad), ConfigError);
    write_text(dir.path() / "head.json", R"({"heads": {"sps": "attention"}})");
    bad.config = dir.path() / "head.json";
    CHECK_THROWS_AS(resolve_run_config(bad), ConfigError);
    write_text(dir.path() / "broken.json", "{not json");
    bad.config = dir.path() / "broken.json";
    CHECK_THROWS_AS(resolve_run_config(bad), ConfigError);

    // The JSON echo of a resolved config resolves back to itself.
    const RunConfig again = nlohmann::json(g).get<RunConfig>();
    CHECK(nlohmann::json(again) == nlohmann::json(g));
}

TEST_CASE("workspace falls back to the environment variable") {
    test::TempDir dir;
    ::setenv("SICU_WORKSPACE", dir.path().c_str(), 1);
    CHECK(resolve_run_config({}).workspace == dir.path());
    CliOverrides o;
    o.workspace = dir.path() / "x";
    CHECK(resolve_run_config(o).workspace == dir.path() / "x");
    ::unsetenv("SICU_WORKSPACE");
    CHECK(resolve_run_config({}).workspace == "sicu_workspace");
}

TEST_CASE("missing prerequisites name the producing command") {
    test::TempDir dir;
    const auto c = tiny_config(dir.path());
    std::ostringstream log;
    std::string msg;
    CHECK(guarded([&] { cmd_evaluate(c, log); }, &msg) == kExitModel);
    CHECK(msg.find("train") != std::string::npos);
    CHECK(guarded([&] { cmd_train(c, Stage::Sps, log); }, &msg) == kExitData);
    CHECK(msg.find("generate") != std::string::npos);
    CHECK(guarded([&] { cmd_labels(c, log); }, &msg) != kExitOk);
    CHECK(guarded([&] { cmd_report(dir.path() / "none" / "report.json", std::nullopt, log); }, &msg) == kExitData);
}

TEST_CASE("a held workspace lock refuses a second command") {
    test::TempDir dir;
    const auto c = tiny_config(dir.path());
    Workspace ws{c.workspace};
    ws.create_layout();
    WorkspaceLock held(ws);
    std::ostringstream log;
    CHECK(guarded([&] { cmd_generate(c, log); }) == kExitLocked);
}

TEST_CASE("exit codes are distinct per failure class") {
    auto code = [](auto e) { return exit_code_for(std::make_exception_ptr(e)); };
    CHECK(code(ConfigError("x")) == kExitConfig);
    CHECK(code(MissingModel("x")) == kExitModel);
    CHECK(code(ModelError("x")) == kExitModel);
    CHECK(code(MissingData("x")) == kExitData);
    CHECK(code(ChecksumError("x")) == kExitData);
    CHECK(code(WorkspaceLocked("x")) == kExitLocked);
    CHECK(code(std::runtime_error("x")) == kExitFailure);
}

TEST_CASE("full command sequence is repeatable byte for byte") {
    test::TempDir dir;
    std::ostringstream log;
    std::vector<std::filesystem::path> roots{dir.path() / "a", dir.path() / "b"};
    for (const auto& root : roots) {
        const auto c = tiny_config(root);
        REQUIRE(guarded([&] {
                    cmd_generate(c, log);
                    cmd_train(c, Stage::Sps, log);
                    cmd_train(c, Stage::Sir, log);
                    cmd_train(c, Stage::Unet, log);
                    cmd_labels(c, log);
                    cmd_train(c, Stage::Method, log);
                    cmd_evaluate(c, log);
                }) == kExitOk);
    }
    const auto reports = roots[0] / "reports";
    std::size_t compared = 0;
    for (const auto& e : std::filesystem::directory_iterator(reports)) {
        CHECK(slurp(e.path()) == slurp(roots[1] / "reports" / e.path().filename()));
        ++compared;
    }
    CHECK(compared >= 8);
    CHECK(slurp(roots[0] / "datasets" / "train.sicu") == slurp(roots[1] / "datasets" / "train.sicu"));
    CHECK(log.str().find("seed") != std::string::npos);

    // The resolved config is echoed into the report manifest.
    const auto manifest = nlohmann::json::parse(slurp(reports / "manifest.json"));
    CHECK(manifest.dump().find("\"profile\"") != std::string::npos);

    // Re-emitting from report.json reproduces the CSVs.
    const auto out = dir.path() / "re";
    REQUIRE(guarded([&] { cmd_report(reports / "report.json", out, log); }) == kExitOk);
    CHECK(slurp(out / "accuracy.csv") == slurp(reports / "accuracy.csv"));
    CHECK(slurp(out / "ber_full_sicu_net.csv") == slurp(reports / "ber_full_sicu_net.csv"));

    // A corrupted checkpoint is a model error.
    auto bytes = slurp(roots[0] / "checkpoints" / "sps.sicw");
    bytes[bytes.size() / 2] ^= 0x5a;
    write_text(roots[0] / "checkpoints" / "sps.sicw", bytes);
    CHECK(guarded([&] { cmd_evaluate(tiny_config(roots[0]), log); }) == kExitModel);
}

TEST_CASE("command-line binary: usage and missing-model exit codes") {
    test::TempDir dir;
    CHECK(run_cli("") == kExitUsage);
    CHECK(run_cli("train") == kExitUsage);
    CHECK(run_cli("train --stage bogus") == kExitUsage);
    CHECK(run_cli("--help") == kExitOk);
    CHECK(run_cli("--workspace " + dir.path().string() + " evaluate") == kExitModel);
    CHECK(run_cli("--workspace " + dir.path().string() + " train --stage method") == kExitData);
}
