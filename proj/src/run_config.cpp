#include "sicu/run_config.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "sicu/error.hpp"
#include "sicu/rng.hpp"

namespace sicu {

using nlohmann::json;

const char* profile_name(Profile p) { return p == Profile::IntegerSir ? "integer_sir" : "fractional_sir"; }

Profile profile_from_name(const std::string& name) {
    if (name == "integer_sir") return Profile::IntegerSir;
    if (name == "fractional_sir") return Profile::FractionalSir;
    throw ConfigError("unknown profile '" + name + "' (expected integer_sir or fractional_sir)");
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Sps: return "sps";
        case Stage::Sir: return "sir";
        case Stage::Unet: return "unet";
        case Stage::Method: return "method";
    }
    return "?";
}

Stage stage_from_name(const std::string& name) {
    for (Stage s : {Stage::Sps, Stage::Sir, Stage::Unet, Stage::Method}) {
        if (name == stage_name(s)) return s;
    }
    throw ConfigError("unknown stage '" + name + "' (expected sps, sir, unet or method)");
}

nn::TrainConfig& StageTraining::operator[](Stage s) {
    switch (s) {
        case Stage::Sps: return sps;
        case Stage::Sir: return sir;
        case Stage::Unet: return unet;
        case Stage::Method: return method;
    }
    return sps;
}

const nn::TrainConfig& StageTraining::operator[](Stage s) const {
    return const_cast<StageTraining&>(*this)[s];
}

ScenarioConfig RunConfig::test_scenario() const {
    ScenarioConfig t = scenario;
    t.examples_per_bin = test_examples_per_bin;
    t.seed = derive_seed(seed, "test-data");
    return t;
}

ClassifierHead StageHeads::operator[](Stage s) const {
    switch (s) {
        case Stage::Sps: return sps;
        case Stage::Sir: return sir;
        case Stage::Method: return method;
        case Stage::Unet: break;
    }
    throw InvalidInput("the U-Net stage has no classifier head");
}

void RunConfig::validate() const {
    try {
        scenario.validate();
        test_scenario().validate();
        for (Stage s : {Stage::Sps, Stage::Sir, Stage::Unet, Stage::Method}) training[s].validate();
        unet.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("invalid run config: ") + e.what());
    }
    if ((profile == Profile::FractionalSir) != scenario.fractional_offsets) {
        throw ConfigError(std::string("profile ") + profile_name(profile) + " requires scenario.fractional_offsets = " +
                          (profile == Profile::FractionalSir ? "true" : "false"));
    }
    if (scenario.frame_len != static_cast<int>(kClassifierInputLength)) {
        throw ConfigError("scenario.frame_len must be " + std::to_string(kClassifierInputLength) +
                          " (classifier input length)");
    }
}

void to_json(json& j, const RunConfig& c) {
    j = {{"profile", profile_name(c.profile)},
         {"seed", c.seed},
         {"scenario", c.scenario},
         {"test_examples_per_bin", c.test_examples_per_bin},
         {"training",
          {{"sps", c.training.sps}, {"sir", c.training.sir}, {"unet", c.training.unet}, {"method", c.training.method}}},
         {"heads", {{"sps", head_name(c.heads.sps)}, {"sir", head_name(c.heads.sir)}, {"method", head_name(c.heads.method)}}},
         {"unet", c.unet},
         {"pipeline", c.pipeline},
         {"threads", c.threads}};
}

void from_json(const json& j, RunConfig& c) {
    RunConfig d;
    d.profile = profile_from_name(j.value("profile", std::string(profile_name(d.profile))));
    d.seed = j.value("seed", d.seed);
    if (j.contains("scenario")) d.scenario = j.at("scenario").get<ScenarioConfig>();
    d.test_examples_per_bin = j.value("test_examples_per_bin", d.test_examples_per_bin);
    if (j.contains("training")) {
        const auto& t = j.at("training");
        for (Stage s : {Stage::Sps, Stage::Sir, Stage::Unet, Stage::Method}) {
            if (t.contains(stage_name(s))) d.training[s] = t.at(stage_name(s)).get<nn::TrainConfig>();
        }
    }
    if (j.contains("heads")) {
        const auto& h = j.at("heads");
        auto pick = [&h](const char* key, ClassifierHead fallback) {
            return h.contains(key) ? head_from_name(h.at(key).get<std::string>()) : fallback;
        };
        d.heads = {pick("sps", d.heads.sps), pick("sir", d.heads.sir), pick("method", d.heads.method)};
    }
    if (j.contains("unet")) d.unet = j.at("unet").get<nn::UNetConfig>();
    if (j.contains("pipeline")) d.pipeline = j.at("pipeline").get<PipelineOptions>();
    d.threads = j.value("threads", d.threads);
    d.workspace = c.workspace;
    c = std::move(d);
}

RunConfig profile_defaults(Profile profile) {
    RunConfig c;
    c.profile = profile;
    c.scenario.fractional_offsets = profile == Profile::FractionalSir;
    // 34 per (bin, sps) cell gives 102 examples per SIR class and 714 per
    // SPS class.
    c.scenario.examples_per_bin = 34;
    c.test_examples_per_bin = 20;
    for (Stage s : {Stage::Sps, Stage::Sir, Stage::Method}) {
        c.training[s].epochs = 10;
        c.training[s].batch_size = 16;
        c.training[s].lr = 1e-3;
    }
    // The SIR head keeps improving well past ten epochs.
    c.training.sir.epochs = 20;
    c.training.sir.lr = 2e-3;
    c.training.unet.epochs = 8;
    c.training.unet.batch_size = 8;
    c.training.unet.lr = 2e-3;
    return c;
}

namespace {

void apply_derived_seeds(RunConfig& c) {
    c.scenario.seed = derive_seed(c.seed, "train-data");
    for (Stage s : {Stage::Sps, Stage::Sir, Stage::Unet, Stage::Method}) {
        c.training[s].seed = derive_seed(c.seed, std::string("train-") + stage_name(s));
    }
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file " + path.string() + " not found");
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
}

}  // namespace

RunConfig resolve_run_config(const CliOverrides& flags, std::optional<Stage> stage) {
    json file = json::object();
    if (flags.config) file = read_config_file(*flags.config);

    std::string profile = flags.profile.value_or(file.value("profile", std::string("integer_sir")));
    RunConfig c;
    try {
        json merged = profile_defaults(profile_from_name(profile));
        merged.merge_patch(file);
        merged["profile"] = profile;
        // A profile chosen on the command line also selects its data regime.
        if (flags.profile) merged["scenario"]["fractional_offsets"] = profile == "fractional_sir";
        c = merged.get<RunConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    if (flags.seed) c.seed = *flags.seed;
    if (flags.threads) c.threads = *flags.threads;
    for (Stage s : {Stage::Sps, Stage::Sir, Stage::Unet, Stage::Method}) {
        if (stage && *stage != s) continue;
        if (flags.epochs) c.training[s].epochs = *flags.epochs;
        if (flags.batch) c.training[s].batch_size = *flags.batch;
        if (flags.lr) c.training[s].lr = *flags.lr;
    }
    apply_derived_seeds(c);

    if (flags.workspace) {
        c.workspace = *flags.workspace;
    } else if (const char* env = std::getenv("SICU_WORKSPACE"); env && *env) {
        c.workspace = env;
    } else {
        c.workspace = "sicu_workspace";
    }
    c.validate();
    return c;
}

// ---- workspace -----------------------------------------------------------------------

std::filesystem::path Workspace::stage_checkpoint(Stage s) const {
    if (s == Stage::Unet) throw InvalidInput("U-Net checkpoints are per SPS; use unet_checkpoint()");
    return checkpoints() / (std::string(stage_name(s)) + ".sicw");
}

std::filesystem::path Workspace::unet_checkpoint(int sps) const {
    return checkpoints() / ("unet_sps" + std::to_string(sps) + ".sicw");
}

void Workspace::create_layout() const {
    for (const auto& dir : {datasets(), checkpoints(), reports()}) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

WorkspaceLock::WorkspaceLock(const Workspace& ws) : path_(ws.lock_file()) {
    std::error_code ec;
    std::filesystem::create_directories(ws.root, ec);
    if (ec) throw IoError("cannot create workspace " + ws.root.string() + ": " + ec.message());
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path_.string() + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw WorkspaceLocked("workspace " + ws.root.string() + " is in use by another sicu command");
    }
}

WorkspaceLock::~WorkspaceLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace sicu
