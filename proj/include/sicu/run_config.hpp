#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "sicu/nn/layers.hpp"
#include "sicu/nn/train.hpp"
#include "sicu/pipeline.hpp"
#include "sicu/scenario.hpp"

namespace sicu {

enum class Profile { IntegerSir, FractionalSir };

const char* profile_name(Profile p);
/// Throws ConfigError for anything but integer_sir / fractional_sir.
Profile profile_from_name(const std::string& name);

enum class Stage { Sps, Sir, Unet, Method };

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& name);

struct StageTraining {
    nn::TrainConfig sps;
    nn::TrainConfig sir;
    nn::TrainConfig unet;
    nn::TrainConfig method;

    nn::TrainConfig& operator[](Stage s);
    const nn::TrainConfig& operator[](Stage s) const;
};

/// Classifier head per classification stage.
struct StageHeads {
    ClassifierHead sps = ClassifierHead::Flatten;
    ClassifierHead sir = ClassifierHead::GlobalAverage;
    ClassifierHead method = ClassifierHead::GlobalAverage;

    ClassifierHead operator[](Stage s) const;  // throws InvalidInput for Stage::Unet
};

struct RunConfig {
    Profile profile = Profile::IntegerSir;
    std::uint64_t seed = 1;
    ScenarioConfig scenario;          // training data; seed derived from `seed`
    int test_examples_per_bin = 20;   // held-out data, same scenario otherwise
    StageTraining training;           // seeds derived from `seed`
    StageHeads heads;
    nn::UNetConfig unet;
    PipelineOptions pipeline;
    unsigned threads = 0;             // 0 = hardware concurrency
    std::filesystem::path workspace;

    ScenarioConfig test_scenario() const;
    /// Throws ConfigError on an unusable combination.
    void validate() const;
};

/// Everything but the workspace path, which is a location rather than part
/// of the study.
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Built-in desk-scale defaults for a profile.
RunConfig profile_defaults(Profile profile);

/// Command-line values; unset fields defer to the config file, then to the
/// profile defaults.
struct CliOverrides {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> profile;
    std::optional<std::filesystem::path> workspace;
    std::optional<int> epochs;
    std::optional<int> batch;
    std::optional<double> lr;
    std::optional<unsigned> threads;
};

/// flags > config file > profile defaults. `stage` selects which training
/// block --epochs/--batch/--lr apply to (all four when unset). Workspace
/// falls back to $SICU_WORKSPACE, then ./sicu_workspace.
RunConfig resolve_run_config(const CliOverrides& flags, std::optional<Stage> stage = std::nullopt);

/// Fixed layout under the workspace root.
struct Workspace {
    std::filesystem::path root;

    std::filesystem::path datasets() const { return root / "datasets"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path reports() const { return root / "reports"; }

    std::filesystem::path train_dataset() const { return datasets() / "train.sicu"; }
    std::filesystem::path test_dataset() const { return datasets() / "test.sicu"; }
    std::filesystem::path method_labels() const { return datasets() / "method_labels.json"; }
    std::filesystem::path winner_table() const { return datasets() / "method_winners.csv"; }
    std::filesystem::path stage_checkpoint(Stage s) const;  // sps / sir / method
    std::filesystem::path unet_checkpoint(int sps) const;
    std::filesystem::path bank_manifest() const { return checkpoints() / "unet_bank.json"; }
    std::filesystem::path pipeline_manifest() const { return checkpoints() / "pipeline.json"; }
    std::filesystem::path lock_file() const { return root / ".lock"; }

    void create_layout() const;
};

/// Exclusive lock on a workspace, released on destruction. Throws
/// WorkspaceLocked if another command holds it.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const Workspace& ws);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

class WorkspaceLocked : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sicu
