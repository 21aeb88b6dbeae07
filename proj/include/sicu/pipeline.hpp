#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sicu/eval.hpp"
#include "sicu/models.hpp"
#include "sicu/scenario.hpp"
#include "sicu/sic.hpp"

namespace sicu {

/// Stage-4 methods in Stage-3 class order.
enum class Method : int { Sic = 0, Unet = 1 };

const char* method_name(Method m);  // "SIC" / "SICU-Net"
Method method_from_name(const std::string& name);

/// SIC knobs shared by every pipeline run; shapes and SPS come from the
/// scenario and the stage outputs.
struct SicDefaults {
    bool force_cancel = false;
    int max_passes = 1;
    std::size_t edge_exclusion_symbols = 0;
};

void to_json(nlohmann::json& j, const SicDefaults& s);
void from_json(const nlohmann::json& j, SicDefaults& s);

struct PipelineOptions {
    SicDefaults sic;
    /// Feed Stage 2's SIR estimate to Stage 3 as a fourth input channel.
    bool method_uses_sir = false;

    std::size_t method_input_channels() const { return method_uses_sir ? 4 : 3; }
};

void to_json(nlohmann::json& j, const PipelineOptions& o);
void from_json(const nlohmann::json& j, PipelineOptions& o);

/// Oracle injections. A set field replaces that stage's decision; the model
/// is still evaluated so the trace keeps its posteriors.
struct StageOverrides {
    std::optional<int> sps;
    std::optional<int> sir_db;
    std::optional<Method> method;
};

struct StageTrace {
    int predicted_sps = 0;
    std::vector<double> sps_posteriors;
    bool sps_overridden = false;

    int predicted_sir_db = 0;
    std::vector<double> sir_posteriors;
    bool sir_overridden = false;

    Method chosen_method = Method::Sic;
    std::vector<double> method_posteriors;
    bool method_overridden = false;
};

struct PipelineOutput {
    Bits soi_bits;
    StageTrace trace;
};

/// Stage-3 input side channels: SPS / 32, plus SIR / 10 dB when enabled.
std::vector<float> method_side_inputs(const PipelineOptions& options, int sps, int sir_db);

/// Stage-4 methods with explicit parameters.
Bits run_sic_method(const ScenarioConfig& scenario, const SicDefaults& sic, const IqFrame& mixture, int sps,
                    int sir_db);
Bits run_unet_method(const ScenarioConfig& scenario, const ModelBank& bank, const IqFrame& mixture, int sps);

class RecommenderPipeline {
public:
    /// Checks every model against the stage it serves (input channels,
    /// class count) and that the bank covers the scenario's SPS set.
    /// Throws ConfigError otherwise.
    RecommenderPipeline(ScenarioConfig scenario, std::shared_ptr<const nn::Layer<float>> sps_model,
                        std::shared_ptr<const nn::Layer<float>> sir_model,
                        std::shared_ptr<const nn::Layer<float>> method_model, std::shared_ptr<const ModelBank> bank,
                        PipelineOptions options = {});

    /// Manifest: {"scenario", "sps_model", "sir_model", "method_model",
    /// "unet_bank", "options"}; relative paths resolve against its directory.
    static RecommenderPipeline from_manifest(const std::filesystem::path& manifest);

    PipelineOutput run(const IqFrame& mixture, const StageOverrides& overrides = {}) const;

    Bits run_sic(const IqFrame& mixture, int sps, int sir_db) const {
        return run_sic_method(scenario_, options_.sic, mixture, sps, sir_db);
    }
    Bits run_unet(const IqFrame& mixture, int sps) const { return run_unet_method(scenario_, *bank_, mixture, sps); }
    Bits run_method(Method m, const IqFrame& mixture, int sps, int sir_db) const;

    const ScenarioConfig& scenario() const { return scenario_; }
    const PipelineOptions& options() const { return options_; }
    const ModelBank& bank() const { return *bank_; }

private:
    ScenarioConfig scenario_;
    std::shared_ptr<const nn::Layer<float>> sps_model_, sir_model_, method_model_;
    std::shared_ptr<const ModelBank> bank_;
    PipelineOptions options_;
};

void write_pipeline_manifest(const std::filesystem::path& manifest, const ScenarioConfig& scenario,
                             const std::filesystem::path& sps_model, const std::filesystem::path& sir_model,
                             const std::filesystem::path& method_model, const std::filesystem::path& bank_manifest,
                             const PipelineOptions& options);

// ---- Stage-3 ground truth --------------------------------------------------------

struct MethodOutcome {
    std::uint64_t example_id = 0;
    int sps = 0;
    int sir_bin_db = 0;
    BerCount sic;
    BerCount unet;
    Method label = Method::Unet;
    bool tie = false;
};

struct WinnerCounts {
    std::uint64_t sic = 0;
    std::uint64_t unet = 0;
    std::uint64_t ties = 0;  // counted as SICU-Net labels too
    bool operator==(const WinnerCounts&) const = default;
};

struct MethodGroundTruth {
    std::vector<MethodOutcome> outcomes;                     // dataset order
    std::map<std::pair<int, int>, WinnerCounts> winners;     // (sps, sir bin dB)

    std::vector<int> labels() const;
    std::string winner_table_csv() const;
};

void to_json(nlohmann::json& j, const MethodGroundTruth& g);
void from_json(const nlohmann::json& j, MethodGroundTruth& g);

/// Runs both Stage-4 methods with the true SPS and the true SIR bin center
/// on every example; the strictly lower bit-error count wins, ties go to
/// SICU-Net. Throws ConfigError if the bank lacks an SPS of the dataset.
MethodGroundTruth build_method_ground_truth(const Dataset& dataset, const ModelBank& bank, const SicDefaults& sic,
                                            unsigned threads = 0);

// ---- evaluation ------------------------------------------------------------------

struct EvalOptions {
    bool oracle_sps = false;
    bool oracle_sir = false;
    /// Stage-3 labels for the dataset. Required when oracle_method is set;
    /// otherwise built on the fly for the Stage-3 accuracy.
    const MethodGroundTruth* ground_truth = nullptr;
    bool oracle_method = false;
    unsigned threads = 0;
};

/// Per-example outcome of evaluate_pipeline.
struct EvalRecord {
    std::uint64_t example_id = 0;
    int sps_label = 0, sps_pred = 0;        // class indices
    int sir_label = 0, sir_pred = 0;
    int method_label = 0, method_pred = 0;
    BerCount full, sic_only, unet_only;
};

inline const char* kFullCurve = "Full SICU-Net";
inline const char* kSicCurve = "SIC-only";
inline const char* kUnetCurve = "UNet-only";

/// Full pipeline, SIC-only with the Stage-1/2 estimates and UNet-only with
/// the Stage-1 estimate on every example. Bins are (true SPS, nearest SIR
/// bin). Results do not depend on the thread count.
EvalReport evaluate_pipeline(const RecommenderPipeline& pipeline, const Dataset& dataset,
                             const EvalOptions& options = {}, std::vector<EvalRecord>* records = nullptr);

}  // namespace sicu
