#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace sicu {

struct BerCount {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;

    double rate() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
    BerCount& operator+=(const BerCount& o) {
        errors += o.errors;
        bits += o.bits;
        return *this;
    }
    bool operator==(const BerCount&) const = default;
};

/// Hamming distance over equal-length bit sequences. Throws InvalidInput on
/// a length mismatch.
BerCount ber(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> decided);

/// counts[label][pred]; class names label the CSV rows.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    ConfusionMatrix(std::size_t classes, std::vector<std::string> class_names = {});

    void add(int label, int pred, std::uint64_t n = 1);
    void merge(const ConfusionMatrix& other);

    std::size_t classes() const { return k_; }
    const std::vector<std::string>& class_names() const { return names_; }
    std::uint64_t count(std::size_t label, std::size_t pred) const { return counts_.at(label * k_ + pred); }
    std::uint64_t row_total(std::size_t label) const;
    std::uint64_t total() const;
    std::uint64_t correct() const;
    double accuracy() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_ = 0;
    std::vector<std::string> names_;
    std::vector<std::uint64_t> counts_;
};

/// Throws InvalidInput for unequal lengths or values outside [0, K).
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes,
                          std::vector<std::string> class_names = {});

/// Exact error/bit counts per (interferer sps, SIR bin in dB). Bins never
/// added are absent rather than zero.
struct BerCurve {
    std::string method;
    std::map<std::pair<int, int>, BerCount> bins;

    void add(int sps, int sir_bin_db, const BerCount& count) { bins[{sps, sir_bin_db}] += count; }
    void merge(const BerCurve& other);
    bool operator==(const BerCurve&) const = default;
};

struct StageAccuracy {
    std::string stage;
    std::uint64_t correct = 0;
    std::uint64_t total = 0;

    double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
    bool operator==(const StageAccuracy&) const = default;
};

struct EvalReport {
    std::vector<StageAccuracy> accuracies;
    std::map<std::string, ConfusionMatrix> confusions;  // keyed by stage
    std::vector<BerCurve> curves;                       // Full, SIC-only, UNet-only
    nlohmann::json config;                              // resolved config echo
    std::uint64_t seed = 0;

    const BerCurve* curve(const std::string& method) const;
    bool operator==(const EvalReport&) const = default;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

inline constexpr double kBerFloor = 1e-6;

/// Writes accuracy.csv, confusion_<stage>.csv, ber_<method>.csv,
/// ber_sps<N>.svg and report.json under out_dir. Identical reports give
/// identical bytes. Returns the written paths in a fixed order. With
/// write_json off, report.json is left alone.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir,
                                               bool write_json = true);

/// CSV text for one artifact (exposed for tests).
std::string accuracy_csv(const EvalReport& report);
std::string confusion_csv(const ConfusionMatrix& matrix);
std::string ber_csv(const BerCurve& curve);
std::string ber_svg(const EvalReport& report, int sps);

/// File-name slug of a method name ("SICU-Net" -> "sicu_net").
std::string method_slug(const std::string& method);

}  // namespace sicu
