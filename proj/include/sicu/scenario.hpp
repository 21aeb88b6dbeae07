#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sicu/dsp.hpp"

namespace sicu {

class Rng;

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct ScenarioConfig {
    int frame_len = 8073;
    int soi_sps = 16;
    std::vector<int> interferer_sps_set{32, 16, 4};  // class index order
    std::vector<int> sir_bins_db = default_sir_bins();
    int examples_per_bin = 100;                       // per (SIR bin, interferer sps) cell
    bool fractional_offsets = false;
    std::pair<double, double> offset_range_db{-0.5, 0.5};
    std::optional<double> snr_db;                     // unset: noiseless
    std::uint64_t seed = 1;
    double roll_off = kDefaultRollOff;
    int span_symbols = kDefaultSpanSymbols;

    static std::vector<int> default_sir_bins();

    /// Throws InvalidInput on any broken invariant.
    void validate() const;

    int sps_class_of(int interferer_sps) const;
    std::size_t cell_count() const { return sir_bins_db.size() * interferer_sps_set.size(); }
    std::size_t example_count() const { return cell_count() * static_cast<std::size_t>(examples_per_bin); }
};

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

/// Round half away from zero, clamp to [bins.front(), bins.back()], return
/// the index of that bin (nearest bin when the grid has gaps).
int nearest_sir_bin(double sir_db, const std::vector<int>& bins);
inline int nearest_sir_bin(double sir_db) { return nearest_sir_bin(sir_db, ScenarioConfig::default_sir_bins()); }

/// Number of symbols whose whole pulse lies inside a cropped frame; these are
/// the only symbols carried as bit labels.
std::size_t labeled_symbol_count(int frame_len, int sps, int span_symbols);

struct LabeledExample {
    std::uint64_t example_id = 0;
    std::uint8_t sps_class = 0;
    std::uint8_t sir_class = 0;
    double true_sir_db = 0.0;
    Bits soi_bits;
    Bits interferer_bits;
    /// Mixture as stored on disk (f32 I/Q). Generation rounds to f32 so the
    /// in-memory and on-disk forms agree bit for bit.
    std::vector<std::complex<float>> mixture;

    IqFrame frame(int sps) const;
    bool operator==(const LabeledExample&) const = default;
};

/// The components of one example before summation.
struct MixtureParts {
    IqFrame soi;          // unit average power
    IqFrame interferer;   // already scaled to the requested SIR
    Bits soi_bits;
    Bits interferer_bits;
    double sir_db = 0.0;
};

/// Draws SOI bits, then interferer bits, shapes, crops and scales both.
MixtureParts generate_parts(const ScenarioConfig& config, double sir_db, int interferer_sps, Rng& rng);

/// generate_parts + sum + optional AWGN + labels. example_id is left at 0.
LabeledExample generate_example(const ScenarioConfig& config, double sir_db, int interferer_sps, Rng& rng);

/// (SIR bin index, sps index) cell for a dataset example id.
std::pair<std::size_t, std::size_t> cell_of(const ScenarioConfig& config, std::uint64_t example_id);

/// Deterministic construction of dataset example `example_id` from its
/// derived seed; the order of calls is irrelevant.
LabeledExample make_example(const ScenarioConfig& config, std::uint64_t example_id);

/// Parts (including the clean SOI waveform) of dataset example `example_id`.
MixtureParts regenerate_parts(const ScenarioConfig& config, std::uint64_t example_id);

struct DatasetManifest {
    ScenarioConfig config;
    std::uint64_t example_count = 0;
    std::vector<std::vector<std::uint64_t>> per_bin_counts;  // [sir class][sps class]
    std::uint32_t format_version = kDatasetFormatVersion;
    std::string content_checksum;                           // sha256 hex of the payload
    std::uint64_t payload_bytes = 0;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

struct Dataset {
    DatasetManifest manifest;
    std::vector<LabeledExample> examples;  // example_id order
};

/// examples_per_bin examples for every (bin, sps) cell, built across
/// `threads` workers (0 = hardware concurrency). Output is independent of
/// the worker count.
Dataset generate_dataset(const ScenarioConfig& config, unsigned threads = 0);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Throws VersionError, TruncatedError, ChecksumError or FormatError.
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace sicu
