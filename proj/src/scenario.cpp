#include "sicu/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include "sicu/binary_io.hpp"
#include "sicu/error.hpp"
#include "sicu/rng.hpp"

namespace sicu {

namespace {

constexpr char kDatasetMagic[4] = {'S', 'I', 'C', 'U'};

struct Component {
    IqFrame frame;
    Bits labeled_bits;
};

// Generates ceil(L/sps) + span symbols, shapes them and drops the leading
// taps - 1 samples so the frame is steady-state from its first sample.
// Symbol j is then centered at frame sample (j - span/2) * sps; symbols
// span .. floor((L-1)/sps) lie entirely inside the frame.
Component make_component(int frame_len, const PulseShape& shape, Rng& rng) {
    const int sps = shape.sps;
    const std::size_t nsym = static_cast<std::size_t>((frame_len + sps - 1) / sps + shape.span_symbols);
    Bits bits(2 * nsym);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
    const IqFrame shaped = pulse_shape(qpsk_modulate(bits), shape);

    Component c;
    c.frame.sps = sps;
    const auto crop = static_cast<std::ptrdiff_t>(shape.taps.size() - 1);
    c.frame.samples.assign(shaped.samples.begin() + crop, shaped.samples.begin() + crop + frame_len);

    const std::size_t first = static_cast<std::size_t>(shape.span_symbols);
    const std::size_t count = labeled_symbol_count(frame_len, sps, shape.span_symbols);
    c.labeled_bits.assign(bits.begin() + static_cast<std::ptrdiff_t>(2 * first),
                          bits.begin() + static_cast<std::ptrdiff_t>(2 * (first + count)));
    return c;
}

void pack_bits(std::string& out, const Bits& bits) {
    std::uint8_t byte = 0;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        byte = static_cast<std::uint8_t>(byte | ((bits[k] & 1u) << (7 - k % 8)));
        if (k % 8 == 7) {
            out.push_back(static_cast<char>(byte));
            byte = 0;
        }
    }
    if (bits.size() % 8 != 0) out.push_back(static_cast<char>(byte));
}

Bits unpack_bits(const std::string& packed, std::size_t count) {
    Bits bits(count);
    for (std::size_t k = 0; k < count; ++k) {
        bits[k] = static_cast<std::uint8_t>((static_cast<std::uint8_t>(packed[k / 8]) >> (7 - k % 8)) & 1u);
    }
    return bits;
}

template <typename T>
void append_le(std::string& out, T v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

std::string serialize_example(const LabeledExample& ex) {
    std::string out;
    out.reserve(32 + ex.soi_bits.size() / 8 + ex.interferer_bits.size() / 8 + ex.mixture.size() * 8);
    append_le<std::uint64_t>(out, ex.example_id);
    append_le<std::uint8_t>(out, ex.sps_class);
    append_le<std::uint8_t>(out, ex.sir_class);
    append_le<double>(out, ex.true_sir_db);
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(ex.soi_bits.size()));
    pack_bits(out, ex.soi_bits);
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(ex.interferer_bits.size()));
    pack_bits(out, ex.interferer_bits);
    for (const auto& s : ex.mixture) {
        append_le<float>(out, s.real());
        append_le<float>(out, s.imag());
    }
    return out;
}

const PulseShape& cached_shape(const ScenarioConfig& config, int sps) {
    // Shapes are cheap but generation calls this per example; keep a small
    // thread-local cache keyed on the design parameters.
    struct Entry {
        double roll_off;
        int span;
        int sps;
        PulseShape shape;
    };
    thread_local std::deque<Entry> cache;
    for (const Entry& e : cache) {
        if (e.roll_off == config.roll_off && e.span == config.span_symbols && e.sps == sps) return e.shape;
    }
    cache.push_back({config.roll_off, config.span_symbols, sps, design_rrc(config.roll_off, config.span_symbols, sps)});
    return cache.back().shape;
}

}  // namespace

std::vector<int> ScenarioConfig::default_sir_bins() {
    std::vector<int> bins;
    for (int b = -10; b <= 10; ++b) bins.push_back(b);
    return bins;
}

void ScenarioConfig::validate() const {
    if (soi_sps < 2) throw InvalidInput("scenario: soi_sps must be >= 2");
    if (frame_len < soi_sps * 8) throw InvalidInput("scenario: frame_len must be >= 8 * soi_sps");
    if (interferer_sps_set.empty()) throw InvalidInput("scenario: empty interferer sps set");
    for (int s : interferer_sps_set) {
        if (s < 2) throw InvalidInput("scenario: interferer sps must be >= 2");
    }
    if (sir_bins_db.empty()) throw InvalidInput("scenario: empty SIR bin list");
    for (std::size_t k = 1; k < sir_bins_db.size(); ++k) {
        if (sir_bins_db[k] <= sir_bins_db[k - 1]) throw InvalidInput("scenario: SIR bins must be sorted and unique");
    }
    if (examples_per_bin < 1) throw InvalidInput("scenario: examples_per_bin must be >= 1");
    if (offset_range_db.first != -offset_range_db.second || offset_range_db.second < 0.0) {
        throw InvalidInput("scenario: offset range must be symmetric about 0");
    }
    if (!(roll_off > 0.0 && roll_off <= 1.0)) throw InvalidInput("scenario: roll_off must lie in (0, 1]");
    if (span_symbols < 4 || span_symbols % 2 != 0) throw InvalidInput("scenario: span must be even and >= 4");
}

int ScenarioConfig::sps_class_of(int interferer_sps) const {
    const auto it = std::find(interferer_sps_set.begin(), interferer_sps_set.end(), interferer_sps);
    if (it == interferer_sps_set.end()) {
        throw InvalidInput("scenario: interferer sps " + std::to_string(interferer_sps) + " not in the configured set");
    }
    return static_cast<int>(it - interferer_sps_set.begin());
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{
        {"frame_len", c.frame_len},
        {"soi_sps", c.soi_sps},
        {"interferer_sps_set", c.interferer_sps_set},
        {"sir_bins_db", c.sir_bins_db},
        {"examples_per_bin", c.examples_per_bin},
        {"fractional_offsets", c.fractional_offsets},
        {"offset_range_db", {c.offset_range_db.first, c.offset_range_db.second}},
        {"snr_db", c.snr_db ? nlohmann::json(*c.snr_db) : nlohmann::json(nullptr)},
        {"seed", c.seed},
        {"roll_off", c.roll_off},
        {"span_symbols", c.span_symbols},
    };
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    ScenarioConfig d;
    c.frame_len = j.value("frame_len", d.frame_len);
    c.soi_sps = j.value("soi_sps", d.soi_sps);
    c.interferer_sps_set = j.value("interferer_sps_set", d.interferer_sps_set);
    c.sir_bins_db = j.value("sir_bins_db", d.sir_bins_db);
    c.examples_per_bin = j.value("examples_per_bin", d.examples_per_bin);
    c.fractional_offsets = j.value("fractional_offsets", d.fractional_offsets);
    if (j.contains("offset_range_db")) {
        const auto& r = j.at("offset_range_db");
        c.offset_range_db = {r.at(0).get<double>(), r.at(1).get<double>()};
    } else {
        c.offset_range_db = d.offset_range_db;
    }
    if (j.contains("snr_db") && !j.at("snr_db").is_null()) {
        c.snr_db = j.at("snr_db").get<double>();
    } else {
        c.snr_db.reset();
    }
    c.seed = j.value("seed", d.seed);
    c.roll_off = j.value("roll_off", d.roll_off);
    c.span_symbols = j.value("span_symbols", d.span_symbols);
}

int nearest_sir_bin(double sir_db, const std::vector<int>& bins) {
    if (bins.empty()) throw InvalidInput("nearest_sir_bin: empty bin list");
    double r = std::round(sir_db);  // half away from zero
    r = std::clamp(r, static_cast<double>(bins.front()), static_cast<double>(bins.back()));
    std::size_t best = 0;
    double best_dist = std::abs(r - bins[0]);
    for (std::size_t k = 1; k < bins.size(); ++k) {
        const double d = std::abs(r - bins[k]);
        if (d < best_dist) {
            best = k;
            best_dist = d;
        }
    }
    return static_cast<int>(best);
}

std::size_t labeled_symbol_count(int frame_len, int sps, int span_symbols) {
    const long last = (frame_len - 1) / sps;
    const long count = last - span_symbols + 1;
    return count > 0 ? static_cast<std::size_t>(count) : 0;
}

IqFrame LabeledExample::frame(int sps) const {
    IqFrame f;
    f.sps = sps;
    f.samples.reserve(mixture.size());
    for (const auto& s : mixture) f.samples.emplace_back(s.real(), s.imag());
    return f;
}

MixtureParts generate_parts(const ScenarioConfig& config, double sir_db, int interferer_sps, Rng& rng) {
    config.sps_class_of(interferer_sps);  // validates membership
    if (!std::isfinite(sir_db)) throw InvalidInput("generate_parts: non-finite SIR");

    Component soi = make_component(config.frame_len, cached_shape(config, config.soi_sps), rng);
    Component interferer = make_component(config.frame_len, cached_shape(config, interferer_sps), rng);

    const double soi_scale = 1.0 / std::sqrt(measure_power(soi.frame));
    for (Sample& s : soi.frame.samples) s *= soi_scale;
    const double g = interference_gain(measure_power(soi.frame), measure_power(interferer.frame), sir_db);
    for (Sample& s : interferer.frame.samples) s *= g;

    MixtureParts parts;
    parts.soi = std::move(soi.frame);
    parts.interferer = std::move(interferer.frame);
    parts.soi_bits = std::move(soi.labeled_bits);
    parts.interferer_bits = std::move(interferer.labeled_bits);
    parts.sir_db = sir_db;
    return parts;
}

LabeledExample generate_example(const ScenarioConfig& config, double sir_db, int interferer_sps, Rng& rng) {
    MixtureParts parts = generate_parts(config, sir_db, interferer_sps, rng);
    IqFrame mixture = parts.soi;
    for (std::size_t n = 0; n < mixture.size(); ++n) mixture.samples[n] += parts.interferer.samples[n];
    if (config.snr_db) mixture = add_awgn(mixture, *config.snr_db, rng);

    LabeledExample ex;
    ex.sps_class = static_cast<std::uint8_t>(config.sps_class_of(interferer_sps));
    ex.sir_class = static_cast<std::uint8_t>(nearest_sir_bin(sir_db, config.sir_bins_db));
    ex.true_sir_db = sir_db;
    ex.soi_bits = std::move(parts.soi_bits);
    ex.interferer_bits = std::move(parts.interferer_bits);
    ex.mixture.reserve(mixture.size());
    for (const Sample& s : mixture.samples) {
        ex.mixture.emplace_back(static_cast<float>(s.real()), static_cast<float>(s.imag()));
    }
    return ex;
}

std::pair<std::size_t, std::size_t> cell_of(const ScenarioConfig& config, std::uint64_t example_id) {
    const auto per = static_cast<std::uint64_t>(config.examples_per_bin);
    const std::uint64_t cell = example_id / per;
    const std::size_t nsps = config.interferer_sps_set.size();
    if (cell >= config.cell_count()) throw InvalidInput("cell_of: example id out of range");
    return {static_cast<std::size_t>(cell / nsps), static_cast<std::size_t>(cell % nsps)};
}

namespace {

// Shared draw order: offset (fractional regime only), then generate_parts.
double draw_sir(const ScenarioConfig& config, std::uint64_t example_id, Rng& rng, int& interferer_sps) {
    const auto [bin, sps_idx] = cell_of(config, example_id);
    interferer_sps = config.interferer_sps_set[sps_idx];
    double sir = config.sir_bins_db[bin];
    if (config.fractional_offsets) sir += rng.uniform(config.offset_range_db.first, config.offset_range_db.second);
    return sir;
}

}  // namespace

LabeledExample make_example(const ScenarioConfig& config, std::uint64_t example_id) {
    Rng rng(derive_seed(config.seed, example_id));
    int sps = 0;
    const double sir = draw_sir(config, example_id, rng, sps);
    LabeledExample ex = generate_example(config, sir, sps, rng);
    ex.example_id = example_id;
    return ex;
}

MixtureParts regenerate_parts(const ScenarioConfig& config, std::uint64_t example_id) {
    Rng rng(derive_seed(config.seed, example_id));
    int sps = 0;
    const double sir = draw_sir(config, example_id, rng, sps);
    return generate_parts(config, sir, sps, rng);
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
    j = nlohmann::json{
        {"config", m.config},
        {"example_count", m.example_count},
        {"per_bin_counts", m.per_bin_counts},
        {"format_version", m.format_version},
        {"content_checksum", m.content_checksum},
        {"payload_bytes", m.payload_bytes},
    };
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
    m.config = j.at("config").get<ScenarioConfig>();
    m.example_count = j.at("example_count").get<std::uint64_t>();
    m.per_bin_counts = j.at("per_bin_counts").get<std::vector<std::vector<std::uint64_t>>>();
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.content_checksum = j.at("content_checksum").get<std::string>();
    m.payload_bytes = j.at("payload_bytes").get<std::uint64_t>();
}

Dataset generate_dataset(const ScenarioConfig& config, unsigned threads) {
    config.validate();
    const std::size_t n = config.example_count();
    Dataset ds;
    ds.examples.resize(n);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t id = 0; id < n; ++id) ds.examples[id] = make_example(config, id);
    } else {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                for (std::size_t id = w; id < n; id += threads) ds.examples[id] = make_example(config, id);
            });
        }
    }

    DatasetManifest& m = ds.manifest;
    m.config = config;
    m.example_count = n;
    m.per_bin_counts.assign(config.sir_bins_db.size(),
                            std::vector<std::uint64_t>(config.interferer_sps_set.size(), 0));
    Sha256 payload_hash;
    std::uint64_t payload_bytes = 0;
    for (const LabeledExample& ex : ds.examples) {
        ++m.per_bin_counts[ex.sir_class][ex.sps_class];
        const std::string rec = serialize_example(ex);
        payload_hash.update(rec);
        payload_bytes += rec.size();
    }
    m.content_checksum = to_hex(payload_hash.finish());
    m.payload_bytes = payload_bytes;
    return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_dataset: cannot open " + path.string() + " for writing");

    // Manifest checksum and size are recomputed from the examples so a
    // caller-edited dataset cannot produce an inconsistent file.
    DatasetManifest manifest = dataset.manifest;
    manifest.example_count = dataset.examples.size();
    manifest.format_version = kDatasetFormatVersion;
    Sha256 payload_hash;
    std::uint64_t payload_bytes = 0;
    for (const LabeledExample& ex : dataset.examples) {
        const std::string rec = serialize_example(ex);
        payload_hash.update(rec);
        payload_bytes += rec.size();
    }
    manifest.content_checksum = to_hex(payload_hash.finish());
    manifest.payload_bytes = payload_bytes;

    HashingWriter w(out);
    w.bytes(kDatasetMagic, 4);
    w.value<std::uint32_t>(kDatasetFormatVersion);
    const std::string manifest_json = nlohmann::json(manifest).dump();
    w.value<std::uint32_t>(static_cast<std::uint32_t>(manifest_json.size()));
    w.bytes(manifest_json);
    for (const LabeledExample& ex : dataset.examples) w.bytes(serialize_example(ex));
    w.finish_with_digest();
    out.flush();
    if (!out) throw IoError("write_dataset: write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_dataset: cannot open " + path.string());
    const std::string what = "dataset " + path.string();
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    ByteReader r(in, what);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kDatasetMagic)) throw FormatError(what + ": bad magic");
    const auto version = r.value<std::uint32_t>();
    if (version != kDatasetFormatVersion) {
        throw VersionError(what + ": format version " + std::to_string(version) + " (supported: " +
                           std::to_string(kDatasetFormatVersion) + ")");
    }
    const auto manifest_len = r.value<std::uint32_t>();
    if (12ull + manifest_len > file_size) throw TruncatedError(what + ": file truncated");
    const std::string manifest_json = r.string(manifest_len);

    Dataset ds;
    try {
        ds.manifest = nlohmann::json::parse(manifest_json).get<DatasetManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw ChecksumError(what + ": unreadable manifest (" + e.what() + ")");
    }
    const std::uint64_t expected_size = 12ull + manifest_len + ds.manifest.payload_bytes + 32;
    if (file_size < expected_size) throw TruncatedError(what + ": file truncated");
    if (file_size > expected_size) throw FormatError(what + ": trailing bytes after checksum");
    verify_trailing_digest(in, file_size, what);

    in.seekg(static_cast<std::streamoff>(12 + manifest_len));
    const ScenarioConfig& config = ds.manifest.config;
    Sha256 payload_hash;
    ds.examples.reserve(ds.manifest.example_count);
    for (std::uint64_t k = 0; k < ds.manifest.example_count; ++k) {
        LabeledExample ex;
        ex.example_id = r.value<std::uint64_t>();
        ex.sps_class = r.value<std::uint8_t>();
        ex.sir_class = r.value<std::uint8_t>();
        ex.true_sir_db = r.value<double>();
        const auto soi_len = r.value<std::uint32_t>();
        ex.soi_bits = unpack_bits(r.string((soi_len + 7) / 8), soi_len);
        const auto int_len = r.value<std::uint32_t>();
        ex.interferer_bits = unpack_bits(r.string((int_len + 7) / 8), int_len);
        ex.mixture.resize(static_cast<std::size_t>(config.frame_len));
        for (auto& s : ex.mixture) {
            const float i = r.value<float>();
            const float q = r.value<float>();
            s = {i, q};
        }
        payload_hash.update(serialize_example(ex));
        ds.examples.push_back(std::move(ex));
    }
    if (to_hex(payload_hash.finish()) != ds.manifest.content_checksum) {
        throw ChecksumError(what + ": payload checksum does not match manifest");
    }
    return ds;
}

}  // namespace sicu
