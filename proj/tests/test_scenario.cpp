#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "sicu/error.hpp"
#include "sicu/rng.hpp"
#include "sicu/scenario.hpp"
#include "test_util.hpp"

using namespace sicu;

namespace {

ScenarioConfig small_config() {
    ScenarioConfig c;
    c.frame_len = 512;
    c.sir_bins_db = {-2, 0, 3};
    c.examples_per_bin = 2;
    c.seed = 5;
    return c;
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("nearest SIR bin rounds half away from zero and clamps") {
    const auto bins = ScenarioConfig::default_sir_bins();
    REQUIRE(bins.size() == 21);
    CHECK(bins[static_cast<std::size_t>(nearest_sir_bin(3.4))] == 3);
    CHECK(bins[static_cast<std::size_t>(nearest_sir_bin(-10.5))] == -10);
    CHECK(bins[static_cast<std::size_t>(nearest_sir_bin(0.0))] == 0);
    CHECK(bins[static_cast<std::size_t>(nearest_sir_bin(2.5))] == 3);
    CHECK(bins[static_cast<std::size_t>(nearest_sir_bin(-2.5))] == -3);
    CHECK(bins[static_cast<std::size_t>(nearest_sir_bin(17.0))] == 10);
}

TEST_CASE("labeled symbol count for the default frame") {
    // 8073 samples at 16 sps: centers up to floor(8072/16) = 504, minus the
    // 8-symbol transient gives 497 labeled symbols.
    CHECK(labeled_symbol_count(8073, 16, 8) == 497);
    CHECK(labeled_symbol_count(8073, 4, 8) == 2011);
    CHECK(labeled_symbol_count(8073, 32, 8) == 245);
}

TEST_CASE("generated components meet the requested SIR and label conventions") {
    ScenarioConfig c;
    Rng rng(3);
    for (int sps : {32, 16, 4}) {
        for (double sir : {-10.0, -3.5, 0.0, 7.25}) {
            const auto parts = generate_parts(c, sir, sps, rng);
            REQUIRE(parts.soi.size() == 8073);
            REQUIRE(parts.interferer.size() == 8073);
            const double ratio = measure_power(parts.soi) / measure_power(parts.interferer);
            CHECK(std::abs(ratio / db_to_power_ratio(sir) - 1.0) < 1e-6);
            CHECK(measure_power(parts.soi) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(parts.soi_bits.size() == 2 * labeled_symbol_count(8073, 16, 8));
        }
    }
    CHECK(c.sps_class_of(4) == 2);
    CHECK(c.sps_class_of(32) == 0);
    CHECK_THROWS_AS(c.sps_class_of(8), InvalidInput);
    CHECK_THROWS_AS(generate_parts(c, 0.0, 8, rng), InvalidInput);
}

TEST_CASE("labeled SOI bits are recoverable from the clean SOI waveform") {
    ScenarioConfig c;
    const auto parts = regenerate_parts(c, 17);
    const auto shape = design_rrc(c.roll_off, c.span_symbols, c.soi_sps);
    const auto soft = matched_filter_downsample(parts.soi, shape, parts.soi_bits.size() / 2);
    CHECK(qpsk_hard_decision(soft) == parts.soi_bits);
}

TEST_CASE("examples are deterministic per id and match their regenerated parts") {
    const auto c = small_config();
    const auto a = make_example(c, 3);
    const auto b = make_example(c, 3);
    CHECK(a == b);
    const auto parts = regenerate_parts(c, 3);
    REQUIRE(a.mixture.size() == parts.soi.size());
    for (std::size_t n = 0; n < a.mixture.size(); ++n) {
        const Sample s = parts.soi.samples[n] + parts.interferer.samples[n];
        REQUIRE(a.mixture[n] == std::complex<float>(static_cast<float>(s.real()), static_cast<float>(s.imag())));
    }
    CHECK(a.soi_bits == parts.soi_bits);
}

TEST_CASE("datasets: bin balance, labels and independence from worker count") {
    auto c = small_config();
    const auto d1 = generate_dataset(c, 1);
    const auto d3 = generate_dataset(c, 3);
    CHECK(d1.examples == d3.examples);
    REQUIRE(d1.examples.size() == c.example_count());
    std::vector<std::vector<int>> counts(3, std::vector<int>(3, 0));
    for (const auto& ex : d1.examples) {
        ++counts[ex.sir_class][ex.sps_class];
        CHECK(ex.sir_class == nearest_sir_bin(ex.true_sir_db, c.sir_bins_db));
        CHECK(ex.true_sir_db == std::round(ex.true_sir_db));
        CHECK(ex.mixture.size() == static_cast<std::size_t>(c.frame_len));
    }
    for (const auto& row : counts) {
        for (int n : row) CHECK(n == c.examples_per_bin);
    }
    for (std::size_t i = 0; i < d1.manifest.per_bin_counts.size(); ++i) {
        for (auto n : d1.manifest.per_bin_counts[i]) CHECK(n == static_cast<std::uint64_t>(c.examples_per_bin));
    }
}

TEST_CASE("default test scale is 6300 examples") {
    ScenarioConfig c;
    CHECK(c.example_count() == 6300);
}

TEST_CASE("fractional offsets are uniform on [-0.5, 0.5] (Kolmogorov-Smirnov)") {
    ScenarioConfig c;
    c.frame_len = 128;
    c.fractional_offsets = true;
    c.examples_per_bin = 160;  // 63 cells -> 10080 draws
    const auto ds = generate_dataset(c);
    std::vector<double> u;
    for (const auto& ex : ds.examples) {
        const double bin = c.sir_bins_db[ex.sir_class];
        const double off = ex.true_sir_db - std::round(ex.true_sir_db);
        REQUIRE(std::abs(ex.true_sir_db - bin) <= 0.5);
        u.push_back(off);
    }
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double f = u[i] + 0.5;
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("dataset files round-trip and reject corruption") {
    test::TempDir dir;
    auto c = small_config();
    c.examples_per_bin = 1;
    c.sir_bins_db = {-1, 0, 1, 2, 3};
    c.interferer_sps_set = {16, 4};
    const auto ds = generate_dataset(c);
    REQUIRE(ds.examples.size() == 10);
    const auto path = dir.path() / "d.sicu";
    write_dataset(ds, path);
    const auto back = read_dataset(path);
    CHECK(back.examples == ds.examples);
    CHECK(nlohmann::json(back.manifest) == nlohmann::json(ds.manifest));

    const auto bytes = slurp(path);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SICU");

    auto flipped = bytes;
    flipped[bytes.size() - 100] ^= 0x01;
    spit(dir.path() / "flip.sicu", flipped);
    CHECK_THROWS_AS(read_dataset(dir.path() / "flip.sicu"), ChecksumError);

    auto newer = bytes;
    newer[4] = 2;
    spit(dir.path() / "new.sicu", newer);
    CHECK_THROWS_AS(read_dataset(dir.path() / "new.sicu"), VersionError);

    auto cut = bytes;
    cut.resize(bytes.size() / 2);
    spit(dir.path() / "cut.sicu", cut);
    CHECK_THROWS_AS(read_dataset(dir.path() / "cut.sicu"), TruncatedError);

    CHECK_THROWS_AS(read_dataset(dir.path() / "missing.sicu"), IoError);
}

TEST_CASE("scenario config validation") {
    ScenarioConfig c;
    c.frame_len = 100;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = ScenarioConfig{};
    c.sir_bins_db = {0, 0};
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = ScenarioConfig{};
    c.offset_range_db = {-0.5, 0.25};
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = ScenarioConfig{};
    CHECK_NOTHROW(c.validate());
    ScenarioConfig back = nlohmann::json(c).get<ScenarioConfig>();
    CHECK(nlohmann::json(back) == nlohmann::json(c));
}
