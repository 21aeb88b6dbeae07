#include <cmath>

#include "doctest.h"

#include "sicu/error.hpp"
#include "sicu/eval.hpp"
#include "sicu/rng.hpp"
#include "sicu/scenario.hpp"
#include "sicu/sic.hpp"

using namespace sicu;

namespace {

IqFrame mix(const MixtureParts& p) {
    IqFrame m = p.soi;
    for (std::size_t n = 0; n < m.size(); ++n) m.samples[n] += p.interferer.samples[n];
    return m;
}

struct Point {
    BerCount sic, direct;
};

Point run_point(int sps, double sir, double sir_est, std::size_t min_bits, std::uint64_t seed) {
    ScenarioConfig c;
    Rng rng(seed);
    Point pt;
    while (pt.sic.bits < min_bits) {
        const auto parts = generate_parts(c, sir, sps, rng);
        const IqFrame m = mix(parts);
        pt.sic += ber(parts.soi_bits, sic_cancel(m, make_sic_config(c, sps, sir_est)).soi_bits);
        pt.direct += ber(parts.soi_bits, sic_cancel(m, make_sic_config(c, sps, 10.0)).soi_bits);
    }
    return pt;
}

}  // namespace

TEST_CASE("power-budget scaling") {
    CHECK(interferer_power_budget(2.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(interferer_power_budget(1.1, -10.0) - 1.0) < 1e-12);
    CHECK(scale_for_cancellation(2.0, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(interferer_power_budget(0.0, 0.0), InvalidInput);
    CHECK_THROWS_AS(interferer_power_budget(-1.0, 3.0), InvalidInput);

    ScenarioConfig c;
    Rng rng(1);
    const auto shape = design_rrc(c.roll_off, c.span_symbols, 4);
    std::vector<Sample> sym(500);
    for (auto& s : sym) s = Sample(rng.bit() ? 1 : -1, rng.bit() ? 1 : -1) / std::sqrt(2.0);
    const IqFrame recon = reconstruct_at(sym, 0, shape, 2000);
    for (double sir : {-10.0, -4.0, 3.0}) {
        const double p_mix = 1.7;
        const double g = scale_for_cancellation(p_mix, sir, measure_power(recon));
        IqFrame scaled = recon;
        for (auto& s : scaled.samples) s *= g;
        CHECK(std::abs(measure_power(scaled) - interferer_power_budget(p_mix, sir)) < 1e-9);
    }
}

TEST_CASE("reconstruct_at places symbol peaks on the requested grid") {
    const auto shape = design_rrc(0.35, 8, 16);
    const std::vector<Sample> sym{Sample(1, 0), Sample(0, 0), Sample(0, -1)};
    const IqFrame f = reconstruct_at(sym, 5, shape, 100);
    REQUIRE(f.size() == 100);
    const double peak = shape.taps[shape.delay()];
    CHECK(f.samples[5].real() == doctest::Approx(peak));
    CHECK(f.samples[37].imag() == doctest::Approx(-peak));
    // Symbols whose tails run off either end are cropped, not wrapped.
    const IqFrame g = reconstruct_at(sym, -20, shape, 30);
    CHECK(g.size() == 30);
    CHECK(reconstruct_at({}, 0, shape, 10).samples == std::vector<Sample>(10));
}

TEST_CASE("oracle cancellation leaves only edge residue") {
    ScenarioConfig c;
    for (int sps : {32, 16, 4}) {
        Rng rng(40 + static_cast<std::uint64_t>(sps));
        const auto parts = generate_parts(c, -8.0, sps, rng);
        const auto shape = design_rrc(c.roll_off, c.span_symbols, sps);
        // Oracle interferer symbols are the labeled ones; the first is
        // centered at the pulse delay.
        const auto sym = qpsk_modulate(parts.interferer_bits);
        const IqFrame recon = reconstruct_at(sym, static_cast<std::ptrdiff_t>(shape.delay()), shape, parts.interferer.size());
        const std::size_t L = recon.size(), lo = L / 20, hi = L - L / 20;
        Sample num{};
        double den = 0.0;
        for (std::size_t n = lo; n < hi; ++n) {
            num += std::conj(recon.samples[n]) * parts.interferer.samples[n];
            den += std::norm(recon.samples[n]);
        }
        const Sample g = num / den;
        double resid = 0.0, pint = 0.0;
        for (std::size_t n = lo; n < hi; ++n) {
            resid += std::norm(parts.interferer.samples[n] - g * recon.samples[n]);
            pint += std::norm(parts.interferer.samples[n]);
        }
        INFO("sps " << sps);
        CHECK(resid / pint < 1e-6);
    }
}

TEST_CASE("strong interferer at -10 dB is cancelled with oracle parameters (int 4, soi 16)") {
    const auto pt = run_point(4, -10.0, -10.0, 100000, 7);
    CHECK(pt.sic.bits >= 100000);
    CHECK(pt.sic.errors == 0);
}

TEST_CASE("SIC beats direct demodulation at strong interference") {
    for (int sps : {32, 16, 4}) {
        for (double sir : {-10.0, -8.0, -6.0}) {
            const auto pt = run_point(sps, sir, sir, 10000, 100 + static_cast<std::uint64_t>(sps) - static_cast<std::uint64_t>(sir));
            INFO("sps " << sps << " sir " << sir << " sic " << pt.sic.rate() << " direct " << pt.direct.rate());
            CHECK(pt.sic.errors <= pt.direct.errors);
            CHECK(pt.sic.rate() <= 1e-3);
        }
    }
}

TEST_CASE("SIR mis-estimate by +1 dB never helps") {
    for (int sps : {32, 16, 4}) {
        const auto oracle = run_point(sps, -10.0, -10.0, 10000, 11);
        const auto off = run_point(sps, -10.0, -9.0, 10000, 11);
        CHECK(off.sic.errors >= oracle.sic.errors);
    }
}

TEST_CASE("positive SIR estimate demodulates the SOI directly") {
    ScenarioConfig c;
    Rng rng(5);
    const auto parts = generate_parts(c, 10.0, 16, rng);
    const auto r = sic_cancel(parts.soi, make_sic_config(c, 16, 10.0));
    CHECK(r.order == SicOrder::SoiDirect);
    CHECK(ber(parts.soi_bits, r.soi_bits).errors == 0);
    CHECK(r.residual.size() == parts.soi.size());

    const IqFrame m = mix(generate_parts(c, -7.0, 32, rng));
    auto cfg = make_sic_config(c, 32, -7.0);
    const auto a = sic_cancel(m, cfg);
    const auto b = sic_cancel(m, cfg);
    CHECK(a.soi_bits == b.soi_bits);
    CHECK(a.residual.samples == b.residual.samples);
    CHECK(a.order == SicOrder::InterfererFirst);
    CHECK(a.residual.size() == m.size());
    CHECK(a.interferer_bits_est.size() == 2 * ((m.size() - 1) / 32 + 1));

    auto forced = make_sic_config(c, 32, 4.0);
    forced.force_cancel = true;
    CHECK(sic_cancel(m, forced).order == SicOrder::InterfererFirst);
}

TEST_CASE("sic input validation") {
    ScenarioConfig c;
    IqFrame m;
    m.sps = 16;
    m.samples.assign(8073, Sample{0.1, 0.0});
    auto cfg = make_sic_config(c, 4, -3.0);
    cfg.interferer_sps = 16;
    CHECK_THROWS_AS(sic_cancel(m, cfg), InvalidInput);
    cfg = make_sic_config(c, 4, std::nan(""));
    CHECK_THROWS_AS(sic_cancel(m, cfg), InvalidInput);
    cfg = make_sic_config(c, 4, -3.0);
    m.sps = 4;
    CHECK_THROWS_AS(sic_cancel(m, cfg), InvalidInput);
    cfg.max_passes = 0;
    m.sps = 16;
    CHECK_THROWS_AS(sic_cancel(m, cfg), InvalidInput);
}
