#include <cmath>
#include <numbers>

#include "doctest.h"

#include "sicu/dsp.hpp"
#include "sicu/error.hpp"
#include "sicu/rng.hpp"

using namespace sicu;

namespace {

Bits random_bits(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Bits b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.bit());
    return b;
}

// h(t) = 2 * integral_0^F H(f) cos(2 pi f t) df with H the square root of
// the raised-cosine spectrum (T = 1), by composite Simpson per smooth piece.
double rrc_by_integration(double beta, double t) {
    const double f1 = (1.0 - beta) / 2.0, f2 = (1.0 + beta) / 2.0;
    auto H = [&](double f) {
        if (f <= f1) return 1.0;
        if (f >= f2) return 0.0;
        return std::cos(std::numbers::pi / (2.0 * beta) * (f - f1));
    };
    auto simpson = [&](double a, double b, int n) {
        const double h = (b - a) / n;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double f = a + i * h;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            s += w * H(f) * std::cos(2.0 * std::numbers::pi * f * t);
        }
        return s * h / 3.0;
    };
    return 2.0 * (simpson(0.0, f1, 4000) + simpson(f1, f2, 4000));
}

}  // namespace

TEST_CASE("qpsk maps the four bit pairs to the Gray constellation") {
    const double a = 1.0 / std::sqrt(2.0);
    const auto s = qpsk_modulate(Bits{0, 0, 0, 1, 1, 1, 1, 0});
    REQUIRE(s.size() == 4);
    CHECK(std::abs(s[0] - Sample(a, a)) < 1e-15);
    CHECK(std::abs(s[1] - Sample(-a, a)) < 1e-15);
    CHECK(std::abs(s[2] - Sample(-a, -a)) < 1e-15);
    CHECK(std::abs(s[3] - Sample(a, -a)) < 1e-15);
    for (const auto& x : s) CHECK(std::abs(std::abs(x) - 1.0) < 1e-12);
    CHECK(qpsk_modulate(Bits{}).empty());
    CHECK_THROWS_AS(qpsk_modulate(Bits{1, 0, 1}), InvalidInput);
}

TEST_CASE("hard decision inverts modulation and resolves quadrants") {
    CHECK(qpsk_hard_decision(std::vector<Sample>{{0.7071, 0.7071}}) == Bits{0, 0});
    CHECK(qpsk_hard_decision(std::vector<Sample>{{0.9, -0.05}}) == Bits{1, 0});
    CHECK(qpsk_hard_decision(std::vector<Sample>{{0.0, 0.0}}) == Bits{0, 0});
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto b = random_bits(2 * (1 + seed % 17), seed);
        REQUIRE(qpsk_hard_decision(qpsk_modulate(b)) == b);
    }
}

TEST_CASE("rrc taps: length, symmetry, unit energy over a parameter grid") {
    for (double beta : {0.1, 0.25, 0.35, 0.5, 1.0}) {
        for (int span : {4, 6, 8, 10}) {
            for (int sps : {2, 4, 16, 32}) {
                const auto p = design_rrc(beta, span, sps);
                REQUIRE(p.taps.size() == static_cast<std::size_t>(span * sps + 1));
                double e = 0.0;
                for (std::size_t i = 0; i < p.taps.size(); ++i) {
                    REQUIRE(std::abs(p.taps[i] - p.taps[p.taps.size() - 1 - i]) < 1e-12);
                    REQUIRE(std::isfinite(p.taps[i]));
                    e += p.taps[i] * p.taps[i];
                }
                REQUIRE(std::abs(e - 1.0) < 1e-9);
            }
        }
    }
    CHECK_THROWS_AS(design_rrc(0.0, 8, 4), InvalidInput);
    CHECK_THROWS_AS(design_rrc(1.2, 8, 4), InvalidInput);
    CHECK_THROWS_AS(design_rrc(0.35, 2, 4), InvalidInput);
    CHECK_THROWS_AS(design_rrc(0.35, 8, 1), InvalidInput);
}

TEST_CASE("rrc closed form agrees with a numerical inverse transform of the spectrum") {
    // beta = 0.25 with sps = 4 hits t = 1/(4 beta) = 1 exactly; 0.35 does not.
    for (double beta : {0.35, 0.25, 0.5}) {
        const int span = 8, sps = 4;
        const auto p = design_rrc(beta, span, sps);
        std::vector<double> ref(p.taps.size());
        double e = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const double t = (static_cast<double>(i) - static_cast<double>(p.delay())) / sps;
            ref[i] = rrc_by_integration(beta, t);
            e += ref[i] * ref[i];
        }
        double max_err = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            max_err = std::max(max_err, std::abs(p.taps[i] - ref[i] / std::sqrt(e)));
        }
        INFO("beta " << beta);
        CHECK(max_err < 1e-6);
    }
    const auto p = design_rrc(0.35, 8, 4);
    for (std::size_t i = 0; i < p.taps.size(); ++i) {
        if (i != p.delay()) CHECK(p.taps[i] < p.taps[p.delay()]);
    }
}

TEST_CASE("pulse shaping is the impulse response, linear and shift equivariant") {
    const auto p = design_rrc(0.35, 8, 4);
    const auto imp = pulse_shape(std::vector<Sample>{{1.0, 0.0}}, p);
    REQUIRE(imp.size() == 4 + p.taps.size() - 1);
    for (std::size_t i = 0; i < p.taps.size(); ++i) {
        CHECK(imp.samples[i].real() == doctest::Approx(p.taps[i]).epsilon(1e-15));
        CHECK(imp.samples[i].imag() == 0.0);
    }

    const auto a = qpsk_modulate(random_bits(40, 1));
    const auto b = qpsk_modulate(random_bits(40, 2));
    std::vector<Sample> sum(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
    const auto ya = pulse_shape(a, p), yb = pulse_shape(b, p), ys = pulse_shape(sum, p);
    for (std::size_t n = 0; n < ys.size(); ++n) CHECK(std::abs(ys.samples[n] - ya.samples[n] - yb.samples[n]) < 1e-12);

    std::vector<Sample> shifted(a.size() + 1, Sample{});
    std::copy(a.begin(), a.end(), shifted.begin() + 1);
    const auto ysh = pulse_shape(shifted, p);
    for (std::size_t n = 0; n < ya.size(); ++n) CHECK(std::abs(ysh.samples[n + 4] - ya.samples[n]) < 1e-15);
}

TEST_CASE("matched filter recovers symbols below the ISI floor") {
    for (int sps : {4, 16, 32}) {
        const auto p = design_rrc(0.35, 8, sps);
        const auto s = qpsk_modulate(random_bits(400, static_cast<std::uint64_t>(sps)));
        const auto y = matched_filter_downsample(pulse_shape(s, p), p, s.size());
        double max_err = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) max_err = std::max(max_err, std::abs(y[k] - s[k]));
        // Worst-case ISI of the truncated cascade: sum of |g(kT)|, k != 0,
        // with g the tap autocorrelation, for each of I and Q.
        double isi = 0.0;
        const auto n = static_cast<std::ptrdiff_t>(p.taps.size());
        for (std::ptrdiff_t k = 1; k * sps < n; ++k) {
            double g = 0.0;
            for (std::ptrdiff_t i = 0; i + k * sps < n; ++i) g += p.taps[i] * p.taps[i + k * sps];
            isi += 2.0 * std::abs(g);
        }
        INFO("sps " << sps << " max err " << max_err << " bound " << isi * std::sqrt(2.0));
        CHECK(max_err <= isi * std::sqrt(2.0) + 1e-12);
        CHECK(max_err < 0.05);
    }
    const auto p = design_rrc(0.35, 8, 4);
    IqFrame zero{std::vector<Sample>(200), 4};
    for (const auto& v : matched_filter_downsample(zero, p, 10)) CHECK(v == Sample{});
    CHECK_THROWS_AS(matched_filter_downsample(zero, p, 1000), InvalidInput);
}

TEST_CASE("noiseless loopback has zero bit errors over 1e5 bits per sps") {
    for (int sps : {4, 16, 32}) {
        const auto p = design_rrc(0.35, 8, sps);
        const auto bits = random_bits(100'000, 77 + static_cast<std::uint64_t>(sps));
        const auto y = matched_filter_downsample(pulse_shape(qpsk_modulate(bits), p), p, bits.size() / 2);
        CHECK(qpsk_hard_decision(y) == bits);
    }
}

TEST_CASE("power measurement") {
    CHECK(measure_power(IqFrame{std::vector<Sample>(10, Sample(1.0, 0.0)), 4}) == 1.0);
    CHECK(measure_power(IqFrame{std::vector<Sample>(10), 4}) == 0.0);
    IqFrame f{qpsk_modulate(random_bits(64, 3)), 1};
    const double p0 = measure_power(f);
    for (auto& x : f.samples) x *= 3.0;
    CHECK(std::abs(measure_power(f) - 9.0 * p0) < 1e-12);
    CHECK_THROWS_AS(measure_power(IqFrame{}), InvalidInput);
}

TEST_CASE("mixing hits the requested power ratio over 1000 random draws") {
    Rng rng(11);
    double worst = 0.0;
    for (int d = 0; d < 1000; ++d) {
        const std::size_t n = 64 + rng.index(200);
        IqFrame a{std::vector<Sample>(n), 4}, b{std::vector<Sample>(n), 4};
        for (std::size_t i = 0; i < n; ++i) {
            a.samples[i] = {rng.gaussian(), rng.gaussian()};
            b.samples[i] = {rng.uniform(-3, 3), rng.gaussian()};
        }
        const double sir = rng.uniform(-10.0, 10.0);
        const auto mix = mix_at_sir(a, b, sir);
        IqFrame scaled_int{std::vector<Sample>(n), 4};
        for (std::size_t i = 0; i < n; ++i) scaled_int.samples[i] = mix.samples[i] - a.samples[i];
        const double ratio = measure_power(a) / measure_power(scaled_int);
        const double target = std::pow(10.0, sir / 10.0);
        worst = std::max(worst, std::abs(ratio / target - 1.0));
    }
    CHECK(worst < 1e-9);

    IqFrame one{std::vector<Sample>(16, Sample(1.0, 0.0)), 4};
    CHECK(interference_gain(1.0, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(mix_at_sir(one, IqFrame{std::vector<Sample>(16), 4}, 0.0), InvalidInput);
    CHECK_THROWS_AS(mix_at_sir(one, IqFrame{std::vector<Sample>(15, Sample(1.0)), 4}, 0.0), InvalidInput);
}

TEST_CASE("awgn: vanishing at high SNR, seeded, and of the right power") {
    IqFrame f{qpsk_modulate(random_bits(2'000'000, 5)), 1};
    Rng r1(9), r2(9);
    const auto quiet = add_awgn(IqFrame{std::vector<Sample>(f.samples.begin(), f.samples.begin() + 1000), 1}, 300.0, r1);
    for (std::size_t i = 0; i < quiet.size(); ++i) CHECK(std::abs(quiet.samples[i] - f.samples[i]) < 1e-10);

    Rng ra(42), rb(42);
    const auto na = add_awgn(f, 10.0, ra);
    const auto nb = add_awgn(f, 10.0, rb);
    CHECK(na.samples == nb.samples);

    double noise = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) noise += std::norm(na.samples[i] - f.samples[i]);
    noise /= static_cast<double>(f.size());
    CHECK(noise == doctest::Approx(measure_power(f) / 10.0).epsilon(0.02));
}
