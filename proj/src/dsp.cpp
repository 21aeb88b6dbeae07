#include "sicu/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sicu/error.hpp"
#include "sicu/rng.hpp"

namespace sicu {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double rrc_tap(double t, double beta) {
    using std::numbers::pi;
    if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / pi;
    const double singular = 1.0 / (4.0 * beta);
    if (std::abs(std::abs(t) - singular) < 1e-9) {
        return beta / std::numbers::sqrt2 *
               ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) +
                (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
    }
    const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
    const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    return num / den;
}

}  // namespace

double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }

std::vector<Sample> qpsk_modulate(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) {
        throw InvalidInput("qpsk_modulate: odd bit count " + std::to_string(bits.size()));
    }
    std::vector<Sample> symbols;
    symbols.reserve(bits.size() / 2);
    for (std::size_t k = 0; k < bits.size(); k += 2) {
        const double q = bits[k] ? -kInvSqrt2 : kInvSqrt2;
        const double i = bits[k + 1] ? -kInvSqrt2 : kInvSqrt2;
        symbols.emplace_back(i, q);
    }
    return symbols;
}

Bits qpsk_hard_decision(std::span<const Sample> symbols) {
    Bits bits;
    bits.reserve(symbols.size() * 2);
    for (const Sample& s : symbols) {
        bits.push_back(s.imag() < 0.0 ? 1 : 0);
        bits.push_back(s.real() < 0.0 ? 1 : 0);
    }
    return bits;
}

PulseShape design_rrc(double roll_off, int span_symbols, int sps) {
    if (!(roll_off > 0.0 && roll_off <= 1.0)) {
        throw InvalidInput("design_rrc: roll_off must lie in (0, 1]");
    }
    if (span_symbols < 4 || span_symbols % 2 != 0) {
        throw InvalidInput("design_rrc: span must be an even number >= 4");
    }
    if (sps < 2) throw InvalidInput("design_rrc: sps must be >= 2");

    PulseShape shape;
    shape.roll_off = roll_off;
    shape.span_symbols = span_symbols;
    shape.sps = sps;
    const int half = span_symbols * sps / 2;
    shape.taps.resize(static_cast<std::size_t>(span_symbols) * sps + 1);
    double energy = 0.0;
    for (int n = -half; n <= half; ++n) {
        const double tap = rrc_tap(static_cast<double>(n) / sps, roll_off);
        shape.taps[static_cast<std::size_t>(n + half)] = tap;
        energy += tap * tap;
    }
    const double norm = 1.0 / std::sqrt(energy);
    for (double& tap : shape.taps) tap *= norm;
    // Force exact symmetry; the closed form agrees to rounding already.
    const std::size_t n = shape.taps.size();
    for (std::size_t k = 0; k < n / 2; ++k) shape.taps[n - 1 - k] = shape.taps[k];
    return shape;
}

IqFrame pulse_shape(std::span<const Sample> symbols, const PulseShape& shape) {
    IqFrame frame;
    frame.sps = shape.sps;
    if (symbols.empty()) return frame;
    const std::size_t sps = static_cast<std::size_t>(shape.sps);
    const std::size_t ntaps = shape.taps.size();
    frame.samples.assign(symbols.size() * sps + ntaps - 1, Sample{});
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const Sample s = symbols[k];
        if (s == Sample{}) continue;
        Sample* out = frame.samples.data() + k * sps;
        for (std::size_t j = 0; j < ntaps; ++j) out[j] += s * shape.taps[j];
    }
    return frame;
}

std::vector<Sample> matched_filter_at(std::span<const Sample> frame, const PulseShape& shape,
                                      std::ptrdiff_t first_center, std::size_t count) {
    const auto delay = static_cast<std::ptrdiff_t>(shape.delay());
    const auto len = static_cast<std::ptrdiff_t>(frame.size());
    std::vector<Sample> out(count);
    for (std::size_t m = 0; m < count; ++m) {
        const std::ptrdiff_t center = first_center + static_cast<std::ptrdiff_t>(m) * shape.sps;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(center - delay, 0);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(center + delay, len - 1);
        Sample acc{};
        for (std::ptrdiff_t n = lo; n <= hi; ++n) {
            acc += frame[static_cast<std::size_t>(n)] * shape.taps[static_cast<std::size_t>(n - center + delay)];
        }
        out[m] = acc;
    }
    return out;
}

std::vector<Sample> matched_filter_downsample(const IqFrame& frame, const PulseShape& shape,
                                              std::size_t symbol_count) {
    if (symbol_count == 0) return {};
    const std::size_t last = (symbol_count - 1) * static_cast<std::size_t>(shape.sps);
    if (frame.size() == 0 || last > frame.size() - 1) {
        throw InvalidInput("matched_filter_downsample: frame of " + std::to_string(frame.size()) +
                           " samples cannot supply " + std::to_string(symbol_count) + " symbols");
    }
    return matched_filter_at(frame.samples, shape, static_cast<std::ptrdiff_t>(shape.delay()),
                             symbol_count);
}

double measure_power(std::span<const Sample> samples) {
    if (samples.empty()) throw InvalidInput("measure_power: empty frame");
    double acc = 0.0;
    for (const Sample& s : samples) acc += std::norm(s);
    return acc / static_cast<double>(samples.size());
}

double interference_gain(double soi_power, double interferer_power, double sir_db) {
    if (!(soi_power > 0.0) || !(interferer_power > 0.0)) {
        throw InvalidInput("interference_gain: both components need nonzero power");
    }
    if (!std::isfinite(sir_db)) throw InvalidInput("interference_gain: non-finite SIR");
    return std::sqrt(soi_power / (interferer_power * db_to_power_ratio(sir_db)));
}

IqFrame mix_at_sir(const IqFrame& soi, const IqFrame& interferer, double sir_db) {
    if (soi.size() != interferer.size()) {
        throw InvalidInput("mix_at_sir: length mismatch (" + std::to_string(soi.size()) + " vs " +
                           std::to_string(interferer.size()) + ")");
    }
    const double g = interference_gain(measure_power(soi), measure_power(interferer), sir_db);
    IqFrame out;
    out.sps = soi.sps;
    out.samples.resize(soi.size());
    for (std::size_t n = 0; n < soi.size(); ++n) out.samples[n] = soi.samples[n] + g * interferer.samples[n];
    return out;
}

IqFrame add_awgn(const IqFrame& frame, double snr_db, Rng& rng) {
    IqFrame out = frame;
    const double noise_power = measure_power(frame) / db_to_power_ratio(snr_db);
    const double sigma = std::sqrt(noise_power / 2.0);
    for (Sample& s : out.samples) {
        const double ni = rng.gaussian();
        const double nq = rng.gaussian();
        s += Sample(sigma * ni, sigma * nq);
    }
    return out;
}

}  // namespace sicu
