#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sicu {

class Rng;

using Sample = std::complex<double>;
using Bits = std::vector<std::uint8_t>;

/// Complex baseband frame; `sps` is the oversampling factor of the
/// component that produced it (the SOI rate for mixtures).
struct IqFrame {
    std::vector<Sample> samples;
    int sps = 1;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// FIR pulse with `span_symbols * sps + 1` taps, symmetric, unit energy.
struct PulseShape {
    std::vector<double> taps;
    double roll_off = 0.0;
    int span_symbols = 0;
    int sps = 0;

    /// Group delay in samples (index of the center tap).
    std::size_t delay() const { return (taps.size() - 1) / 2; }
};

inline constexpr double kDefaultRollOff = 0.35;
inline constexpr int kDefaultSpanSymbols = 8;

double db_to_power_ratio(double db);

/// Gray-mapped QPSK: 00 -> (+1+j), 01 -> (-1+j), 11 -> (-1-j), 10 -> (+1-j),
/// scaled by 1/sqrt(2). The first bit of a pair sets the sign of Q, the
/// second the sign of I. Throws InvalidInput on an odd bit count.
std::vector<Sample> qpsk_modulate(std::span<const std::uint8_t> bits);

/// Quadrant decision inverting qpsk_modulate. A zero component counts as
/// positive.
Bits qpsk_hard_decision(std::span<const Sample> symbols);

/// Root-raised-cosine taps from the closed form, including the t = 0 and
/// t = +-1/(4*roll_off) limits, normalized to unit energy.
PulseShape design_rrc(double roll_off, int span_symbols, int sps);

/// Zero-stuff by shape.sps and filter. Output length is
/// symbols.size() * sps + taps.size() - 1; symbol k peaks at k*sps + delay().
IqFrame pulse_shape(std::span<const Sample> symbols, const PulseShape& shape);

/// Matched-filter output sampled at symbol centers first_center + m*sps,
/// m = 0..count-1, treating samples outside the frame as zero. Centers may
/// lie anywhere; the caller decides which ones are meaningful.
std::vector<Sample> matched_filter_at(std::span<const Sample> frame, const PulseShape& shape,
                                      std::ptrdiff_t first_center, std::size_t count);

/// Full matched filter sampled from delay taps.size() - 1, then every sps
/// samples (the first symbol is centered at sample delay()).
/// Throws InvalidInput when the frame cannot supply symbol_count symbols.
std::vector<Sample> matched_filter_downsample(const IqFrame& frame, const PulseShape& shape,
                                              std::size_t symbol_count);

/// Mean of |x|^2. Throws InvalidInput on an empty frame.
double measure_power(std::span<const Sample> samples);
inline double measure_power(const IqFrame& frame) { return measure_power(frame.samples); }

/// Amplitude applied to the interferer so that P_soi / (g^2 P_int) = 10^(sir_db/10).
double interference_gain(double soi_power, double interferer_power, double sir_db);

/// soi + g * interferer, g from interference_gain on the measured powers.
IqFrame mix_at_sir(const IqFrame& soi, const IqFrame& interferer, double sir_db);

/// Adds complex white Gaussian noise of total power P_frame / 10^(snr_db/10).
IqFrame add_awgn(const IqFrame& frame, double snr_db, Rng& rng);

}  // namespace sicu
