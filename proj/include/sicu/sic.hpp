#pragma once

#include <cstddef>

#include "sicu/dsp.hpp"

namespace sicu {

struct ScenarioConfig;

struct SicConfig {
    int soi_sps = 16;
    int interferer_sps = 16;
    PulseShape soi_shape;
    PulseShape interferer_shape;
    double sir_est_db = 0.0;
    int max_passes = 1;
    /// Cancel the interferer even when the estimate says the SOI is stronger.
    bool force_cancel = false;
    /// Interferer symbols at each frame edge left out of the reconstruction.
    std::size_t edge_exclusion_symbols = 0;

    /// Throws InvalidInput on inconsistent shapes / SPS values.
    void validate() const;
};

/// Shapes and SPS values from the scenario; sir_est_db as given.
SicConfig make_sic_config(const ScenarioConfig& scenario, int interferer_sps, double sir_est_db);

enum class SicOrder { SoiDirect, InterfererFirst };

struct SicResult {
    Bits soi_bits;
    IqFrame residual;            // what the SOI was finally demodulated from
    SicOrder order = SicOrder::SoiDirect;
    Bits interferer_bits_est;    // one pair per interferer symbol centered inside the frame
};

/// Interferer power implied by the mixture power and SIR estimate, assuming
/// P_soi + P_int = P_mix and P_soi / P_int = 10^(sir/10).
double interferer_power_budget(double mixture_power, double sir_est_db);

/// Amplitude that brings a reconstruction of power `reconstruction_power`
/// to the budgeted interferer power: sqrt(P_int / P_recon).
double scale_for_cancellation(double mixture_power, double sir_est_db, double reconstruction_power = 1.0);

/// Pulse-shaped symbols laid out so symbol m peaks at frame sample
/// first_center + m * sps, cropped to [0, frame_len).
IqFrame reconstruct_at(std::span<const Sample> symbols, std::ptrdiff_t first_center, const PulseShape& shape,
                       std::size_t frame_len);

/// Single-pass successive interference cancellation, or direct SOI
/// demodulation when sir_est_db >= 0 and force_cancel is off. Returns SOI
/// bits for the labeled SOI symbols of the frame.
SicResult sic_cancel(const IqFrame& mixture, const SicConfig& config);

}  // namespace sicu
