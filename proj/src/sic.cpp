#include "sicu/sic.hpp"

#include <cmath>
#include <string>

#include "sicu/error.hpp"
#include "sicu/scenario.hpp"

namespace sicu {

void SicConfig::validate() const {
    if (soi_sps < 2 || interferer_sps < 2) throw InvalidInput("sic: SPS values must be >= 2");
    if (soi_shape.sps != soi_sps || interferer_shape.sps != interferer_sps) {
        throw InvalidInput("sic: pulse shapes do not match the configured SPS values");
    }
    if (soi_shape.taps.empty() || interferer_shape.taps.empty()) throw InvalidInput("sic: empty pulse shape");
    if (!std::isfinite(sir_est_db)) throw InvalidInput("sic: SIR estimate must be finite");
    if (max_passes < 1) throw InvalidInput("sic: max_passes must be >= 1");
}

SicConfig make_sic_config(const ScenarioConfig& scenario, int interferer_sps, double sir_est_db) {
    SicConfig c;
    c.soi_sps = scenario.soi_sps;
    c.interferer_sps = interferer_sps;
    c.soi_shape = design_rrc(scenario.roll_off, scenario.span_symbols, scenario.soi_sps);
    c.interferer_shape = design_rrc(scenario.roll_off, scenario.span_symbols, interferer_sps);
    c.sir_est_db = sir_est_db;
    return c;
}

double interferer_power_budget(double mixture_power, double sir_est_db) {
    if (!(mixture_power > 0.0) || !std::isfinite(mixture_power)) {
        throw InvalidInput("sic: mixture power must be positive, got " + std::to_string(mixture_power));
    }
    return mixture_power / (1.0 + db_to_power_ratio(sir_est_db));
}

double scale_for_cancellation(double mixture_power, double sir_est_db, double reconstruction_power) {
    if (!(reconstruction_power > 0.0)) throw InvalidInput("sic: reconstruction power must be positive");
    return std::sqrt(interferer_power_budget(mixture_power, sir_est_db) / reconstruction_power);
}

IqFrame reconstruct_at(std::span<const Sample> symbols, std::ptrdiff_t first_center, const PulseShape& shape,
                       std::size_t frame_len) {
    IqFrame out;
    out.sps = shape.sps;
    out.samples.assign(frame_len, Sample{});
    if (symbols.empty()) return out;
    const IqFrame shaped = pulse_shape(symbols, shape);
    // shaped index n holds frame sample n + first_center - delay.
    const std::ptrdiff_t offset = first_center - static_cast<std::ptrdiff_t>(shape.delay());
    for (std::size_t n = 0; n < shaped.size(); ++n) {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(n) + offset;
        if (t >= 0 && t < static_cast<std::ptrdiff_t>(frame_len)) out.samples[static_cast<std::size_t>(t)] = shaped.samples[n];
    }
    return out;
}

namespace {

Bits demod_soi(const IqFrame& frame, const SicConfig& c) {
    const std::size_t count =
        labeled_symbol_count(static_cast<int>(frame.size()), c.soi_sps, c.soi_shape.span_symbols);
    return qpsk_hard_decision(matched_filter_downsample(frame, c.soi_shape, count));
}

struct InterfererEstimate {
    Bits bits;
    IqFrame waveform;  // unscaled reconstruction
};

/// Decides every interferer symbol whose center lies inside the frame and
/// rebuilds the waveform from those decisions.
InterfererEstimate estimate_interferer(const IqFrame& frame, const SicConfig& c) {
    const std::size_t L = frame.size();
    const std::size_t count = (L - 1) / static_cast<std::size_t>(c.interferer_sps) + 1;
    const auto soft = matched_filter_at(frame.samples, c.interferer_shape, 0, count);
    InterfererEstimate est;
    est.bits = qpsk_hard_decision(soft);
    std::vector<Sample> symbols = qpsk_modulate(est.bits);
    const std::size_t edge = std::min(c.edge_exclusion_symbols, symbols.size());
    for (std::size_t k = 0; k < edge; ++k) {
        symbols[k] = 0.0;
        symbols[symbols.size() - 1 - k] = 0.0;
    }
    est.waveform = reconstruct_at(symbols, 0, c.interferer_shape, L);
    return est;
}

IqFrame subtract_scaled(const IqFrame& a, const IqFrame& b, double g) {
    IqFrame out = a;
    for (std::size_t n = 0; n < out.size(); ++n) out.samples[n] -= g * b.samples[n];
    return out;
}

}  // namespace

SicResult sic_cancel(const IqFrame& mixture, const SicConfig& config) {
    config.validate();
    if (mixture.empty()) throw InvalidInput("sic: empty mixture");
    if (mixture.sps != config.soi_sps) {
        throw InvalidInput("sic: mixture SPS " + std::to_string(mixture.sps) + " does not match SOI SPS " +
                           std::to_string(config.soi_sps));
    }

    SicResult result;
    if (config.sir_est_db >= 0.0 && !config.force_cancel) {
        result.order = SicOrder::SoiDirect;
        result.residual = mixture;
        result.soi_bits = demod_soi(mixture, config);
        return result;
    }

    result.order = SicOrder::InterfererFirst;
    const double p_mix = measure_power(mixture);
    IqFrame observed = mixture;  // what the interferer is estimated from
    for (int pass = 0; pass < config.max_passes; ++pass) {
        InterfererEstimate est = estimate_interferer(observed, config);
        const double p_recon = measure_power(est.waveform);
        const double g = p_recon > 0.0 ? scale_for_cancellation(p_mix, config.sir_est_db, p_recon) : 0.0;
        result.residual = subtract_scaled(mixture, est.waveform, g);
        result.interferer_bits_est = std::move(est.bits);
        result.soi_bits = demod_soi(result.residual, config);
        if (pass + 1 < config.max_passes) {
            // Remove the current SOI estimate and re-estimate the interferer.
            const auto soi_symbols = qpsk_modulate(result.soi_bits);
            const std::ptrdiff_t first_center = static_cast<std::ptrdiff_t>(config.soi_shape.delay());
            IqFrame soi = reconstruct_at(soi_symbols, first_center, config.soi_shape, mixture.size());
            const double p_soi = p_mix - interferer_power_budget(p_mix, config.sir_est_db);
            const double p_soi_recon = measure_power(soi);
            const double gs = p_soi_recon > 0.0 ? std::sqrt(p_soi / p_soi_recon) : 0.0;
            observed = subtract_scaled(mixture, soi, gs);
            observed.sps = mixture.sps;
        }
    }
    result.residual.sps = mixture.sps;
    return result;
}

}  // namespace sicu
