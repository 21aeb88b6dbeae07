#pragma once

#include <cstdint>
#include <vector>

#include "sicu/nn/layers.hpp"

namespace sicu::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates for one parameter tensor.
template <typename T>
struct AdamMoments {
    Tensor<T> m;
    Tensor<T> v;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::vector<AdamMoments<T>> moments;  // one per parameter, lazily shaped
    std::uint64_t t = 0;
};

/// One bias-corrected Adam update over all `params` (their grad slots must
/// be filled). Increments state.t. Throws InvalidInput when a gradient or a
/// stored moment disagrees in shape with its parameter.
template <typename T>
void adam_step(std::vector<ParamRef<T>>& params, AdamState<T>& state);

/// Single-tensor form; `moments` is shaped on first use.
template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& moments, std::uint64_t t,
               const AdamConfig& config);

}  // namespace sicu::nn
