#pragma once

// Stateless layer kernels. Every forward that has a backward fills a
// context struct; backward with an empty context is a UsageError.
// Tensors of rank 3 are [batch, channels, length]; dense tensors are
// [batch, features].

#include <cstdint>
#include <span>
#include <vector>

#include "sicu/nn/tensor.hpp"

namespace sicu::nn {

// ---- 1-D convolution (cross-correlation) -----------------------------------

template <typename T>
struct Conv1dContext {
    Tensor<T> input;
    const Tensor<T>* kernels = nullptr;
    std::size_t stride = 1;
    std::size_t padding = 0;
    bool valid = false;
};

template <typename T>
struct Conv1dGrads {
    Tensor<T> input;
    Tensor<T> kernels;
    Tensor<T> bias;
};

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t padding);

/// input [B, Cin, L], kernels [Cout, Cin, K], bias [Cout] -> [B, Cout, Lout]
/// with Lout = floor((L + 2 padding - K) / stride) + 1.
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding, Conv1dContext<T>* ctx = nullptr);

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& upstream, const Conv1dContext<T>& ctx);

// ---- dense ----------------------------------------------------------------

template <typename T>
struct DenseContext {
    Tensor<T> input;
    const Tensor<T>* weights = nullptr;
    bool valid = false;
};

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

/// input [B, In], weights [Out, In], bias [Out] -> [B, Out].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                        DenseContext<T>* ctx = nullptr);

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& upstream, const DenseContext<T>& ctx);

// ---- batch normalization ----------------------------------------------------

enum class BnMode { Train, Infer };

template <typename T>
struct BatchNormState {
    Tensor<T> gamma;          // [C]
    Tensor<T> beta;           // [C]
    Tensor<T> running_mean;   // [C]
    Tensor<T> running_var;    // [C]
    double momentum = 0.1;
    double eps = 1e-5;
    BnMode mode = BnMode::Train;

    explicit BatchNormState(std::size_t channels = 0);
};

template <typename T>
struct BatchNormContext {
    Tensor<T> normalized;         // x_hat
    std::vector<double> inv_std;  // per channel
    const Tensor<T>* gamma = nullptr;
    bool valid = false;
};

template <typename T>
struct BatchNormGrads {
    Tensor<T> input;
    Tensor<T> gamma;
    Tensor<T> beta;
};

/// Per-channel normalization over (batch, length). Train mode uses batch
/// statistics (batch >= 2) and updates running stats with `momentum`;
/// infer mode uses the running stats only and never writes to `state`.
template <typename T>
Tensor<T> batchnorm1d_forward(const Tensor<T>& input, BatchNormState<T>& state,
                              BatchNormContext<T>* ctx = nullptr);

template <typename T>
Tensor<T> batchnorm1d_infer(const Tensor<T>& input, const BatchNormState<T>& state);

template <typename T>
BatchNormGrads<T> batchnorm1d_backward(const Tensor<T>& upstream, const BatchNormContext<T>& ctx);

// ---- pooling / resampling / activation --------------------------------------

struct MaxPoolContext {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;  // input offset within each window
    std::size_t kernel = 0;
    bool valid = false;
};

/// Non-overlapping windows of `kernel`; a trailing partial window is
/// dropped. Ties resolve to the earliest element.
template <typename T>
Tensor<T> maxpool1d_forward(const Tensor<T>& input, std::size_t kernel, MaxPoolContext* ctx = nullptr);

template <typename T>
Tensor<T> maxpool1d_backward(const Tensor<T>& upstream, const MaxPoolContext& ctx);

/// Nearest-neighbour x2 along length.
template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& upstream);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

/// Gradient through ReLU given the forward *output*.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& upstream, const Tensor<T>& output);

// ---- losses -----------------------------------------------------------------

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> gradient;
};

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean over the batch of -log softmax(logits)[label];
/// gradient = (softmax - one_hot) / batch.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Mean squared error over all elements; gradient = 2 (pred - target) / N.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target);

}  // namespace sicu::nn
