#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "sicu/nn/functional.hpp"

namespace sicu {
class Rng;
}

namespace sicu::nn {

/// A trainable tensor and the gradient slot its layer fills in backward().
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;
};

/// Non-trainable persistent state (batch-norm running statistics).
template <typename T>
struct BufferRef {
    std::string name;
    Tensor<T>* value = nullptr;
};

/// forward() is the training path: it caches what backward() needs and, for
/// batch norm, uses batch statistics. infer() is const, caches nothing and
/// is safe to call concurrently. backward() overwrites parameter gradients.
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor<T> forward(const Tensor<T>& input) = 0;
    virtual Tensor<T> infer(const Tensor<T>& input) const = 0;
    virtual Tensor<T> backward(const Tensor<T>& upstream) = 0;

    virtual void collect_params(const std::string& /*prefix*/, std::vector<ParamRef<T>>& /*out*/) {}
    virtual void collect_buffers(const std::string& /*prefix*/, std::vector<BufferRef<T>>& /*out*/) {}

    /// Kaiming-uniform weights, zero biases, unit gamma.
    virtual void initialize(Rng& /*rng*/) {}

    /// Architecture descriptor; build_layer(describe()) recreates the layer
    /// with freshly initialized parameters.
    virtual nlohmann::json describe() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        collect_params("", out);
        return out;
    }
    std::vector<BufferRef<T>> buffers() {
        std::vector<BufferRef<T>> out;
        collect_buffers("", out);
        return out;
    }
    std::size_t parameter_count();
};

template <typename T>
class Conv1d final : public Layer<T> {
public:
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
           std::size_t padding = 0);
    Conv1d(const Conv1d& other);

    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    void initialize(Rng& rng) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    std::size_t stride_, padding_;
    Tensor<T> weight_, bias_, weight_grad_, bias_grad_;
    Conv1dContext<T> ctx_;
};

template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(std::size_t in_features, std::size_t out_features);
    Dense(const Dense& other);

    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    void initialize(Rng& rng) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    Tensor<T> weight_, bias_, weight_grad_, bias_grad_;
    DenseContext<T> ctx_;
};

template <typename T>
class BatchNorm1d final : public Layer<T> {
public:
    explicit BatchNorm1d(std::size_t channels, double momentum = 0.1, double eps = 1e-5);
    BatchNorm1d(const BatchNorm1d& other);

    /// Uses state().mode: Train normalizes with batch statistics, Infer
    /// behaves like infer() and leaves no context for backward().
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override;
    void initialize(Rng& rng) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

    BatchNormState<T>& state() { return state_; }

private:
    BatchNormState<T> state_;
    Tensor<T> gamma_grad_, beta_grad_;
    BatchNormContext<T> ctx_;
};

template <typename T>
class ReLU final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

private:
    Tensor<T> output_;
    bool valid_ = false;
};

template <typename T>
class MaxPool1d final : public Layer<T> {
public:
    explicit MaxPool1d(std::size_t kernel);

    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

private:
    std::size_t kernel_;
    MaxPoolContext ctx_;
};

template <typename T>
class Upsample2 final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;
};

/// [B, C, L] -> [B, C], mean over time.
template <typename T>
class GlobalAvgPool1d final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

private:
    Shape input_shape_;
};

/// [B, C, L] -> [B, C*L].
template <typename T>
class Flatten final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

private:
    Shape input_shape_;
};

template <typename T>
class Sequential final : public Layer<T> {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    Sequential& add(std::unique_ptr<Layer<T>> layer);
    std::size_t size() const { return layers_.size(); }
    Layer<T>& operator[](std::size_t i) { return *layers_.at(i); }

    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override;
    void initialize(Rng& rng) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

struct UNetConfig {
    std::size_t in_channels = 2;
    std::size_t out_channels = 2;
    std::size_t depth = 4;
    std::size_t base_channels = 16;
    std::size_t kernel = 5;   // odd; "same" padding
    bool residual = true;     // output = input + correction

    void validate() const;
    std::size_t length_multiple() const { return std::size_t{1} << depth; }
};

void to_json(nlohmann::json& j, const UNetConfig& c);
void from_json(const nlohmann::json& j, UNetConfig& c);

/// 1-D U-Net: per level conv-BN-ReLU then max-pool 2; a bottleneck block;
/// per level nearest upsample 2, concatenation with the encoder output of
/// the same resolution, conv-BN-ReLU; 1x1 output conv. Input length must be
/// a multiple of 2^depth (callers pad).
template <typename T>
class UNet final : public Layer<T> {
public:
    explicit UNet(const UNetConfig& config);
    UNet(const UNet& other);

    const UNetConfig& config() const { return config_; }

    Tensor<T> forward(const Tensor<T>& input) override;
    Tensor<T> infer(const Tensor<T>& input) const override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override;
    void initialize(Rng& rng) override;
    nlohmann::json describe() const override;
    std::unique_ptr<Layer<T>> clone() const override;

private:
    void check_length(const Tensor<T>& input) const;

    UNetConfig config_;
    std::vector<Sequential<T>> encoders_;
    Sequential<T> bottleneck_;
    std::vector<Sequential<T>> decoders_;  // decoders_[l] produces level l
    Conv1d<T> head_;
    std::vector<MaxPoolContext> pools_;
};

/// Concatenate along the channel axis of two [B, C, L] tensors.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Inverse of concat_channels: first `channels` channels, then the rest.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t channels);

/// conv(k, same padding) -> batch norm -> ReLU.
template <typename T>
Sequential<T> conv_block(std::size_t in_channels, std::size_t out_channels, std::size_t kernel);

/// Rebuilds a layer tree from describe() output. Throws FormatError on
/// unknown types or bad fields.
template <typename T>
std::unique_ptr<Layer<T>> build_layer(const nlohmann::json& descriptor);

}  // namespace sicu::nn
