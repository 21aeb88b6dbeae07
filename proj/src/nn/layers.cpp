#include "sicu/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sicu/error.hpp"
#include "sicu/rng.hpp"

namespace sicu::nn {

using nlohmann::json;

namespace {

template <typename T>
void kaiming_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (T& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void add_in_place(Tensor<T>& dst, const Tensor<T>& src) {
    if (dst.shape() != src.shape()) {
        throw InvalidInput("shape mismatch: " + shape_string(dst.shape()) + " vs " + shape_string(src.shape()));
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
std::size_t Layer<T>::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.value->size();
    return n;
}

// ---- Conv1d -------------------------------------------------------------------

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t padding)
    : stride_(stride), padding_(padding), weight_({out_channels, in_channels, kernel}), bias_({out_channels}),
      weight_grad_(weight_.shape()), bias_grad_(bias_.shape()) {
    if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
        throw InvalidInput("Conv1d: channels, kernel and stride must be positive");
    }
}

template <typename T>
Conv1d<T>::Conv1d(const Conv1d& other)
    : Layer<T>(), stride_(other.stride_), padding_(other.padding_), weight_(other.weight_), bias_(other.bias_),
      weight_grad_(other.weight_.shape()), bias_grad_(other.bias_.shape()) {}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& input) {
    return conv1d_forward(input, weight_, bias_, stride_, padding_, &ctx_);
}

template <typename T>
Tensor<T> Conv1d<T>::infer(const Tensor<T>& input) const {
    return conv1d_forward(input, weight_, bias_, stride_, padding_);
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& upstream) {
    auto g = conv1d_backward(upstream, ctx_);
    weight_grad_ = std::move(g.kernels);
    bias_grad_ = std::move(g.bias);
    return std::move(g.input);
}

template <typename T>
void Conv1d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + "weight", &weight_, &weight_grad_});
    out.push_back({prefix + "bias", &bias_, &bias_grad_});
}

template <typename T>
void Conv1d<T>::initialize(Rng& rng) {
    kaiming_uniform(weight_, weight_.dim(1) * weight_.dim(2), rng);
    bias_.fill(T{0});
}

template <typename T>
json Conv1d<T>::describe() const {
    return {{"type", "conv1d"},         {"in_channels", weight_.dim(1)}, {"out_channels", weight_.dim(0)},
            {"kernel", weight_.dim(2)}, {"stride", stride_},             {"padding", padding_}};
}

template <typename T>
std::unique_ptr<Layer<T>> Conv1d<T>::clone() const {
    return std::make_unique<Conv1d>(*this);
}

// ---- Dense ------------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : weight_({out_features, in_features}), bias_({out_features}), weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {
    if (in_features == 0 || out_features == 0) throw InvalidInput("Dense: feature counts must be positive");
}

template <typename T>
Dense<T>::Dense(const Dense& other)
    : Layer<T>(), weight_(other.weight_), bias_(other.bias_), weight_grad_(other.weight_.shape()),
      bias_grad_(other.bias_.shape()) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input) {
    return dense_forward(input, weight_, bias_, &ctx_);
}

template <typename T>
Tensor<T> Dense<T>::infer(const Tensor<T>& input) const {
    return dense_forward(input, weight_, bias_);
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& upstream) {
    auto g = dense_backward(upstream, ctx_);
    weight_grad_ = std::move(g.weights);
    bias_grad_ = std::move(g.bias);
    return std::move(g.input);
}

template <typename T>
void Dense<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + "weight", &weight_, &weight_grad_});
    out.push_back({prefix + "bias", &bias_, &bias_grad_});
}

template <typename T>
void Dense<T>::initialize(Rng& rng) {
    kaiming_uniform(weight_, weight_.dim(1), rng);
    bias_.fill(T{0});
}

template <typename T>
json Dense<T>::describe() const {
    return {{"type", "dense"}, {"in_features", weight_.dim(1)}, {"out_features", weight_.dim(0)}};
}

template <typename T>
std::unique_ptr<Layer<T>> Dense<T>::clone() const {
    return std::make_unique<Dense>(*this);
}

// ---- BatchNorm1d --------------------------------------------------------------

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels, double momentum, double eps)
    : state_(channels), gamma_grad_({channels}), beta_grad_({channels}) {
    if (channels == 0) throw InvalidInput("BatchNorm1d: channels must be positive");
    if (!(momentum > 0.0 && momentum < 1.0)) throw InvalidInput("BatchNorm1d: momentum must lie in (0, 1)");
    if (!(eps > 0.0)) throw InvalidInput("BatchNorm1d: eps must be positive");
    state_.momentum = momentum;
    state_.eps = eps;
}

template <typename T>
BatchNorm1d<T>::BatchNorm1d(const BatchNorm1d& other)
    : Layer<T>(), state_(other.state_), gamma_grad_(other.gamma_grad_.shape()),
      beta_grad_(other.beta_grad_.shape()) {}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& input) {
    ctx_.valid = false;
    return batchnorm1d_forward(input, state_, &ctx_);
}

template <typename T>
Tensor<T> BatchNorm1d<T>::infer(const Tensor<T>& input) const {
    return batchnorm1d_infer(input, state_);
}

template <typename T>
Tensor<T> BatchNorm1d<T>::backward(const Tensor<T>& upstream) {
    auto g = batchnorm1d_backward(upstream, ctx_);
    gamma_grad_ = std::move(g.gamma);
    beta_grad_ = std::move(g.beta);
    return std::move(g.input);
}

template <typename T>
void BatchNorm1d<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + "gamma", &state_.gamma, &gamma_grad_});
    out.push_back({prefix + "beta", &state_.beta, &beta_grad_});
}

template <typename T>
void BatchNorm1d<T>::collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
    out.push_back({prefix + "running_mean", &state_.running_mean});
    out.push_back({prefix + "running_var", &state_.running_var});
}

template <typename T>
void BatchNorm1d<T>::initialize(Rng&) {
    state_.gamma.fill(T{1});
    state_.beta.fill(T{0});
    state_.running_mean.fill(T{0});
    state_.running_var.fill(T{1});
}

template <typename T>
json BatchNorm1d<T>::describe() const {
    return {{"type", "batchnorm1d"},
            {"channels", state_.gamma.size()},
            {"momentum", state_.momentum},
            {"eps", state_.eps}};
}

template <typename T>
std::unique_ptr<Layer<T>> BatchNorm1d<T>::clone() const {
    return std::make_unique<BatchNorm1d>(*this);
}

// ---- stateless layers ---------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& input) {
    output_ = relu_forward(input);
    valid_ = true;
    return output_;
}

template <typename T>
Tensor<T> ReLU<T>::infer(const Tensor<T>& input) const {
    return relu_forward(input);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& upstream) {
    if (!valid_) throw UsageError("relu: backward called without a forward context");
    return relu_backward(upstream, output_);
}

template <typename T>
json ReLU<T>::describe() const {
    return {{"type", "relu"}};
}

template <typename T>
std::unique_ptr<Layer<T>> ReLU<T>::clone() const {
    return std::make_unique<ReLU>();
}

template <typename T>
MaxPool1d<T>::MaxPool1d(std::size_t kernel) : kernel_(kernel) {
    if (kernel == 0) throw InvalidInput("MaxPool1d: kernel must be positive");
}

template <typename T>
Tensor<T> MaxPool1d<T>::forward(const Tensor<T>& input) {
    return maxpool1d_forward(input, kernel_, &ctx_);
}

template <typename T>
Tensor<T> MaxPool1d<T>::infer(const Tensor<T>& input) const {
    return maxpool1d_forward<T>(input, kernel_);
}

template <typename T>
Tensor<T> MaxPool1d<T>::backward(const Tensor<T>& upstream) {
    return maxpool1d_backward(upstream, ctx_);
}

template <typename T>
json MaxPool1d<T>::describe() const {
    return {{"type", "maxpool1d"}, {"kernel", kernel_}};
}

template <typename T>
std::unique_ptr<Layer<T>> MaxPool1d<T>::clone() const {
    return std::make_unique<MaxPool1d>(kernel_);
}

template <typename T>
Tensor<T> Upsample2<T>::forward(const Tensor<T>& input) {
    return upsample2_forward(input);
}

template <typename T>
Tensor<T> Upsample2<T>::infer(const Tensor<T>& input) const {
    return upsample2_forward(input);
}

template <typename T>
Tensor<T> Upsample2<T>::backward(const Tensor<T>& upstream) {
    return upsample2_backward(upstream);
}

template <typename T>
json Upsample2<T>::describe() const {
    return {{"type", "upsample2"}};
}

template <typename T>
std::unique_ptr<Layer<T>> Upsample2<T>::clone() const {
    return std::make_unique<Upsample2>();
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& input) {
    input_shape_ = input.shape();
    return infer(input);
}

template <typename T>
Tensor<T> Flatten<T>::infer(const Tensor<T>& input) const {
    if (input.rank() < 2) throw InvalidInput("flatten: need at least rank 2, got " + shape_string(input.shape()));
    return input.reshaped({input.dim(0), input.size() / input.dim(0)});
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& upstream) {
    if (input_shape_.empty()) throw UsageError("flatten: backward called without a forward context");
    return upstream.reshaped(input_shape_);
}

template <typename T>
json Flatten<T>::describe() const {
    return {{"type", "flatten"}};
}

template <typename T>
std::unique_ptr<Layer<T>> Flatten<T>::clone() const {
    return std::make_unique<Flatten>();
}

// ---- GlobalAvgPool1d ------------------------------------------------------------

template <typename T>
Tensor<T> GlobalAvgPool1d<T>::forward(const Tensor<T>& input) {
    Tensor<T> out = infer(input);
    input_shape_ = input.shape();
    return out;
}

template <typename T>
Tensor<T> GlobalAvgPool1d<T>::infer(const Tensor<T>& input) const {
    require_rank(input, 3, "global_avg_pool1d");
    const std::size_t rows = input.dim(0) * input.dim(1), L = input.dim(2);
    if (L == 0) throw InvalidInput("global_avg_pool1d: empty time axis");
    Tensor<T> out({input.dim(0), input.dim(1)});
    for (std::size_t r = 0; r < rows; ++r) {
        const T* x = input.data() + r * L;
        double acc = 0.0;
        for (std::size_t i = 0; i < L; ++i) acc += x[i];
        out.data()[r] = static_cast<T>(acc / static_cast<double>(L));
    }
    return out;
}

template <typename T>
Tensor<T> GlobalAvgPool1d<T>::backward(const Tensor<T>& upstream) {
    if (input_shape_.empty()) throw UsageError("global_avg_pool1d: backward called without a forward context");
    if (upstream.shape() != Shape{input_shape_[0], input_shape_[1]}) {
        throw InvalidInput("global_avg_pool1d: upstream shape " + shape_string(upstream.shape()) + " does not match input " +
                           shape_string(input_shape_));
    }
    const std::size_t L = input_shape_[2];
    Tensor<T> grad(input_shape_);
    for (std::size_t r = 0; r < upstream.size(); ++r) {
        const T g = upstream.data()[r] / static_cast<T>(L);
        std::fill_n(grad.data() + r * L, L, g);
    }
    return grad;
}

template <typename T>
json GlobalAvgPool1d<T>::describe() const {
    return {{"type", "global_avg_pool1d"}};
}

template <typename T>
std::unique_ptr<Layer<T>> GlobalAvgPool1d<T>::clone() const {
    return std::make_unique<GlobalAvgPool1d>();
}

// ---- Sequential -----------------------------------------------------------------

template <typename T>
Sequential<T>::Sequential(const Sequential& other) : Layer<T>() {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::add(std::unique_ptr<Layer<T>> layer) {
    if (!layer) throw InvalidInput("Sequential::add: null layer");
    layers_.push_back(std::move(layer));
    return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& input) {
    if (layers_.empty()) return input;
    Tensor<T> x = layers_.front()->forward(input);
    for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->forward(x);
    return x;
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& input) const {
    if (layers_.empty()) return input;
    Tensor<T> x = layers_.front()->infer(input);
    for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->infer(x);
    return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& upstream) {
    if (layers_.empty()) return upstream;
    Tensor<T> g = layers_.back()->backward(upstream);
    for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
    return g;
}

template <typename T>
void Sequential<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect_params(prefix + std::to_string(i) + ".", out);
}

template <typename T>
void Sequential<T>::collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect_buffers(prefix + std::to_string(i) + ".", out);
    }
}

template <typename T>
void Sequential<T>::initialize(Rng& rng) {
    for (auto& l : layers_) l->initialize(rng);
}

template <typename T>
json Sequential<T>::describe() const {
    json layers = json::array();
    for (const auto& l : layers_) layers.push_back(l->describe());
    return {{"type", "sequential"}, {"layers", std::move(layers)}};
}

template <typename T>
std::unique_ptr<Layer<T>> Sequential<T>::clone() const {
    return std::make_unique<Sequential>(*this);
}

template <typename T>
Sequential<T> conv_block(std::size_t in_channels, std::size_t out_channels, std::size_t kernel) {
    Sequential<T> s;
    s.add(std::make_unique<Conv1d<T>>(in_channels, out_channels, kernel, 1, kernel / 2));
    s.add(std::make_unique<BatchNorm1d<T>>(out_channels));
    s.add(std::make_unique<ReLU<T>>());
    return s;
}

// ---- channel concat ---------------------------------------------------------------

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 3, "concat_channels");
    require_rank(b, 3, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
        throw InvalidInput("concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    const std::size_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), L = a.dim(2);
    Tensor<T> out({B, Ca + Cb, L});
    for (std::size_t n = 0; n < B; ++n) {
        std::memcpy(out.row(n, 0), a.row(n, 0), Ca * L * sizeof(T));
        std::memcpy(out.row(n, Ca), b.row(n, 0), Cb * L * sizeof(T));
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t channels) {
    require_rank(x, 3, "split_channels");
    if (channels > x.dim(1)) throw InvalidInput("split_channels: split point beyond channel count");
    const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    Tensor<T> a({B, channels, L}), b({B, C - channels, L});
    for (std::size_t n = 0; n < B; ++n) {
        std::memcpy(a.row(n, 0), x.row(n, 0), channels * L * sizeof(T));
        std::memcpy(b.row(n, 0), x.row(n, channels), (C - channels) * L * sizeof(T));
    }
    return {std::move(a), std::move(b)};
}

// ---- UNet ---------------------------------------------------------------------------

void UNetConfig::validate() const {
    if (depth < 1 || depth > 10) throw InvalidInput("UNet: depth must lie in [1, 10]");
    if (base_channels == 0 || in_channels == 0 || out_channels == 0) {
        throw InvalidInput("UNet: channel counts must be positive");
    }
    if (kernel % 2 == 0) throw InvalidInput("UNet: kernel must be odd");
    if (residual && in_channels != out_channels) {
        throw InvalidInput("UNet: residual output needs in_channels == out_channels");
    }
}

void to_json(json& j, const UNetConfig& c) {
    j = {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"depth", c.depth},
         {"base_channels", c.base_channels}, {"kernel", c.kernel}, {"residual", c.residual}};
}

void from_json(const json& j, UNetConfig& c) {
    UNetConfig d;
    c.in_channels = j.value("in_channels", d.in_channels);
    c.out_channels = j.value("out_channels", d.out_channels);
    c.depth = j.value("depth", d.depth);
    c.base_channels = j.value("base_channels", d.base_channels);
    c.kernel = j.value("kernel", d.kernel);
    c.residual = j.value("residual", d.residual);
}

template <typename T>
UNet<T>::UNet(const UNetConfig& config)
    : config_((config.validate(), config)), head_(config.base_channels, config.out_channels, 1) {
    const std::size_t w = config_.base_channels;
    for (std::size_t l = 0; l < config_.depth; ++l) {
        encoders_.push_back(conv_block<T>(l == 0 ? config_.in_channels : w, w, config_.kernel));
        decoders_.push_back(conv_block<T>(2 * w, w, config_.kernel));
    }
    bottleneck_ = conv_block<T>(w, w, config_.kernel);
}

template <typename T>
UNet<T>::UNet(const UNet& other)
    : Layer<T>(), config_(other.config_), encoders_(other.encoders_), bottleneck_(other.bottleneck_),
      decoders_(other.decoders_), head_(other.head_) {}

template <typename T>
void UNet<T>::check_length(const Tensor<T>& input) const {
    require_rank(input, 3, "unet input");
    if (input.dim(1) != config_.in_channels) throw InvalidInput("unet: wrong input channel count");
    const std::size_t m = config_.length_multiple();
    if (input.dim(2) == 0 || input.dim(2) % m != 0) {
        throw InvalidInput("unet: input length " + std::to_string(input.dim(2)) + " is not a positive multiple of " +
                           std::to_string(m));
    }
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& input) {
    check_length(input);
    const std::size_t D = config_.depth;
    pools_.assign(D, MaxPoolContext{});
    std::vector<Tensor<T>> skips(D);
    Tensor<T> h = input;
    for (std::size_t l = 0; l < D; ++l) {
        skips[l] = encoders_[l].forward(h);
        h = maxpool1d_forward(skips[l], 2, &pools_[l]);
    }
    h = bottleneck_.forward(h);
    for (std::size_t l = D; l-- > 0;) h = decoders_[l].forward(concat_channels(upsample2_forward(h), skips[l]));
    Tensor<T> out = head_.forward(h);
    if (config_.residual) add_in_place(out, input);
    return out;
}

template <typename T>
Tensor<T> UNet<T>::infer(const Tensor<T>& input) const {
    check_length(input);
    const std::size_t D = config_.depth;
    std::vector<Tensor<T>> skips(D);
    Tensor<T> h = input;
    for (std::size_t l = 0; l < D; ++l) {
        skips[l] = encoders_[l].infer(h);
        h = maxpool1d_forward<T>(skips[l], 2);
    }
    h = bottleneck_.infer(h);
    for (std::size_t l = D; l-- > 0;) h = decoders_[l].infer(concat_channels(upsample2_forward(h), skips[l]));
    Tensor<T> out = head_.infer(h);
    if (config_.residual) add_in_place(out, input);
    return out;
}

template <typename T>
Tensor<T> UNet<T>::backward(const Tensor<T>& upstream) {
    const std::size_t D = config_.depth;
    if (pools_.size() != D) throw UsageError("unet: backward called without a forward context");
    Tensor<T> g = head_.backward(upstream);
    std::vector<Tensor<T>> skip_grads(D);
    for (std::size_t l = 0; l < D; ++l) {
        auto [up, skip] = split_channels(decoders_[l].backward(g), config_.base_channels);
        skip_grads[l] = std::move(skip);
        g = upsample2_backward(up);
    }
    g = bottleneck_.backward(g);
    for (std::size_t l = D; l-- > 0;) {
        g = maxpool1d_backward(g, pools_[l]);
        add_in_place(g, skip_grads[l]);
        g = encoders_[l].backward(g);
    }
    if (config_.residual) add_in_place(g, upstream);
    return g;
}

template <typename T>
void UNet<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (std::size_t l = 0; l < encoders_.size(); ++l) encoders_[l].collect_params(prefix + "enc" + std::to_string(l) + ".", out);
    bottleneck_.collect_params(prefix + "bottleneck.", out);
    for (std::size_t l = 0; l < decoders_.size(); ++l) decoders_[l].collect_params(prefix + "dec" + std::to_string(l) + ".", out);
    head_.collect_params(prefix + "head.", out);
}

template <typename T>
void UNet<T>::collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
    for (std::size_t l = 0; l < encoders_.size(); ++l) encoders_[l].collect_buffers(prefix + "enc" + std::to_string(l) + ".", out);
    bottleneck_.collect_buffers(prefix + "bottleneck.", out);
    for (std::size_t l = 0; l < decoders_.size(); ++l) decoders_[l].collect_buffers(prefix + "dec" + std::to_string(l) + ".", out);
}

template <typename T>
void UNet<T>::initialize(Rng& rng) {
    for (auto& e : encoders_) e.initialize(rng);
    bottleneck_.initialize(rng);
    for (auto& d : decoders_) d.initialize(rng);
    head_.initialize(rng);
    if (config_.residual) {
        // Start as the identity map so early training refines the mixture
        // instead of first learning to reproduce it.
        head_.weight().fill(T{0});
    }
}

template <typename T>
json UNet<T>::describe() const {
    return {{"type", "unet"}, {"config", config_}};
}

template <typename T>
std::unique_ptr<Layer<T>> UNet<T>::clone() const {
    return std::make_unique<UNet>(*this);
}

// ---- factory ----------------------------------------------------------------------

template <typename T>
std::unique_ptr<Layer<T>> build_layer(const json& d) {
    try {
        const std::string type = d.at("type").get<std::string>();
        if (type == "conv1d") {
            return std::make_unique<Conv1d<T>>(d.at("in_channels").get<std::size_t>(),
                                               d.at("out_channels").get<std::size_t>(), d.at("kernel").get<std::size_t>(),
                                               d.at("stride").get<std::size_t>(), d.at("padding").get<std::size_t>());
        }
        if (type == "dense") {
            return std::make_unique<Dense<T>>(d.at("in_features").get<std::size_t>(),
                                              d.at("out_features").get<std::size_t>());
        }
        if (type == "batchnorm1d") {
            return std::make_unique<BatchNorm1d<T>>(d.at("channels").get<std::size_t>(), d.at("momentum").get<double>(),
                                                    d.at("eps").get<double>());
        }
        if (type == "relu") return std::make_unique<ReLU<T>>();
        if (type == "maxpool1d") return std::make_unique<MaxPool1d<T>>(d.at("kernel").get<std::size_t>());
        if (type == "upsample2") return std::make_unique<Upsample2<T>>();
        if (type == "flatten") return std::make_unique<Flatten<T>>();
        if (type == "global_avg_pool1d") return std::make_unique<GlobalAvgPool1d<T>>();
        if (type == "sequential") {
            auto s = std::make_unique<Sequential<T>>();
            for (const auto& child : d.at("layers")) s->add(build_layer<T>(child));
            return s;
        }
        if (type == "unet") return std::make_unique<UNet<T>>(d.at("config").get<UNetConfig>());
        throw FormatError("unknown layer type '" + type + "'");
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad layer descriptor: ") + e.what());
    } catch (const InvalidInput& e) {
        throw FormatError(std::string("bad layer descriptor: ") + e.what());
    }
}

#define SICU_INSTANTIATE(T)                                                                   \
    template class Layer<T>;                                                                  \
    template class Conv1d<T>;                                                                 \
    template class Dense<T>;                                                                  \
    template class BatchNorm1d<T>;                                                            \
    template class ReLU<T>;                                                                   \
    template class MaxPool1d<T>;                                                              \
    template class Upsample2<T>;                                                              \
    template class Flatten<T>;                                                                \
    template class GlobalAvgPool1d<T>;                                                        \
    template class Sequential<T>;                                                             \
    template class UNet<T>;                                                                   \
    template Sequential<T> conv_block<T>(std::size_t, std::size_t, std::size_t);              \
    template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                   \
    template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, std::size_t);   \
    template std::unique_ptr<Layer<T>> build_layer<T>(const json&);

SICU_INSTANTIATE(float)
SICU_INSTANTIATE(double)

#undef SICU_INSTANTIATE

}  // namespace sicu::nn
