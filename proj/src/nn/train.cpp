#include "sicu/nn/train.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "sicu/error.hpp"
#include "sicu/rng.hpp"

namespace sicu::nn {

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidInput("train: epochs must be >= 1");
    if (batch_size < 1) throw InvalidInput("train: batch size must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInput("train: learning rate must be finite and >= 0");
}

double TrainConfig::lr_at(int epoch) const {
    if (!cosine_decay) return lr;
    return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"seed", c.seed},
         {"cosine_decay", c.cosine_decay}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr = j.value("lr", d.lr);
    c.seed = j.value("seed", d.seed);
    c.cosine_decay = j.value("cosine_decay", d.cosine_decay);
}

template <typename T>
TrainHistory train_epochs(Layer<T>& model, const TrainingSet<T>& data, const TrainConfig& config,
                          const EpochCallback& on_epoch) {
    config.validate();
    const std::size_t n = data.size();
    if (n == 0) throw InvalidInput("train: empty dataset");
    const bool classify = data.is_classification();
    if (classify && data.labels.size() != n) throw InvalidInput("train: label count does not match inputs");
    if (!classify && (data.targets.rank() == 0 || data.targets.dim(0) != n)) {
        throw InvalidInput("train: regression targets missing or mismatched");
    }

    auto params = model.params();
    AdamState<T> adam;
    Rng rng(derive_seed(config.seed, "shuffle"));
    std::vector<std::size_t> order(n);
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    TrainHistory history;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        adam.config.lr = config.lr_at(epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t count = std::min(bs, n - start);
            if (count == 1 && n > 1) {
                ++history.skipped_batches;
                continue;
            }
            std::span<const std::size_t> idx(order.data() + start, count);
            const Tensor<T> x = gather_rows(data.inputs, idx);
            const Tensor<T> out = model.forward(x);
            LossResult<T> loss;
            if (classify) {
                std::vector<int> labels(count);
                for (std::size_t k = 0; k < count; ++k) labels[k] = data.labels[idx[k]];
                loss = softmax_cross_entropy(out, labels);
            } else {
                loss = mse_loss(out, gather_rows(data.targets, idx));
            }
            if (!std::isfinite(loss.loss)) throw std::runtime_error("train: loss became non-finite");
            model.backward(loss.gradient);
            adam_step(params, adam);
            ++history.steps;
            loss_sum += loss.loss * static_cast<double>(count);
            seen += count;
        }
        const double mean_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        history.epoch_loss.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch, mean_loss, adam.config.lr);
    }
    return history;
}

template <typename T>
Tensor<T> predict(const Layer<T>& model, const Tensor<T>& inputs, std::size_t batch_size) {
    if (inputs.rank() == 0 || inputs.dim(0) == 0) throw InvalidInput("predict: empty input");
    if (batch_size == 0) batch_size = 1;
    const std::size_t n = inputs.dim(0);
    Tensor<T> result;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t count = std::min(batch_size, n - start);
        idx.resize(count);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor<T> out = model.infer(gather_rows(inputs, idx));
        if (start == 0) {
            Shape shape = out.shape();
            shape[0] = n;
            result = Tensor<T>(shape);
        }
        const std::size_t stride = out.size() / count;
        std::copy(out.data(), out.data() + out.size(), result.data() + start * stride);
    }
    return result;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
    require_rank(logits, 2, "argmax_rows");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    std::vector<int> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        const T* row = logits.data() + r * k;
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

template <typename T>
double accuracy(const Layer<T>& model, const Tensor<T>& inputs, std::span<const int> labels,
                std::size_t batch_size) {
    const auto pred = argmax_rows(predict(model, inputs, batch_size));
    if (pred.size() != labels.size()) throw InvalidInput("accuracy: label count does not match inputs");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

#define SICU_INSTANTIATE(T)                                                                                   \
    template TrainHistory train_epochs(Layer<T>&, const TrainingSet<T>&, const TrainConfig&,                  \
                                       const EpochCallback&);                                                 \
    template Tensor<T> predict(const Layer<T>&, const Tensor<T>&, std::size_t);                               \
    template std::vector<int> argmax_rows(const Tensor<T>&);                                                  \
    template double accuracy(const Layer<T>&, const Tensor<T>&, std::span<const int>, std::size_t);

SICU_INSTANTIATE(float)
SICU_INSTANTIATE(double)

#undef SICU_INSTANTIATE

}  // namespace sicu::nn
