#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"

#include "sicu/nn/optim.hpp"

namespace sicu::nn {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    bool cosine_decay = true;  // lr_e = lr * (1 + cos(pi e / epochs)) / 2

    void validate() const;
    double lr_at(int epoch) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Classification uses `labels` (softmax cross-entropy); regression uses
/// `targets` (mean squared error). Exactly one of the two must be set.
template <typename T>
struct TrainingSet {
    Tensor<T> inputs;          // [N, ...]
    std::vector<int> labels;   // N class indices
    Tensor<T> targets;         // [N, ...] shaped like the model output

    std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.dim(0); }
    bool is_classification() const { return !labels.empty(); }
};

struct TrainHistory {
    std::vector<double> epoch_loss;  // mean training loss per epoch
    std::uint64_t steps = 0;
    std::uint64_t skipped_batches = 0;  // trailing batches of one example (batch norm needs two)
};

using EpochCallback = std::function<void(int epoch, double loss, double lr)>;

/// Minibatch Adam over a seeded per-epoch shuffle. Parameters are used as
/// found (initialize them first). The result depends only on the model
/// state, data and config.
template <typename T>
TrainHistory train_epochs(Layer<T>& model, const TrainingSet<T>& data, const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

/// Batched inference (infer path) over axis 0 of `inputs`.
template <typename T>
Tensor<T> predict(const Layer<T>& model, const Tensor<T>& inputs, std::size_t batch_size = 32);

/// Row-wise argmax, lowest index on ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

template <typename T>
double accuracy(const Layer<T>& model, const Tensor<T>& inputs, std::span<const int> labels,
                std::size_t batch_size = 32);

}  // namespace sicu::nn
