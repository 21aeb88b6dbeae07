#include "sicu/study.hpp"

#include "sicu/error.hpp"
#include "sicu/rng.hpp"

namespace sicu {

namespace {

nn::TrainingSet<float> waveform_set(const Dataset& dataset, std::size_t side_channels) {
    if (dataset.examples.empty()) throw InvalidInput("training set: dataset is empty");
    nn::TrainingSet<float> set;
    set.inputs = nn::Tensor<float>({dataset.examples.size(), 2 + side_channels, kClassifierInputLength});
    return set;
}

std::size_t example_stride(const nn::Tensor<float>& t) { return t.dim(1) * t.dim(2); }

}  // namespace

nn::TrainingSet<float> sps_training_set(const Dataset& dataset) {
    auto set = waveform_set(dataset, 0);
    const std::size_t stride = example_stride(set.inputs);
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const auto& ex = dataset.examples[i];
        write_network_input(ex.mixture, {}, kClassifierInputLength, set.inputs.data() + i * stride);
        set.labels.push_back(ex.sps_class);
    }
    return set;
}

nn::TrainingSet<float> sir_training_set(const Dataset& dataset) {
    auto set = waveform_set(dataset, 0);
    const std::size_t stride = example_stride(set.inputs);
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const auto& ex = dataset.examples[i];
        write_network_input(ex.mixture, {}, kClassifierInputLength, set.inputs.data() + i * stride);
        set.labels.push_back(ex.sir_class);
    }
    return set;
}

nn::TrainingSet<float> method_training_set(const Dataset& dataset, const MethodGroundTruth& truth,
                                           const PipelineOptions& options) {
    if (truth.outcomes.size() != dataset.examples.size()) {
        throw ConfigError("method training set: " + std::to_string(truth.outcomes.size()) + " labels for " +
                          std::to_string(dataset.examples.size()) + " examples");
    }
    const auto& sc = dataset.manifest.config;
    auto set = waveform_set(dataset, options.method_input_channels() - 2);
    const std::size_t stride = example_stride(set.inputs);
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const auto& ex = dataset.examples[i];
        const auto& o = truth.outcomes[i];
        if (o.example_id != ex.example_id) throw ConfigError("method training set: labels are not aligned with the dataset");
        const auto side = method_side_inputs(options, sc.interferer_sps_set.at(ex.sps_class), sc.sir_bins_db.at(ex.sir_class));
        write_network_input(ex.mixture, side, kClassifierInputLength, set.inputs.data() + i * stride);
        set.labels.push_back(static_cast<int>(o.label));
    }
    return set;
}

nn::TrainingSet<float> unet_training_set(const Dataset& dataset, int sps, const nn::UNetConfig& config) {
    const auto& sc = dataset.manifest.config;
    const int cls = sc.sps_class_of(sps);
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        if (dataset.examples[i].sps_class == cls) picked.push_back(i);
    }
    if (picked.empty()) throw InvalidInput("unet training set: no examples with interferer SPS " + std::to_string(sps));
    const std::size_t padded = unet_padded_length(config, static_cast<std::size_t>(sc.frame_len));
    nn::TrainingSet<float> set;
    set.inputs = nn::Tensor<float>({picked.size(), 2, padded});
    set.targets = nn::Tensor<float>({picked.size(), 2, padded});
    for (std::size_t k = 0; k < picked.size(); ++k) {
        const auto& ex = dataset.examples[picked[k]];
        const MixtureParts parts = regenerate_parts(sc, ex.example_id);
        write_unet_pair(config, ex.mixture, parts.soi.samples, set.inputs.row(k, 0), set.targets.row(k, 0));
    }
    return set;
}

std::unique_ptr<nn::Sequential<float>> train_classifier(const nn::TrainingSet<float>& set, ClassifierSpec spec,
                                                        const nn::TrainConfig& train,
                                                        const nn::EpochCallback& on_epoch) {
    if (set.inputs.rank() != 3) throw InvalidInput("train_classifier: inputs must be [N, C, L]");
    spec.in_channels = set.inputs.dim(1);
    spec.input_length = set.inputs.dim(2);
    auto model = build_classifier(spec, train.seed);
    nn::train_epochs<float>(*model, set, train, on_epoch);
    return model;
}

std::map<int, std::shared_ptr<nn::UNet<float>>> train_unet_bank(const Dataset& dataset, const nn::UNetConfig& config,
                                                                const nn::TrainConfig& train,
                                                                const EpochLogger& on_epoch) {
    std::map<int, std::shared_ptr<nn::UNet<float>>> bank;
    for (int sps : dataset.manifest.config.interferer_sps_set) {
        const auto set = unet_training_set(dataset, sps, config);
        nn::TrainConfig tc = train;
        tc.seed = derive_seed(train.seed, static_cast<std::uint64_t>(sps));
        std::shared_ptr<nn::UNet<float>> model = build_unet(config, tc.seed);
        nn::train_epochs<float>(*model, set, tc, [&](int e, double loss, double lr) {
            if (on_epoch) on_epoch(sps, e, loss, lr);
        });
        bank.emplace(sps, std::move(model));
    }
    return bank;
}

}  // namespace sicu
