#pragma once

#include <map>
#include <memory>

#include "sicu/models.hpp"
#include "sicu/nn/train.hpp"
#include "sicu/pipeline.hpp"
#include "sicu/scenario.hpp"

namespace sicu {

/// I/Q inputs labeled with the interferer SPS class.
nn::TrainingSet<float> sps_training_set(const Dataset& dataset);

/// I/Q inputs labeled with the nearest SIR bin.
nn::TrainingSet<float> sir_training_set(const Dataset& dataset);

/// I/Q plus the true SPS (and SIR bin center when enabled) as side
/// channels, labeled with the Stage-3 ground truth.
nn::TrainingSet<float> method_training_set(const Dataset& dataset, const MethodGroundTruth& truth,
                                           const PipelineOptions& options);

/// Mixture -> clean SOI pairs for every example whose interferer has `sps`.
nn::TrainingSet<float> unet_training_set(const Dataset& dataset, int sps, const nn::UNetConfig& config);

/// Builds a default-topology classifier for `set` (class count and input
/// channels taken from `spec`) and trains it with `train`.
std::unique_ptr<nn::Sequential<float>> train_classifier(const nn::TrainingSet<float>& set, ClassifierSpec spec,
                                                        const nn::TrainConfig& train,
                                                        const nn::EpochCallback& on_epoch = {});

/// One U-Net per interferer SPS of the dataset. The per-SPS seed is
/// derived from train.seed so models do not share an initialization.
using EpochLogger = std::function<void(int sps, int epoch, double loss, double lr)>;
std::map<int, std::shared_ptr<nn::UNet<float>>> train_unet_bank(const Dataset& dataset, const nn::UNetConfig& config,
                                                                const nn::TrainConfig& train,
                                                                const EpochLogger& on_epoch = {});

}  // namespace sicu
