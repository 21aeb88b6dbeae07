#pragma once

#include <complex>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "json.hpp"

#include "sicu/dsp.hpp"
#include "sicu/nn/checkpoint.hpp"
#include "sicu/nn/layers.hpp"

namespace sicu {

inline constexpr std::size_t kClassifierInputLength = 8073;

struct ConvBlockSpec {
    std::size_t channels = 16;
    std::size_t kernel = 7;
    std::size_t pool = 4;
};

/// Flatten keeps time positions; GlobalAverage reduces each channel to its
/// mean, which suits frame-level statistics such as power ratios.
enum class ClassifierHead { Flatten, GlobalAverage };

const char* head_name(ClassifierHead h);
ClassifierHead head_from_name(const std::string& name);  // throws InvalidInput

struct ClassifierSpec {
    std::size_t in_channels = 2;
    std::size_t input_length = kClassifierInputLength;
    std::vector<ConvBlockSpec> blocks{{16, 7, 4}, {32, 7, 4}, {64, 7, 4}, {64, 7, 4}};
    std::size_t hidden = 128;
    std::size_t num_classes = 3;
    ClassifierHead head = ClassifierHead::Flatten;

    /// Length after the conv/pool stack; throws InvalidInput if it reaches 0.
    std::size_t feature_length() const;
};

void to_json(nlohmann::json& j, const ClassifierSpec& s);
void from_json(const nlohmann::json& j, ClassifierSpec& s);

/// conv(k, same) -> BN -> ReLU -> maxpool per block, flatten (or global
/// average), dense hidden, ReLU, dense num_classes. Parameters are Kaiming-initialized from `seed`.
std::unique_ptr<nn::Sequential<float>> build_classifier(const ClassifierSpec& spec, std::uint64_t seed);

/// Default topology; num_classes must be 2, 3 or 21.
std::unique_ptr<nn::Sequential<float>> build_classifier(std::size_t num_classes, std::uint64_t seed = 1);

using ComplexF = std::complex<float>;

/// Network input for one frame: the frame scaled to unit average power,
/// right-padded with zeros or cropped to `length`, as channels I, Q,
/// followed by one constant channel per entry of `side_inputs`.
/// An all-zero frame is passed through unscaled.
void write_network_input(std::span<const ComplexF> frame, std::span<const float> side_inputs, std::size_t length,
                         float* dst);

/// [frames.size(), 2 + side_inputs, length] batch built with write_network_input.
nn::Tensor<float> make_network_batch(std::span<const std::span<const ComplexF>> frames,
                                     std::span<const float> side_inputs, std::size_t length);

struct Classification {
    std::vector<double> posteriors;
    int decision = 0;  // argmax, lowest index on ties
};

Classification classification_from_logits(std::span<const float> logits);

/// Classifies one frame (pad/crop to the model's input length).
Classification classify(const nn::Layer<float>& model, std::span<const ComplexF> frame,
                        std::span<const float> side_inputs = {}, std::size_t length = kClassifierInputLength);
Classification classify(const nn::Layer<float>& model, const IqFrame& frame, std::span<const float> side_inputs = {},
                        std::size_t length = kClassifierInputLength);

/// Batched form; one result per frame, identical to calling classify() on each.
std::vector<Classification> classify_batch(const nn::Layer<float>& model,
                                           std::span<const std::span<const ComplexF>> frames,
                                           std::span<const float> side_inputs = {},
                                           std::size_t length = kClassifierInputLength, std::size_t batch_size = 32);

/// Side-input encodings for the method model: predicted SPS / 32 and
/// SIR / 10 dB.
float sps_side_input(int sps);
float sir_side_input(double sir_db);

// ---- U-Net denoiser --------------------------------------------------------------

std::unique_ptr<nn::UNet<float>> build_unet(const nn::UNetConfig& config, std::uint64_t seed);

/// Length the U-Net actually sees for an input of `length` samples.
std::size_t unet_padded_length(const nn::UNetConfig& config, std::size_t length);

/// Scale applied to a mixture before it enters any network (1/sqrt(power)).
double input_scale(std::span<const ComplexF> frame);

/// Estimate of the SOI waveform: scale the mixture to unit power, pad to a
/// multiple of 2^depth, run the U-Net, crop, undo the scale. Throws
/// InvalidInput if the frame is shorter than 2^depth.
IqFrame unet_denoise(const nn::UNet<float>& model, const IqFrame& mixture);

/// Training pair tensors for one example, with the same normalization and
/// padding as unet_denoise. `clean` is the clean SOI waveform.
void write_unet_pair(const nn::UNetConfig& config, std::span<const ComplexF> mixture, std::span<const Sample> clean,
                     float* input_dst, float* target_dst);

/// Matched filter plus hard decision on a denoised SOI estimate, over the
/// labeled SOI symbols of the frame.
Bits recover_bits_from_denoised(const IqFrame& estimate, int soi_sps, const PulseShape& shape);

/// U-Net bank keyed by interferer SPS. Entries load lazily from their
/// checkpoints; concurrent first access is safe and loads exactly once.
class ModelBank {
public:
    struct Entry {
        int sps = 0;
        std::filesystem::path checkpoint;
        nlohmann::json training;  // training-config echo
    };

    ModelBank() = default;
    explicit ModelBank(std::vector<Entry> entries);
    ModelBank(ModelBank&&) noexcept = default;
    ModelBank& operator=(ModelBank&&) noexcept = default;

    /// Reads the bank manifest; checkpoint paths are resolved relative to
    /// the manifest's directory.
    static ModelBank from_manifest(const std::filesystem::path& manifest);

    /// Adds an already-trained model; its checkpoint path may be empty.
    void insert(int sps, std::shared_ptr<const nn::UNet<float>> model, nlohmann::json training = {});

    /// Writes {"entries": [{sps, checkpoint, training}]} with checkpoint
    /// paths relative to the manifest's directory.
    void write_manifest(const std::filesystem::path& manifest) const;

    bool contains(int sps) const;
    /// Throws ConfigError naming the missing SPS values.
    void require_complete(std::span<const int> sps_set) const;
    std::vector<int> keys() const;

    /// Throws ConfigError for an unknown SPS and MissingModel / FormatError
    /// when the checkpoint cannot be loaded.
    const nn::UNet<float>& get(int sps) const;

private:
    struct Slot {
        Entry entry;
        mutable std::once_flag once;
        mutable std::shared_ptr<const nn::UNet<float>> model;
        mutable std::exception_ptr error;
    };
    std::map<int, std::unique_ptr<Slot>> slots_;
};

/// Loads a checkpoint and checks it is a U-Net.
std::shared_ptr<const nn::UNet<float>> load_unet(const std::filesystem::path& path);

/// Loads a checkpoint holding a classifier with `num_classes` outputs.
std::shared_ptr<const nn::Layer<float>> load_classifier(const std::filesystem::path& path, std::size_t num_classes);

}  // namespace sicu
