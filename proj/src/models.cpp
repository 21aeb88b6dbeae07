#include "sicu/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sicu/error.hpp"
#include "sicu/rng.hpp"
#include "sicu/scenario.hpp"
#include "sicu/nn/train.hpp"

namespace sicu {

using nlohmann::json;

std::size_t ClassifierSpec::feature_length() const {
    std::size_t len = input_length;
    for (const auto& b : blocks) {
        if (b.pool == 0 || b.kernel % 2 == 0) throw InvalidInput("classifier: pool must be >= 1 and kernel odd");
        len /= b.pool;
        if (len == 0) throw InvalidInput("classifier: input too short for the pooling stack");
    }
    return len;
}

const char* head_name(ClassifierHead h) { return h == ClassifierHead::Flatten ? "flatten" : "global_average"; }

ClassifierHead head_from_name(const std::string& name) {
    if (name == "flatten") return ClassifierHead::Flatten;
    if (name == "global_average") return ClassifierHead::GlobalAverage;
    throw InvalidInput("unknown classifier head '" + name + "' (flatten or global_average)");
}

void to_json(json& j, const ClassifierSpec& s) {
    json blocks = json::array();
    for (const auto& b : s.blocks) blocks.push_back({{"channels", b.channels}, {"kernel", b.kernel}, {"pool", b.pool}});
    j = {{"in_channels", s.in_channels}, {"input_length", s.input_length}, {"blocks", blocks},
         {"hidden", s.hidden}, {"num_classes", s.num_classes}, {"head", head_name(s.head)}};
}

void from_json(const json& j, ClassifierSpec& s) {
    ClassifierSpec d;
    s.in_channels = j.value("in_channels", d.in_channels);
    s.input_length = j.value("input_length", d.input_length);
    s.hidden = j.value("hidden", d.hidden);
    s.num_classes = j.value("num_classes", d.num_classes);
    s.head = j.contains("head") ? head_from_name(j.at("head").get<std::string>()) : d.head;
    s.blocks.clear();
    if (j.contains("blocks")) {
        for (const auto& b : j.at("blocks")) {
            s.blocks.push_back({b.at("channels").get<std::size_t>(), b.at("kernel").get<std::size_t>(),
                                b.at("pool").get<std::size_t>()});
        }
    } else {
        s.blocks = d.blocks;
    }
}

std::unique_ptr<nn::Sequential<float>> build_classifier(const ClassifierSpec& spec, std::uint64_t seed) {
    if (spec.num_classes < 2) throw InvalidInput("classifier: need at least 2 classes");
    if (spec.in_channels == 0 || spec.hidden == 0) throw InvalidInput("classifier: channel counts must be positive");
    const std::size_t features = spec.feature_length();
    auto net = std::make_unique<nn::Sequential<float>>();
    std::size_t c = spec.in_channels;
    for (const auto& b : spec.blocks) {
        net->add(std::make_unique<nn::Conv1d<float>>(c, b.channels, b.kernel, 1, b.kernel / 2));
        net->add(std::make_unique<nn::BatchNorm1d<float>>(b.channels));
        net->add(std::make_unique<nn::ReLU<float>>());
        net->add(std::make_unique<nn::MaxPool1d<float>>(b.pool));
        c = b.channels;
    }
    if (spec.head == ClassifierHead::Flatten) {
        net->add(std::make_unique<nn::Flatten<float>>());
        net->add(std::make_unique<nn::Dense<float>>(c * features, spec.hidden));
    } else {
        net->add(std::make_unique<nn::GlobalAvgPool1d<float>>());
        net->add(std::make_unique<nn::Dense<float>>(c, spec.hidden));
    }
    net->add(std::make_unique<nn::ReLU<float>>());
    net->add(std::make_unique<nn::Dense<float>>(spec.hidden, spec.num_classes));
    Rng rng(derive_seed(seed, "classifier-init"));
    net->initialize(rng);
    return net;
}

std::unique_ptr<nn::Sequential<float>> build_classifier(std::size_t num_classes, std::uint64_t seed) {
    if (num_classes != 2 && num_classes != 3 && num_classes != 21) {
        throw InvalidInput("build_classifier: num_classes must be 2, 3 or 21, got " + std::to_string(num_classes));
    }
    ClassifierSpec spec;
    spec.num_classes = num_classes;
    return build_classifier(spec, seed);
}

// ---- network inputs --------------------------------------------------------------

double input_scale(std::span<const ComplexF> frame) {
    double p = 0.0;
    for (const auto& s : frame) p += static_cast<double>(s.real()) * s.real() + static_cast<double>(s.imag()) * s.imag();
    if (frame.empty() || p <= 0.0) return 1.0;
    return 1.0 / std::sqrt(p / static_cast<double>(frame.size()));
}

void write_network_input(std::span<const ComplexF> frame, std::span<const float> side_inputs, std::size_t length,
                         float* dst) {
    const double scale = input_scale(frame);
    const std::size_t n = std::min(frame.size(), length);
    float* i_row = dst;
    float* q_row = dst + length;
    for (std::size_t t = 0; t < n; ++t) {
        i_row[t] = static_cast<float>(frame[t].real() * scale);
        q_row[t] = static_cast<float>(frame[t].imag() * scale);
    }
    std::fill(i_row + n, i_row + length, 0.0f);
    std::fill(q_row + n, q_row + length, 0.0f);
    for (std::size_t c = 0; c < side_inputs.size(); ++c) {
        std::fill(dst + (2 + c) * length, dst + (3 + c) * length, side_inputs[c]);
    }
}

nn::Tensor<float> make_network_batch(std::span<const std::span<const ComplexF>> frames,
                                     std::span<const float> side_inputs, std::size_t length) {
    const std::size_t channels = 2 + side_inputs.size();
    nn::Tensor<float> batch({frames.size(), channels, length});
    for (std::size_t b = 0; b < frames.size(); ++b) write_network_input(frames[b], side_inputs, length, batch.row(b, 0));
    return batch;
}

Classification classification_from_logits(std::span<const float> logits) {
    if (logits.empty()) throw InvalidInput("classification: no logits");
    Classification c;
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    c.posteriors.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) sum += c.posteriors[k] = std::exp(logits[k] - m);
    for (double& p : c.posteriors) p /= sum;
    c.decision = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    return c;
}

std::vector<Classification> classify_batch(const nn::Layer<float>& model,
                                           std::span<const std::span<const ComplexF>> frames,
                                           std::span<const float> side_inputs, std::size_t length,
                                           std::size_t batch_size) {
    std::vector<Classification> out;
    out.reserve(frames.size());
    if (batch_size == 0) batch_size = 1;
    for (std::size_t start = 0; start < frames.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, frames.size() - start);
        const auto logits = model.infer(make_network_batch(frames.subspan(start, count), side_inputs, length));
        nn::require_rank(logits, 2, "classifier output");
        const std::size_t k = logits.dim(1);
        for (std::size_t b = 0; b < count; ++b) {
            out.push_back(classification_from_logits(std::span<const float>(logits.data() + b * k, k)));
        }
    }
    return out;
}

Classification classify(const nn::Layer<float>& model, std::span<const ComplexF> frame,
                        std::span<const float> side_inputs, std::size_t length) {
    const std::span<const ComplexF> one[1] = {frame};
    return classify_batch(model, one, side_inputs, length, 1).front();
}

Classification classify(const nn::Layer<float>& model, const IqFrame& frame, std::span<const float> side_inputs,
                        std::size_t length) {
    std::vector<ComplexF> f(frame.samples.begin(), frame.samples.end());
    return classify(model, std::span<const ComplexF>(f), side_inputs, length);
}

float sps_side_input(int sps) { return static_cast<float>(sps) / 32.0f; }
float sir_side_input(double sir_db) { return static_cast<float>(sir_db / 10.0); }

// ---- U-Net -------------------------------------------------------------------------

std::unique_ptr<nn::UNet<float>> build_unet(const nn::UNetConfig& config, std::uint64_t seed) {
    auto net = std::make_unique<nn::UNet<float>>(config);
    Rng rng(derive_seed(seed, "unet-init"));
    net->initialize(rng);
    return net;
}

std::size_t unet_padded_length(const nn::UNetConfig& config, std::size_t length) {
    const std::size_t m = config.length_multiple();
    if (length < m) {
        throw InvalidInput("unet: input of " + std::to_string(length) + " samples is shorter than 2^depth = " +
                           std::to_string(m));
    }
    return (length + m - 1) / m * m;
}

IqFrame unet_denoise(const nn::UNet<float>& model, const IqFrame& mixture) {
    const std::size_t L = mixture.size();
    const std::size_t padded = unet_padded_length(model.config(), L);
    std::vector<ComplexF> f(mixture.samples.begin(), mixture.samples.end());
    const double scale = input_scale(f);
    nn::Tensor<float> x({1, 2, padded});
    write_network_input(f, {}, padded, x.data());
    const auto y = model.infer(x);
    IqFrame out;
    out.sps = mixture.sps;
    out.samples.resize(L);
    for (std::size_t t = 0; t < L; ++t) out.samples[t] = {y.at(0, 0, t) / scale, y.at(0, 1, t) / scale};
    return out;
}

void write_unet_pair(const nn::UNetConfig& config, std::span<const ComplexF> mixture, std::span<const Sample> clean,
                     float* input_dst, float* target_dst) {
    if (clean.size() != mixture.size()) throw InvalidInput("unet pair: mixture and clean lengths differ");
    const std::size_t padded = unet_padded_length(config, mixture.size());
    write_network_input(mixture, {}, padded, input_dst);
    const double scale = input_scale(mixture);
    std::fill(target_dst, target_dst + 2 * padded, 0.0f);
    for (std::size_t t = 0; t < clean.size(); ++t) {
        target_dst[t] = static_cast<float>(clean[t].real() * scale);
        target_dst[padded + t] = static_cast<float>(clean[t].imag() * scale);
    }
}

Bits recover_bits_from_denoised(const IqFrame& estimate, int soi_sps, const PulseShape& shape) {
    if (shape.sps != soi_sps) throw InvalidInput("recover_bits: pulse shape SPS does not match the SOI SPS");
    const std::size_t count =
        labeled_symbol_count(static_cast<int>(estimate.size()), soi_sps, shape.span_symbols);
    return qpsk_hard_decision(matched_filter_downsample(estimate, shape, count));
}

// ---- bank ----------------------------------------------------------------------------

ModelBank::ModelBank(std::vector<Entry> entries) {
    for (auto& e : entries) {
        if (slots_.count(e.sps)) throw ConfigError("model bank: duplicate entry for SPS " + std::to_string(e.sps));
        auto slot = std::make_unique<Slot>();
        const int sps = e.sps;
        slot->entry = std::move(e);
        slots_.emplace(sps, std::move(slot));
    }
}

ModelBank ModelBank::from_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw MissingModel("model bank manifest " + manifest.string() + " not found");
    json j;
    try {
        j = json::parse(in);
        std::vector<Entry> entries;
        for (const auto& e : j.at("entries")) {
            Entry entry;
            entry.sps = e.at("sps").get<int>();
            entry.checkpoint = manifest.parent_path() / e.at("checkpoint").get<std::string>();
            entry.training = e.value("training", json::object());
            entries.push_back(std::move(entry));
        }
        return ModelBank(std::move(entries));
    } catch (const json::exception& e) {
        throw ConfigError("model bank manifest " + manifest.string() + ": " + e.what());
    }
}

void ModelBank::insert(int sps, std::shared_ptr<const nn::UNet<float>> model, json training) {
    if (!model) throw InvalidInput("model bank: null model");
    auto slot = std::make_unique<Slot>();
    slot->entry.sps = sps;
    slot->entry.training = std::move(training);
    slot->model = std::move(model);
    std::call_once(slot->once, [] {});
    slots_[sps] = std::move(slot);
}

void ModelBank::write_manifest(const std::filesystem::path& manifest) const {
    json entries = json::array();
    const auto base = manifest.parent_path();
    for (const auto& [sps, slot] : slots_) {
        const auto rel = slot->entry.checkpoint.empty()
                             ? std::filesystem::path()
                             : std::filesystem::relative(slot->entry.checkpoint, base.empty() ? "." : base);
        entries.push_back({{"sps", sps}, {"checkpoint", rel.generic_string()}, {"training", slot->entry.training}});
    }
    if (!base.empty()) std::filesystem::create_directories(base);
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw IoError("cannot write model bank manifest " + manifest.string());
    out << json{{"entries", entries}}.dump(2) << '\n';
}

bool ModelBank::contains(int sps) const { return slots_.count(sps) != 0; }

void ModelBank::require_complete(std::span<const int> sps_set) const {
    std::string missing;
    for (int s : sps_set) {
        if (!contains(s)) missing += (missing.empty() ? "" : ", ") + std::to_string(s);
    }
    if (!missing.empty()) throw ConfigError("model bank has no U-Net for SPS " + missing);
}

std::vector<int> ModelBank::keys() const {
    std::vector<int> k;
    for (const auto& [sps, slot] : slots_) k.push_back(sps);
    return k;
}

const nn::UNet<float>& ModelBank::get(int sps) const {
    const auto it = slots_.find(sps);
    if (it == slots_.end()) throw ConfigError("model bank has no U-Net for SPS " + std::to_string(sps));
    Slot& slot = *it->second;
    std::call_once(slot.once, [&slot] {
        try {
            slot.model = load_unet(slot.entry.checkpoint);
        } catch (...) {
            slot.error = std::current_exception();
        }
    });
    if (slot.error) std::rethrow_exception(slot.error);
    return *slot.model;
}

std::shared_ptr<const nn::UNet<float>> load_unet(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingModel("U-Net checkpoint " + path.string() + " not found");
    auto loaded = nn::load_checkpoint(path);
    auto* unet = dynamic_cast<nn::UNet<float>*>(loaded.model.get());
    if (!unet) throw FormatError("checkpoint " + path.string() + " does not hold a U-Net");
    loaded.model.release();
    return std::shared_ptr<const nn::UNet<float>>(unet);
}

std::shared_ptr<const nn::Layer<float>> load_classifier(const std::filesystem::path& path, std::size_t num_classes) {
    if (!std::filesystem::exists(path)) throw MissingModel("classifier checkpoint " + path.string() + " not found");
    auto loaded = nn::load_checkpoint(path);
    const json& arch = loaded.architecture;
    std::size_t outputs = 0;
    if (arch.value("type", "") == "sequential" && !arch.at("layers").empty()) {
        outputs = arch.at("layers").back().value("out_features", std::size_t{0});
    }
    if (outputs != num_classes) {
        throw FormatError("checkpoint " + path.string() + " has " + std::to_string(outputs) + " outputs, expected " +
                          std::to_string(num_classes));
    }
    return std::shared_ptr<const nn::Layer<float>>(std::move(loaded.model));
}

}  // namespace sicu
