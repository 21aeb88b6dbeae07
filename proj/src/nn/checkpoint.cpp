#include "sicu/nn/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

#include "sicu/binary_io.hpp"
#include "sicu/error.hpp"

namespace sicu::nn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'I', 'C', 'W'};

template <typename T>
struct NamedTensor {
    std::string name;
    std::string kind;
    Tensor<T>* tensor;
};

template <typename T>
std::vector<NamedTensor<T>> named_tensors(Layer<T>& model) {
    std::vector<NamedTensor<T>> out;
    for (auto& p : model.params()) out.push_back({p.name, "param", p.value});
    for (auto& b : model.buffers()) out.push_back({b.name, "buffer", b.value});
    return out;
}

template <typename T>
json tensor_list(const std::vector<NamedTensor<T>>& tensors) {
    json list = json::array();
    for (const auto& t : tensors) list.push_back({{"name", t.name}, {"kind", t.kind}, {"shape", t.tensor->shape()}});
    return list;
}

struct RawCheckpoint {
    json descriptor;
    std::vector<float> blob;
};

RawCheckpoint read_raw(const std::filesystem::path& path, bool with_blob) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint " + path.string() + ": cannot open");
    const std::string what = "checkpoint " + path.string();
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    ByteReader r(in, what);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError(what + ": bad magic");
    const auto version = r.value<std::uint32_t>();
    if (version != kCheckpointFormatVersion) {
        throw VersionError(what + ": format version " + std::to_string(version) + " (supported: " +
                           std::to_string(kCheckpointFormatVersion) + ")");
    }
    const auto desc_len = r.value<std::uint32_t>();
    if (12ull + desc_len + 32 > file_size) throw TruncatedError(what + ": file truncated");
    verify_trailing_digest(in, file_size, what);
    in.seekg(12);

    RawCheckpoint raw;
    try {
        raw.descriptor = json::parse(r.string(desc_len));
    } catch (const json::exception& e) {
        throw FormatError(what + ": unreadable descriptor (" + e.what() + ")");
    }
    const std::uint64_t blob_bytes = file_size - 12 - desc_len - 32;
    if (blob_bytes % sizeof(float) != 0) throw FormatError(what + ": parameter blob is not f32-aligned");
    if (with_blob) {
        raw.blob.resize(blob_bytes / sizeof(float));
        if (!raw.blob.empty()) r.bytes(raw.blob.data(), blob_bytes);
    }
    return raw;
}

}  // namespace

template <typename T>
void save_checkpoint(Layer<T>& model, const json& metadata, const std::filesystem::path& path) {
    const auto tensors = named_tensors(model);
    json descriptor = {{"architecture", model.describe()}, {"tensors", tensor_list(tensors)}, {"metadata", metadata}};
    const std::string desc = descriptor.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint " + path.string() + ": cannot open for writing");
    HashingWriter w(out);
    w.bytes(kMagic, 4);
    w.value<std::uint32_t>(kCheckpointFormatVersion);
    w.value<std::uint32_t>(static_cast<std::uint32_t>(desc.size()));
    w.bytes(desc);
    std::vector<float> buf;
    for (const auto& t : tensors) {
        buf.assign(t.tensor->values().begin(), t.tensor->values().end());
        w.bytes(buf.data(), buf.size() * sizeof(float));
    }
    w.finish_with_digest();
    out.flush();
    if (!out) throw IoError("checkpoint " + path.string() + ": write failed");
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    const std::string what = "checkpoint " + path.string();
    RawCheckpoint raw = read_raw(path, true);
    LoadedModel loaded;
    try {
        loaded.architecture = raw.descriptor.at("architecture");
        loaded.metadata = raw.descriptor.value("metadata", json::object());
        loaded.model = build_layer<float>(loaded.architecture);
        const auto tensors = named_tensors(*loaded.model);
        if (tensor_list(tensors) != raw.descriptor.at("tensors")) {
            throw FormatError(what + ": tensor list does not match the architecture");
        }
        std::size_t offset = 0;
        for (const auto& t : tensors) {
            const std::size_t n = t.tensor->size();
            if (offset + n > raw.blob.size()) throw FormatError(what + ": parameter blob too short");
            std::copy_n(raw.blob.begin() + static_cast<std::ptrdiff_t>(offset), n, t.tensor->data());
            offset += n;
        }
        if (offset != raw.blob.size()) throw FormatError(what + ": parameter blob too long");
    } catch (const json::exception& e) {
        throw FormatError(what + ": bad descriptor (" + e.what() + ")");
    }
    for (const auto& t : named_tensors(*loaded.model)) {
        if (!t.tensor->all_finite()) throw FormatError(what + ": non-finite values in " + t.name);
    }
    return loaded;
}

json read_checkpoint_descriptor(const std::filesystem::path& path) {
    return read_raw(path, false).descriptor;
}

template void save_checkpoint(Layer<float>&, const json&, const std::filesystem::path&);
template void save_checkpoint(Layer<double>&, const json&, const std::filesystem::path&);

}  // namespace sicu::nn
