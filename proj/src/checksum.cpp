#include "sicu/checksum.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "sicu/binary_io.hpp"

namespace sicu {

struct Sha256::Impl {
    EVP_MD_CTX* ctx = nullptr;
    ~Impl() { EVP_MD_CTX_free(ctx); }
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: OpenSSL digest init failed");
    }
}

Sha256::~Sha256() = default;
Sha256::Sha256(Sha256&&) noexcept = default;
Sha256& Sha256::operator=(Sha256&&) noexcept = default;

void Sha256::update(std::span<const std::uint8_t> bytes) {
    if (!bytes.empty()) EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
}

void Sha256::update(std::string_view bytes) {
    if (!bytes.empty()) EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
}

Digest Sha256::finish() {
    Digest out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(impl_->ctx, out.data(), &len);
    return out;
}

Digest sha256(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.finish();
}

std::string to_hex(const Digest& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : digest) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xf]);
    }
    return s;
}

void verify_trailing_digest(std::istream& in, std::uint64_t size, const std::string& what) {
    if (size < 32) throw TruncatedError(what + ": missing trailing checksum");
    in.clear();
    in.seekg(0);
    Sha256 hash;
    std::vector<char> buf(1 << 16);
    std::uint64_t remaining = size - 32;
    while (remaining > 0) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, buf.size()));
        in.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) throw TruncatedError(what + ": file truncated");
        hash.update(std::string_view(buf.data(), n));
        remaining -= n;
    }
    Digest stored{};
    in.read(reinterpret_cast<char*>(stored.data()), 32);
    if (in.gcount() != 32) throw TruncatedError(what + ": missing trailing checksum");
    if (stored != hash.finish()) throw ChecksumError(what + ": checksum mismatch");
    in.clear();
    in.seekg(0);
}

}  // namespace sicu
