#pragma once

// Little-endian record I/O shared by the dataset and checkpoint formats.
// Files end in a SHA-256 of every preceding byte.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include "sicu/checksum.hpp"
#include "sicu/error.hpp"

namespace sicu {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; add byte swapping for this target");

class HashingWriter {
public:
    explicit HashingWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        hash_.update(std::string_view(static_cast<const char*>(data), n));
    }
    void bytes(std::string_view s) { bytes(s.data(), s.size()); }
    template <typename T>
    void value(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        bytes(&v, sizeof(T));
    }
    /// Appends the digest of everything written so far (not itself hashed).
    Digest finish_with_digest() {
        Digest d = hash_.finish();
        out_.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size()));
        return d;
    }

private:
    std::ostream& out_;
    Sha256 hash_;
};

/// Plain little-endian reader over a stream; short reads raise TruncatedError.
class ByteReader {
public:
    ByteReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    void bytes(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw TruncatedError(what_ + ": file truncated");
        }
    }
    std::string string(std::size_t n) {
        std::string s(n, '\0');
        if (n > 0) bytes(s.data(), n);
        return s;
    }
    template <typename T>
    T value() {
        static_assert(std::is_trivially_copyable_v<T>);
        T v;
        bytes(&v, sizeof(T));
        return v;
    }

private:
    std::istream& in_;
    std::string what_;
};

/// Hashes bytes [0, size - 32) of `in` and compares against the trailing
/// 32 bytes. Leaves the stream positioned at the start.
void verify_trailing_digest(std::istream& in, std::uint64_t size, const std::string& what);

}  // namespace sicu
