#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "emde/common.hpp"

namespace emde::io {

static_assert(std::endian::native == std::endian::little, "artifact formats assume a little-endian host");

// Every binary artifact begins with: 4-byte magic, u32 version, u64 config fingerprint.
struct artifact_header {
    std::array<char, 4> magic{};
    std::uint32_t version = 1;
    std::uint64_t fingerprint = 0;
};

template <class T>
    requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
    requires std::is_trivially_copyable_v<T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw error("truncated artifact");
    return v;
}

template <class T>
    requires std::is_trivially_copyable_v<T>
void write_span(std::ostream& os, std::span<const T> data) {
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
}

template <class T>
    requires std::is_trivially_copyable_v<T>
void read_span(std::istream& is, std::span<T> out) {
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    if (!is) throw error("truncated artifact");
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::size_t max_len = std::size_t{1} << 30) {
    const auto n = read_pod<std::uint32_t>(is);
    if (n > max_len) throw error("corrupt artifact: string length out of range");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw error("truncated artifact");
    return s;
}

inline void write_header(std::ostream& os, const char (&magic)[5], std::uint32_t version, std::uint64_t fingerprint) {
    os.write(magic, 4);
    write_pod(os, version);
    write_pod(os, fingerprint);
}

/// Reads and validates the common header; returns the stored fingerprint.
inline std::uint64_t read_header(std::istream& is, const char (&magic)[5], std::uint32_t version) {
    char got[4];
    is.read(got, 4);
    if (!is || std::memcmp(got, magic, 4) != 0)
        throw error(std::string("bad artifact magic, expected ") + magic);
    const auto v = read_pod<std::uint32_t>(is);
    if (v != version) throw error("unsupported artifact version " + std::to_string(v));
    return read_pod<std::uint64_t>(is);
}

}  // namespace emde::io
