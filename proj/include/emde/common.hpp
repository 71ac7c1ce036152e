#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace emde {

/// Thrown for violated preconditions and malformed inputs across the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer. Used to derive independent, order-free random keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

/// Uniform double in [0, 1) from 53 high bits of a 64-bit key.
constexpr double unit_from_bits(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// FNV-1a, for config fingerprints.
class fingerprint_builder {
public:
    fingerprint_builder& add(std::string_view bytes) noexcept {
        for (unsigned char c : bytes) {
            hash_ ^= c;
            hash_ *= 0x100000001b3ULL;
        }
        hash_ ^= 0xff;  // field separator
        hash_ *= 0x100000001b3ULL;
        return *this;
    }
    fingerprint_builder& add(const std::string& s) noexcept { return add(std::string_view(s)); }
    fingerprint_builder& add(const char* s) noexcept { return add(std::string_view(s)); }
    template <class T>
        requires std::is_arithmetic_v<T>
    fingerprint_builder& add(T v) noexcept {
        return add(std::to_string(v));
    }
    std::uint64_t value() const noexcept { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace emde
