#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace lorentz {

/// Philox4x32-10 counter-based generator.
///
/// A generator is identified by a 64-bit key and a 64-bit stream number; the
/// remaining 64 bits of the 128-bit counter index draws within the stream.
/// Distinct (key, stream) pairs give independent sequences, so every sample
/// of an experiment owns its stream and results do not depend on how samples
/// are distributed across workers.
class Rng {
public:
    using result_type = std::uint64_t;

    Rng(std::uint64_t key, std::uint64_t stream) : key_{lo(key), hi(key)}, stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (index_ >= 4) refill();
        const std::uint64_t a = block_[index_];
        const std::uint64_t b = block_[index_ + 1];
        index_ += 2;
        return (a << 32) | b;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift; the bias is below 2^-64 * n.
        const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static constexpr std::uint32_t lo(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
    static constexpr std::uint32_t hi(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

    void refill() {
        block_ = philox({lo(counter_), hi(counter_), lo(stream_), hi(stream_)}, key_);
        ++counter_;
        index_ = 0;
    }

public:
    /// The raw Philox4x32-10 bijection.
    static constexpr std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                                         std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
            ctr = {hi(p1) ^ ctr[1] ^ key[0], lo(p1), hi(p0) ^ ctr[3] ^ key[1], lo(p0)};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_{0};
    std::array<std::uint32_t, 4> block_{};
    unsigned index_{4};
};

/// SplitMix64 finaliser, used to derive keys from (seed, tag) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a of a short label.
constexpr std::uint64_t tag_hash(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Generator for sample `index` of the experiment part named `label`.
inline Rng sample_rng(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    return Rng(mix64(seed ^ mix64(tag_hash(label))), index);
}

}  // namespace lorentz
