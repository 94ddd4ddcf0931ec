#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "nrr/calendar.hpp"

namespace nrr {

// Counter-based random streams. A stream is identified by a key folded from
// arbitrary tokens (seed, site id, date, stream name); draw i is a pure
// function of (key, i). Generation order and thread count therefore cannot
// change any result.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class StreamKey {
public:
    StreamKey() = default;
    explicit StreamKey(std::uint64_t seed) { add(seed); }

    StreamKey& add(std::uint64_t v) {
        h_ = mix64(h_ ^ mix64(v));
        return *this;
    }
    StreamKey& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
    StreamKey& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    StreamKey& add(bool v) { return add(static_cast<std::uint64_t>(v ? 1 : 0)); }
    StreamKey& add(double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        return add(bits);
    }
    StreamKey& add(std::string_view s) {
        // FNV-1a, then folded like any other token
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
        return add(h);
    }
    // string literals would otherwise pick the bool overload
    StreamKey& add(const char* s) { return add(std::string_view(s)); }
    StreamKey& add(const Date& d) { return add(d.serial()); }

    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0x6A09E667F3BCC909ull;
};

class StreamRng {
public:
    explicit StreamRng(std::uint64_t key) : key_(key) {}
    explicit StreamRng(const StreamKey& key) : key_(key.value()) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(++counter_)); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % n;
    }

    // Box-Muller; consumes two uniforms per draw
    double normal(double sd = 1.0) {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

    bool bernoulli(double p) { return uniform() < p; }

    // multiplicative noise factor, exp(sigma_log * z)
    double lognormal_factor(double sigma_log) { return std::exp(sigma_log * normal()); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace nrr
