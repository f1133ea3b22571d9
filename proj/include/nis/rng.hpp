// Counter-based random streams. Every stream is a pure function of
// (key, counter), so derived streams are reproducible regardless of
// evaluation order or thread count.
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace nis {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    static RngStream root(std::uint64_t seed) {
        return RngStream(detail::splitmix64(seed));
    }

    // Named sub-stream; independent of draws made on this stream.
    RngStream derive(std::string_view name) const {
        return RngStream(detail::splitmix64(key_ ^ detail::fnv1a(name)));
    }

    RngStream derive(std::uint64_t index) const {
        return RngStream(detail::splitmix64(key_ ^ detail::splitmix64(index ^ detail::kGolden)));
    }

    std::uint64_t next_u64() { return detail::splitmix64(key_ + (++counter_) * detail::kGolden); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller (no caching: one draw consumes two uniforms).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace nis
