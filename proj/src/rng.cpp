#include "glmspec/rng.hpp"

namespace glmspec {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = std::uint64_t(a) * std::uint64_t(b);
    hi = std::uint32_t(p >> 32);
    lo = std::uint32_t(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            k[0] += kW0;
            k[1] += kW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t trial, StreamTag tag) {
    // the seed is the key; trial and tag occupy the upper counter words
    const std::uint64_t k = seed ^ splitmix64(trial >> 32);
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
    ctr_ = {0u, 0u, std::uint32_t(trial), std::uint32_t(tag)};
}

void Philox4x32::refill() {
    out_ = philox4x32_10(ctr_, key_);
    if (++ctr_[0] == 0) ++ctr_[1];
    idx_ = 0;
}

} // namespace glmspec
