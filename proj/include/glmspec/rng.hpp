// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is identified by a 128-bit key derived from (seed, trial, tag);
// the counter walks through the stream. Distinct trials never share state,
// so they can be generated in any order or in parallel.
#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace glmspec {

// one application of the ten-round bijection
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

enum class StreamTag : std::uint32_t {
    Design = 1,
    Signal = 2,
    Noise = 3,
    GampInit = 4,
    Misc = 5,
};

class Philox4x32 {
public:
    using result_type = std::uint32_t;

    Philox4x32(std::uint64_t seed, std::uint64_t trial, StreamTag tag);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (idx_ == 4) refill();
        return out_[idx_++];
    }

private:
    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> ctr_{};
    std::array<std::uint32_t, 4> out_{};
    int idx_ = 4;

    void refill();
};

} // namespace glmspec
