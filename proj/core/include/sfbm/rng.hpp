#pragma once

#include <array>
#include <cstdint>

namespace sfbm {

/// Philox4x32-10 block function (Salmon et al., SC'11).
///
/// Counter-based: every output block is a pure function of (counter, key),
/// so any draw of any stream can be computed independently of all others.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Standard normal stream addressed by (master seed, stream index).
///
/// Draw i of stream p is fixed by (seed, p, i) alone; threads generating
/// different streams, or the same stream twice, see identical numbers.
class GaussianStream {
public:
    GaussianStream(std::uint64_t master_seed, std::uint64_t stream) noexcept;

    /// Next N(0,1) variate.
    double next() noexcept;

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double next_uniform() noexcept;

    std::uint64_t position() const noexcept { return block_; }

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sfbm
