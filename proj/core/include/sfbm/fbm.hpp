#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sfbm {

/// Hurst index restricted to the rough regime 0 < H < 1/2.
class HurstParam {
public:
    explicit HurstParam(double value);

    double value() const noexcept { return value_; }
    double two_h() const noexcept { return 2.0 * value_; }

    friend bool operator==(const HurstParam&, const HurstParam&) = default;

private:
    double value_;
};

/// Uniform grid t_k = k T / n, k = 0..n.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t size() const noexcept { return steps_ + 1; }
    double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }

    /// Node k; node(steps()) is exactly horizon().
    double node(std::size_t k) const noexcept {
        return k == steps_ ? horizon_ : horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
    }

    std::vector<double> nodes() const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_;
    std::size_t steps_;
};

struct SeedRecord {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;

    friend bool operator==(const SeedRecord&, const SeedRecord&) = default;
};

enum class GeneratorTag { cholesky, hosking, circulant };

std::string_view to_string(GeneratorTag tag) noexcept;
GeneratorTag parse_generator(std::string_view name);

/// Sampled fBm trajectory. values[0] == 0 exactly.
struct FbmPath {
    TimeGrid grid;
    HurstParam hurst;
    SeedRecord seed;
    GeneratorTag generator = GeneratorTag::circulant;
    std::vector<double> values;

    /// Short provenance label, e.g. "circulant:seed=42:path=3:n=1024".
    std::string reference() const;
};

/// Largest n accepted by the Cholesky generator.
inline constexpr std::size_t kCholeskyMaxSteps = 4096;

/// Embedding eigenvalues below this abort circulant generation.
inline constexpr double kEmbeddingEigenFloor = -1e-10;

/// R_H(s,t) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(double s, double t, HurstParam hurst);

/// Same formula for any H in (0, 1); used for sanity cases such as H = 1/2.
double fbm_covariance_any(double s, double t, double hurst);

/// Autocovariance of unit-spaced fractional Gaussian noise,
/// (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2.
double fgn_autocovariance(std::size_t k, HurstParam hurst);
double fgn_autocovariance_any(std::size_t k, double hurst);

/// Eigenvalues of the circulant embedding (size 2n) of the unit fGn
/// covariance of n increments. Cached per (n, H); safe under concurrent use.
std::span<const double> circulant_eigenvalues(std::size_t steps, HurstParam hurst);

/// Sample an fBm path. Increments have covariance dt^{2H} gamma(|i-j|).
/// Throws GeneratorFailure when the chosen method cannot handle the request.
FbmPath generate_fbm(const TimeGrid& grid, HurstParam hurst, SeedRecord seed,
                     GeneratorTag method = GeneratorTag::circulant);

/// Circulant first, Cholesky if the embedding is rejected.
FbmPath generate_fbm_with_fallback(const TimeGrid& grid, HurstParam hurst, SeedRecord seed);

/// Keep every `factor`-th node of a path sampled on a finer grid. The
/// restriction of an exact fBm sample is an exact fBm sample on the
/// coarse grid, and coarse/fine pairs built this way share their noise.
FbmPath restrict_path(const FbmPath& fine, std::size_t factor);

/// Grid Holder estimate: C = max_{i<j} |g_j - g_i| / ((j - i) dt)^beta.
struct HolderEstimate {
    double exponent = 0.0;
    double constant = 0.0;
    TimeGrid grid;
};

/// O(n^2) scan over all node pairs. The denominator depends only on the lag,
/// so powers are tabulated once per lag.
HolderEstimate estimate_holder(std::span<const double> values, const TimeGrid& grid, double beta);

}  // namespace sfbm
