#include "sfbm/fbm.hpp"

#include "sfbm/errors.hpp"
#include "sfbm/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace sfbm {

HurstParam::HurstParam(double value) : value_(value) {
    if (!(value > 0.0 && value < 0.5)) {
        throw DomainError("Hurst parameter must lie in (0, 1/2), got " + std::to_string(value));
    }
}

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("grid horizon must be positive and finite");
    if (steps == 0) throw DomainError("grid needs at least one step");
}

std::vector<double> TimeGrid::nodes() const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = node(k);
    return out;
}

std::string_view to_string(GeneratorTag tag) noexcept {
    switch (tag) {
        case GeneratorTag::cholesky: return "cholesky";
        case GeneratorTag::hosking: return "hosking";
        case GeneratorTag::circulant: return "circulant";
    }
    return "unknown";
}

GeneratorTag parse_generator(std::string_view name) {
    if (name == "cholesky") return GeneratorTag::cholesky;
    if (name == "hosking") return GeneratorTag::hosking;
    if (name == "circulant") return GeneratorTag::circulant;
    throw DomainError("unknown generator '" + std::string(name) + "'");
}

std::string FbmPath::reference() const {
    return std::string(to_string(generator)) + ":seed=" + std::to_string(seed.master_seed) +
           ":path=" + std::to_string(seed.path_index) + ":n=" + std::to_string(grid.steps());
}

double fbm_covariance_any(double s, double t, double hurst) {
    if (s < 0.0 || t < 0.0) throw DomainError("fBm covariance needs s, t >= 0");
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("Hurst index must lie in (0, 1)");
    const double e = 2.0 * hurst;
    return 0.5 * (std::pow(t, e) + std::pow(s, e) - std::pow(std::abs(t - s), e));
}

double fbm_covariance(double s, double t, HurstParam hurst) {
    return fbm_covariance_any(s, t, hurst.value());
}

double fgn_autocovariance_any(std::size_t k, double hurst) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("Hurst index must lie in (0, 1)");
    if (k == 0) return 1.0;
    const double e = 2.0 * hurst;
    const double kk = static_cast<double>(k);
    return 0.5 * (std::pow(kk + 1.0, e) - 2.0 * std::pow(kk, e) + std::pow(kk - 1.0, e));
}

double fgn_autocovariance(std::size_t k, HurstParam hurst) {
    return fgn_autocovariance_any(k, hurst.value());
}

namespace {

using CacheKey = std::pair<std::size_t, std::uint64_t>;

CacheKey make_key(std::size_t n, HurstParam hurst) {
    return {n, std::bit_cast<std::uint64_t>(hurst.value())};
}

// FFTW planning is not thread-safe; execution of an existing plan is.
class FftPlans {
public:
    ~FftPlans() {
        for (auto& [size, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan forward(std::size_t size) {
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(size); it != plans_.end()) return it->second;
        std::vector<std::complex<double>> in(size), out(size);
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(size), reinterpret_cast<fftw_complex*>(in.data()),
                                          reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan == nullptr) throw GeneratorFailure("FFTW could not plan a transform of size " + std::to_string(size));
        plans_.emplace(size, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::size_t, fftw_plan> plans_;
};

FftPlans& fft_plans() {
    static FftPlans plans;
    return plans;
}

void forward_fft(std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out) {
    fftw_plan plan = fft_plans().forward(in.size());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
}

template <typename T>
class KeyedCache {
public:
    template <typename Build>
    std::shared_ptr<const T> get(const CacheKey& key, Build&& build) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) return it->second;
        }
        // Built outside the lock; concurrent first users may both build,
        // the first insert wins and both results are identical.
        auto fresh = std::make_shared<const T>(build());
        std::lock_guard lock(mutex_);
        return entries_.try_emplace(key, std::move(fresh)).first->second;
    }

private:
    std::mutex mutex_;
    std::map<CacheKey, std::shared_ptr<const T>> entries_;
};

struct EmbeddingTable {
    std::vector<double> eigenvalues;
    double most_negative = 0.0;
};

EmbeddingTable build_embedding(std::size_t n, HurstParam hurst) {
    const std::size_t m = 2 * n;
    std::vector<std::complex<double>> row(m), spectrum(m);
    for (std::size_t k = 0; k <= n; ++k) row[k] = fgn_autocovariance(k, hurst);
    for (std::size_t k = n + 1; k < m; ++k) row[k] = row[m - k];
    forward_fft(row, spectrum);

    EmbeddingTable table;
    table.eigenvalues.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        table.eigenvalues[k] = spectrum[k].real();
        table.most_negative = std::min(table.most_negative, spectrum[k].real());
    }
    return table;
}

KeyedCache<EmbeddingTable>& embedding_cache() {
    static KeyedCache<EmbeddingTable> cache;
    return cache;
}

std::shared_ptr<const EmbeddingTable> embedding(std::size_t n, HurstParam hurst) {
    return embedding_cache().get(make_key(n, hurst), [&] { return build_embedding(n, hurst); });
}

struct CholeskyFactor {
    Eigen::MatrixXd lower;
    bool ok = false;
};

CholeskyFactor build_cholesky(std::size_t n, HurstParam hurst) {
    std::vector<double> gamma(n);
    for (std::size_t k = 0; k < n; ++k) gamma[k] = fgn_autocovariance(k, hurst);
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd cov(size, size);
    for (Eigen::Index i = 0; i < size; ++i)
        for (Eigen::Index j = 0; j < size; ++j) cov(i, j) = gamma[static_cast<std::size_t>(std::abs(i - j))];

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    CholeskyFactor out;
    if (llt.info() != Eigen::Success) return out;
    out.lower = llt.matrixL();
    out.ok = out.lower.diagonal().minCoeff() > 0.0;
    return out;
}

KeyedCache<CholeskyFactor>& cholesky_cache() {
    static KeyedCache<CholeskyFactor> cache;
    return cache;
}

// Unit-variance fGn increments by each method.

std::vector<double> fgn_circulant(std::size_t n, HurstParam hurst, GaussianStream& rng) {
    auto table = embedding(n, hurst);
    if (table->most_negative < kEmbeddingEigenFloor) {
        throw GeneratorFailure("circulant embedding has eigenvalue " + std::to_string(table->most_negative));
    }
    const auto& lambda = table->eigenvalues;
    const std::size_t m = 2 * n;
    const double md = static_cast<double>(m);
    auto weight = [&](std::size_t k) { return std::max(lambda[k], 0.0); };

    std::vector<std::complex<double>> spectral(m), out(m);
    spectral[0] = std::sqrt(weight(0) / md) * rng.next();
    spectral[n] = std::sqrt(weight(n) / md) * rng.next();
    for (std::size_t k = 1; k < n; ++k) {
        const double scale = std::sqrt(weight(k) / (2.0 * md));
        const double re = rng.next();
        const double im = rng.next();
        spectral[k] = {scale * re, scale * im};
        spectral[m - k] = std::conj(spectral[k]);
    }
    forward_fft(spectral, out);

    std::vector<double> increments(n);
    for (std::size_t k = 0; k < n; ++k) increments[k] = out[k].real();
    return increments;
}

std::vector<double> fgn_cholesky(std::size_t n, HurstParam hurst, GaussianStream& rng) {
    if (n > kCholeskyMaxSteps) {
        throw GeneratorFailure("cholesky generator is limited to n <= " + std::to_string(kCholeskyMaxSteps));
    }
    auto factor = cholesky_cache().get(make_key(n, hurst), [&] { return build_cholesky(n, hurst); });
    if (!factor->ok) throw GeneratorFailure("fGn covariance is not numerically positive definite");

    const auto size = static_cast<Eigen::Index>(n);
    Eigen::VectorXd z(size);
    for (Eigen::Index i = 0; i < size; ++i) z[i] = rng.next();
    const Eigen::VectorXd x = factor->lower.triangularView<Eigen::Lower>() * z;
    return {x.data(), x.data() + size};
}

// Durbin-Levinson recursion on the Toeplitz covariance.
std::vector<double> fgn_hosking(std::size_t n, HurstParam hurst, GaussianStream& rng) {
    std::vector<double> gamma(n + 1);
    for (std::size_t k = 0; k <= n; ++k) gamma[k] = fgn_autocovariance(k, hurst);

    std::vector<double> x(n), phi, next;
    phi.reserve(n);
    next.reserve(n);
    double variance = gamma[0];
    x[0] = std::sqrt(variance) * rng.next();
    for (std::size_t i = 1; i < n; ++i) {
        double acc = gamma[i];
        for (std::size_t j = 0; j + 1 < i; ++j) acc -= phi[j] * gamma[i - 1 - j];
        const double reflection = acc / variance;
        next.assign(i, 0.0);
        for (std::size_t j = 0; j + 1 < i; ++j) next[j] = phi[j] - reflection * phi[i - 2 - j];
        next[i - 1] = reflection;
        phi.swap(next);
        variance *= 1.0 - reflection * reflection;
        if (!(variance > 0.0)) throw GeneratorFailure("Durbin-Levinson innovation variance collapsed");

        double mean = 0.0;
        for (std::size_t j = 0; j < i; ++j) mean += phi[j] * x[i - 1 - j];
        x[i] = mean + std::sqrt(variance) * rng.next();
    }
    return x;
}

}  // namespace

std::span<const double> circulant_eigenvalues(std::size_t steps, HurstParam hurst) {
    if (steps == 0) throw DomainError("need at least one step");
    // Entries are never evicted, so the span stays valid.
    return embedding(steps, hurst)->eigenvalues;
}

FbmPath generate_fbm(const TimeGrid& grid, HurstParam hurst, SeedRecord seed, GeneratorTag method) {
    const std::size_t n = grid.steps();
    GaussianStream rng(seed.master_seed, seed.path_index);

    std::vector<double> increments;
    switch (method) {
        case GeneratorTag::circulant: increments = fgn_circulant(n, hurst, rng); break;
        case GeneratorTag::cholesky: increments = fgn_cholesky(n, hurst, rng); break;
        case GeneratorTag::hosking: increments = fgn_hosking(n, hurst, rng); break;
    }

    const double scale = std::pow(grid.dt(), hurst.value());
    FbmPath path{grid, hurst, seed, method, std::vector<double>(n + 1)};
    path.values[0] = 0.0;
    double level = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        level += scale * increments[k];
        path.values[k + 1] = level;
    }
    return path;
}

FbmPath generate_fbm_with_fallback(const TimeGrid& grid, HurstParam hurst, SeedRecord seed) {
    try {
        return generate_fbm(grid, hurst, seed, GeneratorTag::circulant);
    } catch (const GeneratorFailure&) {
        return generate_fbm(grid, hurst, seed, GeneratorTag::cholesky);
    }
}

FbmPath restrict_path(const FbmPath& fine, std::size_t factor) {
    if (factor == 0 || fine.grid.steps() % factor != 0) {
        throw DomainError("restriction factor must divide the number of steps");
    }
    const std::size_t coarse_steps = fine.grid.steps() / factor;
    FbmPath coarse{TimeGrid(fine.grid.horizon(), coarse_steps), fine.hurst, fine.seed, fine.generator,
                   std::vector<double>(coarse_steps + 1)};
    for (std::size_t k = 0; k <= coarse_steps; ++k) coarse.values[k] = fine.values[k * factor];
    return coarse;
}

HolderEstimate estimate_holder(std::span<const double> values, const TimeGrid& grid, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("Holder exponent must lie in (0, 1)");
    if (values.size() < 2) throw DomainError("Holder estimate needs at least two nodes");
    if (values.size() > grid.size()) throw DomainError("more values than grid nodes");

    const std::size_t count = values.size();
    std::vector<double> spacing_pow(count);
    for (std::size_t lag = 1; lag < count; ++lag) {
        spacing_pow[lag] = std::pow(static_cast<double>(lag) * grid.dt(), beta);
    }

    double best = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        const double gi = values[i];
        for (std::size_t j = i + 1; j < count; ++j) {
            best = std::max(best, std::abs(values[j] - gi) / spacing_pow[j - i]);
        }
    }
    return HolderEstimate{beta, best, grid};
}

}  // namespace sfbm
