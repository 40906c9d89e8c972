#include "sfbm/errors.hpp"
#include "sfbm/fbm.hpp"
#include "sfbm/path_io.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <thread>
#include <vector>

using namespace sfbm;

namespace {

std::vector<double> increments(const FbmPath& p) {
    std::vector<double> z(p.grid.steps());
    const double scale = std::pow(p.grid.dt(), p.hurst.value());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (p.values[i + 1] - p.values[i]) / scale;
    return z;
}

struct Moments {
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> se;
};

// Entrywise mean and standard error of z_i z_j over independent paths.
Moments covariance_moments(std::size_t n, HurstParam h, std::uint64_t seed, GeneratorTag method, int paths) {
    const TimeGrid grid(1.0, n);
    std::vector<std::vector<double>> s(n, std::vector<double>(n)), s2 = s;
    for (int p = 0; p < paths; ++p) {
        const auto z = increments(generate_fbm(grid, h, {seed, static_cast<std::uint64_t>(p)}, method));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double v = z[i] * z[j];
                s[i][j] += v;
                s2[i][j] += v * v;
            }
        }
    }
    Moments m{s, s};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double mean = s[i][j] / paths;
            m.mean[i][j] = mean;
            m.se[i][j] = std::sqrt((s2[i][j] / paths - mean * mean) / paths);
        }
    }
    return m;
}

void cross_validate(GeneratorTag a, GeneratorTag b) {
    const HurstParam h(0.25);
    const std::size_t n = 16;
    const auto ma = covariance_moments(n, h, 11, a, 20000);
    const auto mb = covariance_moments(n, h, 12, b, 20000);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double se = std::hypot(ma.se[i][j], mb.se[i][j]);
            INFO("entry (" << i << "," << j << ")");
            CHECK(std::abs(ma.mean[i][j] - mb.mean[i][j]) <= 5.0 * se);
        }
    }
}

}  // namespace

TEST_SUITE("fbm") {

TEST_CASE("Hurst index is restricted to the rough regime") {
    CHECK_THROWS_AS(HurstParam(0.0), DomainError);
    CHECK_THROWS_AS(HurstParam(0.5), DomainError);
    CHECK_THROWS_AS(HurstParam(-0.1), DomainError);
    CHECK_THROWS_AS(HurstParam(std::nan("")), DomainError);
    CHECK(HurstParam(0.25).two_h() == 0.5);
}

TEST_CASE("time grid nodes are uniform and end exactly at the horizon") {
    const TimeGrid g(0.3, 7);
    const auto t = g.nodes();
    REQUIRE(t.size() == 8);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 0.3);
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] > t[k - 1]);
    CHECK(g.dt() == doctest::Approx(0.3 / 7));
    CHECK_THROWS_AS(TimeGrid(0.0, 4), DomainError);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), DomainError);
}

TEST_CASE("fbm covariance closed form") {
    CHECK(fbm_covariance(1.0, 1.0, HurstParam(0.3)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fbm_covariance_any(1.0, 3.0, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fbm_covariance(1.0, 2.0, HurstParam(0.25)) == doctest::Approx(0.7071068).epsilon(1e-7));
    CHECK(fbm_covariance(0.4, 1.7, HurstParam(0.2)) == fbm_covariance(1.7, 0.4, HurstParam(0.2)));
    CHECK_THROWS_AS(fbm_covariance(-1.0, 1.0, HurstParam(0.25)), DomainError);
    CHECK_THROWS_AS(fbm_covariance(1.0, -1.0, HurstParam(0.25)), DomainError);
}

TEST_CASE("fgn autocovariance") {
    for (double h : {0.1, 0.25, 0.4}) CHECK(fgn_autocovariance(0, HurstParam(h)) == 1.0);
    CHECK(fgn_autocovariance(1, HurstParam(0.25)) == doctest::Approx(-0.2928932).epsilon(1e-7));
    for (double h : {0.05, 0.25, 0.45}) {
        for (std::size_t k = 1; k <= 100; ++k) CHECK(fgn_autocovariance(k, HurstParam(h)) < 0.0);
    }
    CHECK(fgn_autocovariance_any(3, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("circulant embedding is nonnegative for fGn") {
    for (double h : {0.05, 0.1, 0.25, 0.4, 0.49}) {
        for (std::size_t n : {1u, 2u, 7u, 64u, 1000u, 4096u}) {
            for (double ev : circulant_eigenvalues(n, HurstParam(h))) CHECK(ev >= kEmbeddingEigenFloor);
        }
    }
}

TEST_CASE("paths start at zero and are reproducible") {
    const TimeGrid g(2.0, 300);
    for (auto m : {GeneratorTag::circulant, GeneratorTag::cholesky, GeneratorTag::hosking}) {
        const auto a = generate_fbm(g, HurstParam(0.3), {5, 9}, m);
        const auto b = generate_fbm(g, HurstParam(0.3), {5, 9}, m);
        const auto c = generate_fbm(g, HurstParam(0.3), {5, 10}, m);
        CHECK(a.values.size() == 301);
        CHECK(a.values[0] == 0.0);
        CHECK(a.values == b.values);
        CHECK(a.values != c.values);
        CHECK(a.generator == m);
    }
}

TEST_CASE("concurrent first use of a new (n, H) gives the serial result") {
    const TimeGrid g(1.0, 777);
    const HurstParam h(0.33);
    std::vector<std::vector<double>> got(8);
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < got.size(); ++i) {
        pool.emplace_back([&, i] { got[i] = generate_fbm(g, h, {1, i}).values; });
    }
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == generate_fbm(g, h, {1, i}).values);
}

TEST_CASE("cholesky is limited to n <= 4096") {
    CHECK_THROWS_AS(generate_fbm(TimeGrid(1.0, kCholeskyMaxSteps + 1), HurstParam(0.25), {}, GeneratorTag::cholesky),
                    GeneratorFailure);
}

TEST_CASE("single increment on [0, 1] is standard normal") {
    const TimeGrid g(1.0, 1);
    const int n = 100000;
    double sq = 0.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = generate_fbm(g, HurstParam(0.25), {3, static_cast<std::uint64_t>(i)}).values[1];
        sum += v;
        sq += v * v;
    }
    const double var = sq / n - (sum / n) * (sum / n);
    CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("terminal value has mean 0 and variance T^{2H}") {
    const double horizon = 2.0;
    const HurstParam h(0.25);
    const TimeGrid g(horizon, 256);
    const int n = 8192;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = generate_fbm(g, h, {4, static_cast<std::uint64_t>(i)}).values.back();
        sum += v;
        sq += v * v;
    }
    const double var_true = std::pow(horizon, h.two_h());
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(var_true) / std::sqrt(n));
    CHECK(std::abs(var - var_true) <= 4.0 * std::sqrt(2.0) * var_true / std::sqrt(n));
}

TEST_CASE("lag autocovariance of normalized increments matches the kernel") {
    const HurstParam h(0.25);
    const std::size_t n = 1024;
    const int paths = 4096;
    const TimeGrid g(1.0, n);
    const std::size_t lags = 10;
    std::vector<double> sum(lags + 1), sq(lags + 1);
    for (int p = 0; p < paths; ++p) {
        const auto z = increments(generate_fbm(g, h, {77, static_cast<std::uint64_t>(p)}));
        for (std::size_t k = 0; k <= lags; ++k) {
            double c = 0.0;
            for (std::size_t i = 0; i + k < n; ++i) c += z[i] * z[i + k];
            c /= static_cast<double>(n - k);
            sum[k] += c;
            sq[k] += c * c;
        }
    }
    for (std::size_t k = 0; k <= lags; ++k) {
        const double mean = sum[k] / paths;
        const double se = std::sqrt((sq[k] / paths - mean * mean) / paths);
        INFO("lag " << k);
        CHECK(std::abs(mean - fgn_autocovariance(k, h)) <= 4.0 * se);
    }
}

TEST_CASE("circulant and cholesky agree in increment covariance") {
    cross_validate(GeneratorTag::circulant, GeneratorTag::cholesky);
}

TEST_CASE("hosking and cholesky agree in increment covariance") {
    cross_validate(GeneratorTag::hosking, GeneratorTag::cholesky);
}

TEST_CASE("restriction keeps every factor-th node") {
    const auto fine = generate_fbm(TimeGrid(1.0, 64), HurstParam(0.2), {1, 2});
    const auto coarse = restrict_path(fine, 4);
    REQUIRE(coarse.grid.steps() == 16);
    for (std::size_t k = 0; k <= 16; ++k) CHECK(coarse.values[k] == fine.values[4 * k]);
    CHECK_THROWS_AS(restrict_path(fine, 3), DomainError);
}

TEST_CASE("holder estimate") {
    SUBCASE("constant path") {
        const std::vector<double> flat(50, 3.0);
        CHECK(estimate_holder(flat, TimeGrid(1.0, 49), 0.2).constant == 0.0);
    }
    SUBCASE("identity on two nodes") {
        const std::vector<double> g{0.0, 1.0};
        CHECK(estimate_holder(g, TimeGrid(1.0, 1), 0.5).constant == doctest::Approx(1.0));
    }
    SUBCASE("matches a brute-force scan") {
        const auto p = generate_fbm(TimeGrid(1.0, 200), HurstParam(0.3), {8, 8});
        double brute = 0.0;
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            for (std::size_t j = i + 1; j < p.values.size(); ++j) {
                const double span = p.grid.node(j) - p.grid.node(i);
                brute = std::max(brute, std::abs(p.values[j] - p.values[i]) / std::pow(span, 0.15));
            }
        }
        CHECK(estimate_holder(p.values, p.grid, 0.15).constant == doctest::Approx(brute).epsilon(1e-12));
    }
    SUBCASE("nondecreasing in beta when spacings are at most 1") {
        const auto p = generate_fbm(TimeGrid(1.0, 512), HurstParam(0.25), {9, 1});
        double previous = 0.0;
        for (double beta : {0.02, 0.05, 0.1, 0.125, 0.2, 0.24}) {
            const double c = estimate_holder(p.values, p.grid, beta).constant;
            CHECK(c >= previous);
            previous = c;
        }
    }
    SUBCASE("stable under grid refinement at beta = H/2") {
        const HurstParam h(0.25);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto fine = generate_fbm(TimeGrid(1.0, 2048), h, {seed, 0});
            const auto coarse = restrict_path(fine, 2);
            const double c1 = estimate_holder(coarse.values, coarse.grid, 0.125).constant;
            const double c2 = estimate_holder(fine.values, fine.grid, 0.125).constant;
            CHECK(std::isfinite(c1));
            CHECK(c2 < 1.5 * c1);
        }
    }
}

TEST_CASE("path archive round-trips bit-exactly") {
    const auto p = generate_fbm(TimeGrid(0.75, 33), HurstParam(0.15), {123456789012345ULL, 4}, GeneratorTag::hosking);
    std::stringstream buf;
    write_path_archive(p, buf);
    const auto q = read_path_archive(buf);
    CHECK(q.values == p.values);
    CHECK(q.grid == p.grid);
    CHECK(q.hurst == p.hurst);
    CHECK(q.seed == p.seed);
    CHECK(q.generator == p.generator);

    std::stringstream bad("sfbm-path\nformat_version=99\n");
    CHECK_THROWS(read_path_archive(bad));
}

TEST_CASE("path CSV has n+1 rows of (t, value)") {
    const auto p = generate_fbm(TimeGrid(1.0, 8), HurstParam(0.25), {42, 0}, GeneratorTag::cholesky);
    std::stringstream out;
    write_path_csv(p, out);
    std::string line;
    int comments = 0, rows = 0;
    bool header = false;
    while (std::getline(out, line)) {
        if (line.rfind("#", 0) == 0) {
            ++comments;
        } else if (!header) {
            CHECK(line == "t,value");
            header = true;
        } else {
            ++rows;
        }
    }
    CHECK(comments >= 7);
    CHECK(rows == 9);
}

}
