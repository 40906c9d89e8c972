#include "oracles.hpp"
#include "sfbm/errors.hpp"
#include "sfbm/limit.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace sfbm;
using sfbm::test::ode_spec;
using sfbm::test::singular_ode;
using sfbm::test::zero_noise;

namespace {

const SdeSpec kCampaign(1.0, 1.0, 0.5, 1.0, HurstParam(0.25));
const EpsilonLadder kLadder(0.1, 0.5, 10);

FbmPath campaign_noise(std::uint64_t path, std::size_t steps = 4096, double hurst = 0.25) {
    return generate_fbm(TimeGrid(1.0, steps), HurstParam(hurst), {20261019, path});
}

}  // namespace

TEST_SUITE("limit") {

TEST_CASE("epsilon ladder") {
    const EpsilonLadder l(0.1, 0.5, 3);
    CHECK(l.size() == 4);
    CHECK(l.levels() == std::vector<double>{0.1, 0.05, 0.025, 0.0125});
    CHECK_THROWS_AS(EpsilonLadder(0.1, 1.0, 3), DomainError);
    CHECK_THROWS_AS(EpsilonLadder(0.0, 0.5, 3), DomainError);
    CHECK_THROWS_AS(EpsilonLadder(0.1, 0.5, 0), DomainError);
    CHECK_THROWS_AS(l.level(4), DomainError);
}

TEST_CASE("deterministic family converges to the closed form with a deep ladder") {
    const TimeGrid grid(0.5, 1u << 14);
    const auto family = build_family(ode_spec(), zero_noise(grid, 0.25), EpsilonLadder(0.1, 0.5, 20));
    CHECK(std::abs(family.limit_estimate.back() - 1.9566360) <= 5e-3);
    CHECK(family.limit_estimate.back() <= singular_ode(0.5, 1, 1, 0.25));
}

TEST_CASE("shared-noise ordering holds with zero violations") {
    for (const auto& spec : {kCampaign, SdeSpec(0.5, 0.3, 0.0, 2.0, HurstParam(0.1)),
                             SdeSpec(2.0, 1.0, 2.0, 1.5, HurstParam(0.4))}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto family = build_family(spec, campaign_noise(seed, 2048, spec.hurst.value()), kLadder);
            CHECK(family.monotonicity.violations == 0);
            CHECK(family.monotonicity.worst_drop <= 1e-12);
            CHECK(check_nestedness(family).nested);
            CHECK(limit_dominance_violation(family) <= 0.0);
            CHECK(family.limit_estimate == family.deepest());
            double gap = 0.0;
            for (std::size_t k = 0; k < family.grid.size(); ++k) {
                gap = std::max(gap, std::abs(family.solutions[10].values[k] - family.solutions[9].values[k]));
            }
            CHECK(family.cauchy_gap == gap);
        }
    }
}

TEST_CASE("parallel level solves match the serial family") {
    const auto noise = campaign_noise(3, 1024);
    FamilyOptions parallel;
    parallel.parallel_levels = true;
    const auto a = build_family(kCampaign, noise, kLadder);
    const auto b = build_family(kCampaign, noise, kLadder, parallel);
    for (std::size_t j = 0; j < a.solutions.size(); ++j) CHECK(a.solutions[j].values == b.solutions[j].values);
}

TEST_CASE("cauchy gap does not grow when the ladder deepens") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto noise = campaign_noise(seed, 1024);
        const double shallow = build_family(kCampaign, noise, EpsilonLadder(0.1, 0.5, 9)).cauchy_gap;
        const double deep = build_family(kCampaign, noise, EpsilonLadder(0.1, 0.5, 10)).cauchy_gap;
        CHECK(deep <= shallow);
    }
}

TEST_CASE("upper bound certificate") {
    CHECK(upper_bound_constant(ode_spec(), 1.0) == doctest::Approx(5.0).epsilon(1e-15));

    const TimeGrid grid(1.0, 4096);
    const auto det = build_family(ode_spec(), zero_noise(grid, 0.25), kLadder);
    CHECK(verify_upper_bound(det).max_violation <= 0.0);

    int passed = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        passed += verify_upper_bound(build_family(kCampaign, campaign_noise(seed, 1024), kLadder)).passed() ? 1 : 0;
    }
    CHECK(passed == 100);
}

TEST_CASE("nonpositive measure") {
    const TimeGrid grid(1.0, 100);
    std::vector<double> values(101, 1.0);
    CHECK(nonpositive_measure(values, grid) == 0.0);
    values[37] = 0.0;
    CHECK(nonpositive_measure(values, grid) == doctest::Approx(0.01));
    values[0] = -1.0;  // node 0 is not counted
    CHECK(nonpositive_measure(values, grid) == doctest::Approx(0.01));
}

TEST_CASE("measure decays along the ladder") {
    const TimeGrid grid(1.0, 4096);
    const auto det = build_family(ode_spec(), zero_noise(grid, 0.25), kLadder);
    const auto d = verify_measure_decay(det, 0.0);
    CHECK(std::all_of(d.measures.begin(), d.measures.end(), [](double m) { return m == 0.0; }));

    const SdeSpec noisy(1.0, 1.0, 0.5, 2.0, HurstParam(0.25));
    int positive_start = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto decay = verify_measure_decay(build_family(noisy, campaign_noise(seed, 2048), kLadder), 1.0);
        CHECK(decay.nonincreasing);
        positive_start += decay.measures.front() > 0.0 ? 1 : 0;
    }
    CHECK(positive_start > 0);
}

TEST_CASE("measure decay campaign with b = 0") {
    const SdeSpec spec(1.0, 1.0, 0.0, 1.0, HurstParam(0.25));
    double first = 0.0, last = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto decay = verify_measure_decay(build_family(spec, campaign_noise(seed), kLadder), 0.02);
        CHECK(decay.passed());
        first += decay.measures.front();
        last += decay.measures.back();
    }
    CHECK(last <= first);
}

TEST_CASE("limit nonnegativity") {
    const TimeGrid grid(1.0, 2048);
    const auto det = build_family(ode_spec(), zero_noise(grid, 0.25), kLadder);
    const auto r = verify_limit_nonnegativity(det, 1e-9);
    CHECK(r.passed);
    CHECK(r.worst_value == 1.0);
    CHECK(r.worst_node == 0);

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto family = build_family(kCampaign, campaign_noise(seed, 2048), kLadder);
        CHECK(verify_limit_nonnegativity(family, family.cauchy_gap + 1e-9).passed);
    }

    // Shallow ladder with a large eps: reported, not asserted.
    const auto shallow = build_family(SdeSpec(0.2, 0.2, 0.5, 2.0, HurstParam(0.25)), campaign_noise(1, 2048),
                                      EpsilonLadder(5.0, 0.5, 1));
    const auto weak = verify_limit_nonnegativity(shallow, shallow.cauchy_gap + 1e-9);
    CHECK(shallow.limit_estimate[weak.worst_node] == weak.worst_value);
}

TEST_CASE("singular integral") {
    const TimeGrid grid(1.0, 1000);
    const HurstParam h(0.25);
    const std::vector<double> constant(grid.size(), 0.5);
    const auto flat = singular_integral(constant, grid, h, 1e-6);
    CHECK(flat.running.back() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(flat.running.front() == 0.0);
    CHECK(flat.flagged.empty());

    std::vector<double> exact(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) exact[k] = singular_ode(grid.node(k), 1, 1, 0.25);
    const auto si = singular_integral(exact, grid, h, 1e-6);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(std::abs(si.running[k] - (exact[k] - 1.0)) <= si.quadrature_spread + 1e-12);
    }

    const auto halved = singular_integral(exact, grid, h, 0.5e-6);
    CHECK(halved.running == si.running);

    std::vector<double> dipping(constant);
    dipping[10] = 1e-9;
    const auto floored = singular_integral(dipping, grid, h, 1e-6);
    CHECK(floored.flagged == std::vector<std::size_t>{10});
    CHECK(floored.flagged_kernel_mass == doctest::Approx(kernel_integral(grid.node(10), grid.node(11), 0, h)));
    CHECK(std::isfinite(floored.running.back()));
}

TEST_CASE("compensator, deterministic case") {
    const TimeGrid grid(1.0, 4096);
    const auto family = build_family(ode_spec(), zero_noise(grid, 0.25), EpsilonLadder(0.1, 0.25, 6));
    const auto est = compute_compensator(family, default_truncation_floor(family.spec));
    CHECK(est.values[0] == 0.0);
    CHECK(est.flagged_nodes.empty());
    double worst = 0.0;
    for (double v : est.values) worst = std::max(worst, std::abs(v));
    CHECK(worst <= est.smooth_budget());
}

TEST_CASE("compensator starts at zero on random paths") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto family = build_family(kCampaign, campaign_noise(seed, 1024), kLadder);
        CHECK(compute_compensator(family, 1e-6).values[0] == 0.0);
    }
}

TEST_CASE("eps continuity") {
    const TimeGrid grid(1.0, 2048);
    const auto noise = zero_noise(grid, 0.25);
    CHECK(epsilon_gap(ode_spec(), noise, 0.1, 0.1) == 0.0);

    const std::vector<double> h{0.05, 0.025, 0.0125};
    const auto table = verify_eps_continuity(ode_spec(), noise, 0.1, h);
    for (std::size_t i = 1; i < h.size(); ++i) {
        CHECK(table.gaps_above[i] < table.gaps_above[i - 1]);
        CHECK(table.gaps_below[i] < table.gaps_below[i - 1]);
    }
    CHECK_THROWS_AS(verify_eps_continuity(ode_spec(), noise, 0.1, std::vector<double>{0.2}), DomainError);
    CHECK_THROWS_AS(verify_eps_continuity(ode_spec(), noise, 0.1, std::vector<double>{0.01, 0.02}), DomainError);
}

TEST_CASE("family CSV columns") {
    const TimeGrid grid(1.0, 8);
    const auto family = build_family(ode_spec(), zero_noise(grid, 0.25), EpsilonLadder(0.1, 0.5, 2));
    std::stringstream out;
    write_family_csv(family, out);
    CHECK(out.str().find("t,noise,X_eps_0,X_eps_1,X_eps_2,limit_estimate\n") != std::string::npos);
}

}

// Examples that cannot hold as stated. Each runs exactly as specified and is
// expected to fail; README.md explains why.
TEST_SUITE("known_red") {

TEST_CASE("deterministic family with J = 8 within 5e-3 of the closed form") {
    const TimeGrid grid(0.5, 1u << 14);
    const auto family = build_family(ode_spec(), zero_noise(grid, 0.25), EpsilonLadder(0.1, 0.5, 8));
    CHECK(std::abs(family.limit_estimate.back() - 1.9566360) <= 5e-3);
}

TEST_CASE("compensator lower bound holds on every random path") {
    int passed = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto family = build_family(kCampaign, campaign_noise(seed), kLadder);
        const auto est = compute_compensator(family, default_truncation_floor(kCampaign));
        passed += est.min_value() >= -est.truncated_budget() ? 1 : 0;
    }
    CHECK(passed == 40);
}

TEST_CASE("eps continuity passes on all of 50 random paths") {
    int passed = 0;
    const std::vector<double> h{0.025, 0.0125, 0.00625};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        passed += verify_eps_continuity(kCampaign, campaign_noise(seed), 0.05, h).passed() ? 1 : 0;
    }
    CHECK(passed == 50);
}

}
