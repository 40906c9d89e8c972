#include "sfbm/excursions.hpp"

#include "sfbm/errors.hpp"
#include "sfbm/path_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace sfbm {

ExcursionSet decompose_excursions(std::span<const double> values, double threshold) {
    if (!(threshold >= 0.0)) throw DomainError("excursion threshold must be nonnegative");
    ExcursionSet set;
    set.threshold = threshold;
    if (values.empty()) return set;
    const std::size_t n = values.size() - 1;
    std::size_t k = 0;
    while (k <= n) {
        if (!(values[k] > threshold)) {
            ++k;
            continue;
        }
        const std::size_t first = k;
        while (k + 1 <= n && values[k + 1] > threshold) ++k;
        const std::size_t last = k;
        set.intervals.push_back(Excursion{first, last, first == 0 ? 0 : first - 1, last == n ? n : last + 1,
                                          first > 0, last < n});
        ++k;
    }
    set.first_interval_closed_left = !set.intervals.empty() && set.intervals.front().first == 0;
    return set;
}

bool EndpointReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const EndpointCheck& c) { return c.passed; });
}

double EndpointReport::worst_excess() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : checks) worst = std::max(worst, c.worst_excess);
    return checks.empty() ? 0.0 : worst;
}

EndpointReport verify_endpoint_limits(std::span<const double> values, const TimeGrid& grid,
                                      const ExcursionSet& excursions, const SdeSpec& spec,
                                      const HolderEstimate& noise_holder, double tolerance, std::size_t depth) {
    if (values.size() != grid.size()) throw DomainError("values do not match the grid");
    EndpointReport report;
    report.tolerance = tolerance;
    const double h = spec.hurst.value();
    const double growth = std::sqrt(spec.a / h);
    auto allowance = [&](std::size_t j) {
        const double span = static_cast<double>(j) * grid.dt();
        return tolerance + growth * std::pow(span, h) +
               spec.sigma * noise_holder.constant * std::pow(span, noise_holder.exponent);
    };

    for (std::size_t i = 0; i < excursions.intervals.size(); ++i) {
        const auto& ex = excursions.intervals[i];
        if (!ex.left_bounded && !ex.right_bounded) continue;
        EndpointCheck check;
        check.interval = i;
        check.worst_excess = -std::numeric_limits<double>::infinity();
        auto visit_endpoint = [&](std::size_t node) {
            check.endpoint_value = std::max(check.endpoint_value, std::abs(values[node]));
            check.worst_excess = std::max(check.worst_excess, std::abs(values[node]) - tolerance);
        };
        auto visit_inside = [&](std::size_t node, std::size_t j) {
            check.worst_excess = std::max(check.worst_excess, values[node] - allowance(j));
        };
        if (ex.left_bounded) {
            visit_endpoint(ex.alpha);
            for (std::size_t j = 1; j <= depth && ex.alpha + j <= ex.last; ++j) visit_inside(ex.alpha + j, j);
        }
        if (ex.right_bounded) {
            visit_endpoint(ex.beta);
            for (std::size_t j = 1; j <= depth && ex.beta >= ex.first + j; ++j) visit_inside(ex.beta - j, j);
        }
        check.passed = check.worst_excess <= 0.0;
        report.checks.push_back(check);
    }
    return report;
}

namespace {

struct WindowResidual {
    std::vector<double> profile;
    double sup = 0.0;
    double quadrature_budget = 0.0;
};

// Residual of the drift identity on nodes [lo, hi], anchored at lo.
WindowResidual window_residual(std::span<const double> x, std::span<const double> noise, const TimeGrid& grid,
                               const SdeSpec& spec, std::size_t lo, std::size_t hi, double floor) {
    const auto singular = singular_integral(x, grid, spec.hurst, floor, lo, hi);
    const auto area = running_trapezoid(x, grid, lo, hi);
    WindowResidual out;
    out.profile.resize(hi - lo + 1);
    double trapezoid_spread = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        const std::size_t i = k - lo;
        out.profile[i] = x[k] - x[lo] - spec.a * singular.running[i] + spec.b * area[i] -
                         spec.sigma * (noise[k] - noise[lo]);
        out.sup = std::max(out.sup, std::abs(out.profile[i]));
        if (k < hi) trapezoid_spread += 0.5 * grid.dt() * std::abs(x[k + 1] - x[k]);
    }
    out.profile[0] = 0.0;
    out.quadrature_budget = spec.a * singular.quadrature_spread + spec.b * trapezoid_spread;
    return out;
}

}  // namespace

RestartResidual restart_residual(std::span<const double> values, std::span<const double> noise,
                                 const TimeGrid& grid, const SdeSpec& spec, const ExcursionSet& excursions,
                                 std::size_t interval, std::size_t margin, double floor) {
    if (values.size() != grid.size() || noise.size() != grid.size()) {
        throw DomainError("values and noise must match the grid");
    }
    if (interval >= excursions.intervals.size()) throw DomainError("interval index out of range");
    const auto& ex = excursions.intervals[interval];
    const std::size_t lo = ex.left_bounded ? ex.alpha + margin : ex.alpha;
    const std::size_t hi = ex.right_bounded ? (ex.beta >= margin ? ex.beta - margin : 0) : ex.beta;
    if (lo >= hi) {
        throw IntervalTooShort("interval " + std::to_string(interval) + " is too short for margin " +
                               std::to_string(margin));
    }
    auto window = window_residual(values, noise, grid, spec, lo, hi, floor);
    return RestartResidual{interval, margin, lo, hi, std::move(window.profile), window.sup,
                           window.quadrature_budget};
}

InitialIdentity verify_initial_identity(const EpsilonFamily& family, double threshold, std::size_t margin,
                                        double floor) {
    const auto& x = family.limit_estimate;
    const auto set = decompose_excursions(x, threshold);
    if (!set.first_interval_closed_left) throw DomainError("node 0 is not inside the first excursion");
    const auto& first = set.intervals.front();
    std::size_t end = first.beta;
    if (first.right_bounded) end = first.beta > margin ? first.beta - margin : 0;
    if (end == 0) throw IntervalTooShort("initial excursion is too short for margin " + std::to_string(margin));

    auto window = window_residual(x, family.noise, family.grid, family.spec, 0, end, floor);
    // Anchored at node 0, x[0] is X_0 and noise[0] is 0, so this is the
    // identity with the X_0 term and sigma B_t.
    return InitialIdentity{end, window.sup, window.quadrature_budget + 2.0 * family.cauchy_gap};
}

std::vector<RefinementWindow> residual_refinement(const EpsilonFamily& coarse, const EpsilonFamily& fine,
                                                  double threshold, std::size_t margin, std::size_t min_nodes,
                                                  double floor) {
    if (fine.grid.steps() != 2 * coarse.grid.steps() || fine.grid.horizon() != coarse.grid.horizon()) {
        throw DomainError("fine family must live on the 2x refined grid");
    }
    for (std::size_t k = 0; k < coarse.grid.size(); ++k) {
        if (coarse.noise[k] != fine.noise[2 * k]) throw DomainError("coarse noise is not nested in the fine noise");
    }

    const auto set = decompose_excursions(coarse.limit_estimate, threshold);
    std::vector<RefinementWindow> out;
    for (std::size_t i = 0; i < set.intervals.size(); ++i) {
        const auto& ex = set.intervals[i];
        if (!ex.left_bounded) continue;
        const std::size_t lo = ex.alpha + margin;
        const std::size_t hi = ex.right_bounded ? (ex.beta >= margin ? ex.beta - margin : 0) : ex.beta;
        if (hi < lo + min_nodes + 1) continue;

        const auto c = window_residual(coarse.limit_estimate, coarse.noise, coarse.grid, coarse.spec, lo, hi, floor);
        const auto f = window_residual(fine.limit_estimate, fine.noise, fine.grid, fine.spec, 2 * lo, 2 * hi, floor);
        out.push_back({coarse.grid.node(lo), coarse.grid.node(hi), hi - lo + 1, c.sup, f.sup});
    }
    return out;
}

void write_excursion_csv(const ExcursionSet& excursions, std::span<const double> values, const TimeGrid& grid,
                         std::span<const std::optional<double>> residuals, std::ostream& out,
                         const Metadata& extra) {
    if (residuals.size() != excursions.intervals.size()) throw DomainError("one residual slot per interval");
    Metadata meta{{"threshold", format_double(excursions.threshold)},
                  {"first_interval_closed_left", excursions.first_interval_closed_left ? "true" : "false"}};
    meta.insert(meta.end(), extra.begin(), extra.end());
    CsvWriter csv(out, meta, {"interval_index", "alpha_t", "beta_t", "length", "endpoint_values", "sup_residual"});
    for (std::size_t i = 0; i < excursions.intervals.size(); ++i) {
        const auto& ex = excursions.intervals[i];
        double endpoint = 0.0;
        if (ex.left_bounded) endpoint = std::max(endpoint, std::abs(values[ex.alpha]));
        if (ex.right_bounded) endpoint = std::max(endpoint, std::abs(values[ex.beta]));
        const double alpha_t = grid.node(ex.alpha);
        const double beta_t = grid.node(ex.beta);
        csv.row({static_cast<double>(i), alpha_t, beta_t, beta_t - alpha_t, endpoint,
                 residuals[i].value_or(std::numeric_limits<double>::quiet_NaN())});
    }
}

}  // namespace sfbm
