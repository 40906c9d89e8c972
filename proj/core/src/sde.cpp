#include "sfbm/sde.hpp"

#include "sfbm/errors.hpp"

#include <cmath>
#include <ostream>

namespace sfbm {

SdeSpec::SdeSpec(double x0_, double a_, double b_, double sigma_, HurstParam hurst_)
    : x0(x0_), a(a_), b(b_), sigma(sigma_), hurst(hurst_) {
    if (!(x0 > 0.0)) throw DomainError("X_0 must be positive");
    if (!(a > 0.0)) throw DomainError("a must be positive");
    if (!(b >= 0.0)) throw DomainError("b must be nonnegative");
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    if (!std::isfinite(x0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(sigma)) {
        throw DomainError("SDE parameters must be finite");
    }
}

std::string_view to_string(StepRule rule) noexcept {
    return rule == StepRule::drift_implicit ? "drift_implicit" : "frozen_explicit";
}

StepRule parse_step_rule(std::string_view name) {
    if (name == "drift_implicit") return StepRule::drift_implicit;
    if (name == "frozen_explicit") return StepRule::frozen_explicit;
    throw DomainError("unknown step rule '" + std::string(name) + "'");
}

double drift_eps(double t, double x, const SdeSpec& spec, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    if (t < 0.0) throw DomainError("time must be nonnegative");
    const double positive_part = x > 0.0 ? x : 0.0;
    return spec.a * std::pow(t + epsilon, spec.hurst.two_h() - 1.0) / (positive_part + epsilon) - spec.b * x;
}

double kernel_integral(double t1, double t2, double epsilon, HurstParam hurst) {
    if (t1 < 0.0 || epsilon < 0.0) throw DomainError("kernel integral needs t1 >= 0 and eps >= 0");
    if (t1 > t2) throw DomainError("kernel integral needs t1 <= t2");
    if (t1 == t2) return 0.0;
    const double e = hurst.two_h();
    return (std::pow(t2 + epsilon, e) - std::pow(t1 + epsilon, e)) / e;
}

namespace {

// Root of y = c + g / (y 1{y>0} + eps); the left side minus the right is
// strictly increasing in y, so the root is unique.
double implicit_root(double c, double g, double epsilon) {
    const double product = c * epsilon + g;
    if (product <= 0.0) return c + g / epsilon;
    const double root = std::sqrt((c + epsilon) * (c + epsilon) + 4.0 * g);
    const double shift = c - epsilon;
    return shift >= 0.0 ? 0.5 * (shift + root) : 2.0 * product / (root - shift);
}

}  // namespace

double regularized_step(double x, double t1, double t2, double noise_increment, const SdeSpec& spec,
                        double epsilon, StepRule rule) {
    const double g = spec.a * kernel_integral(t1, t2, epsilon, spec.hurst);
    const double explicit_part = x - spec.b * x * (t2 - t1) + spec.sigma * noise_increment;
    if (rule == StepRule::frozen_explicit) {
        const double positive_part = x > 0.0 ? x : 0.0;
        return explicit_part + g / (positive_part + epsilon);
    }
    return implicit_root(explicit_part, g, epsilon);
}

RegularizedPath solve_regularized(const SdeSpec& spec, double epsilon, const TimeGrid& grid,
                                  std::span<const double> noise, std::string noise_ref, StepRule rule) {
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    if (noise.size() != grid.size()) throw DomainError("noise length does not match the grid");

    RegularizedPath out{spec, epsilon, grid, std::vector<double>(grid.size()), std::move(noise_ref), rule};
    out.values[0] = spec.x0;
    double t_left = 0.0;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t_right = grid.node(k + 1);
        const double next = regularized_step(out.values[k], t_left, t_right, noise[k + 1] - noise[k], spec,
                                             epsilon, rule);
        if (!std::isfinite(next)) throw SolverFailure("non-finite state at eps=" + format_double(epsilon), k);
        out.values[k + 1] = next;
        t_left = t_right;
    }
    return out;
}

RegularizedPath solve_regularized(const SdeSpec& spec, double epsilon, const FbmPath& noise, StepRule rule) {
    if (noise.hurst != spec.hurst) throw DomainError("noise Hurst index differs from the SDE's");
    return solve_regularized(spec, epsilon, noise.grid, noise.values, noise.reference(), rule);
}

void write_solution_csv(const RegularizedPath& path, std::span<const double> noise, std::ostream& out,
                        const Metadata& extra) {
    if (noise.size() != path.values.size()) throw DomainError("noise length does not match the solution");
    Metadata meta{{"x0", format_double(path.spec.x0)},
                  {"a", format_double(path.spec.a)},
                  {"b", format_double(path.spec.b)},
                  {"sigma", format_double(path.spec.sigma)},
                  {"hurst", format_double(path.spec.hurst.value())},
                  {"epsilon", format_double(path.epsilon)},
                  {"step_rule", std::string(to_string(path.rule))},
                  {"noise", path.noise_ref}};
    meta.insert(meta.end(), extra.begin(), extra.end());
    CsvWriter csv(out, meta, {"t", "X_eps", "noise_value"});
    for (std::size_t k = 0; k < path.values.size(); ++k) csv.row({path.grid.node(k), path.values[k], noise[k]});
}

ComparisonSide regularized_side(const SdeSpec& spec, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    const double exponent = spec.hurst.two_h() - 1.0;
    const double a = spec.a;
    const double b = spec.b;
    const HurstParam hurst = spec.hurst;
    return ComparisonSide{
        [=](double t) { return std::pow(t + epsilon, exponent); },
        [=](double x) { return a / ((x > 0.0 ? x : 0.0) + epsilon); },
        [=](double x) { return -b * x; },
        [=](double t1, double t2) { return kernel_integral(t1, t2, epsilon, hurst); },
    };
}

ComparisonPair solve_comparison_pair(double x0, const ComparisonSide& side1, const ComparisonSide& side2,
                                     std::span<const double> forcing, const TimeGrid& grid,
                                     bool check_hypotheses) {
    if (forcing.size() != grid.size()) throw DomainError("forcing length does not match the grid");
    ComparisonPair out{grid, std::vector<double>(grid.size()), std::vector<double>(grid.size())};
    out.lower[0] = x0;
    out.upper[0] = x0;

    auto integral = [](const ComparisonSide& side, double t1, double t2) {
        return side.g_integral ? side.g_integral(t1, t2) : side.g(t1) * (t2 - t1);
    };

    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t1 = grid.node(k);
        const double t2 = grid.node(k + 1);
        const double x1 = out.lower[k];
        const double x2 = out.upper[k];

        if (check_hypotheses) {
            const double g1 = side1.g(t1), g2 = side2.g(t1);
            if (!(0.0 < g1 && g1 < g2)) throw HypothesisViolation("0 < g1 < g2 fails", k);
            for (double x : {x1, x2}) {
                const double f1 = side1.f(x), f2 = side2.f(x);
                if (!(0.0 < f1 && f1 < f2)) throw HypothesisViolation("0 < f1 < f2 fails", k);
                if (!(side1.h(x) <= side2.h(x))) throw HypothesisViolation("h1 <= h2 fails", k);
            }
        }

        const double dt = t2 - t1;
        const double df = forcing[k + 1] - forcing[k];
        out.lower[k + 1] = x1 + integral(side1, t1, t2) * side1.f(x1) + side1.h(x1) * dt + df;
        out.upper[k + 1] = x2 + integral(side2, t1, t2) * side2.f(x2) + side2.h(x2) * dt + df;
        if (!std::isfinite(out.lower[k + 1]) || !std::isfinite(out.upper[k + 1])) {
            throw SolverFailure("non-finite comparison state", k);
        }
    }
    return out;
}

}  // namespace sfbm
