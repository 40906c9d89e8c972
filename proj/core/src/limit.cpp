#include "sfbm/limit.hpp"

#include "sfbm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>

namespace sfbm {

EpsilonLadder::EpsilonLadder(double base, double ratio, std::size_t depth)
    : base_(base), ratio_(ratio), depth_(depth) {
    if (!(base > 0.0) || !std::isfinite(base)) throw DomainError("ladder base must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("ladder ratio must lie in (0, 1)");
    if (depth == 0) throw DomainError("ladder depth must be positive");
    if (!(level(depth) > 0.0)) throw DomainError("ladder underflows to zero");
}

double EpsilonLadder::level(std::size_t j) const {
    if (j > depth_) throw DomainError("ladder level out of range");
    return base_ * std::pow(ratio_, static_cast<double>(j));
}

std::vector<double> EpsilonLadder::levels() const {
    std::vector<double> out(size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = level(j);
    return out;
}

MonotonicityReport check_monotonicity(const EpsilonFamily& family, double tolerance) {
    MonotonicityReport report;
    report.tolerance = tolerance;
    report.worst_drop = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < family.solutions.size(); ++j) {
        const auto& coarse = family.solutions[j].values;
        const auto& fine = family.solutions[j + 1].values;
        for (std::size_t k = 1; k < coarse.size(); ++k) {
            const double drop = coarse[k] - fine[k];
            if (drop > report.worst_drop) {
                report.worst_drop = drop;
                report.worst_level = j;
                report.worst_node = k;
            }
            if (fine[k] < coarse[k] - tolerance) ++report.violations;
        }
    }
    return report;
}

EpsilonFamily build_family(const SdeSpec& spec, const TimeGrid& grid, std::span<const double> noise,
                           std::string noise_ref, const EpsilonLadder& ladder, const FamilyOptions& options) {
    if (ladder.depth() < 1) throw DomainError("ladder needs at least two levels");
    if (noise.size() != grid.size()) throw DomainError("noise length does not match the grid");

    auto solve_level = [&](std::size_t j) {
        // The solver's diagnostic already names eps and the step.
        return solve_regularized(spec, ladder.level(j), grid, noise, noise_ref, options.rule);
    };

    std::vector<RegularizedPath> solutions;
    solutions.reserve(ladder.size());
    if (options.parallel_levels) {
        std::vector<std::future<RegularizedPath>> pending;
        for (std::size_t j = 0; j < ladder.size(); ++j) pending.push_back(std::async(std::launch::async, solve_level, j));
        for (auto& p : pending) solutions.push_back(p.get());
    } else {
        for (std::size_t j = 0; j < ladder.size(); ++j) solutions.push_back(solve_level(j));
    }

    EpsilonFamily family{spec,
                         grid,
                         ladder,
                         std::move(noise_ref),
                         std::vector<double>(noise.begin(), noise.end()),
                         std::move(solutions),
                         {},
                         0.0,
                         {}};
    family.limit_estimate = family.solutions.back().values;
    const auto& last = family.solutions[family.solutions.size() - 1].values;
    const auto& before = family.solutions[family.solutions.size() - 2].values;
    for (std::size_t k = 0; k < last.size(); ++k) {
        family.cauchy_gap = std::max(family.cauchy_gap, std::abs(last[k] - before[k]));
    }
    family.monotonicity = check_monotonicity(family, options.tol_mono);
    return family;
}

EpsilonFamily build_family(const SdeSpec& spec, const FbmPath& noise, const EpsilonLadder& ladder,
                           const FamilyOptions& options) {
    if (noise.hurst != spec.hurst) throw DomainError("noise Hurst index differs from the SDE's");
    return build_family(spec, noise.grid, noise.values, noise.reference(), ladder, options);
}

NestednessReport check_nestedness(const EpsilonFamily& family) {
    NestednessReport report;
    for (std::size_t j = 0; j + 1 < family.solutions.size(); ++j) {
        const auto& coarse = family.solutions[j].values;
        const auto& fine = family.solutions[j + 1].values;
        bool pair_ok = true;
        for (std::size_t k = 1; k < coarse.size(); ++k) {
            if (fine[k] <= 0.0 && !(coarse[k] <= 0.0)) {
                if (report.nested) {
                    report.first_broken_level = j;
                    report.first_broken_node = k;
                }
                report.nested = false;
                pair_ok = false;
                break;
            }
        }
        if (!pair_ok) ++report.broken_pairs;
    }
    return report;
}

double limit_dominance_violation(const EpsilonFamily& family) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& level : family.solutions) {
        for (std::size_t k = 0; k < level.values.size(); ++k) {
            worst = std::max(worst, level.values[k] - family.limit_estimate[k]);
        }
    }
    return worst;
}

double upper_bound_constant(const SdeSpec& spec, double horizon) {
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    const double h = spec.hurst.value();
    return spec.x0 + spec.a * std::pow(horizon, 2.0 * h) / (h * spec.x0);
}

BoundCertificate verify_upper_bound(const EpsilonFamily& family, double tolerance) {
    BoundCertificate cert;
    cert.tolerance = tolerance;
    cert.constant = upper_bound_constant(family.spec, family.grid.horizon());
    for (double b : family.noise) cert.noise_sup = std::max(cert.noise_sup, std::abs(b));
    cert.bound = cert.constant + 2.0 * family.spec.sigma * cert.noise_sup;
    cert.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < family.solutions.size(); ++j) {
        const auto& values = family.solutions[j].values;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double excess = values[k] - cert.bound;
            if (excess > cert.max_violation) {
                cert.max_violation = excess;
                cert.worst_level = j;
                cert.worst_node = k;
            }
        }
    }
    return cert;
}

double nonpositive_measure(std::span<const double> values, const TimeGrid& grid) {
    if (values.size() != grid.size()) throw DomainError("values do not match the grid");
    std::size_t count = 0;
    for (std::size_t k = 1; k < values.size(); ++k) count += values[k] <= 0.0 ? 1 : 0;
    return grid.dt() * static_cast<double>(count);
}

double nonpositive_measure(const RegularizedPath& path) {
    return nonpositive_measure(path.values, path.grid);
}

MeasureDecay verify_measure_decay(const EpsilonFamily& family, double threshold) {
    MeasureDecay decay;
    decay.threshold = threshold;
    for (const auto& level : family.solutions) decay.measures.push_back(nonpositive_measure(level));
    for (std::size_t j = 1; j < decay.measures.size(); ++j) {
        if (decay.measures[j] > decay.measures[j - 1]) decay.nonincreasing = false;
    }
    decay.below_threshold = decay.measures.back() <= threshold;
    return decay;
}

NonnegativityCheck verify_limit_nonnegativity(const EpsilonFamily& family, double tolerance) {
    NonnegativityCheck check;
    check.tolerance = tolerance;
    const auto& limit = family.limit_estimate;
    const auto it = std::min_element(limit.begin(), limit.end());
    check.worst_value = *it;
    check.worst_node = static_cast<std::size_t>(it - limit.begin());
    check.passed = check.worst_value >= -tolerance;
    return check;
}

namespace {

std::size_t clamp_last(std::size_t last, std::size_t size) {
    return last == SIZE_MAX ? size - 1 : last;
}

}  // namespace

SingularIntegral singular_integral(std::span<const double> values, const TimeGrid& grid, HurstParam hurst,
                                   double floor, std::size_t first, std::size_t last) {
    if (!(floor > 0.0)) throw DomainError("truncation floor must be positive");
    if (values.size() > grid.size()) throw DomainError("more values than grid nodes");
    last = clamp_last(last, values.size());
    if (first > last || last >= values.size()) throw DomainError("integration window out of range");

    SingularIntegral out;
    out.first = first;
    out.running.assign(last - first + 1, 0.0);
    double acc = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        const double kernel = kernel_integral(grid.node(k), grid.node(k + 1), 0.0, hurst);
        if (values[k] < floor) {
            out.flagged.push_back(k);
            out.flagged_kernel_mass += kernel;
        }
        const double left = 1.0 / std::max(values[k], floor);
        const double right = 1.0 / std::max(values[k + 1], floor);
        acc += kernel * left;
        out.quadrature_spread += kernel * std::abs(left - right);
        out.running[k - first + 1] = acc;
    }
    return out;
}

std::vector<double> running_trapezoid(std::span<const double> values, const TimeGrid& grid, std::size_t first,
                                      std::size_t last) {
    last = clamp_last(last, values.size());
    if (first > last || last >= values.size()) throw DomainError("integration window out of range");
    std::vector<double> out(last - first + 1, 0.0);
    const double half_dt = 0.5 * grid.dt();
    for (std::size_t k = first; k < last; ++k) {
        out[k - first + 1] = out[k - first] + half_dt * (values[k] + values[k + 1]);
    }
    return out;
}

double CompensatorEstimate::min_value() const {
    return *std::min_element(values.begin(), values.end());
}

double default_truncation_floor(const SdeSpec& spec) {
    return 1e-6 * spec.x0;
}

CompensatorEstimate compute_compensator(const EpsilonFamily& family, double floor) {
    const auto& spec = family.spec;
    const auto& x = family.limit_estimate;
    const auto singular = singular_integral(x, family.grid, spec.hurst, floor);
    const auto area = running_trapezoid(x, family.grid);

    CompensatorEstimate est;
    est.floor = floor;
    est.cauchy_gap = family.cauchy_gap;
    est.flagged_nodes = singular.flagged;
    est.values.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        est.values[k] = x[k] - spec.x0 - spec.a * singular.running[k] + spec.b * area[k] - spec.sigma * family.noise[k];
    }
    est.values[0] = 0.0;

    double trapezoid_spread = 0.0;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) trapezoid_spread += 0.5 * family.grid.dt() * std::abs(x[k + 1] - x[k]);
    est.truncation_budget = spec.a * singular.flagged_kernel_mass / floor;
    est.quadrature_budget = spec.a * singular.quadrature_spread + spec.b * trapezoid_spread;
    return est;
}

double epsilon_gap(const SdeSpec& spec, const FbmPath& noise, double eps1, double eps2, StepRule rule) {
    const auto x1 = solve_regularized(spec, eps1, noise, rule);
    const auto x2 = solve_regularized(spec, eps2, noise, rule);
    double gap = 0.0;
    for (std::size_t k = 0; k < x1.values.size(); ++k) gap = std::max(gap, std::abs(x1.values[k] - x2.values[k]));
    return gap;
}

ContinuityTable verify_eps_continuity(const SdeSpec& spec, const FbmPath& noise, double eps_star,
                                      std::span<const double> h, StepRule rule) {
    if (!(eps_star > 0.0)) throw DomainError("eps* must be positive");
    if (h.empty()) throw DomainError("h sequence is empty");
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0 && h[i] < eps_star)) throw DomainError("every h must lie in (0, eps*)");
        if (i > 0 && !(h[i] < h[i - 1])) throw DomainError("h sequence must be strictly decreasing");
    }

    const auto centre = solve_regularized(spec, eps_star, noise, rule);
    auto sup_gap = [&](double eps) {
        const auto other = solve_regularized(spec, eps, noise, rule);
        double gap = 0.0;
        for (std::size_t k = 0; k < other.values.size(); ++k) {
            gap = std::max(gap, std::abs(other.values[k] - centre.values[k]));
        }
        return gap;
    };

    ContinuityTable table;
    table.eps_star = eps_star;
    table.h.assign(h.begin(), h.end());
    for (double step : h) {
        table.gaps_above.push_back(sup_gap(eps_star + step));
        table.gaps_below.push_back(sup_gap(eps_star - step));
    }
    auto side_passes = [](const std::vector<double>& gaps) {
        for (std::size_t i = 1; i < gaps.size(); ++i) {
            if (gaps[i] > gaps[i - 1]) return false;
        }
        return gaps.back() <= 0.25 * gaps.front();
    };
    table.above_passed = side_passes(table.gaps_above);
    table.below_passed = side_passes(table.gaps_below);
    return table;
}

void write_family_csv(const EpsilonFamily& family, std::ostream& out, const Metadata& extra) {
    Metadata meta{{"x0", format_double(family.spec.x0)},
                  {"a", format_double(family.spec.a)},
                  {"b", format_double(family.spec.b)},
                  {"sigma", format_double(family.spec.sigma)},
                  {"hurst", format_double(family.spec.hurst.value())},
                  {"eps0", format_double(family.ladder.base())},
                  {"ratio", format_double(family.ladder.ratio())},
                  {"depth", std::to_string(family.ladder.depth())},
                  {"cauchy_gap", format_double(family.cauchy_gap)},
                  {"noise", family.noise_ref}};
    meta.insert(meta.end(), extra.begin(), extra.end());

    std::vector<std::string> columns{"t", "noise"};
    for (std::size_t j = 0; j < family.solutions.size(); ++j) columns.push_back("X_eps_" + std::to_string(j));
    columns.push_back("limit_estimate");

    CsvWriter csv(out, meta, columns);
    std::vector<double> row(columns.size());
    for (std::size_t k = 0; k < family.grid.size(); ++k) {
        row[0] = family.grid.node(k);
        row[1] = family.noise[k];
        for (std::size_t j = 0; j < family.solutions.size(); ++j) row[2 + j] = family.solutions[j].values[k];
        row.back() = family.limit_estimate[k];
        csv.row(row);
    }
}

}  // namespace sfbm
