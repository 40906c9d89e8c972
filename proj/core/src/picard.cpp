#include "sfbm/picard.hpp"

#include "sfbm/errors.hpp"
#include "sfbm/path_io.hpp"
#include "sfbm/sde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sfbm {

double LocalProblem::driver_at(double t) const {
    if (t < 0.0 || t > grid.horizon()) throw DomainError("driver evaluated outside its grid");
    const double scaled = t / grid.dt();
    const auto left = std::min(static_cast<std::size_t>(scaled), grid.steps() - 1);
    const double w = scaled - static_cast<double>(left);
    return (1.0 - w) * driver[left] + w * driver[left + 1];
}

LocalProblem make_local_problem(double x0, double a, double b, HurstParam hurst, const TimeGrid& grid,
                                std::vector<double> driver, std::optional<double> beta) {
    if (!(x0 > 0.0) || !(a > 0.0) || !(b >= 0.0)) throw DomainError("local problem needs x0 > 0, a > 0, b >= 0");
    if (driver.size() != grid.size()) throw DomainError("driver length does not match the grid");
    if (driver[0] != 0.0) throw DomainError("driver must vanish at t = 0");
    const double exponent = beta.value_or(0.5 * hurst.value());
    if (!(exponent > 0.0 && exponent < hurst.value())) throw DomainError("Holder exponent must lie in (0, H)");
    auto holder = estimate_holder(driver, grid, exponent);
    return LocalProblem{x0, a, b, hurst, grid, std::move(driver), std::move(holder)};
}

double contraction_modulus(double x0, double a, double b, HurstParam hurst, double delta) {
    if (!(delta > 0.0)) throw DomainError("delta must be positive");
    const double h = hurst.value();
    return 2.0 * a * std::pow(delta, 2.0 * h) / (h * x0 * x0) + b * delta;
}

double upper_envelope(const LocalProblem& p, double t) {
    const double h = p.hurst.value();
    return p.a * std::pow(t, 2.0 * h) / (h * p.x0) - 0.5 * p.b * p.x0 * t +
           p.holder.constant * std::pow(t, p.holder.exponent);
}

double lower_envelope(const LocalProblem& p, double t) {
    const double h = p.hurst.value();
    return p.a * std::pow(t, 2.0 * h) / (2.0 * h * p.x0) - p.b * p.x0 * t -
           p.holder.constant * std::pow(t, p.holder.exponent);
}

DeltaCertificate select_delta(const LocalProblem& problem, std::size_t check_nodes) {
    if (check_nodes < 100) throw DomainError("select_delta needs at least 100 check nodes");
    const double x0 = problem.x0;
    for (int power = 1; power <= 40; ++power) {
        const double delta = std::ldexp(1.0, -power);
        if (delta > problem.grid.horizon()) continue;
        const double q = contraction_modulus(x0, problem.a, problem.b, problem.hurst, delta);
        if (q > kDeltaSafety) continue;

        double min_h = 0.0;
        double max_f = 0.0;
        for (std::size_t i = 0; i <= check_nodes; ++i) {
            const double t = delta * static_cast<double>(i) / static_cast<double>(check_nodes);
            min_h = std::min(min_h, lower_envelope(problem, t));
            max_f = std::max(max_f, upper_envelope(problem, t));
        }
        if (min_h < -kDeltaSafety * 0.5 * x0 || max_f > kDeltaSafety * x0) continue;
        return DeltaCertificate{delta, q, x0 + min_h - 0.5 * x0, 2.0 * x0 - (x0 + max_f), check_nodes};
    }
    throw NumericalFailure("no admissible delta down to 2^-40 (Holder constant " +
                           format_double(problem.holder.constant) + ")");
}

double PicardSolution::max_ratio() const {
    double worst = 0.0;
    for (const auto& it : log) worst = std::max(worst, it.contraction_ratio);
    return worst;
}

std::vector<double> picard_map(const LocalProblem& problem, const TimeGrid& grid, std::span<const double> x) {
    if (x.size() != grid.size()) throw DomainError("iterate length does not match the grid");
    std::vector<double> out(grid.size());
    out[0] = problem.x0;
    double singular = 0.0;
    double linear = 0.0;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t1 = grid.node(k);
        const double t2 = grid.node(k + 1);
        singular += kernel_integral(t1, t2, 0.0, problem.hurst) / x[k];
        linear += x[k] * (t2 - t1);
        out[k + 1] = problem.x0 + problem.a * singular - problem.b * linear + problem.driver_at(t2);
    }
    return out;
}

namespace {

double sup_distance(const std::vector<double>& u, const std::vector<double>& v) {
    double d = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) d = std::max(d, std::abs(u[k] - v[k]));
    return d;
}

void check_band(const std::vector<double>& x, double x0, std::size_t iteration) {
    for (double v : x) {
        if (!(v >= 0.5 * x0 && v <= 2.0 * x0)) {
            throw SolverFailure("Picard iterate left [x0/2, 2x0] (value " + format_double(v) + ")", iteration);
        }
    }
}

}  // namespace

PicardSolution picard_solve(const LocalProblem& problem, const DeltaCertificate& cert, std::size_t steps,
                            double tolerance, std::optional<double> start) {
    if (!(tolerance > 0.0)) throw DomainError("Picard tolerance must be positive");
    if (!(cert.modulus > 0.0 && cert.modulus < 1.0)) throw DomainError("certificate modulus must lie in (0, 1)");
    if (cert.delta > problem.grid.horizon()) throw DomainError("delta exceeds the driver window");

    PicardSolution sol{TimeGrid(cert.delta, steps), {}, {}, 0, 0.0};
    std::vector<double> current(sol.grid.size(), start.value_or(problem.x0));
    check_band(current, problem.x0, 0);

    std::vector<double> next = picard_map(problem, sol.grid, current);
    check_band(next, problem.x0, 1);
    double distance = sup_distance(next, current);
    sol.log.push_back({1, distance, 0.0});
    sol.iteration_budget =
        distance <= tolerance
            ? 1
            : static_cast<std::size_t>(std::ceil(std::log(tolerance / distance) / std::log(cert.modulus))) + 10;

    std::size_t iteration = 1;
    while (distance > tolerance) {
        if (iteration >= sol.iteration_budget) {
            throw SolverFailure("Picard iteration exceeded its budget of " + std::to_string(sol.iteration_budget),
                                iteration);
        }
        current.swap(next);
        next = picard_map(problem, sol.grid, current);
        ++iteration;
        check_band(next, problem.x0, iteration);
        const double previous = distance;
        distance = sup_distance(next, current);
        sol.log.push_back({iteration, distance, previous > 0.0 ? distance / previous : 0.0});
    }

    sol.values = std::move(next);
    sol.residual = sup_distance(picard_map(problem, sol.grid, sol.values), sol.values);
    return sol;
}

void write_iteration_log(const PicardSolution& solution, std::ostream& out) {
    CsvWriter csv(out,
                  {{"delta", format_double(solution.grid.horizon())},
                   {"steps", std::to_string(solution.grid.steps())},
                   {"iteration_budget", std::to_string(solution.iteration_budget)},
                   {"residual", format_double(solution.residual)}},
                  {"iteration", "sup_distance", "contraction_ratio"});
    for (const auto& it : solution.log) {
        csv.row({static_cast<double>(it.iteration), it.sup_distance, it.contraction_ratio});
    }
}

}  // namespace sfbm
