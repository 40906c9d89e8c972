#pragma once

#include "sfbm/fbm.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace sfbm {

/// x_t = x0 + a int_0^t s^{2H-1}/x_s ds - b int_0^t x_s ds + g(t) on a short window.
struct LocalProblem {
    double x0;
    double a;
    double b;
    HurstParam hurst;
    TimeGrid grid;               ///< driver grid, starting at 0
    std::vector<double> driver;  ///< g on grid, g(0) = 0
    HolderEstimate holder;       ///< for g, exponent in (0, H)

    /// Linear interpolation of g; t must lie in [0, grid.horizon()].
    double driver_at(double t) const;
};

/// Validates the inputs and estimates the driver's Holder constant at `beta`
/// (defaults to H/2).
LocalProblem make_local_problem(double x0, double a, double b, HurstParam hurst, const TimeGrid& grid,
                                std::vector<double> driver, std::optional<double> beta = std::nullopt);

/// q = 2 a delta^{2H} / (H x0^2) + b delta.
double contraction_modulus(double x0, double a, double b, HurstParam hurst, double delta);

/// Upper envelope f(t) = a t^{2H}/(H x0) - b x0 t/2 + C t^beta.
double upper_envelope(const LocalProblem& problem, double t);
/// Lower envelope h(t) = a t^{2H}/(2H x0) - b x0 t - C t^beta.
double lower_envelope(const LocalProblem& problem, double t);

struct DeltaCertificate {
    double delta = 0.0;
    double modulus = 0.0;
    double lower_margin = 0.0;  ///< min_t (x0 + h(t)) - x0/2
    double upper_slack = 0.0;   ///< 2 x0 - max_t (x0 + f(t))
    std::size_t check_nodes = 0;
};

/// Safety factor applied to each defining inequality.
inline constexpr double kDeltaSafety = 0.95;

/// Largest delta in {2^-1, ..., 2^-40} (and not beyond the driver grid) with
/// h >= -0.95 x0/2, f <= 0.95 x0 on m+1 check nodes of [0, delta] and
/// q <= 0.95. Throws NumericalFailure when no candidate qualifies.
DeltaCertificate select_delta(const LocalProblem& problem, std::size_t check_nodes = 256);

struct PicardIterate {
    std::size_t iteration;
    double sup_distance;      ///< ||x^(m) - x^(m-1)||
    double contraction_ratio; ///< sup_distance / previous sup_distance; 0 for m = 1
};

struct PicardSolution {
    TimeGrid grid;  ///< over [0, delta]
    std::vector<double> values;
    std::vector<PicardIterate> log;
    std::size_t iteration_budget = 0;
    double residual = 0.0;  ///< ||T x - x|| at the returned iterate

    double max_ratio() const;
};

/// The discretized map: exact kernel integration with 1/x and x frozen at
/// the left node of each step, driver interpolated from the problem grid.
std::vector<double> picard_map(const LocalProblem& problem, const TimeGrid& grid, std::span<const double> x);

/// Iterates from the constant `start` (x0 by default) until successive
/// iterates are within `tolerance`. Leaving [x0/2, 2 x0] or exceeding the
/// q-predicted budget plus 10 throws SolverFailure with the iteration.
PicardSolution picard_solve(const LocalProblem& problem, const DeltaCertificate& cert, std::size_t steps,
                            double tolerance, std::optional<double> start = std::nullopt);

/// CSV (iteration, sup_distance, contraction_ratio).
void write_iteration_log(const PicardSolution& solution, std::ostream& out);

}  // namespace sfbm
