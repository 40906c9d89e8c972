#pragma once

#include "sfbm/fbm.hpp"
#include "sfbm/path_io.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sfbm {

/// Parameters of X_t = X_0 + a int s^{2H-1}/X_s ds - b int X_s ds + sigma B^H_t.
struct SdeSpec {
    SdeSpec(double x0, double a, double b, double sigma, HurstParam hurst);

    double x0;
    double a;
    double b;
    double sigma;
    HurstParam hurst;
};

/// How one step treats the 1/(x 1{x>0} + eps) factor.
///
/// Both rules integrate (s+eps)^{2H-1} over the step exactly.
/// frozen_explicit evaluates the state factor at the left node.
/// drift_implicit evaluates it at the right node and solves the resulting
/// scalar equation in closed form; its one-step map is increasing in the
/// state and in 1/eps, so two levels driven by the same noise stay ordered
/// at every node, which the explicit map does not guarantee once
/// a K / eps^2 > 1.
enum class StepRule { drift_implicit, frozen_explicit };

std::string_view to_string(StepRule rule) noexcept;
StepRule parse_step_rule(std::string_view name);

/// a (t+eps)^{2H-1} / (x 1{x>0} + eps) - b x.
double drift_eps(double t, double x, const SdeSpec& spec, double epsilon);

/// int_{t1}^{t2} (s+eps)^{2H-1} ds = ((t2+eps)^{2H} - (t1+eps)^{2H}) / 2H.
double kernel_integral(double t1, double t2, double epsilon, HurstParam hurst);

/// Solution of the eps-regularized equation on the noise grid.
struct RegularizedPath {
    SdeSpec spec;
    double epsilon;
    TimeGrid grid;
    std::vector<double> values;
    std::string noise_ref;
    StepRule rule = StepRule::drift_implicit;
};

/// One step of the regularized recursion from state x over [t1, t2] with
/// noise increment dB. Exposed for tests and for the comparison integrator.
double regularized_step(double x, double t1, double t2, double noise_increment, const SdeSpec& spec,
                        double epsilon, StepRule rule = StepRule::drift_implicit);

/// Throws SolverFailure on a non-finite state.
RegularizedPath solve_regularized(const SdeSpec& spec, double epsilon, const FbmPath& noise,
                                  StepRule rule = StepRule::drift_implicit);

/// Same recursion on raw noise values (values[0] is the noise at t=0).
RegularizedPath solve_regularized(const SdeSpec& spec, double epsilon, const TimeGrid& grid,
                                  std::span<const double> noise, std::string noise_ref,
                                  StepRule rule = StepRule::drift_implicit);

/// CSV (t, X_eps, noise_value) with spec, eps and seed metadata as comments.
void write_solution_csv(const RegularizedPath& path, std::span<const double> noise, std::ostream& out,
                        const Metadata& extra = {});

/// One side of  x_t = x0 + int g(s) f(x_s) ds + int h(x_s) ds + forcing(t).
struct ComparisonSide {
    std::function<double(double)> g;
    std::function<double(double)> f;
    std::function<double(double)> h;
    /// Exact int_{t1}^{t2} g(s) ds when available; otherwise g(t1) (t2 - t1).
    std::function<double(double, double)> g_integral;
};

struct ComparisonPair {
    TimeGrid grid;
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Integrates both equations with the same explicit step and the same
/// forcing. Before each step the hypotheses 0 < g1 < g2, 0 < f1 < f2 and
/// h1 <= h2 are checked at the visited time and at both visited states;
/// a violation throws HypothesisViolation. Passing check_hypotheses=false
/// integrates anyway (e.g. two identical sides).
ComparisonPair solve_comparison_pair(double x0, const ComparisonSide& side1, const ComparisonSide& side2,
                                     std::span<const double> forcing, const TimeGrid& grid,
                                     bool check_hypotheses = true);

/// The eps-instantiation g = (t+eps)^{2H-1}, f = a / (x 1{x>0} + eps), h = -b x.
ComparisonSide regularized_side(const SdeSpec& spec, double epsilon);

}  // namespace sfbm
