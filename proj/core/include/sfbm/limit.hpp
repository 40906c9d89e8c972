#pragma once

#include "sfbm/fbm.hpp"
#include "sfbm/path_io.hpp"
#include "sfbm/sde.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sfbm {

/// eps_j = base * ratio^j, j = 0..depth.
class EpsilonLadder {
public:
    EpsilonLadder(double base, double ratio, std::size_t depth);

    double base() const noexcept { return base_; }
    double ratio() const noexcept { return ratio_; }
    std::size_t depth() const noexcept { return depth_; }
    std::size_t size() const noexcept { return depth_ + 1; }
    double level(std::size_t j) const;
    std::vector<double> levels() const;

private:
    double base_;
    double ratio_;
    std::size_t depth_;
};

/// Worst breach of X^{eps_{j+1}}_k >= X^{eps_j}_k - tol over k >= 1.
struct MonotonicityReport {
    double tolerance = 0.0;
    std::size_t violations = 0;
    double worst_drop = 0.0;  ///< max of X^{eps_j} - X^{eps_{j+1}} (negative when strictly ordered)
    std::size_t worst_level = 0;
    std::size_t worst_node = 0;
};

/// Shared-noise solutions over a ladder plus the monotone-limit estimate.
struct EpsilonFamily {
    SdeSpec spec;
    TimeGrid grid;
    EpsilonLadder ladder;
    std::string noise_ref;
    std::vector<double> noise;
    std::vector<RegularizedPath> solutions;
    std::vector<double> limit_estimate;  ///< deepest level
    double cauchy_gap = 0.0;             ///< sup distance of the two deepest levels
    MonotonicityReport monotonicity;

    const std::vector<double>& deepest() const { return solutions.back().values; }
};

struct FamilyOptions {
    double tol_mono = 1e-12;
    StepRule rule = StepRule::drift_implicit;
    bool parallel_levels = false;
};

/// Solves every ladder level against the same noise. Solver failures are
/// rethrown as SolverFailure naming the offending epsilon.
EpsilonFamily build_family(const SdeSpec& spec, const FbmPath& noise, const EpsilonLadder& ladder,
                           const FamilyOptions& options = {});
EpsilonFamily build_family(const SdeSpec& spec, const TimeGrid& grid, std::span<const double> noise,
                           std::string noise_ref, const EpsilonLadder& ladder, const FamilyOptions& options = {});

MonotonicityReport check_monotonicity(const EpsilonFamily& family, double tolerance);

/// Exact containment {k : X^{eps_{j+1}}_k <= 0} subset of {k : X^{eps_j}_k <= 0}.
struct NestednessReport {
    bool nested = true;
    std::size_t broken_pairs = 0;
    std::size_t first_broken_level = 0;  ///< j of the first failing pair (j, j+1)
    std::size_t first_broken_node = 0;
};
NestednessReport check_nestedness(const EpsilonFamily& family);

/// max over j, k of X^{eps_j}_k - limit_k; nonpositive when the deepest level dominates.
double limit_dominance_violation(const EpsilonFamily& family);

/// X_0 + a T^{2H} / (H X_0).
double upper_bound_constant(const SdeSpec& spec, double horizon);

struct BoundCertificate {
    double constant = 0.0;
    double noise_sup = 0.0;
    double bound = 0.0;
    double max_violation = 0.0;
    double tolerance = 0.0;
    std::size_t worst_level = 0;
    std::size_t worst_node = 0;

    bool passed() const noexcept { return max_violation <= tolerance; }
};

/// Scans every level and node against C + 2 sigma max|B|.
BoundCertificate verify_upper_bound(const EpsilonFamily& family, double tolerance = 1e-9);

/// dt * #{k in 1..n : values[k] <= 0}.
double nonpositive_measure(const RegularizedPath& path);
double nonpositive_measure(std::span<const double> values, const TimeGrid& grid);

struct MeasureDecay {
    std::vector<double> measures;
    bool nonincreasing = true;
    double threshold = 0.0;
    bool below_threshold = true;

    bool passed() const noexcept { return nonincreasing && below_threshold; }
};
MeasureDecay verify_measure_decay(const EpsilonFamily& family, double threshold);

struct NonnegativityCheck {
    bool passed = true;
    double worst_value = 0.0;
    std::size_t worst_node = 0;
    double tolerance = 0.0;
};
NonnegativityCheck verify_limit_nonnegativity(const EpsilonFamily& family, double tolerance);

/// Running int_{t_first}^{t_k} s^{2H-1} / max(X, floor) ds with the kernel
/// integrated exactly and 1/X frozen at the left node of each step.
struct SingularIntegral {
    std::size_t first = 0;
    std::vector<double> running;        ///< running[i] is the integral up to node first + i
    std::vector<std::size_t> flagged;   ///< left nodes where X < floor
    double flagged_kernel_mass = 0.0;   ///< sum of kernel integrals over flagged steps
    double quadrature_spread = 0.0;     ///< sum of K_k |1/X_k - 1/X_{k+1}| (floored), left vs right sums
};
SingularIntegral singular_integral(std::span<const double> values, const TimeGrid& grid, HurstParam hurst,
                                   double floor, std::size_t first = 0, std::size_t last = SIZE_MAX);

/// Running trapezoid int_{t_first}^{t_k} X ds.
std::vector<double> running_trapezoid(std::span<const double> values, const TimeGrid& grid, std::size_t first = 0,
                                      std::size_t last = SIZE_MAX);

/// L_t = X_t - X_0 - a I_t + b int X - sigma B_t on the limit estimate.
struct CompensatorEstimate {
    std::vector<double> values;
    double floor = 0.0;
    std::vector<std::size_t> flagged_nodes;
    double cauchy_gap = 0.0;
    /// a * sum_{flagged} K_k / floor: the most the floor can change I.
    double truncation_budget = 0.0;
    /// a * (left/right Riemann spread of I) + b * (trapezoid spread).
    double quadrature_budget = 0.0;

    double min_value() const;
    /// 2 gap + quadrature budget.
    double smooth_budget() const noexcept { return 2.0 * cauchy_gap + quadrature_budget; }
    /// 2 gap + truncation budget + 1e-6.
    double truncated_budget() const noexcept { return 2.0 * cauchy_gap + truncation_budget + 1e-6; }
};

/// Default floor 1e-6 * X_0.
double default_truncation_floor(const SdeSpec& spec);
CompensatorEstimate compute_compensator(const EpsilonFamily& family, double floor);

/// sup_k |X^{eps1}_k - X^{eps2}_k| under shared noise.
double epsilon_gap(const SdeSpec& spec, const FbmPath& noise, double eps1, double eps2,
                   StepRule rule = StepRule::drift_implicit);

struct ContinuityTable {
    double eps_star = 0.0;
    std::vector<double> h;
    std::vector<double> gaps_above;  ///< sup |X^{eps*+h} - X^{eps*}|
    std::vector<double> gaps_below;  ///< sup |X^{eps*-h} - X^{eps*}|
    bool above_passed = false;
    bool below_passed = false;

    bool passed() const noexcept { return above_passed && below_passed; }
};

/// A side passes when its gaps are nonincreasing and the last is at most a
/// quarter of the first. h must be positive, strictly decreasing, < eps*.
ContinuityTable verify_eps_continuity(const SdeSpec& spec, const FbmPath& noise, double eps_star,
                                      std::span<const double> h, StepRule rule = StepRule::drift_implicit);

/// Columns (t, noise, X_eps_0..X_eps_J, limit_estimate).
void write_family_csv(const EpsilonFamily& family, std::ostream& out, const Metadata& extra = {});

}  // namespace sfbm
