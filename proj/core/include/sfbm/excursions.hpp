#pragma once

#include "sfbm/errors.hpp"
#include "sfbm/fbm.hpp"
#include "sfbm/limit.hpp"
#include "sfbm/sde.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace sfbm {

/// A maximal run of nodes first..last with X > threshold. alpha and beta are
/// the bracketing nodes (X <= threshold there) when they exist; a run that
/// starts at node 0 has alpha = 0, and one that reaches the horizon has
/// beta = n.
struct Excursion {
    std::size_t first;
    std::size_t last;
    std::size_t alpha;
    std::size_t beta;
    bool left_bounded;   ///< alpha is a node with X <= threshold
    bool right_bounded;  ///< beta is a node with X <= threshold

    std::size_t interior_nodes() const noexcept { return last - first + 1; }
};

struct ExcursionSet {
    double threshold = 0.0;
    bool first_interval_closed_left = false;  ///< node 0 belongs to the first run
    std::vector<Excursion> intervals;
};

ExcursionSet decompose_excursions(std::span<const double> values, double threshold);

struct EndpointCheck {
    std::size_t interval = 0;
    double endpoint_value = 0.0;  ///< max |X| over the bracketing nodes
    double worst_excess = 0.0;    ///< max over checked nodes of X - allowance
    bool passed = true;
};

struct EndpointReport {
    double tolerance = 0.0;
    std::vector<EndpointCheck> checks;

    bool passed() const;
    double worst_excess() const;
};

/// For every bracketing node: |X| <= tol. For the `depth` nodes inside the
/// run next to it, at distance j steps: X <= tol + sqrt(a/H) (j dt)^H
/// + sigma C (j dt)^beta, the growth allowed by the drift and the driver's
/// Holder bound. Runs with no bracketing node pass vacuously.
EndpointReport verify_endpoint_limits(std::span<const double> values, const TimeGrid& grid,
                                      const ExcursionSet& excursions, const SdeSpec& spec,
                                      const HolderEstimate& noise_holder, double tolerance, std::size_t depth = 3);

struct RestartResidual {
    std::size_t interval = 0;
    std::size_t margin = 0;
    std::size_t anchor = 0;  ///< window start node
    std::size_t end = 0;     ///< window end node
    std::vector<double> profile;
    double sup_residual = 0.0;
    double quadrature_budget = 0.0;  ///< a * Riemann spread + b * trapezoid spread on the window
};

/// Thrown when the retreated window of an interval is empty.
class IntervalTooShort : public DomainError {
public:
    using DomainError::DomainError;
};

/// R(t) = X_t - X_{a*} - a int_{a*}^t s^{2H-1}/X ds + b int_{a*}^t X ds
///        - sigma (B_t - B_{a*}),
/// on [alpha + margin, beta - margin]; bounds without a bracketing node are
/// not retreated.
RestartResidual restart_residual(std::span<const double> values, std::span<const double> noise,
                                 const TimeGrid& grid, const SdeSpec& spec, const ExcursionSet& excursions,
                                 std::size_t interval, std::size_t margin, double floor);

struct InitialIdentity {
    std::size_t window_end = 0;
    double sup_residual = 0.0;
    double budget = 0.0;  ///< quadrature budget + 2 * cauchy gap

    bool passed() const noexcept { return sup_residual <= budget; }
};

/// The compensator-free identity anchored at 0 on [0, first node with
/// X <= threshold, minus margin].
InitialIdentity verify_initial_identity(const EpsilonFamily& family, double threshold, std::size_t margin,
                                        double floor);

struct RefinementWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t coarse_nodes = 0;
    double coarse_residual = 0.0;
    double fine_residual = 0.0;

    bool decreased() const noexcept { return fine_residual < coarse_residual; }
};

/// Compares restart residuals of a coarse family and a fine family on the
/// same time windows. The coarse noise must be the fine noise at every second
/// node. Windows come from excursions of the coarse limit above `threshold`
/// that have a bracketing left node and at least `min_nodes` interior nodes
/// after retreating by `margin`.
std::vector<RefinementWindow> residual_refinement(const EpsilonFamily& coarse, const EpsilonFamily& fine,
                                                  double threshold, std::size_t margin, std::size_t min_nodes,
                                                  double floor);

/// CSV (interval_index, alpha_t, beta_t, length, endpoint_values, sup_residual);
/// endpoint_values is the max |X| over the bracketing nodes, sup_residual is
/// nan for intervals too short to carry a window.
void write_excursion_csv(const ExcursionSet& excursions, std::span<const double> values, const TimeGrid& grid,
                         std::span<const std::optional<double>> residuals, std::ostream& out,
                         const Metadata& extra = {});

}  // namespace sfbm
