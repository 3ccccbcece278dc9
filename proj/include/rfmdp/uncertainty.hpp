#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace rfmdp {

using Count = std::uint64_t;

/// {p in simplex : lower <= p <= upper}. Coordinates with upper == 0 are outside the support.
struct BoxSet {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dimension() const noexcept { return lower.size(); }
    /// Box invariants plus non-empty intersection with the simplex.
    bool well_formed(double tolerance = 1e-12) const;
    bool contains(std::span<const double> p, double tolerance = 1e-9) const;

    static BoxSet full_simplex(std::size_t dimension);
    static BoxSet point(std::span<const double> distribution);
};

/**
 * {p in simplex : ||p - nominal||_p <= radius}. An optional support mask
 * restricts the ball to the supported coordinates (others are fixed to 0).
 */
struct L1Set {
    std::vector<double> nominal;
    double radius = 0.0;
    double norm_p = 1.0;
    std::vector<char> support;  ///< empty = every coordinate supported

    std::size_t dimension() const noexcept { return nominal.size(); }
    bool supported(std::size_t i) const { return support.empty() || support[i] != 0; }
    bool contains(std::span<const double> p, double tolerance = 1e-9) const;
};

/// conv{vertices}.
struct VertexPolytope {
    std::vector<std::vector<double>> vertices;

    std::size_t dimension() const { return vertices.empty() ? 0 : vertices.front().size(); }
};

using MarginalSet = std::variant<BoxSet, L1Set, VertexPolytope>;

std::size_t dimension(const MarginalSet& set);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

/**
 * Quantile of Beta(a, b) by bisection on the regularised incomplete beta
 * function. The bracket is shrunk to `tolerance`; `round_up` selects which end
 * of the final bracket is returned.
 */
double beta_quantile(double probability, double a, double b, bool round_up, double tolerance = 1e-10);

/**
 * Exact binomial (Clopper-Pearson) interval for x successes in n trials.
 * Returns nullopt when n == 0: there is no data and the caller should use the
 * whole simplex. Interval ends are rounded outward.
 */
std::optional<Interval> clopper_pearson(Count successes, Count trials, double delta);

/// sqrt(2 [ln(2^a - 2) - ln delta] / n), the L1 concentration radius.
double weissman_radius(std::size_t support_size, Count samples, double delta);

/// Per-coordinate Clopper-Pearson box. n == 0 gives the full simplex box.
BoxSet build_box_set(std::span<const Count> counts, Count total, double delta);

/// L1 ball around counts / n. n == 0 gives a radius-2 ball around the uniform distribution.
L1Set build_l1_set(std::span<const Count> counts, Count total, double delta);

inline constexpr std::size_t default_vertex_cap = 100'000;

/// Upper bound on the vertex count: k 2^(k-1) for k non-degenerate coordinates.
double estimated_box_vertex_count(const BoxSet& set);

/**
 * All vertices of box intersect simplex, in enumeration order. Every vertex has
 * at least n-1 coordinates at a bound; one free coordinate (lowest index on
 * ties) absorbs the slack.
 */
VertexPolytope enumerate_box_vertices(const BoxSet& set, std::size_t cap = default_vertex_cap);

/// Product of L_p balls enclosed by one ball: Kronecker nominal, summed radius (left fold).
L1Set compose_l1_radius_sum(std::span<const L1Set> sets);

/// Smallest box around an L1 ball: nominal +- radius/2, clipped to [0, 1].
BoxSet box_hull_of_l1(const L1Set& set);

} // namespace rfmdp
