#pragma once

#include "rfmdp/lp.hpp"
#include "rfmdp/uncertainty.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace rfmdp {

/// Which extremum of the expectation <p, values> is sought: worst = minimum.
enum class InnerSense { worst, best };

enum class InnerBackend { box_greedy, l1_greedy, vertex_product, interval_arithmetic, mccormick };

std::string_view to_string(InnerBackend backend);

struct InnerResult {
    double value = 0.0;
    std::vector<double> witness;  ///< joint distribution attaining `value`
    InnerBackend backend = InnerBackend::box_greedy;
};

/**
 * Inner problem over a product of marginal sets. The marginals and values are
 * borrowed; the joint index follows the Kronecker ordering (first factor
 * outermost).
 */
struct InnerProblem {
    std::vector<const MarginalSet*> marginals;
    std::span<const double> values;
    InnerSense sense = InnerSense::worst;
};

/// Exact optimum of <p, values> over box intersect simplex by greedy mass pouring.
InnerResult worst_case_box_greedy(const BoxSet& set, std::span<const double> values, InnerSense sense);

/// Exact optimum over an L1 ball intersect simplex.
InnerResult worst_case_l1(const L1Set& set, std::span<const double> values, InnerSense sense);

inline constexpr std::size_t default_product_vertex_cap = 1'000'000;

/// Exact optimum over products of marginal vertices (the last factor is solved directly). Boxes or vertex polytopes only.
InnerResult worst_case_vertex_product(const InnerProblem& problem,
                                      std::size_t product_cap = default_product_vertex_cap,
                                      std::size_t marginal_cap = default_vertex_cap);

/// Joint box with bounds equal to the products of the marginal bounds.
BoxSet interval_arithmetic_product(std::span<const BoxSet> sets);
BoxSet interval_arithmetic_product(std::span<const BoxSet* const> sets);

struct McCormickOptions {
    /// Add sum_i p^k_i = 1 for every marginal k (valid, tightening).
    bool marginal_simplex = true;
    /// Build each partial product h^r over (i_0..i_r) once and reuse it; off = one chain per joint index.
    bool share_prefixes = true;
    /// With shared prefixes: sum_i h^k(prefix, i) = h^(k-1)(prefix) and sum_prefix h^k(prefix, i) = p^k_i.
    bool linking_equalities = true;
    LpOptions lp;
};

/// The recursive McCormick relaxation as an explicit LP, with the map back to joint indices.
struct McCormickProgram {
    LinearProgram lp;
    std::vector<std::size_t> product_variables;  ///< LP variable holding the full product per kept joint index
    std::vector<std::size_t> joint_indices;      ///< joint index of each entry of product_variables
    std::size_t joint_dimension = 0;
    std::size_t marginal_variables = 0;

    /// Inequalities + equalities + two box constraints per marginal variable.
    std::size_t constraint_count() const { return lp.constraints.size() + 2 * marginal_variables; }
};

/// 4(n-1) prod m_k + 2 sum m_k + 1: size of the literal program (no simplex rows per marginal, one chain per joint index).
std::size_t mccormick_constraint_formula(std::span<const std::size_t> domain_sizes);

/**
 * Builds the McCormick LP. Outcomes whose upper bound is 0 are eliminated
 * together with every product involving them.
 */
McCormickProgram build_mccormick_program(std::span<const BoxSet* const> sets, std::span<const double> values,
                                         InnerSense sense, const McCormickOptions& options = {});

/// Relaxed optimum: a lower bound (worst) / upper bound (best) on the exact product optimum.
InnerResult mccormick_worst_case(const InnerProblem& problem, const McCormickOptions& options = {});

/**
 * The McCormick program for one fixed tuple of boxes, re-solved for changing
 * value vectors. Later solves restart from the previous optimal basis.
 *
 * Bounds within 1e-4 of 0 or 1 can make the simplex bases numerically
 * singular. If the LP breaks down, the solver switches for good to boxes with
 * those bounds moved onto 0 and 1. The wider boxes give a relaxation of the
 * original one, so worst-case values stay sound.
 */
class McCormickSolver {
public:
    explicit McCormickSolver(std::span<const BoxSet* const> sets, const McCormickOptions& options = {});

    InnerResult solve(std::span<const double> values, InnerSense sense);
    std::size_t tableau_entries() const noexcept { return lp_.tableau_entries(); }

private:
    McCormickSolver(std::vector<BoxSet> widened, const McCormickOptions& options);

    McCormickOptions options_;
    std::vector<BoxSet> boxes_;
    bool widened_ = false;
    McCormickProgram program_;
    IncrementalLp lp_;
    std::vector<double> objective_;
    std::unique_ptr<McCormickSolver> fallback_;
};

enum class Membership { member, non_member };

/// Decides whether `point` is P1 (x) ... (x) Pn with every Pk in its box.
Membership spurious_membership_check(std::span<const double> point, std::span<const BoxSet> sets,
                                     double tolerance = 1e-9);

} // namespace rfmdp
