#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace rfmdp {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

enum class LpSense { minimize, maximize };
enum class RowSense { less_equal, greater_equal, equal };

struct LinearConstraint {
    std::vector<std::pair<std::size_t, double>> terms;  ///< (variable, coefficient)
    RowSense sense = RowSense::equal;
    double rhs = 0.0;
};

/// min/max c^T x  s.t.  rows, lower <= x <= upper. Lower bounds must be finite.
struct LinearProgram {
    LpSense sense = LpSense::minimize;
    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LinearConstraint> constraints;

    std::size_t variable_count() const noexcept { return objective.size(); }

    std::size_t add_variable(double lo, double hi, double cost = 0.0) {
        objective.push_back(cost);
        lower.push_back(lo);
        upper.push_back(hi);
        return objective.size() - 1;
    }

    void add_constraint(std::vector<std::pair<std::size_t, double>> terms, RowSense sense, double rhs) {
        constraints.push_back({std::move(terms), sense, rhs});
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> values;  ///< optimal only
    double objective_value = 0.0;
    std::size_t iterations = 0;
};

struct LpOptions {
    double feasibility_tolerance = 1e-9;
    double optimality_tolerance = 1e-9;
    double pivot_tolerance = 1e-9;
    std::size_t variable_cap = 100'000;
};

/**
 * Bounded-variable primal simplex on a dense tableau.
 *
 * Two phases (artificial variables for phase 1). Pricing is Dantzig's rule
 * with lowest-index tie-breaking; after 10 * (rows + columns) consecutive
 * degenerate pivots the solver switches to Bland's rule for the rest of the
 * solve. Infeasible and unbounded programs are reported through the status;
 * numerical breakdown raises Error(solver).
 */
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

namespace detail {
class Tableau;
}

/**
 * One constraint set solved for a sequence of objectives. Each solve after the
 * first restarts phase two from the previous optimal basis, which stays
 * primal feasible because only the costs change.
 */
class IncrementalLp {
public:
    explicit IncrementalLp(LinearProgram lp, const LpOptions& options = {});
    ~IncrementalLp();
    IncrementalLp(IncrementalLp&&) noexcept;
    IncrementalLp& operator=(IncrementalLp&&) noexcept;

    /// `objective` has one entry per variable of the original program.
    LpSolution solve(std::span<const double> objective, LpSense sense);
    /// Size of the dense tableau kept between solves.
    std::size_t tableau_entries() const noexcept;

private:
    LpOptions options_;
    std::unique_ptr<detail::Tableau> tableau_;
    bool started_ = false;
};

/// Largest constraint or bound violation of `x` (0 when feasible).
double max_violation(const LinearProgram& lp, const std::vector<double>& x);

} // namespace rfmdp
