#include "rfmdp/lp.hpp"

#include "rfmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include <fmt/format.h>

namespace rfmdp {

namespace {

constexpr std::size_t reinvert_interval = 400;
// Pivots since the last reinversion above which a phase ends with a fresh factorisation.
constexpr std::size_t refresh_threshold = 400;
constexpr double small_pivot = 1e-4;
// Entries below this in the row of an artificial left basic after phase one are rounding noise of a redundant row.
constexpr double redundant_row_noise = 1e-6;

enum class VarState : unsigned char { basic, at_lower, at_upper, free_zero };

} // namespace

namespace detail {

class Tableau {
public:
    Tableau(LinearProgram lp, const LpOptions& options);

    LpSolution run();
    /// Phase two again with a new objective; the constraints are unchanged.
    LpSolution resolve(std::span<const double> objective, LpSense sense);
    const LinearProgram& program() const noexcept { return lp_; }
    /// run() with the objective replaced.
    LpSolution resolve_first(std::span<const double> objective, LpSense sense);
    std::size_t entries() const noexcept { return tab_.size(); }

private:
    bool phase_one();
    LpSolution phase_two();
    std::vector<double> structural_values() const;

    bool is_artificial(std::size_t j) const { return j >= first_artificial_; }
    double value_of_nonbasic(std::size_t j) const;
    void price(const std::vector<double>& costs);
    // Returns false when the phase stops (optimal or unbounded); sets unbounded_.
    bool iterate(bool phase_one);
    void pivot(std::size_t row, std::size_t col);
    void drive_out_artificials();
    // Recomputes B^-1 A, basic values and reduced costs from the original rows.
    void reinvert();
    std::vector<double> primal_values() const;

    LinearProgram lp_;
    LpOptions opt_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t structural_ = 0;
    std::size_t first_artificial_ = 0;

    std::vector<double> tab_;  // rows_ x cols_, B^-1 A
    std::vector<double> a0_;   // original rows (artificial rows sign-normalised)
    std::vector<double> b0_;
    std::vector<std::vector<std::pair<std::size_t, double>>> a0_columns_;  // sparse copy of a0_, built on demand
    std::vector<double> xb_;   // basic values
    std::vector<std::size_t> basis_;
    std::vector<VarState> state_;
    std::vector<double> lb_, ub_;
    std::vector<double> cost_;  // current phase costs
    std::vector<double> reduced_;
    std::vector<std::size_t> nonzero_;  // scratch: pivot-row support

    std::size_t iterations_ = 0;
    std::size_t degenerate_run_ = 0;
    std::size_t since_reinvert_ = 0;
    bool bland_ = false;
    bool unbounded_ = false;
    bool infeasible_ = false;
};

Tableau::Tableau(LinearProgram program, const LpOptions& options) : lp_(std::move(program)), opt_(options) {
    const auto& lp = lp_;
    structural_ = lp.variable_count();
    rows_ = lp.constraints.size();

    std::size_t slacks = 0;
    for (const auto& c : lp.constraints)
        if (c.sense != RowSense::equal) ++slacks;

    // Initial nonbasic point and row residuals.
    std::vector<double> x0(structural_);
    for (std::size_t j = 0; j < structural_; ++j) {
        if (std::isfinite(lp.lower[j]))
            x0[j] = lp.lower[j];
        else if (std::isfinite(lp.upper[j]))
            x0[j] = lp.upper[j];
        else
            x0[j] = 0.0;
    }
    std::vector<double> residual(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        double r = lp.constraints[i].rhs;
        for (auto [j, a] : lp.constraints[i].terms) r -= a * x0[j];
        residual[i] = r;
    }

    // Decide which rows need an artificial.
    std::vector<char> needs_artificial(rows_, 0);
    std::size_t artificials = 0;
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto sense = lp.constraints[i].sense;
        const bool slack_ok = (sense == RowSense::less_equal && residual[i] >= 0.0) ||
                              (sense == RowSense::greater_equal && residual[i] <= 0.0);
        if (!slack_ok) {
            needs_artificial[i] = 1;
            ++artificials;
        }
    }

    first_artificial_ = structural_ + slacks;
    cols_ = first_artificial_ + artificials;
    tab_.assign(rows_ * cols_, 0.0);
    xb_.assign(rows_, 0.0);
    basis_.assign(rows_, 0);
    state_.assign(cols_, VarState::at_lower);
    lb_.assign(cols_, 0.0);
    ub_.assign(cols_, infinity);

    for (std::size_t j = 0; j < structural_; ++j) {
        lb_[j] = lp.lower[j];
        ub_[j] = lp.upper[j];
        if (std::isfinite(lp.lower[j]))
            state_[j] = VarState::at_lower;
        else if (std::isfinite(lp.upper[j]))
            state_[j] = VarState::at_upper;
        else
            state_[j] = VarState::free_zero;
    }

    b0_.assign(rows_, 0.0);
    std::size_t slack = structural_, art = first_artificial_;
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto& c = lp.constraints[i];
        double* row = &tab_[i * cols_];
        for (auto [j, a] : c.terms) row[j] += a;

        std::optional<std::size_t> slack_col;
        if (c.sense != RowSense::equal) {
            slack_col = slack++;
            row[*slack_col] = 1.0;
            if (c.sense == RowSense::less_equal) {
                lb_[*slack_col] = 0.0;
                ub_[*slack_col] = infinity;
                state_[*slack_col] = VarState::at_lower;
            } else {
                lb_[*slack_col] = -infinity;
                ub_[*slack_col] = 0.0;
                state_[*slack_col] = VarState::at_upper;
            }
        }
        if (needs_artificial[i]) {
            const std::size_t a = art++;
            const double sign = residual[i] >= 0.0 ? 1.0 : -1.0;
            row[a] = sign;
            // Normalise so the basic column is +1.
            for (std::size_t j = 0; j < cols_; ++j) row[j] *= sign;
            b0_[i] = sign * c.rhs;
            basis_[i] = a;
            state_[a] = VarState::basic;
            xb_[i] = std::abs(residual[i]);
        } else {
            basis_[i] = *slack_col;
            state_[*slack_col] = VarState::basic;
            xb_[i] = residual[i];
            b0_[i] = c.rhs;
        }
    }
    a0_ = tab_;
}

void Tableau::reinvert() {
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    since_reinvert_ = 0;
    if (rows_ == 0) return;
    const Eigen::Map<const RowMatrix> a0(a0_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    Eigen::MatrixXd basis(rows_, rows_);
    for (std::size_t k = 0; k < rows_; ++k) basis.col(static_cast<Eigen::Index>(k)) = a0.col(static_cast<Eigen::Index>(basis_[k]));
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
    if (!(lu.rcond() > 1e-14))
        throw Error(ErrorKind::solver, fmt::format("basis became singular (rcond {:.3g}) after {} pivots", lu.rcond(), iterations_));

    // A0 is sparse (slack and artificial columns are unit vectors), so B^-1 A0 is cheapest through an explicit inverse.
    const Eigen::MatrixXd inverse = lu.inverse();
    Eigen::Map<RowMatrix> tab(tab_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    if (a0_columns_.empty()) {
        a0_columns_.resize(cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                if (a0_[i * cols_ + j] != 0.0) a0_columns_[j].emplace_back(i, a0_[i * cols_ + j]);
    }
    Eigen::VectorXd column(rows_);
    for (std::size_t j = 0; j < cols_; ++j) {
        column.setZero();
        for (auto [i, a] : a0_columns_[j]) column += a * inverse.col(static_cast<Eigen::Index>(i));
        tab.col(static_cast<Eigen::Index>(j)) = column;
    }
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b0_.data(), static_cast<Eigen::Index>(rows_));
    for (std::size_t j = 0; j < cols_; ++j) {
        if (state_[j] == VarState::basic) continue;
        const double v = value_of_nonbasic(j);
        if (v != 0.0) rhs -= v * a0.col(static_cast<Eigen::Index>(j));
    }
    const Eigen::VectorXd xb = lu.solve(rhs);
    for (std::size_t k = 0; k < rows_; ++k) {
        xb_[k] = xb(static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < rows_; ++i) tab_[i * cols_ + basis_[k]] = i == k ? 1.0 : 0.0;
    }
    price(std::vector<double>(cost_));
}

double Tableau::value_of_nonbasic(std::size_t j) const {
    switch (state_[j]) {
    case VarState::at_lower: return lb_[j];
    case VarState::at_upper: return ub_[j];
    default: return 0.0;
    }
}

void Tableau::price(const std::vector<double>& costs) {
    cost_ = costs;
    reduced_ = costs;
    for (std::size_t i = 0; i < rows_; ++i) {
        const double cb = costs[basis_[i]];
        if (cb == 0.0) continue;
        const double* row = &tab_[i * cols_];
        for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= cb * row[j];
    }
    for (std::size_t i = 0; i < rows_; ++i) reduced_[basis_[i]] = 0.0;
}

void Tableau::pivot(std::size_t r, std::size_t col) {
    double* prow = &tab_[r * cols_];
    const double inv = 1.0 / prow[col];
    nonzero_.clear();
    for (std::size_t j = 0; j < cols_; ++j) {
        if (prow[j] == 0.0) continue;
        prow[j] *= inv;
        nonzero_.push_back(j);
    }
    prow[col] = 1.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        if (i == r) continue;
        double* row = &tab_[i * cols_];
        const double f = row[col];
        if (f == 0.0) continue;
        for (std::size_t j : nonzero_) row[j] -= f * prow[j];
        row[col] = 0.0;
    }
    const double fd = reduced_[col];
    if (fd != 0.0) {
        for (std::size_t j : nonzero_) reduced_[j] -= fd * prow[j];
        reduced_[col] = 0.0;
    }
    basis_[r] = col;
}

bool Tableau::iterate(bool phase_one) {
    const double tol = opt_.optimality_tolerance;

    // Pricing.
    std::size_t enter = cols_;
    double best = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
        if (state_[j] == VarState::basic || is_artificial(j)) continue;
        if (lb_[j] == ub_[j]) continue;
        const double d = reduced_[j];
        bool eligible = false;
        switch (state_[j]) {
        case VarState::at_lower: eligible = d < -tol; break;
        case VarState::at_upper: eligible = d > tol; break;
        case VarState::free_zero: eligible = std::abs(d) > tol; break;
        default: break;
        }
        if (!eligible) continue;
        if (bland_) {
            enter = j;
            break;
        }
        if (std::abs(d) > best) {
            best = std::abs(d);
            enter = j;
        }
    }
    if (enter == cols_) return false;

    const double dir = reduced_[enter] < 0.0 ? 1.0 : -1.0;

    // Ratio test. Harris two-pass: relax every bound by the feasibility tolerance,
    // then pick the largest pivot among the rows blocking within the relaxed step.
    const double own_range =
        std::isfinite(lb_[enter]) && std::isfinite(ub_[enter]) ? ub_[enter] - lb_[enter] : infinity;
    auto row_limit = [&](std::size_t i, double alpha, double relax, bool& to_upper) {
        const std::size_t k = basis_[i];
        const double rate = -dir * alpha;  // d xb_i / d theta
        if (rate < 0.0) {
            to_upper = false;
            if (!std::isfinite(lb_[k])) return infinity;
            return (std::max(0.0, xb_[i] - lb_[k]) + relax) / -rate;
        }
        to_upper = true;
        if (!std::isfinite(ub_[k])) return infinity;
        return (std::max(0.0, ub_[k] - xb_[i]) + relax) / rate;
    };

    // Pivoting on noise in a redundant row would make the basis singular.
    auto pivot_floor = [&](std::size_t i) {
        return !phase_one && is_artificial(basis_[i]) ? redundant_row_noise : opt_.pivot_tolerance;
    };

    std::size_t leave = rows_;
    bool leave_to_upper = false;
    double theta = infinity;
    if (bland_) {
        constexpr double tie = 1e-12;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double alpha = tab_[i * cols_ + enter];
            if (std::abs(alpha) < pivot_floor(i)) continue;
            bool to_upper = false;
            const double limit = row_limit(i, alpha, 0.0, to_upper);
            if (limit < theta - tie || (limit <= theta + tie && leave != rows_ && basis_[i] < basis_[leave])) {
                theta = std::min(theta, limit);
                leave = i;
                leave_to_upper = to_upper;
            }
        }
    } else {
        double relaxed = infinity;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double alpha = tab_[i * cols_ + enter];
            if (std::abs(alpha) < pivot_floor(i)) continue;
            bool to_upper = false;
            relaxed = std::min(relaxed, row_limit(i, alpha, opt_.feasibility_tolerance, to_upper));
        }
        double best_alpha = 0.0;
        for (std::size_t i = 0; i < rows_ && std::isfinite(relaxed); ++i) {
            const double alpha = tab_[i * cols_ + enter];
            if (std::abs(alpha) < pivot_floor(i)) continue;
            bool to_upper = false;
            const double limit = row_limit(i, alpha, 0.0, to_upper);
            if (limit > relaxed) continue;
            if (std::abs(alpha) > best_alpha || (std::abs(alpha) == best_alpha && basis_[i] < basis_[leave])) {
                best_alpha = std::abs(alpha);
                theta = limit;
                leave = i;
                leave_to_upper = to_upper;
            }
        }
    }
    if (own_range <= theta) {
        theta = own_range;
        leave = rows_;
    }

    if (!std::isfinite(theta)) {
        if (phase_one)
            throw Error(ErrorKind::solver, "phase one became unbounded; numerical breakdown");
        unbounded_ = true;
        return false;
    }

    // A small pivot on an updated tableau may be accumulated error over a true zero, and pivoting on it
    // would make the basis singular. Recompute the tableau from the original rows and choose again.
    if (leave != rows_ && std::abs(tab_[leave * cols_ + enter]) < small_pivot && since_reinvert_ > 0) {
        reinvert();
        return true;
    }

    ++iterations_;
    if (theta <= 1e-12) {
        if (++degenerate_run_ > 10 * (rows_ + cols_)) bland_ = true;
    } else {
        degenerate_run_ = 0;
    }

    const double entering_value = value_of_nonbasic(enter) + dir * theta;
    for (std::size_t i = 0; i < rows_; ++i) {
        const double alpha = tab_[i * cols_ + enter];
        if (alpha != 0.0) xb_[i] -= dir * theta * alpha;
    }

    if (leave == rows_) {
        // Entering variable hits its own opposite bound.
        state_[enter] = dir > 0 ? VarState::at_upper : VarState::at_lower;
        return true;
    }

    const std::size_t k = basis_[leave];
    state_[k] = leave_to_upper ? VarState::at_upper : VarState::at_lower;
    pivot(leave, enter);
    state_[enter] = VarState::basic;
    xb_[leave] = entering_value;
    if (++since_reinvert_ >= reinvert_interval) reinvert();
    return true;
}

void Tableau::drive_out_artificials() {
    for (std::size_t r = 0; r < rows_; ++r) {
        if (!is_artificial(basis_[r])) continue;
        const double* row = &tab_[r * cols_];
        std::size_t best = cols_;
        double best_abs = redundant_row_noise;
        for (std::size_t j = 0; j < first_artificial_; ++j) {
            if (state_[j] == VarState::basic) continue;
            if (std::abs(row[j]) > best_abs) {
                best_abs = std::abs(row[j]);
                best = j;
            }
        }
        if (best == cols_) continue;  // redundant row; artificial stays basic at zero
        const std::size_t art = basis_[r];
        const double entering_value = value_of_nonbasic(best);
        // Degenerate pivot: the artificial is (numerically) zero, values do not move.
        pivot(r, best);
        state_[best] = VarState::basic;
        state_[art] = VarState::at_lower;
        xb_[r] = entering_value;
    }
    for (std::size_t j = first_artificial_; j < cols_; ++j) {
        ub_[j] = 0.0;
        lb_[j] = 0.0;
    }
}

std::vector<double> Tableau::primal_values() const {
    std::vector<double> x(cols_);
    for (std::size_t j = 0; j < cols_; ++j)
        if (state_[j] != VarState::basic) x[j] = value_of_nonbasic(j);
    for (std::size_t i = 0; i < rows_; ++i) x[basis_[i]] = xb_[i];
    return x;
}

std::vector<double> Tableau::structural_values() const {
    auto x = primal_values();
    x.resize(structural_);
    // Clamp rounding noise onto the bounds.
    for (std::size_t j = 0; j < structural_; ++j) {
        if (x[j] < lb_[j] && x[j] > lb_[j] - opt_.feasibility_tolerance) x[j] = lb_[j];
        if (x[j] > ub_[j] && x[j] < ub_[j] + opt_.feasibility_tolerance) x[j] = ub_[j];
    }
    return x;
}

bool Tableau::phase_one() {
    if (first_artificial_ == cols_) return true;
    const std::size_t cap = std::max<std::size_t>(20000, 50 * (rows_ + cols_));
    std::vector<double> costs(cols_, 0.0);
    for (std::size_t j = first_artificial_; j < cols_; ++j) costs[j] = 1.0;
    price(costs);
    while (iterate(true))
        if (iterations_ > cap) throw Error(ErrorKind::solver, fmt::format("phase one exceeded {} iterations", cap));
    if (since_reinvert_ >= refresh_threshold) reinvert();
    auto residual = [&] {
        double infeasibility = 0.0;
        for (std::size_t i = 0; i < rows_; ++i)
            if (is_artificial(basis_[i])) infeasibility += std::abs(xb_[i]);
        return infeasibility;
    };
    double scale = 1.0;
    for (const auto& c : lp_.constraints) scale = std::max(scale, std::abs(c.rhs));
    // Harris steps may leave each artificial up to the feasibility tolerance above zero.
    const double allowed = opt_.feasibility_tolerance * scale * static_cast<double>(std::max<std::size_t>(rows_, 1));
    double infeasibility = residual();
    if (infeasibility > opt_.feasibility_tolerance * scale && since_reinvert_ > 0) {
        reinvert();
        infeasibility = residual();
    }
    if (infeasibility > allowed) return false;
    drive_out_artificials();
    return true;
}

LpSolution Tableau::phase_two() {
    LpSolution out;
    const std::size_t start = iterations_;
    const std::size_t cap = 2 * std::max<std::size_t>(20000, 50 * (rows_ + cols_));
    auto optimise = [&] {
        while (iterate(false))
            if (iterations_ - start > cap)
                throw Error(ErrorKind::solver, fmt::format("phase two exceeded {} iterations", cap));
    };

    std::vector<double> costs(cols_, 0.0);
    const double sign = lp_.sense == LpSense::maximize ? -1.0 : 1.0;
    for (std::size_t j = 0; j < structural_; ++j) costs[j] = sign * lp_.objective[j];
    price(costs);
    degenerate_run_ = 0;
    bland_ = false;
    unbounded_ = false;
    optimise();

    auto x = structural_values();
    // Refresh the factorisation after long pivot runs or visible drift, then polish.
    // On an ill-conditioned basis the refreshed point can be worse; keep the better one.
    const double drift = unbounded_ ? 0.0 : max_violation(lp_, x);
    if (!unbounded_ && since_reinvert_ > 0 &&
        (since_reinvert_ >= refresh_threshold || drift > opt_.feasibility_tolerance)) {
        reinvert();
        optimise();
        if (since_reinvert_ > 0) reinvert();
        auto refreshed = structural_values();
        if (unbounded_ || max_violation(lp_, refreshed) <= drift) x = std::move(refreshed);
    }
    out.iterations = iterations_ - start;
    if (unbounded_) {
        out.status = LpStatus::unbounded;
        return out;
    }

    const double violation = max_violation(lp_, x);
    if (violation > 1e3 * opt_.feasibility_tolerance)
        throw Error(ErrorKind::solver,
                    fmt::format("simplex drifted: solution violates constraints by {:.3g} after {} pivots "
                                "({} rows, {} columns)",
                                violation, iterations_, rows_, cols_));
    out.status = LpStatus::optimal;
    out.objective_value = 0.0;
    for (std::size_t j = 0; j < structural_; ++j) out.objective_value += lp_.objective[j] * x[j];
    out.values = std::move(x);
    return out;
}

LpSolution Tableau::run() {
    if (!phase_one()) {
        infeasible_ = true;
        LpSolution out;
        out.status = LpStatus::infeasible;
        out.iterations = iterations_;
        return out;
    }
    const std::size_t phase_one_pivots = iterations_;
    auto out = phase_two();
    out.iterations += phase_one_pivots;
    return out;
}

LpSolution Tableau::resolve_first(std::span<const double> objective, LpSense sense) {
    lp_.objective.assign(objective.begin(), objective.end());
    lp_.sense = sense;
    return run();
}

LpSolution Tableau::resolve(std::span<const double> objective, LpSense sense) {
    if (objective.size() != structural_)
        throw Error(ErrorKind::domain, fmt::format("objective has {} entries, LP has {} variables", objective.size(),
                                                   structural_));
    if (infeasible_) return {};
    lp_.objective.assign(objective.begin(), objective.end());
    lp_.sense = sense;
    return phase_two();
}

} // namespace detail

namespace {

void check_program(const LinearProgram& lp, const LpOptions& options) {
    const std::size_t n = lp.variable_count();
    if (n > options.variable_cap)
        throw Error(ErrorKind::size, fmt::format("LP has {} variables, cap is {}", n, options.variable_cap));
    if (lp.lower.size() != n || lp.upper.size() != n)
        throw Error(ErrorKind::domain, "LP bound vectors do not match the variable count");
    for (std::size_t j = 0; j < n; ++j) {
        if (!(lp.lower[j] <= lp.upper[j]) || std::isnan(lp.lower[j]))
            throw Error(ErrorKind::domain, fmt::format("variable {} has inconsistent bounds [{}, {}]", j,
                                                       lp.lower[j], lp.upper[j]));
    }
    for (std::size_t i = 0; i < lp.constraints.size(); ++i)
        for (auto [j, a] : lp.constraints[i].terms)
            if (j >= n || !std::isfinite(a))
                throw Error(ErrorKind::domain, fmt::format("constraint {} references an invalid term", i));
}

} // namespace

double max_violation(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = 0.0;
    for (std::size_t j = 0; j < lp.variable_count(); ++j) {
        worst = std::max(worst, lp.lower[j] - x[j]);
        worst = std::max(worst, x[j] - lp.upper[j]);
    }
    for (const auto& c : lp.constraints) {
        double lhs = 0.0;
        for (auto [j, a] : c.terms) lhs += a * x[j];
        switch (c.sense) {
        case RowSense::less_equal: worst = std::max(worst, lhs - c.rhs); break;
        case RowSense::greater_equal: worst = std::max(worst, c.rhs - lhs); break;
        case RowSense::equal: worst = std::max(worst, std::abs(lhs - c.rhs)); break;
        }
    }
    return worst;
}

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
    check_program(lp, options);
    detail::Tableau tableau(lp, options);
    return tableau.run();
}

IncrementalLp::IncrementalLp(LinearProgram lp, const LpOptions& options) : options_(options) {
    check_program(lp, options);
    tableau_ = std::make_unique<detail::Tableau>(std::move(lp), options);
}

IncrementalLp::~IncrementalLp() = default;
IncrementalLp::IncrementalLp(IncrementalLp&&) noexcept = default;
IncrementalLp& IncrementalLp::operator=(IncrementalLp&&) noexcept = default;

LpSolution IncrementalLp::solve(std::span<const double> objective, LpSense sense) {
    if (!started_) {
        started_ = true;
        return tableau_->resolve_first(objective, sense);
    }
    try {
        return tableau_->resolve(objective, sense);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::solver) throw;
    }
    // The warm basis broke down numerically; start over from the original rows.
    tableau_ = std::make_unique<detail::Tableau>(tableau_->program(), options_);
    return tableau_->resolve_first(objective, sense);
}

std::size_t IncrementalLp::tableau_entries() const noexcept { return tableau_->entries(); }

} // namespace rfmdp
