#include "rfmdp/inner.hpp"

#include "rfmdp/distribution.hpp"
#include "rfmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace rfmdp {

std::string_view to_string(InnerBackend backend) {
    switch (backend) {
    case InnerBackend::box_greedy: return "box-greedy";
    case InnerBackend::l1_greedy: return "l1-greedy";
    case InnerBackend::vertex_product: return "vertex";
    case InnerBackend::interval_arithmetic: return "interval-arithmetic";
    case InnerBackend::mccormick: return "mccormick";
    }
    return "unknown";
}

namespace {

bool better(double candidate, double incumbent, InnerSense sense) {
    return sense == InnerSense::worst ? candidate < incumbent : candidate > incumbent;
}

// Indices ordered by value (ascending for worst, descending for best); ties keep the lower index first.
std::vector<std::size_t> order_by_value(std::span<const double> values, InnerSense sense) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sense == InnerSense::worst ? values[a] < values[b] : values[a] > values[b];
    });
    return order;
}

void check_values(std::size_t dim, std::span<const double> values) {
    if (values.size() != dim)
        throw Error(ErrorKind::domain, fmt::format("value vector has {} entries, set has dimension {}", values.size(), dim));
}

} // namespace

InnerResult worst_case_box_greedy(const BoxSet& set, std::span<const double> values, InnerSense sense) {
    check_values(set.dimension(), values);
    const double lo = sum(set.lower), hi = sum(set.upper);
    if (lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12)
        throw Error(ErrorKind::infeasible,
                    fmt::format("box does not meet the simplex (sum lower {:.12g}, sum upper {:.12g})", lo, hi));

    InnerResult out;
    out.backend = InnerBackend::box_greedy;
    out.witness = set.lower;
    double remaining = 1.0 - lo;
    for (std::size_t i : order_by_value(values, sense)) {
        if (remaining <= 0.0) break;
        const double add = std::min(remaining, set.upper[i] - set.lower[i]);
        out.witness[i] += add;
        remaining -= add;
    }
    out.value = dot(out.witness, values);
    return out;
}

InnerResult worst_case_l1(const L1Set& set, std::span<const double> values, InnerSense sense) {
    check_values(set.dimension(), values);
    if (set.norm_p != 1.0) throw Error(ErrorKind::config, "the L1 greedy needs an L1 ball");

    InnerResult out;
    out.backend = InnerBackend::l1_greedy;
    out.witness.assign(set.dimension(), 0.0);
    for (std::size_t i = 0; i < set.dimension(); ++i)
        if (set.supported(i)) out.witness[i] = set.nominal[i];

    const auto order = order_by_value(values, sense);
    std::size_t target = set.dimension();
    for (std::size_t i : order)
        if (set.supported(i)) {
            target = i;
            break;
        }
    if (target == set.dimension()) throw Error(ErrorKind::infeasible, "L1 set has an empty support");

    double budget = std::min(set.radius / 2.0, 1.0 - out.witness[target]);
    out.witness[target] += budget;
    // Take the mass back from the least favourable coordinates.
    for (auto it = order.rbegin(); it != order.rend() && budget > 0.0; ++it) {
        if (*it == target) continue;
        const double take = std::min(budget, out.witness[*it]);
        out.witness[*it] -= take;
        budget -= take;
    }
    out.value = dot(out.witness, values);
    return out;
}

namespace {

std::vector<std::vector<double>> marginal_vertices(const MarginalSet& set, std::size_t cap) {
    if (const auto* box = std::get_if<BoxSet>(&set)) return enumerate_box_vertices(*box, cap).vertices;
    if (const auto* poly = std::get_if<VertexPolytope>(&set)) {
        if (poly->vertices.empty()) throw Error(ErrorKind::infeasible, "vertex polytope has no vertices");
        return poly->vertices;
    }
    throw Error(ErrorKind::config, "vertex enumeration needs box or vertex-polytope marginals");
}

std::size_t joint_dimension(const InnerProblem& problem) {
    std::size_t d = 1;
    for (const auto* m : problem.marginals) d *= dimension(*m);
    return d;
}

} // namespace

InnerResult worst_case_vertex_product(const InnerProblem& problem, std::size_t product_cap, std::size_t marginal_cap) {
    const std::size_t n = problem.marginals.size();
    if (n == 0) throw Error(ErrorKind::domain, "inner problem has no marginals");
    check_values(joint_dimension(problem), problem.values);

    // The last factor enters linearly once the others are fixed, so it is solved exactly instead of enumerated.
    const std::size_t enumerated = n - 1;
    const MarginalSet& last = *problem.marginals[n - 1];
    if (!std::holds_alternative<BoxSet>(last) && !std::holds_alternative<VertexPolytope>(last))
        throw Error(ErrorKind::config, "vertex enumeration needs box or vertex-polytope marginals");
    std::vector<std::vector<std::vector<double>>> vertices(enumerated);
    double product_count = 1.0;
    for (std::size_t k = 0; k < enumerated; ++k) {
        vertices[k] = marginal_vertices(*problem.marginals[k], marginal_cap);
        product_count *= static_cast<double>(vertices[k].size());
    }
    if (product_count > static_cast<double>(product_cap))
        throw Error(ErrorKind::size, fmt::format("{:.0f} vertex products exceed the cap of {}; use the mccormick backend",
                                                 product_count, product_cap));

    auto solve_last = [&](std::span<const double> contracted) {
        if (const auto* box = std::get_if<BoxSet>(&last)) return worst_case_box_greedy(*box, contracted, problem.sense);
        const auto& poly = std::get<VertexPolytope>(last);
        if (poly.vertices.empty()) throw Error(ErrorKind::infeasible, "vertex polytope has no vertices");
        InnerResult r;
        for (const auto& v : poly.vertices) {
            const double value = dot(v, contracted);
            if (r.witness.empty() || better(value, r.value, problem.sense)) {
                r.value = value;
                r.witness = v;
            }
        }
        return r;
    };

    // Contract the value tensor one factor at a time; level k holds a tensor over factors k..n-1.
    std::vector<std::size_t> tail(n + 1, 1);
    for (std::size_t k = n; k-- > 0;) tail[k] = tail[k + 1] * dimension(*problem.marginals[k]);
    std::vector<std::vector<double>> level(n);
    level[0].assign(problem.values.begin(), problem.values.end());
    for (std::size_t k = 1; k < n; ++k) level[k].resize(tail[k]);

    std::vector<std::size_t> choice(enumerated, 0), best_choice(enumerated, 0);
    std::vector<double> best_last;
    double best_value = 0.0;
    bool found = false;

    auto descend = [&](auto&& self, std::size_t k) -> void {
        if (k == enumerated) {
            auto r = solve_last(level[k]);
            if (!found || better(r.value, best_value, problem.sense)) {
                best_value = r.value;
                best_choice = choice;
                best_last = std::move(r.witness);
                found = true;
            }
            return;
        }
        const std::size_t stride = tail[k + 1];
        const auto& src = level[k];
        auto& dst = level[k + 1];
        for (std::size_t v = 0; v < vertices[k].size(); ++v) {
            const auto& p = vertices[k][v];
            std::fill(dst.begin(), dst.end(), 0.0);
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i] == 0.0) continue;
                const double* row = src.data() + i * stride;
                for (std::size_t t = 0; t < stride; ++t) dst[t] += p[i] * row[t];
            }
            choice[k] = v;
            self(self, k + 1);
        }
    };
    descend(descend, 0);

    InnerResult out;
    out.backend = InnerBackend::vertex_product;
    out.witness = {1.0};
    for (std::size_t k = 0; k < enumerated; ++k) out.witness = kronecker(out.witness, vertices[k][best_choice[k]]);
    out.witness = kronecker(out.witness, best_last);
    out.value = dot(out.witness, problem.values);
    return out;
}

BoxSet interval_arithmetic_product(std::span<const BoxSet* const> sets) {
    if (sets.empty()) throw Error(ErrorKind::domain, "interval-arithmetic product of zero sets");
    BoxSet out = *sets.front();
    for (std::size_t k = 1; k < sets.size(); ++k) {
        out.lower = kronecker(out.lower, sets[k]->lower);
        out.upper = kronecker(out.upper, sets[k]->upper);
    }
    return out;
}

BoxSet interval_arithmetic_product(std::span<const BoxSet> sets) {
    std::vector<const BoxSet*> ptrs;
    ptrs.reserve(sets.size());
    for (const auto& s : sets) ptrs.push_back(&s);
    return interval_arithmetic_product(std::span<const BoxSet* const>(ptrs));
}

// ---------------------------------------------------------------------------
// McCormick

std::size_t mccormick_constraint_formula(std::span<const std::size_t> domain_sizes) {
    std::size_t prod = 1, total = 0;
    for (auto m : domain_sizes) {
        prod *= m;
        total += m;
    }
    const std::size_t n = domain_sizes.size();
    return 4 * (n == 0 ? 0 : n - 1) * prod + 2 * total + 1;
}

McCormickProgram build_mccormick_program(std::span<const BoxSet* const> sets, std::span<const double> values,
                                         InnerSense sense, const McCormickOptions& options) {
    const std::size_t n = sets.size();
    if (n == 0) throw Error(ErrorKind::domain, "McCormick program needs at least one marginal");

    McCormickProgram prog;
    auto& lp = prog.lp;
    lp.sense = sense == InnerSense::worst ? LpSense::minimize : LpSense::maximize;

    // Per-factor variables over the kept outcomes (upper bound > 0).
    std::vector<std::vector<std::size_t>> kept(n), var(n);
    std::vector<std::size_t> dims(n);
    prog.joint_dimension = 1;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& box = *sets[k];
        if (!box.well_formed())
            throw Error(ErrorKind::infeasible, fmt::format("marginal box {} does not meet the simplex", k));
        dims[k] = box.dimension();
        prog.joint_dimension *= dims[k];
        for (std::size_t i = 0; i < dims[k]; ++i) {
            if (box.upper[i] <= 0.0) continue;
            kept[k].push_back(i);
            var[k].push_back(lp.add_variable(box.lower[i], box.upper[i]));
        }
        prog.marginal_variables += kept[k].size();
    }
    check_values(prog.joint_dimension, values);

    // For a single factor the global simplex row below is the same constraint.
    if (options.marginal_simplex && n > 1) {
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<std::pair<std::size_t, double>> terms;
            for (auto v : var[k]) terms.emplace_back(v, 1.0);
            lp.add_constraint(std::move(terms), RowSense::equal, 1.0);
        }
    }

    struct Node {
        std::size_t var;
        double lo, hi;
    };
    // Chain h^r = h^(r-1) * p^r. With shared prefixes, h^r over (i_0..i_r) is built once.
    auto multiply = [&](const Node& u, std::size_t k, std::size_t slot) {
        const auto& box = *sets[k];
        const std::size_t i = kept[k][slot];
        const Node v{var[k][slot], box.lower[i], box.upper[i]};
        const Node h{lp.add_variable(u.lo * v.lo, u.hi * v.hi), u.lo * v.lo, u.hi * v.hi};
        lp.add_constraint({{h.var, 1.0}, {u.var, -v.lo}, {v.var, -u.lo}}, RowSense::greater_equal, -u.lo * v.lo);
        lp.add_constraint({{h.var, 1.0}, {u.var, -v.hi}, {v.var, -u.hi}}, RowSense::greater_equal, -u.hi * v.hi);
        lp.add_constraint({{h.var, 1.0}, {u.var, -v.lo}, {v.var, -u.hi}}, RowSense::less_equal, -u.hi * v.lo);
        lp.add_constraint({{h.var, 1.0}, {u.var, -v.hi}, {v.var, -u.lo}}, RowSense::less_equal, -u.lo * v.hi);
        return h;
    };

    auto emit = [&](const Node& node, std::size_t joint) {
        prog.product_variables.push_back(node.var);
        prog.joint_indices.push_back(joint);
        lp.objective[node.var] = values[joint];
    };

    if (options.share_prefixes) {
        // by_slot[k][s]: every h over (i_0..i_k) whose last index is kept[k][s].
        std::vector<std::vector<std::vector<std::size_t>>> by_slot(n);
        for (std::size_t k = 0; k < n; ++k) by_slot[k].resize(kept[k].size());
        auto descend = [&](auto&& self, const Node& u, std::size_t k, std::size_t joint) -> void {
            if (k == n) {
                emit(u, joint);
                return;
            }
            std::vector<std::pair<std::size_t, double>> children{{u.var, -1.0}};
            for (std::size_t s = 0; s < kept[k].size(); ++s) {
                const Node h = multiply(u, k, s);
                children.emplace_back(h.var, 1.0);
                by_slot[k][s].push_back(h.var);
                self(self, h, k + 1, joint * dims[k] + kept[k][s]);
            }
            // sum_i h^(k)(prefix, i) = h^(k-1)(prefix)
            if (options.linking_equalities) lp.add_constraint(std::move(children), RowSense::equal, 0.0);
        };
        for (std::size_t s = 0; s < kept[0].size(); ++s) {
            const auto i = kept[0][s];
            descend(descend, Node{var[0][s], sets[0]->lower[i], sets[0]->upper[i]}, 1, i);
        }
        // sum over prefixes of h^(k)(prefix, i) = p^k_i
        if (options.linking_equalities)
            for (std::size_t k = 1; k < n; ++k)
                for (std::size_t s = 0; s < kept[k].size(); ++s) {
                    std::vector<std::pair<std::size_t, double>> terms{{var[k][s], -1.0}};
                    for (auto v : by_slot[k][s]) terms.emplace_back(v, 1.0);
                    lp.add_constraint(std::move(terms), RowSense::equal, 0.0);
                }
    } else {
        std::vector<std::size_t> slot(n, 0);
        while (true) {
            const auto i0 = kept[0][slot[0]];
            Node u{var[0][slot[0]], sets[0]->lower[i0], sets[0]->upper[i0]};
            std::size_t joint = i0;
            for (std::size_t k = 1; k < n; ++k) {
                u = multiply(u, k, slot[k]);
                joint = joint * dims[k] + kept[k][slot[k]];
            }
            emit(u, joint);
            std::size_t k = n;
            while (k-- > 0) {
                if (++slot[k] < kept[k].size()) break;
                slot[k] = 0;
            }
            if (k == static_cast<std::size_t>(-1)) break;
        }
    }

    std::vector<std::pair<std::size_t, double>> simplex;
    for (auto v : prog.product_variables) simplex.emplace_back(v, 1.0);
    lp.add_constraint(std::move(simplex), RowSense::equal, 1.0);
    return prog;
}

namespace {

std::vector<const BoxSet*> boxes_of(const InnerProblem& problem) {
    std::vector<const BoxSet*> boxes;
    boxes.reserve(problem.marginals.size());
    for (const auto* m : problem.marginals) {
        const auto* box = std::get_if<BoxSet>(m);
        if (box == nullptr) throw Error(ErrorKind::config, "the McCormick backend needs box marginals");
        boxes.push_back(box);
    }
    return boxes;
}

InnerResult mccormick_result(const McCormickProgram& prog, const LpSolution& sol, std::span<const double> values) {
    if (sol.status != LpStatus::optimal)
        throw Error(ErrorKind::solver, fmt::format("McCormick LP is {} for valid boxes",
                                                   sol.status == LpStatus::infeasible ? "infeasible" : "unbounded"));
    InnerResult out;
    out.backend = InnerBackend::mccormick;
    out.witness.assign(prog.joint_dimension, 0.0);
    for (std::size_t t = 0; t < prog.product_variables.size(); ++t)
        out.witness[prog.joint_indices[t]] = sol.values[prog.product_variables[t]];
    out.value = dot(out.witness, values);
    return out;
}

McCormickProgram zero_objective_program(std::span<const BoxSet* const> sets, const McCormickOptions& options) {
    std::size_t dim = 1;
    for (const auto* box : sets) dim *= box->dimension();
    const std::vector<double> zeros(dim, 0.0);
    return build_mccormick_program(sets, zeros, InnerSense::worst, options);
}

constexpr double degenerate_bound = 1e-4;

std::vector<BoxSet> widen_degenerate(std::span<const BoxSet* const> sets) {
    std::vector<BoxSet> out;
    for (const auto* box : sets) {
        BoxSet b = *box;
        for (std::size_t i = 0; i < b.dimension(); ++i) {
            if (b.lower[i] < degenerate_bound) b.lower[i] = 0.0;
            if (b.upper[i] > 1.0 - degenerate_bound) b.upper[i] = 1.0;
        }
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<const BoxSet*> pointers(const std::vector<BoxSet>& boxes) {
    std::vector<const BoxSet*> out;
    for (const auto& b : boxes) out.push_back(&b);
    return out;
}

} // namespace

InnerResult mccormick_worst_case(const InnerProblem& problem, const McCormickOptions& options) {
    const auto boxes = boxes_of(problem);
    try {
        const auto prog = build_mccormick_program(boxes, problem.values, problem.sense, options);
        return mccormick_result(prog, solve_lp(prog.lp, options.lp), problem.values);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::solver) throw;
    }
    const auto widened = widen_degenerate(boxes);
    const auto prog = build_mccormick_program(pointers(widened), problem.values, problem.sense, options);
    return mccormick_result(prog, solve_lp(prog.lp, options.lp), problem.values);
}

McCormickSolver::McCormickSolver(std::span<const BoxSet* const> sets, const McCormickOptions& options)
    : options_(options), program_(zero_objective_program(sets, options)), lp_(program_.lp, options.lp),
      objective_(program_.lp.variable_count(), 0.0) {
    for (const auto* box : sets) boxes_.push_back(*box);
}

McCormickSolver::McCormickSolver(std::vector<BoxSet> widened, const McCormickOptions& options)
    : options_(options), boxes_(std::move(widened)), widened_(true),
      program_(zero_objective_program(pointers(boxes_), options)), lp_(program_.lp, options.lp),
      objective_(program_.lp.variable_count(), 0.0) {}

InnerResult McCormickSolver::solve(std::span<const double> values, InnerSense sense) {
    if (fallback_) return fallback_->solve(values, sense);
    check_values(program_.joint_dimension, values);
    for (std::size_t t = 0; t < program_.product_variables.size(); ++t)
        objective_[program_.product_variables[t]] = values[program_.joint_indices[t]];
    try {
        const auto sol = lp_.solve(objective_, sense == InnerSense::worst ? LpSense::minimize : LpSense::maximize);
        return mccormick_result(program_, sol, values);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::solver || widened_) throw;
    }
    fallback_.reset(new McCormickSolver(widen_degenerate(pointers(boxes_)), options_));
    return fallback_->solve(values, sense);
}

// ---------------------------------------------------------------------------
// Membership

namespace {

bool member_rec(std::span<const double> point, std::span<const BoxSet> sets, double tol) {
    const auto& box = sets.front();
    if (sets.size() == 1) return box.contains(point, tol);

    const std::size_t m = box.dimension();
    if (point.size() % m != 0) return false;
    const std::size_t rest = point.size() / m;

    std::vector<double> marginal(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < rest; ++j) marginal[i] += point[i * rest + j];
    const auto pivot = static_cast<std::size_t>(std::max_element(marginal.begin(), marginal.end()) - marginal.begin());
    if (marginal[pivot] <= 0.0) return false;

    std::vector<double> remainder(rest);
    for (std::size_t j = 0; j < rest; ++j) remainder[j] = point[pivot * rest + j] / marginal[pivot];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < rest; ++j)
            if (std::abs(point[i * rest + j] - marginal[i] * remainder[j]) > tol) return false;

    return box.contains(marginal, tol) && member_rec(remainder, sets.subspan(1), tol);
}

} // namespace

Membership spurious_membership_check(std::span<const double> point, std::span<const BoxSet> sets, double tolerance) {
    if (sets.empty()) throw Error(ErrorKind::domain, "membership check needs at least one set");
    std::size_t dim = 1;
    for (const auto& s : sets) dim *= s.dimension();
    if (dim != point.size())
        throw Error(ErrorKind::domain, fmt::format("point has {} entries, product space has {}", point.size(), dim));
    for (double x : point)
        if (x < -tolerance) return Membership::non_member;
    return member_rec(point, sets, tolerance) ? Membership::member : Membership::non_member;
}

} // namespace rfmdp
