#include "rfmdp/uncertainty.hpp"

#include "rfmdp/distribution.hpp"
#include "rfmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace rfmdp {

bool BoxSet::well_formed(double tolerance) const {
    if (lower.size() != upper.size() || lower.empty()) return false;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(lower[i] >= 0.0) || !(upper[i] <= 1.0) || lower[i] > upper[i]) return false;
        lo += lower[i];
        hi += upper[i];
    }
    return lo <= 1.0 + tolerance && hi >= 1.0 - tolerance;
}

bool BoxSet::contains(std::span<const double> p, double tolerance) const {
    if (p.size() != lower.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] < lower[i] - tolerance || p[i] > upper[i] + tolerance) return false;
    return std::abs(sum(p) - 1.0) <= tolerance;
}

BoxSet BoxSet::full_simplex(std::size_t dimension) {
    return {std::vector<double>(dimension, 0.0), std::vector<double>(dimension, 1.0)};
}

BoxSet BoxSet::point(std::span<const double> distribution) {
    std::vector<double> p(distribution.begin(), distribution.end());
    return {p, p};
}

bool L1Set::contains(std::span<const double> p, double tolerance) const {
    if (p.size() != nominal.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < -tolerance) return false;
        if (!supported(i) && p[i] > tolerance) return false;
    }
    return std::abs(sum(p) - 1.0) <= tolerance && lp_distance(p, nominal, norm_p) <= radius + tolerance;
}

std::size_t dimension(const MarginalSet& set) {
    return std::visit([](const auto& s) { return s.dimension(); }, set);
}

// ---------------------------------------------------------------------------
// Beta distribution

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iterations = 100000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw Error(ErrorKind::solver, fmt::format("incomplete beta did not converge (a={}, b={}, x={})", a, b, x));
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw Error(ErrorKind::domain, fmt::format("beta parameters must be positive (a={}, b={})", a, b));
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double beta_quantile(double probability, double a, double b, bool round_up, double tolerance) {
    if (!(probability >= 0.0 && probability <= 1.0))
        throw Error(ErrorKind::domain, fmt::format("quantile level {} not in [0,1]", probability));
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (regularized_incomplete_beta(a, b, mid) < probability)
            lo = mid;
        else
            hi = mid;
    }
    return round_up ? hi : lo;
}

std::optional<Interval> clopper_pearson(Count successes, Count trials, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw Error(ErrorKind::domain, fmt::format("error probability {} not in (0,1)", delta));
    if (successes > trials)
        throw Error(ErrorKind::range, fmt::format("{} successes exceed {} trials", successes, trials));
    if (trials == 0) return std::nullopt;
    const auto x = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    Interval out;
    out.lo = successes == 0 ? 0.0 : beta_quantile(delta / 2.0, x, n - x + 1.0, false);
    out.hi = successes == trials ? 1.0 : beta_quantile(1.0 - delta / 2.0, x + 1.0, n - x, true);
    return out;
}

double weissman_radius(std::size_t support_size, Count samples, double delta) {
    if (support_size < 2)
        throw Error(ErrorKind::domain, fmt::format("support size {} < 2: ln(2^a - 2) is undefined", support_size));
    if (samples == 0) throw Error(ErrorKind::domain, "weissman radius needs at least one sample");
    if (!(delta > 0.0 && delta < 1.0))
        throw Error(ErrorKind::domain, fmt::format("error probability {} not in (0,1)", delta));
    // ln(2^a - 2) = a ln 2 + ln(1 - 2^(1-a)), stable for large a.
    const double a = static_cast<double>(support_size);
    const double log_term = a * std::log(2.0) + std::log1p(-std::exp2(1.0 - a));
    return std::sqrt(2.0 * (log_term - std::log(delta)) / static_cast<double>(samples));
}

namespace {

void check_counts(std::span<const Count> counts, Count total) {
    if (counts.empty()) throw Error(ErrorKind::domain, "count vector is empty");
    Count s = 0;
    for (auto c : counts) s += c;
    if (s != total)
        throw Error(ErrorKind::domain, fmt::format("counts sum to {}, row total is {}", s, total));
}

} // namespace

BoxSet build_box_set(std::span<const Count> counts, Count total, double delta) {
    check_counts(counts, total);
    if (total == 0) return BoxSet::full_simplex(counts.size());
    BoxSet box;
    box.lower.resize(counts.size());
    box.upper.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto ci = *clopper_pearson(counts[i], total, delta);
        box.lower[i] = ci.lo;
        box.upper[i] = ci.hi;
    }
    return box;
}

L1Set build_l1_set(std::span<const Count> counts, Count total, double delta) {
    check_counts(counts, total);
    L1Set set;
    if (total == 0) {
        set.nominal.assign(counts.size(), 1.0 / static_cast<double>(counts.size()));
        set.radius = 2.0;
        return set;
    }
    set.nominal.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        set.nominal[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    set.radius = counts.size() == 1 ? 0.0 : weissman_radius(counts.size(), total, delta);
    return set;
}

// ---------------------------------------------------------------------------
// Vertex enumeration

double estimated_box_vertex_count(const BoxSet& set) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < set.dimension(); ++i)
        if (set.upper[i] > set.lower[i]) ++k;
    if (k == 0) return 1.0;
    return static_cast<double>(k) * std::exp2(static_cast<double>(k) - 1.0);
}

VertexPolytope enumerate_box_vertices(const BoxSet& set, std::size_t cap) {
    constexpr double snap = 1e-12;
    if (!set.well_formed())
        throw Error(ErrorKind::infeasible, "box does not intersect the probability simplex");
    const double estimate = estimated_box_vertex_count(set);
    if (estimate > static_cast<double>(cap))
        throw Error(ErrorKind::size,
                    fmt::format("box vertex enumeration needs up to {:.0f} candidates (cap {}); "
                                "use the mccormick or interval-arithmetic backend",
                                estimate, cap));

    const std::size_t n = set.dimension();
    std::vector<std::size_t> open;  // coordinates with lower < upper
    double fixed_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (set.upper[i] > set.lower[i])
            open.push_back(i);
        else
            fixed_mass += set.lower[i];
    }

    VertexPolytope out;
    if (open.empty()) {
        out.vertices.push_back(set.lower);
        return out;
    }

    std::set<std::vector<double>> seen;
    std::vector<double> point(n);
    const std::size_t k = open.size();
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t free_coord = open[f];
        const std::size_t others = k - 1;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << others); ++mask) {
            for (std::size_t i = 0; i < n; ++i) point[i] = set.lower[i];
            double mass = fixed_mass;
            for (std::size_t o = 0, bit = 0; o < k; ++o) {
                if (o == f) continue;
                const std::size_t c = open[o];
                point[c] = ((mask >> bit) & 1U) ? set.upper[c] : set.lower[c];
                mass += point[c];
                ++bit;
            }
            double v = 1.0 - mass;
            const double lo = set.lower[free_coord], hi = set.upper[free_coord];
            if (v < lo - snap || v > hi + snap) continue;
            if (std::abs(v - lo) <= snap) v = lo;
            if (std::abs(v - hi) <= snap) v = hi;
            point[free_coord] = v;
            if (seen.insert(point).second) out.vertices.push_back(point);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// L1 composition and hulls

L1Set compose_l1_radius_sum(std::span<const L1Set> sets) {
    if (sets.size() < 2) throw Error(ErrorKind::domain, "radius-sum composition needs at least two sets");
    L1Set out = sets.front();
    for (std::size_t k = 1; k < sets.size(); ++k) {
        const auto& next = sets[k];
        if (next.norm_p != out.norm_p)
            throw Error(ErrorKind::domain, fmt::format("cannot compose L{} and L{} balls", out.norm_p, next.norm_p));
        std::vector<char> support;
        if (!out.support.empty() || !next.support.empty()) {
            support.resize(out.dimension() * next.dimension());
            for (std::size_t i = 0; i < out.dimension(); ++i)
                for (std::size_t j = 0; j < next.dimension(); ++j)
                    support[i * next.dimension() + j] = out.supported(i) && next.supported(j);
        }
        out.nominal = kronecker(out.nominal, next.nominal);
        out.radius += next.radius;
        out.support = std::move(support);
    }
    return out;
}

BoxSet box_hull_of_l1(const L1Set& set) {
    if (set.norm_p != 1.0) throw Error(ErrorKind::domain, "box hull is defined for L1 balls only");
    BoxSet box;
    box.lower.resize(set.dimension());
    box.upper.resize(set.dimension());
    const double half = set.radius / 2.0;
    for (std::size_t i = 0; i < set.dimension(); ++i) {
        if (!set.supported(i)) continue;
        box.lower[i] = std::max(0.0, set.nominal[i] - half);
        box.upper[i] = std::min(1.0, set.nominal[i] + half);
    }
    return box;
}

} // namespace rfmdp
