#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bmt/grid.hpp"

namespace bmt {

enum class CostKind {
    Quadratic,         // |x-y|^2
    Distance,          // |x-y|
    SoftDistance,      // sqrt(|x-y|^2 + eps^2) - eps
    Separable,         // g(x) h(y) from a small closed-form catalog
    NegativeDistance,  // -|x-y|
};

enum class SeparableG { Coordinate };              // g(x) = x_axis
enum class SeparableH { NormSquared, NegNormSquared };  // h(y) = +-|y|^2

struct CostSpec {
    CostKind kind = CostKind::Quadratic;
    double epsilon = 0.0;             // SoftDistance smoothing length
    SeparableG gkind = SeparableG::Coordinate;
    int g_axis = 0;
    SeparableH hkind = SeparableH::NormSquared;
    // Additive target-space shift a*|y|^2 used to subharmonize costs whose
    // target Laplacian dips below zero. Zero means no shift.
    double shift_coeff = 0.0;

    static double sq_dist(std::span<const double> x, std::span<const double> y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        return s;
    }
    static double norm_sq(std::span<const double> y) {
        double s = 0.0;
        for (double v : y) s += v * v;
        return s;
    }

    double base(std::span<const double> x, std::span<const double> y) const {
        switch (kind) {
            case CostKind::Quadratic: return sq_dist(x, y);
            case CostKind::Distance: return std::sqrt(sq_dist(x, y));
            case CostKind::SoftDistance:
                return std::sqrt(sq_dist(x, y) + epsilon * epsilon) - epsilon;
            case CostKind::NegativeDistance: return -std::sqrt(sq_dist(x, y));
            case CostKind::Separable: {
                const double gx = x[g_axis];
                const double hy = (hkind == SeparableH::NormSquared ? 1.0 : -1.0) * norm_sq(y);
                return gx * hy;
            }
        }
        return 0.0;
    }

    double eval(std::span<const double> x, std::span<const double> y) const {
        double v = base(x, y);
        if (shift_coeff != 0.0) v += shift_coeff * norm_sq(y);
        return v;
    }

    bool singular_on_diagonal() const {
        return kind == CostKind::Distance || kind == CostKind::NegativeDistance;
    }

    // Closed-form gradient in the source variable; the shift does not depend
    // on x. Diagonal of the distance kinds is the caller's problem.
    std::vector<double> grad_x(std::span<const double> x, std::span<const double> y) const {
        std::vector<double> grad(x.size(), 0.0);
        switch (kind) {
            case CostKind::Quadratic:
                for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 2.0 * (x[i] - y[i]);
                break;
            case CostKind::Distance:
            case CostKind::NegativeDistance: {
                const double r = std::sqrt(sq_dist(x, y));
                const double sgn = kind == CostKind::Distance ? 1.0 : -1.0;
                if (r > 0.0)
                    for (std::size_t i = 0; i < x.size(); ++i) grad[i] = sgn * (x[i] - y[i]) / r;
                break;
            }
            case CostKind::SoftDistance: {
                const double r = std::sqrt(sq_dist(x, y) + epsilon * epsilon);
                for (std::size_t i = 0; i < x.size(); ++i) grad[i] = (x[i] - y[i]) / r;
                break;
            }
            case CostKind::Separable: {
                const double hy = (hkind == SeparableH::NormSquared ? 1.0 : -1.0) * norm_sq(y);
                grad[g_axis] = hy;
                break;
            }
        }
        return grad;
    }

    std::string name() const {
        switch (kind) {
            case CostKind::Quadratic: return "quadratic";
            case CostKind::Distance: return "distance";
            case CostKind::SoftDistance: return "soft_distance";
            case CostKind::Separable: return "separable";
            case CostKind::NegativeDistance: return "negative_distance";
        }
        return "?";
    }
};

inline CostSpec soft_distance(double eps) {
    if (!(eps > 0.0)) throw PreconditionError("soft_distance needs eps > 0");
    CostSpec s;
    s.kind = CostKind::SoftDistance;
    s.epsilon = eps;
    return s;
}

// Dense n x n cost table with the structural constants the dual machinery
// needs: discrete target-Laplacian range [m_c, D_c] over all sources and
// interior targets, and the Lipschitz-in-x estimate K over adjacent sources.
struct CostMatrix {
    int n = 0;
    std::vector<double> values;       // row = source, col = target
    double min_target_laplacian = 0;  // m_c
    double max_target_laplacian = 0;  // D_c
    double lipschitz_x = 0;           // K

    double at(int x, int y) const { return values[static_cast<std::size_t>(x) * n + y]; }
    std::span<const double> row(int x) const {
        return {values.data() + static_cast<std::size_t>(x) * n, static_cast<std::size_t>(n)};
    }
};

inline CostMatrix eval_cost(const CostSpec& spec, const Grid& g) {
    CostMatrix m;
    m.n = g.n();
    m.values.resize(static_cast<std::size_t>(g.n()) * g.n());
    for (int x = 0; x < g.n(); ++x) {
        auto px = g.point(x);
        for (int y = 0; y < g.n(); ++y)
            m.values[static_cast<std::size_t>(x) * g.n() + y] = spec.eval(px, g.point(y));
    }

    const double ih2 = 1.0 / (g.spacing * g.spacing);
    double mc = std::numeric_limits<double>::infinity();
    double dc = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < g.n(); ++x) {
        const double* row = m.values.data() + static_cast<std::size_t>(x) * g.n();
        for (int y : g.interior) {
            double acc = -2.0 * g.dim * row[y];
            for (int axis = 0; axis < g.dim; ++axis)
                acc += row[g.neighbor_at(y, axis, 0)] + row[g.neighbor_at(y, axis, 1)];
            const double lap = acc * ih2;
            mc = std::min(mc, lap);
            dc = std::max(dc, lap);
        }
    }
    m.min_target_laplacian = mc;
    m.max_target_laplacian = dc;

    double k = 0.0;
    for (int x = 0; x < g.n(); ++x) {
        for (int axis = 0; axis < g.dim; ++axis) {
            const int xp = g.neighbor_at(x, axis, 0);
            if (xp < 0) continue;
            for (int y = 0; y < g.n(); ++y)
                k = std::max(k, std::abs(m.at(xp, y) - m.at(x, y)) / g.spacing);
        }
    }
    m.lipschitz_x = k;
    return m;
}

// If the discrete target Laplacian of the cost dips below zero, add the
// smallest quadratic shift a*|y|^2 that pushes it back to >= 0. The discrete
// Laplacian of |y|^2 is exactly 2d, so the shifted bound is exact. Plans keep
// their optimizers: the shift changes every feasible plan's cost by the same
// integral of the shift against nu.
inline CostSpec subharmonize(const CostSpec& spec, const Grid& g) {
    const CostMatrix m = eval_cost(spec, g);
    if (m.min_target_laplacian >= 0.0) return spec;
    CostSpec out = spec;
    const double a = -m.min_target_laplacian / (2.0 * g.dim);
    out.shift_coeff = spec.shift_coeff + a * (1.0 + 1e-12) + 1e-15;
    return out;
}

struct TwistPairRecord {
    int x = -1, y = -1;
    bool singular = false;   // x == y for a distance-type cost
    bool pass = false;
    double gradient_norm = 0.0;
};

// Report on the sufficient conditions for the stochastic twist property.
// A pass means the sufficient condition held at the sampled pairs, nothing
// stronger: the property itself quantifies over all stopping times.
struct TwistReport {
    std::string cost_name;
    bool sufficient_condition_holds = false;
    bool violated_by_structure = false;  // quadratic: martingale argument
    int singular_pairs = 0;
    int checked_pairs = 0;
    int failed_pairs = 0;
    std::vector<TwistPairRecord> records;
    std::string summary;
};

inline TwistReport twist_report(const CostSpec& spec, const Grid& g) {
    TwistReport rep;
    rep.cost_name = spec.name();

    if (spec.kind == CostKind::Quadratic) {
        // E[grad_x c(x, B_tau)] = 2(x - E[B_tau]) = grad_x c(x,y) for every
        // stopping time by the martingale property, so the implication fails.
        rep.violated_by_structure = true;
        rep.sufficient_condition_holds = false;
        rep.summary = "quadratic cost: gradient is preserved by every stopped walk";
        return rep;
    }

    if (spec.kind == CostKind::Separable) {
        // needs grad g != 0 and a strict sign of the discrete Laplacian of h
        ScalarField h(g.n(), 0.0);
        for (int i = 0; i < g.n(); ++i)
            h[i] = (spec.hkind == SeparableH::NormSquared ? 1.0 : -1.0) *
                   CostSpec::norm_sq(g.point(i));
        const ScalarField lh = discrete_laplacian(h, g);
        bool all_pos = true, all_neg = true;
        for (int i : g.interior) {
            all_pos = all_pos && lh[i] > 0.0;
            all_neg = all_neg && lh[i] < 0.0;
        }
        rep.checked_pairs = g.n_interior();
        rep.failed_pairs = (all_pos || all_neg) ? 0 : g.n_interior();
        rep.sufficient_condition_holds = all_pos || all_neg;
        rep.summary = rep.sufficient_condition_holds
                          ? "separable cost: factor gradient nonzero, strict sign of target Laplacian"
                          : "separable cost: target factor has no strict Laplacian sign";
        return rep;
    }

    // Distance-type kinds: unit source gradient away from the diagonal.
    int fails = 0;
    for (int x = 0; x < g.n(); ++x) {
        for (int y = 0; y < g.n(); ++y) {
            TwistPairRecord rec;
            rec.x = x;
            rec.y = y;
            if (x == y && spec.singular_on_diagonal()) {
                rec.singular = true;
                ++rep.singular_pairs;
                if (rep.records.size() < 64) rep.records.push_back(rec);
                continue;
            }
            const auto grad = spec.grad_x(g.point(x), g.point(y));
            double nrm = 0.0;
            for (double v : grad) nrm += v * v;
            rec.gradient_norm = std::sqrt(nrm);
            if (spec.kind == CostKind::SoftDistance) {
                rec.pass = rec.gradient_norm <= 1.0 + 1e-8;  // strictly < 1, tends to 1
            } else {
                rec.pass = std::abs(rec.gradient_norm - 1.0) <= 1e-8;
            }
            ++rep.checked_pairs;
            if (!rec.pass) ++fails;
            if (rep.records.size() < 64) rep.records.push_back(rec);
        }
    }
    rep.failed_pairs = fails;
    rep.sufficient_condition_holds = fails == 0 && spec.kind != CostKind::SoftDistance;
    if (spec.kind == CostKind::SoftDistance)
        rep.summary = "smoothed distance: gradient strictly inside the unit ball; no sufficient criterion asserted";
    else if (fails == 0)
        rep.summary = "distance cost: unit source gradient at all off-diagonal pairs";
    else
        rep.summary = "distance cost: some sampled pairs failed the unit-gradient check";
    return rep;
}

}  // namespace bmt
