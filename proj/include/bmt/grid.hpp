#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bmt/common.hpp"

namespace bmt {

// Bounded open convex domain. Three shapes: axis-aligned box, ball, and
// half-space intersection (with an explicit bounding box for enumeration).
struct DomainSpec {
    enum class Shape { Box, Ball, Polytope };

    Shape shape = Shape::Box;
    std::vector<double> lo, hi;        // Box; also bounding box for Polytope
    std::vector<double> center;        // Ball
    double radius = 0.0;               // Ball
    std::vector<std::vector<double>> halfspace_normal;  // Polytope: a.x <= b
    std::vector<double> halfspace_offset;

    static DomainSpec box(std::vector<double> lo, std::vector<double> hi) {
        DomainSpec s;
        s.shape = Shape::Box;
        s.lo = std::move(lo);
        s.hi = std::move(hi);
        return s;
    }

    static DomainSpec ball(std::vector<double> center, double radius) {
        DomainSpec s;
        s.shape = Shape::Ball;
        s.center = std::move(center);
        s.radius = radius;
        return s;
    }

    static DomainSpec polytope(std::vector<std::vector<double>> normals,
                               std::vector<double> offsets,
                               std::vector<double> bbox_lo,
                               std::vector<double> bbox_hi) {
        DomainSpec s;
        s.shape = Shape::Polytope;
        s.halfspace_normal = std::move(normals);
        s.halfspace_offset = std::move(offsets);
        s.lo = std::move(bbox_lo);
        s.hi = std::move(bbox_hi);
        return s;
    }

    int dim() const {
        switch (shape) {
            case Shape::Ball: return static_cast<int>(center.size());
            default: return static_cast<int>(lo.size());
        }
    }

    double extent() const {
        double e = 0.0;
        if (shape == Shape::Ball) return 2.0 * radius;
        for (std::size_t i = 0; i < lo.size(); ++i) e = std::max(e, hi[i] - lo[i]);
        return e;
    }

    void validate() const {
        const int d = dim();
        if (d < 1) throw ConfigError("domain dimension must be >= 1");
        switch (shape) {
            case Shape::Box:
                if (static_cast<int>(hi.size()) != d)
                    throw ConfigError("domain box lo/hi size mismatch");
                for (int i = 0; i < d; ++i)
                    if (!(lo[i] < hi[i])) throw ConfigError("domain box is empty");
                break;
            case Shape::Ball:
                if (!(radius > 0.0)) throw ConfigError("ball radius must be > 0");
                break;
            case Shape::Polytope: {
                if (halfspace_normal.size() != halfspace_offset.size())
                    throw ConfigError("polytope normal/offset size mismatch");
                if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
                    throw ConfigError("polytope bounding box size mismatch");
                for (const auto& n : halfspace_normal)
                    if (static_cast<int>(n.size()) != d)
                        throw ConfigError("polytope normal dimension mismatch");
                for (int i = 0; i < d; ++i)
                    if (!(lo[i] < hi[i])) throw ConfigError("polytope bounding box is empty");
                break;
            }
        }
    }

    // Signed margin: > 0 strictly inside, < 0 outside. For the box/polytope
    // this is the min over face constraints, for the ball the radial gap.
    double inside_margin(std::span<const double> p) const {
        switch (shape) {
            case Shape::Box: {
                double m = hi[0] - p[0];
                for (std::size_t i = 0; i < lo.size(); ++i) {
                    m = std::min(m, p[i] - lo[i]);
                    m = std::min(m, hi[i] - p[i]);
                }
                return m;
            }
            case Shape::Ball: {
                double r2 = 0.0;
                for (std::size_t i = 0; i < center.size(); ++i)
                    r2 += (p[i] - center[i]) * (p[i] - center[i]);
                return radius - std::sqrt(r2);
            }
            case Shape::Polytope: {
                double m = hi[0] - p[0];
                for (std::size_t i = 0; i < lo.size(); ++i) {
                    m = std::min(m, p[i] - lo[i]);
                    m = std::min(m, hi[i] - p[i]);
                }
                for (std::size_t k = 0; k < halfspace_normal.size(); ++k) {
                    double ax = 0.0, norm = 0.0;
                    for (std::size_t i = 0; i < halfspace_normal[k].size(); ++i) {
                        ax += halfspace_normal[k][i] * p[i];
                        norm += halfspace_normal[k][i] * halfspace_normal[k][i];
                    }
                    norm = std::sqrt(std::max(norm, 1e-300));
                    m = std::min(m, (halfspace_offset[k] - ax) / norm);
                }
                return m;
            }
        }
        return -1.0;
    }

    bool contains_open(std::span<const double> p, double eps) const {
        return inside_margin(p) > eps;
    }
    bool contains_closed(std::span<const double> p, double eps) const {
        return inside_margin(p) >= -eps;
    }
};

enum class NodeKind : std::uint8_t { Interior = 0, Boundary = 1 };

// Lattice discretization of the domain. Nodes sit on the absolute lattice
// h*Z^d. Interior nodes carry the full 2d-point stencil; boundary nodes
// absorb the walk. Node order is lexicographic in the integer coordinates,
// which fixes the PSOR sweep order.
struct Grid {
    int dim = 0;
    double spacing = 0.0;
    std::vector<int> ipoint;      // n * dim integer lattice coordinates
    std::vector<double> coord;    // n * dim physical coordinates
    std::vector<NodeKind> kind;
    std::vector<int> neighbor;    // n * 2*dim node indices, -1 if absent
    std::vector<int> interior;    // indices of interior nodes, ascending
    std::vector<int> boundary;    // indices of boundary nodes, ascending

    int n() const { return static_cast<int>(kind.size()); }
    int n_interior() const { return static_cast<int>(interior.size()); }
    int n_boundary() const { return static_cast<int>(boundary.size()); }
    bool is_interior(int i) const { return kind[i] == NodeKind::Interior; }

    std::span<const double> point(int i) const {
        return {coord.data() + static_cast<std::size_t>(i) * dim,
                static_cast<std::size_t>(dim)};
    }
    // neighbor in +axis (dir=0) or -axis (dir=1) direction
    int neighbor_at(int i, int axis, int dir) const {
        return neighbor[static_cast<std::size_t>(i) * 2 * dim + 2 * axis + dir];
    }
    double cell_volume() const { return std::pow(spacing, dim); }
    // physical holding time of one walk step
    double step_time() const { return spacing * spacing / (2.0 * dim); }

    std::uint64_t hash() const {
        std::uint64_t hsh = 1469598103934665603ULL;
        auto mix = [&hsh](std::uint64_t v) {
            for (int b = 0; b < 8; ++b) {
                hsh ^= (v >> (8 * b)) & 0xff;
                hsh *= 1099511628211ULL;
            }
        };
        mix(static_cast<std::uint64_t>(dim));
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(spacing));
        std::memcpy(&bits, &spacing, 8);
        mix(bits);
        for (int v : ipoint) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
        for (NodeKind k : kind) mix(static_cast<std::uint64_t>(k));
        return hsh;
    }
};

// Real values per node.
struct ScalarField {
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(int n, double fill = 0.0) : values(n, fill) {}
    explicit ScalarField(std::vector<double> v) : values(std::move(v)) {}

    int size() const { return static_cast<int>(values.size()); }
    double& operator[](int i) { return values[i]; }
    double operator[](int i) const { return values[i]; }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Nonnegative node weights for mu/nu and stopped laws; signed weights are
// allowed where a difference of measures is meant.
struct GridMeasure {
    std::vector<double> weights;

    GridMeasure() = default;
    explicit GridMeasure(int n, double fill = 0.0) : weights(n, fill) {}
    explicit GridMeasure(std::vector<double> w) : weights(std::move(w)) {}

    int size() const { return static_cast<int>(weights.size()); }
    double& operator[](int i) { return weights[i]; }
    double operator[](int i) const { return weights[i]; }

    double total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
    bool nonnegative(double tol = 0.0) const {
        for (double w : weights)
            if (w < -tol) return false;
        return true;
    }
    bool is_probability(double tol = 1e-12) const {
        return nonnegative(tol) && std::abs(total() - 1.0) <= tol;
    }
    void normalize() {
        double t = total();
        if (t <= 0.0) throw PreconditionError("cannot normalize a measure with mass <= 0");
        for (double& w : weights) w /= t;
    }
};

namespace detail {

struct LatticeKey {
    std::vector<int> k;
    bool operator<(const LatticeKey& o) const { return k < o.k; }
};

}  // namespace detail

inline Grid build_grid(const DomainSpec& spec, double h) {
    spec.validate();
    if (!(h > 0.0)) throw ConfigError("grid spacing must be > 0");
    const int d = spec.dim();
    const double eps = 1e-9 * std::max(1.0, spec.extent());

    std::vector<double> blo(d), bhi(d);
    if (spec.shape == DomainSpec::Shape::Ball) {
        for (int i = 0; i < d; ++i) {
            blo[i] = spec.center[i] - spec.radius;
            bhi[i] = spec.center[i] + spec.radius;
        }
    } else {
        blo = spec.lo;
        bhi = spec.hi;
    }
    std::vector<long> kmin(d), kmax(d);
    for (int i = 0; i < d; ++i) {
        kmin[i] = static_cast<long>(std::floor(blo[i] / h)) - 1;
        kmax[i] = static_cast<long>(std::ceil(bhi[i] / h)) + 1;
        if (kmax[i] - kmin[i] > 100000)
            throw ConfigError("grid would have more than 1e5 nodes per axis");
    }

    // Pass 1: lattice points in the closure.
    std::map<detail::LatticeKey, int> closure;  // ordered => lexicographic node order
    {
        std::vector<long> k(kmin);
        std::vector<double> p(d);
        while (true) {
            for (int i = 0; i < d; ++i) p[i] = static_cast<double>(k[i]) * h;
            if (spec.contains_closed(p, eps)) {
                detail::LatticeKey key;
                key.k.assign(k.begin(), k.end());
                closure.emplace(std::move(key), -1);
            }
            int axis = d - 1;
            while (axis >= 0 && ++k[axis] > kmax[axis]) k[axis] = kmin[axis], --axis;
            if (axis < 0) break;
        }
    }

    auto in_closure = [&closure](const std::vector<int>& k) {
        detail::LatticeKey key{k};
        return closure.find(key) != closure.end();
    };

    // Pass 2: classification. Interior needs the node strictly inside and the
    // full stencil within the closure; everything else is dropped unless it
    // touches an interior node.
    std::vector<const detail::LatticeKey*> keys;
    keys.reserve(closure.size());
    for (auto& kv : closure) keys.push_back(&kv.first);

    std::vector<char> is_int(keys.size(), 0);
    {
        std::vector<double> p(d);
        std::vector<int> nb(d);
        for (std::size_t idx = 0; idx < keys.size(); ++idx) {
            const auto& k = keys[idx]->k;
            for (int i = 0; i < d; ++i) p[i] = static_cast<double>(k[i]) * h;
            if (!spec.contains_open(p, eps)) continue;
            bool full = true;
            for (int axis = 0; axis < d && full; ++axis) {
                for (int dir = 0; dir < 2 && full; ++dir) {
                    nb = k;
                    nb[axis] += (dir == 0 ? 1 : -1);
                    if (!in_closure(nb)) full = false;
                }
            }
            is_int[idx] = full ? 1 : 0;
        }
    }

    std::vector<char> keep(keys.size(), 0);
    {
        std::map<detail::LatticeKey, std::size_t> pos;
        std::size_t idx = 0;
        for (auto& kv : closure) pos[kv.first] = idx++;
        std::vector<int> nb(d);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (is_int[i]) {
                keep[i] = 1;
                continue;
            }
            for (int axis = 0; axis < d && !keep[i]; ++axis) {
                for (int dir = 0; dir < 2 && !keep[i]; ++dir) {
                    nb = keys[i]->k;
                    nb[axis] += (dir == 0 ? 1 : -1);
                    auto it = pos.find(detail::LatticeKey{nb});
                    if (it != pos.end() && is_int[it->second]) keep[i] = 1;
                }
            }
        }
    }

    Grid g;
    g.dim = d;
    g.spacing = h;
    std::map<detail::LatticeKey, int> index;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (!keep[i]) continue;
        int id = g.n();
        index[*keys[i]] = id;
        for (int c : keys[i]->k) {
            g.ipoint.push_back(c);
            g.coord.push_back(static_cast<double>(c) * h);
        }
        g.kind.push_back(is_int[i] ? NodeKind::Interior : NodeKind::Boundary);
        if (is_int[i])
            g.interior.push_back(id);
        else
            g.boundary.push_back(id);
    }
    if (g.interior.empty())
        throw EmptyGridError("domain has no interior lattice node at spacing h");

    g.neighbor.assign(static_cast<std::size_t>(g.n()) * 2 * d, -1);
    {
        std::vector<int> nb(d);
        for (int i = 0; i < g.n(); ++i) {
            for (int axis = 0; axis < d; ++axis) {
                for (int dir = 0; dir < 2; ++dir) {
                    for (int c = 0; c < d; ++c) nb[c] = g.ipoint[static_cast<std::size_t>(i) * d + c];
                    nb[axis] += (dir == 0 ? 1 : -1);
                    auto it = index.find(detail::LatticeKey{nb});
                    if (it != index.end())
                        g.neighbor[static_cast<std::size_t>(i) * 2 * d + 2 * axis + dir] = it->second;
                }
            }
        }
    }
    // interior stencil must be complete
    for (int i : g.interior)
        for (int s = 0; s < 2 * d; ++s)
            if (g.neighbor[static_cast<std::size_t>(i) * 2 * d + s] < 0)
                throw EmptyGridError("interior node with incomplete stencil");
    return g;
}

// Five-point (2d+1) discrete Laplacian; zero on boundary nodes.
inline ScalarField discrete_laplacian(const ScalarField& f, const Grid& g) {
    if (f.size() != g.n()) throw PreconditionError("field size does not match grid");
    ScalarField out(g.n(), 0.0);
    const double ih2 = 1.0 / (g.spacing * g.spacing);
    for (int i : g.interior) {
        double acc = -2.0 * g.dim * f[i];
        for (int axis = 0; axis < g.dim; ++axis)
            acc += f[g.neighbor_at(i, axis, 0)] + f[g.neighbor_at(i, axis, 1)];
        out[i] = acc * ih2;
    }
    return out;
}

inline double sum_over(const std::vector<int>& idx, const ScalarField& f,
                       const GridMeasure& m) {
    double s = 0.0;
    for (int i : idx) s += f[i] * m[i];
    return s;
}

inline double integrate(const ScalarField& f, const GridMeasure& m) {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += f[i] * m[i];
    return s;
}

}  // namespace bmt
