#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "bmt/grid.hpp"

namespace bmt {

namespace detail {

// 1D lower envelope of parabolas f(q) + w*(p-q)^2 over integer positions,
// skipping +inf entries. Standard distance-transform scheme.
inline void parabola_envelope(const std::vector<double>& f, double w,
                              std::vector<double>& out) {
    const int n = static_cast<int>(f.size());
    out.assign(n, std::numeric_limits<double>::infinity());
    std::vector<int> vx;       // parabola centers
    std::vector<double> zs;    // left range boundaries
    vx.reserve(n);
    zs.reserve(n + 1);
    for (int q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        double s = 0.0;
        while (!vx.empty()) {
            const int p = vx.back();
            s = ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p));
            if (s <= zs.back())
                vx.pop_back(), zs.pop_back();
            else
                break;
        }
        if (vx.empty()) s = -std::numeric_limits<double>::infinity();
        vx.push_back(q);
        zs.push_back(s);
    }
    if (vx.empty()) return;
    zs.push_back(std::numeric_limits<double>::infinity());
    int k = 0;
    for (int p = 0; p < n; ++p) {
        while (zs[k + 1] < p) ++k;
        const int q = vx[k];
        out[p] = f[q] + w * (p - q) * (p - q);
    }
}

}  // namespace detail

// Quadratic inf-convolution min_z { f(z) + |y-z|^2 / (2 eps) } over the grid
// nodes, computed by separable per-axis envelopes on the bounding lattice box.
inline ScalarField inf_convolution(const ScalarField& f, double eps, const Grid& g) {
    if (!(eps > 0.0)) throw PreconditionError("inf_convolution needs eps > 0");
    if (f.size() != g.n()) throw PreconditionError("field size does not match grid");

    const int d = g.dim;
    std::vector<int> kmin(d, std::numeric_limits<int>::max());
    std::vector<int> kmax(d, std::numeric_limits<int>::min());
    for (int i = 0; i < g.n(); ++i)
        for (int a = 0; a < d; ++a) {
            const int c = g.ipoint[static_cast<std::size_t>(i) * d + a];
            kmin[a] = std::min(kmin[a], c);
            kmax[a] = std::max(kmax[a], c);
        }
    std::vector<int> ext(d);
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) {
        ext[a] = kmax[a] - kmin[a] + 1;
        total *= static_cast<std::size_t>(ext[a]);
    }

    auto flat = [&](const int* k) {
        std::size_t idx = 0;
        for (int a = 0; a < d; ++a) idx = idx * ext[a] + (k[a] - kmin[a]);
        return idx;
    };

    std::vector<double> box(total, std::numeric_limits<double>::infinity());
    for (int i = 0; i < g.n(); ++i)
        box[flat(g.ipoint.data() + static_cast<std::size_t>(i) * d)] = f[i];

    // squared physical distance per lattice step
    const double w = g.spacing * g.spacing / (2.0 * eps);
    std::vector<double> line, env;
    for (int axis = d - 1; axis >= 0; --axis) {
        const std::size_t stride = [&] {
            std::size_t s = 1;
            for (int a = d - 1; a > axis; --a) s *= static_cast<std::size_t>(ext[a]);
            return s;
        }();
        const std::size_t count = total / ext[axis];
        line.resize(ext[axis]);
        for (std::size_t c = 0; c < count; ++c) {
            // base index of this 1D line
            const std::size_t block = c / stride, offset = c % stride;
            const std::size_t base = block * stride * ext[axis] + offset;
            for (int p = 0; p < ext[axis]; ++p) line[p] = box[base + p * stride];
            detail::parabola_envelope(line, w, env);
            for (int p = 0; p < ext[axis]; ++p) box[base + p * stride] = env[p];
        }
    }

    ScalarField out(g.n(), 0.0);
    for (int i = 0; i < g.n(); ++i) {
        const double v = box[flat(g.ipoint.data() + static_cast<std::size_t>(i) * d)];
        out[i] = std::min(v, f[i]);  // guard against fp drift: z = y is admissible
    }
    return out;
}

}  // namespace bmt
