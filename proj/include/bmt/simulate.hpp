#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "bmt/barrier.hpp"

namespace bmt {

struct SimOptions {
    long n_paths = 100000;
    std::uint64_t seed = 1;
    long max_steps_per_path = 10000000;
    const GridMeasure* stay_put = nullptr;  // time-zero stopping mass, <= mu nodewise
    const GridMeasure* target = nullptr;    // optional reference for the TV readout
};

struct SimResult {
    long n_paths = 0;
    std::uint64_t seed = 0;
    GridMeasure empirical;
    std::vector<long> counts;
    std::vector<double> std_error;
    double stay_put_fraction = 0.0;
    double mean_stop_time = 0.0;   // physical units
    double tv_to_target = -1.0;    // -1 when no target was supplied
    long censored_paths = 0;       // budget-hit paths, forced to the boundary
    std::map<long, long> step_histogram;
};

// Walk paths from mu, stopping at the first step t >= 1 with (X0, Xt) in the
// barrier (the boundary always absorbs). With a stay-put component, a path
// starting at x stops at time zero with probability stay_put(x)/mu(x). One
// independent RNG stream per path keeps the result reproducible and
// independent of scheduling.
inline SimResult simulate_hitting(const Barrier& barrier, const GridMeasure& mu,
                                  const Grid& g, const SimOptions& opt) {
    if (mu.size() != g.n()) throw PreconditionError("measure size does not match grid");
    if (opt.n_paths <= 0) throw PreconditionError("path count must be positive");
    if (opt.stay_put) {
        if (opt.stay_put->size() != g.n())
            throw PreconditionError("stay-put measure size does not match grid");
        for (int i = 0; i < g.n(); ++i)
            if ((*opt.stay_put)[i] > mu[i] + 1e-12)
                throw PreconditionError("stay-put mass exceeds the source marginal");
    }

    // sampling by inverse CDF over the support
    std::vector<int> supp;
    std::vector<double> cdf;
    double acc = 0.0;
    for (int i = 0; i < g.n(); ++i)
        if (mu[i] > 0.0) {
            supp.push_back(i);
            acc += mu[i];
            cdf.push_back(acc);
        }
    if (supp.empty()) throw PreconditionError("source marginal has no mass");
    std::vector<int> row_of(g.n(), -1);
    for (int i : supp) {
        row_of[i] = barrier.row_of(i);
        if (row_of[i] < 0 && g.is_interior(i))
            throw PreconditionError("barrier has no row for a source with mass");
    }

    SimResult res;
    res.n_paths = opt.n_paths;
    res.seed = opt.seed;
    res.counts.assign(g.n(), 0);
    long stay_put_count = 0;
    std::uint64_t total_steps = 0;

    for (long p = 0; p < opt.n_paths; ++p) {
        std::mt19937_64 rng(splitmix64(opt.seed ^ (0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(p))));
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        // X0 ~ mu
        const double u0 = unif(rng) * acc;
        int lo = 0, hi = static_cast<int>(supp.size()) - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (cdf[mid] >= u0)
                hi = mid;
            else
                lo = mid + 1;
        }
        const int x0 = supp[lo];

        if (opt.stay_put) {
            const double p0 = (*opt.stay_put)[x0] / mu[x0];
            if (unif(rng) < p0) {
                ++res.counts[x0];
                ++stay_put_count;
                res.step_histogram[0] += 1;
                continue;
            }
        }
        if (!g.is_interior(x0)) {
            ++res.counts[x0];
            res.step_histogram[0] += 1;
            continue;
        }

        const int row = row_of[x0];
        std::uniform_int_distribution<int> pick(0, 2 * g.dim - 1);
        int at = x0;
        long steps = 0;
        bool stopped = false;
        while (steps < opt.max_steps_per_path) {
            at = g.neighbor[static_cast<std::size_t>(at) * 2 * g.dim + pick(rng)];
            ++steps;
            if (!g.is_interior(at) || barrier.at(row, at)) {
                stopped = true;
                break;
            }
        }
        if (!stopped) {
            // censor: release the walk to the boundary, barrier ignored
            ++res.censored_paths;
            while (g.is_interior(at)) {
                at = g.neighbor[static_cast<std::size_t>(at) * 2 * g.dim + pick(rng)];
                ++steps;
            }
        }
        ++res.counts[at];
        total_steps += static_cast<std::uint64_t>(steps);
        res.step_histogram[steps] += 1;
    }

    res.empirical = GridMeasure(g.n(), 0.0);
    res.std_error.assign(g.n(), 0.0);
    const double n = static_cast<double>(opt.n_paths);
    for (int i = 0; i < g.n(); ++i) {
        const double p = static_cast<double>(res.counts[i]) / n;
        res.empirical[i] = p;
        res.std_error[i] = std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
    }
    res.stay_put_fraction = static_cast<double>(stay_put_count) / n;
    res.mean_stop_time = static_cast<double>(total_steps) / n * g.step_time();
    if (opt.target) res.tv_to_target = total_variation(res.empirical, *opt.target);
    return res;
}

}  // namespace bmt
