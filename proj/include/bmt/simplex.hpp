#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bmt/common.hpp"

namespace bmt {

// Revised simplex for min c.x, A x = b, x >= 0, with sparse columns and a
// fresh dense factorization of the basis every iteration. Built for
// column-generation masters at desk scale (a few hundred rows): the O(m^3)
// refactorization is cheap there and keeps the iteration free of update
// drift, which matters more than speed for the certification tolerances.
class DenseSimplex {
public:
    struct Column {
        std::vector<std::pair<int, double>> entries;
        double cost = 0.0;
        bool frozen = false;  // kept out of pricing (retired artificials)
    };

    enum class Status { Optimal, Unbounded, IterationLimit };

    explicit DenseSimplex(std::vector<double> rhs) : b_(std::move(rhs)) {
        m_ = static_cast<int>(b_.size());
    }

    // swap the right-hand side (e.g. dropping an anti-degeneracy
    // perturbation) and refactorize on the current basis
    bool reset_rhs(std::vector<double> rhs) {
        if (static_cast<int>(rhs.size()) != m_)
            throw LpNumericalError("rhs size does not match row count");
        b_ = std::move(rhs);
        return factorize();
    }

    int add_column(Column col) {
        cols_.push_back(std::move(col));
        in_basis_.push_back(0);
        return static_cast<int>(cols_.size()) - 1;
    }
    int n_columns() const { return static_cast<int>(cols_.size()); }
    int n_rows() const { return m_; }
    Column& column(int j) { return cols_[j]; }
    const Column& column(int j) const { return cols_[j]; }

    void set_basis(std::vector<int> basis) {
        if (static_cast<int>(basis.size()) != m_)
            throw LpNumericalError("basis size does not match row count");
        basis_ = std::move(basis);
        in_basis_.assign(n_columns(), 0);
        for (int j : basis_) in_basis_[j] = 1;
        if (!factorize()) throw LpNumericalError("starting basis is infeasible");
    }
    const std::vector<int>& basis() const { return basis_; }

    double primal_value(int j) const {
        for (int r = 0; r < m_; ++r)
            if (basis_[r] == j) return xb_(r);
        return 0.0;
    }
    const Eigen::VectorXd& basic_values() const { return xb_; }

    double objective() const {
        double v = 0.0;
        for (int r = 0; r < m_; ++r) v += cols_[basis_[r]].cost * xb_(r);
        return v;
    }

    std::vector<double> duals() const {
        Eigen::VectorXd cb(m_);
        for (int r = 0; r < m_; ++r) cb(r) = cols_[basis_[r]].cost;
        Eigen::VectorXd y = lu_.transpose().solve(cb);
        return {y.data(), y.data() + m_};
    }

    double reduced_cost(int j, const std::vector<double>& y) const {
        double rc = cols_[j].cost;
        for (const auto& [r, v] : cols_[j].entries) rc -= y[r] * v;
        return rc;
    }

    Status solve(long max_iterations = 200000) {
        const double rc_tol = 1e-9 * (1.0 + max_abs_cost());
        long degenerate_run = 0;
        int ban_rounds = 0;
        bool bland = false;
        std::vector<std::uint8_t> banned(n_columns(), 0);
        if (!factorize()) throw LpNumericalError("initial basis is infeasible");
        for (long it = 0; it < max_iterations; ++it) {
            if (static_cast<int>(banned.size()) < n_columns()) banned.resize(n_columns(), 0);
            const std::vector<double> y = duals();

            int entering = -1;
            double best = -rc_tol;
            for (int j = 0; j < n_columns(); ++j) {
                if (cols_[j].frozen || in_basis_[j] || banned[j]) continue;
                const double rc = reduced_cost(j, y);
                if (bland) {
                    if (rc < -rc_tol) { entering = j; break; }
                } else if (rc < best) {
                    best = rc;
                    entering = j;
                }
            }
            if (entering < 0) {
                bool had_bans = false;
                for (std::uint8_t b : banned) had_bans = had_bans || b;
                if (!had_bans || ban_rounds >= 2) return Status::Optimal;
                // retry the banned columns once from the current basis
                std::fill(banned.begin(), banned.end(), 0);
                ++ban_rounds;
                bland = true;
                continue;
            }

            Eigen::VectorXd aq = Eigen::VectorXd::Zero(m_);
            for (const auto& [r, v] : cols_[entering].entries) aq(r) += v;
            const Eigen::VectorXd w = lu_.solve(aq);
            double wmax = 0.0;
            for (int r = 0; r < m_; ++r) wmax = std::max(wmax, std::abs(w(r)));
            const double piv_tol = std::max(1e-11 * wmax, 1e-12);

            // two-pass ratio test: tightest ratio first, then the
            // best-conditioned pivot among the near-ties
            double theta = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m_; ++r)
                if (w(r) > piv_tol) theta = std::min(theta, std::max(xb_(r), 0.0) / w(r));
            if (!std::isfinite(theta)) return Status::Unbounded;
            int leave = -1;
            const double slack = theta * (1.0 + 1e-9) + 1e-13;
            for (int r = 0; r < m_; ++r) {
                if (w(r) <= piv_tol) continue;
                if (std::max(xb_(r), 0.0) / w(r) > slack) continue;
                if (leave < 0 || w(r) > w(leave)) leave = r;
            }
            // a pivot this small means the column is numerically dependent
            // on the basis; treat its reduced cost as noise
            if (w(leave) < 1e-7 * std::max(1.0, wmax)) {
                banned[entering] = 1;
                continue;
            }

            if (theta <= 1e-12) {
                if (++degenerate_run > 300) bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }

            const int leaving_col = basis_[leave];
            in_basis_[leaving_col] = 0;
            basis_[leave] = entering;
            in_basis_[entering] = 1;
            if (!factorize()) {
                // revert the pivot and keep this column out for now
                in_basis_[entering] = 0;
                basis_[leave] = leaving_col;
                in_basis_[leaving_col] = 1;
                if (!factorize())
                    throw LpNumericalError("basis lost primal feasibility");
                banned[entering] = 1;
                bland = true;
                continue;
            }
            ++iterations_;
        }
        return Status::IterationLimit;
    }

    // exact residual of the current basic solution against the original data
    double feasibility_residual() const {
        std::vector<double> ax(m_, 0.0);
        for (int r = 0; r < m_; ++r) {
            const auto& col = cols_[basis_[r]];
            for (const auto& [row, v] : col.entries) ax[row] += v * xb_(r);
        }
        double res = 0.0;
        for (int r = 0; r < m_; ++r) res = std::max(res, std::abs(ax[r] - b_[r]));
        return res;
    }

    long iterations() const { return iterations_; }

    // degenerate pivot swapping a zero-level basic column for a replacement,
    // used to retire artificial columns
    bool try_replace_basic(int basic_col, int replacement_col) {
        int row = -1;
        for (int r = 0; r < m_; ++r)
            if (basis_[r] == basic_col) row = r;
        if (row < 0 || in_basis_[replacement_col]) return false;
        if (xb_(row) > 1e-9) return false;
        Eigen::VectorXd aq = Eigen::VectorXd::Zero(m_);
        for (const auto& [r, v] : cols_[replacement_col].entries) aq(r) += v;
        const Eigen::VectorXd w = lu_.solve(aq);
        if (std::abs(w(row)) < 1e-7) return false;
        in_basis_[basis_[row]] = 0;
        basis_[row] = replacement_col;
        in_basis_[replacement_col] = 1;
        if (!factorize()) {
            in_basis_[replacement_col] = 0;
            basis_[row] = basic_col;
            in_basis_[basic_col] = 1;
            if (!factorize()) throw LpNumericalError("basis lost primal feasibility");
            return false;
        }
        return true;
    }

private:
    double max_abs_cost() const {
        double m = 0.0;
        for (const auto& c : cols_) m = std::max(m, std::abs(c.cost));
        return m;
    }

    // recompute the factorization and basic values; false when the basis is
    // numerically infeasible (caller reverts the offending pivot)
    bool factorize() {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
        for (int r = 0; r < m_; ++r)
            for (const auto& [row, v] : cols_[basis_[r]].entries) B(row, r) += v;
        lu_.compute(B);
        Eigen::VectorXd bv(m_);
        for (int r = 0; r < m_; ++r) bv(r) = b_[r];
        xb_ = lu_.solve(bv);
        double worst = 0.0;
        for (int r = 0; r < m_; ++r) {
            worst = std::min(worst, xb_(r));
            if (xb_(r) < 0.0) xb_(r) = 0.0;
        }
        return worst >= -1e-7;
    }

    int m_ = 0;
    std::vector<double> b_;
    std::vector<Column> cols_;
    std::vector<int> basis_;
    std::vector<std::uint8_t> in_basis_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    Eigen::VectorXd xb_;
    long iterations_ = 0;
};

}  // namespace bmt
