#include "lmptopo/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/LU>

#include "lmptopo/errors.hpp"

namespace lmptopo {

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

// Columns: [structural x (n) | row slacks s (m) | artificials a (m)], with
// A x - s + diag(e) a = 0.
class BoundedSimplex {
public:
    BoundedSimplex(const BoundedLp& lp, const SimplexOptions& options)
        : lp_(lp), opt_(options), n_(lp.variable_count()), m_(lp.row_count()), total_(n_ + 2 * m_) {
        lo_.resize(total_);
        hi_.resize(total_);
        value_.assign(total_, 0.0);
        art_sign_.assign(m_, 1.0);
        basic_pos_.assign(total_, -1);
        for (int j = 0; j < n_; ++j) {
            lo_[j] = lp.lower(j);
            hi_[j] = lp.upper(j);
        }
        for (int i = 0; i < m_; ++i) {
            lo_[n_ + i] = lp.row_lower(i);
            hi_[n_ + i] = lp.row_upper(i);
            lo_[n_ + m_ + i] = 0.0;
            hi_[n_ + m_ + i] = 0.0;
        }
    }

    LpSolution run() {
        LpSolution sol;
        for (int j = 0; j < n_ + m_; ++j) {
            if (lo_[j] > hi_[j] + opt_.feasibility_tol) {
                sol.status = LpStatus::Infeasible;
                return sol;
            }
        }
        initialize_basis();

        // Phase I: minimize the sum of artificials.
        cost_.assign(total_, 0.0);
        for (int i = 0; i < m_; ++i) cost_[n_ + m_ + i] = 1.0;
        LpStatus phase1 = iterate();
        if (phase1 == LpStatus::IterationLimit) {
            sol.status = phase1;
            return sol;
        }
        double infeasibility = 0.0;
        for (int i = 0; i < m_; ++i) infeasibility += value_[n_ + m_ + i];
        double scale = 1.0;
        for (int i = 0; i < m_; ++i) {
            if (std::isfinite(lp_.row_lower(i))) scale = std::max(scale, std::abs(lp_.row_lower(i)));
            if (std::isfinite(lp_.row_upper(i))) scale = std::max(scale, std::abs(lp_.row_upper(i)));
        }
        if (infeasibility > 1e-7 * scale) {
            sol.status = LpStatus::Infeasible;
            sol.iterations = iterations_;
            return sol;
        }
        for (int i = 0; i < m_; ++i) {
            const int a = n_ + m_ + i;
            hi_[a] = 0.0;
            if (basic_pos_[a] < 0) value_[a] = 0.0;
        }
        drive_out_artificials();

        // Phase II.
        cost_.assign(total_, 0.0);
        for (int j = 0; j < n_; ++j) cost_[j] = lp_.cost(j);
        const LpStatus phase2 = iterate();
        sol.status = phase2;
        sol.iterations = iterations_;
        if (phase2 != LpStatus::Optimal) return sol;

        refactor();
        compute_basic_values();
        sol.x.resize(n_);
        for (int j = 0; j < n_; ++j) sol.x(j) = std::clamp(value_[j], lo_[j], hi_[j]);
        sol.row_activity = lp_.rows * sol.x;
        sol.row_duals = duals();
        sol.reduced_costs = lp_.cost - lp_.rows.transpose() * sol.row_duals;
        sol.objective = lp_.cost.dot(sol.x);
        for (int p = 0; p < m_; ++p) {
            const int j = basis_[p];
            const double tol = opt_.feasibility_tol * (1.0 + std::abs(value_[j]));
            if (std::abs(value_[j] - lo_[j]) <= tol || std::abs(value_[j] - hi_[j]) <= tol) sol.degenerate = true;
        }
        return sol;
    }

private:
    VectorXd column(int j) const {
        if (j < n_) return lp_.rows.col(j);
        VectorXd e = VectorXd::Zero(m_);
        if (j < n_ + m_) e(j - n_) = -1.0;
        else e(j - n_ - m_) = art_sign_[j - n_ - m_];
        return e;
    }

    static double nonbasic_start(double lo, double hi) {
        if (std::isfinite(lo)) return lo;
        if (std::isfinite(hi)) return hi;
        return 0.0;
    }

    void initialize_basis() {
        for (int j = 0; j < n_; ++j) value_[j] = nonbasic_start(lo_[j], hi_[j]);
        VectorXd xs(n_);
        for (int j = 0; j < n_; ++j) xs(j) = value_[j];
        const VectorXd activity = lp_.rows * xs;
        basis_.assign(m_, -1);
        for (int i = 0; i < m_; ++i) {
            const int s = n_ + i;
            const int a = n_ + m_ + i;
            const double r = activity(i);
            if (r > lo_[s] && r < hi_[s]) {
                set_basic(s, i);
                value_[s] = r;
                value_[a] = 0.0;
            } else {
                value_[s] = std::clamp(r, lo_[s], hi_[s]);
                art_sign_[i] = value_[s] - r >= 0.0 ? 1.0 : -1.0;
                hi_[a] = kInf;
                set_basic(a, i);
                value_[a] = std::abs(value_[s] - r);
            }
        }
    }

    void set_basic(int j, int pos) {
        if (basis_[pos] >= 0) basic_pos_[basis_[pos]] = -1;
        basis_[pos] = j;
        basic_pos_[j] = pos;
    }

    void refactor() {
        MatrixXd bm(m_, m_);
        for (int p = 0; p < m_; ++p) bm.col(p) = column(basis_[p]);
        lu_.compute(bm);
    }

    void compute_basic_values() {
        VectorXd rhs = VectorXd::Zero(m_);
        for (int j = 0; j < total_; ++j) {
            if (basic_pos_[j] >= 0 || value_[j] == 0.0) continue;
            rhs -= column(j) * value_[j];
        }
        const VectorXd xb = lu_.solve(rhs);
        for (int p = 0; p < m_; ++p) value_[basis_[p]] = xb(p);
    }

    VectorXd duals() const {
        VectorXd cb(m_);
        for (int p = 0; p < m_; ++p) cb(p) = cost_[basis_[p]];
        return lu_.transpose().solve(cb);
    }

    // Bland: first eligible nonbasic column by index.
    int choose_entering(const VectorXd& y, double& direction) const {
        for (int j = 0; j < total_; ++j) {
            if (basic_pos_[j] >= 0) continue;
            if (hi_[j] - lo_[j] <= 0.0) continue;
            const double d = cost_[j] - column(j).dot(y);
            const bool at_lo = std::isfinite(lo_[j]) && value_[j] <= lo_[j];
            const bool at_hi = std::isfinite(hi_[j]) && value_[j] >= hi_[j];
            if (d < -opt_.optimality_tol && !at_hi) {
                direction = 1.0;
                return j;
            }
            if (d > opt_.optimality_tol && !at_lo) {
                direction = -1.0;
                return j;
            }
        }
        return -1;
    }

    LpStatus iterate() {
        while (true) {
            if (iterations_ >= opt_.max_iterations) return LpStatus::IterationLimit;
            refactor();
            compute_basic_values();
            const VectorXd y = duals();
            double direction = 0.0;
            const int enter = choose_entering(y, direction);
            if (enter < 0) return LpStatus::Optimal;
            ++iterations_;

            const VectorXd w = lu_.solve(column(enter));
            // Entering variable's own range; a bound flip wins ties.
            double step = hi_[enter] - lo_[enter];
            int leave_pos = -1;
            double leave_bound = 0.0;
            for (int p = 0; p < m_; ++p) {
                const double delta = -direction * w(p);
                if (std::abs(delta) <= opt_.pivot_tol) continue;
                const int j = basis_[p];
                double bound;
                if (delta < 0.0) {
                    if (!std::isfinite(lo_[j])) continue;
                    bound = lo_[j];
                } else {
                    if (!std::isfinite(hi_[j])) continue;
                    bound = hi_[j];
                }
                const double ratio = std::max(0.0, (bound - value_[j]) / delta);
                const double tie = 1e-12 * (1.0 + (std::isfinite(step) ? std::abs(step) : 0.0));
                const bool better = ratio < step - tie;
                const bool tied_smaller_index =
                    !better && ratio <= step + tie && leave_pos >= 0 && j < basis_[leave_pos];
                if (better || tied_smaller_index) {
                    step = ratio;
                    leave_pos = p;
                    leave_bound = bound;
                }
            }
            if (!std::isfinite(step)) return LpStatus::Unbounded;

            if (leave_pos < 0) {
                value_[enter] = direction > 0.0 ? hi_[enter] : lo_[enter];
                continue;
            }
            const int leave = basis_[leave_pos];
            value_[enter] += direction * step;
            set_basic(enter, leave_pos);
            value_[leave] = leave_bound;
        }
    }

    void drive_out_artificials() {
        refactor();
        for (int p = 0; p < m_; ++p) {
            const int j = basis_[p];
            if (j < n_ + m_) continue;
            VectorXd unit = VectorXd::Zero(m_);
            unit(p) = 1.0;
            const VectorXd row = lu_.transpose().solve(unit);  // row p of B^{-1}
            for (int k = 0; k < n_ + m_; ++k) {
                if (basic_pos_[k] >= 0) continue;
                if (std::abs(row.dot(column(k))) > 1e-7) {
                    set_basic(k, p);
                    value_[j] = 0.0;
                    refactor();
                    break;
                }
            }
        }
    }

    const BoundedLp& lp_;
    SimplexOptions opt_;
    int n_;
    int m_;
    int total_;
    std::vector<double> lo_, hi_, value_, cost_, art_sign_;
    std::vector<int> basis_, basic_pos_;
    Eigen::PartialPivLU<MatrixXd> lu_;
    int iterations_ = 0;
};

}  // namespace

LpSolution solve_lp_with_duals(const BoundedLp& lp, const SimplexOptions& options) {
    const int n = lp.variable_count();
    const int m = lp.row_count();
    if (lp.rows.cols() != n || lp.lower.size() != n || lp.upper.size() != n || lp.row_lower.size() != m ||
        lp.row_upper.size() != m)
        throw DimensionMismatch("LP dimensions are inconsistent");
    LpSolution sol = BoundedSimplex(lp, options).run();
    if (sol.status == LpStatus::Unbounded) throw UnboundedLp("LP is unbounded");
    return sol;
}

double KktReport::worst() const {
    return std::max({primal_infeasibility, dual_infeasibility, complementarity});
}

KktReport kkt_report(const BoundedLp& lp, const VectorXd& x, const VectorXd& y) {
    KktReport r;
    const VectorXd ax = lp.rows * x;
    const VectorXd d = lp.cost - lp.rows.transpose() * y;
    double dual_obj = 0.0;
    for (int i = 0; i < lp.row_count(); ++i) {
        r.primal_infeasibility = std::max({r.primal_infeasibility, lp.row_lower(i) - ax(i), ax(i) - lp.row_upper(i)});
        // y_i > 0 pairs with the lower row bound, y_i < 0 with the upper one.
        if (y(i) > 0.0) {
            if (!std::isfinite(lp.row_lower(i))) r.dual_infeasibility = std::max(r.dual_infeasibility, y(i));
            else {
                dual_obj += y(i) * lp.row_lower(i);
                r.complementarity = std::max(r.complementarity, std::abs(y(i) * (ax(i) - lp.row_lower(i))));
            }
        } else if (y(i) < 0.0) {
            if (!std::isfinite(lp.row_upper(i))) r.dual_infeasibility = std::max(r.dual_infeasibility, -y(i));
            else {
                dual_obj += y(i) * lp.row_upper(i);
                r.complementarity = std::max(r.complementarity, std::abs(y(i) * (lp.row_upper(i) - ax(i))));
            }
        }
    }
    for (int j = 0; j < lp.variable_count(); ++j) {
        r.primal_infeasibility = std::max({r.primal_infeasibility, lp.lower(j) - x(j), x(j) - lp.upper(j)});
        if (d(j) > 0.0) {
            if (!std::isfinite(lp.lower(j))) r.dual_infeasibility = std::max(r.dual_infeasibility, d(j));
            else {
                dual_obj += d(j) * lp.lower(j);
                r.complementarity = std::max(r.complementarity, std::abs(d(j) * (x(j) - lp.lower(j))));
            }
        } else if (d(j) < 0.0) {
            if (!std::isfinite(lp.upper(j))) r.dual_infeasibility = std::max(r.dual_infeasibility, -d(j));
            else {
                dual_obj += d(j) * lp.upper(j);
                r.complementarity = std::max(r.complementarity, std::abs(d(j) * (lp.upper(j) - x(j))));
            }
        }
    }
    r.dual_objective = dual_obj;
    r.duality_gap = lp.cost.dot(x) - dual_obj;
    return r;
}

}  // namespace lmptopo
