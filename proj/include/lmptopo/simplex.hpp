#pragma once

#include <limits>
#include <string>

#include "lmptopo/types.hpp"

namespace lmptopo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min c'x  s.t.  row_lower <= A x <= row_upper,  lower <= x <= upper.
/// Equality rows have row_lower == row_upper.
struct BoundedLp {
    VectorXd cost;
    MatrixXd rows;
    VectorXd row_lower;
    VectorXd row_upper;
    VectorXd lower;
    VectorXd upper;

    int variable_count() const { return static_cast<int>(cost.size()); }
    int row_count() const { return static_cast<int>(rows.rows()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    VectorXd x;
    VectorXd row_activity;   // A x
    VectorXd row_duals;      // y; stationarity reads c - A'y - z = 0
    VectorXd reduced_costs;  // d = c - A'y, the bound multipliers z
    double objective = 0.0;
    bool degenerate = false;  // a basic variable sits at one of its bounds
    int iterations = 0;
};

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-10;
    int max_iterations = 50000;
};

/// Bounded-variable revised simplex, two phases, Bland's smallest-index rule
/// for both the entering and the leaving variable. Duals are read from the
/// terminating basis.
LpSolution solve_lp_with_duals(const BoundedLp& lp, const SimplexOptions& options = {});

struct KktReport {
    double primal_infeasibility = 0.0;  // worst row or bound violation
    double dual_infeasibility = 0.0;    // worst sign violation of y or d
    double complementarity = 0.0;       // worst |multiplier * slack|
    double duality_gap = 0.0;           // primal minus dual objective
    double dual_objective = 0.0;

    double worst() const;
};

/// Evaluates the optimality conditions of a candidate primal/dual pair.
KktReport kkt_report(const BoundedLp& lp, const VectorXd& x, const VectorXd& row_duals);

}  // namespace lmptopo
