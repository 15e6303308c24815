#pragma once

// Batch ADMM for
//   min ||B Pi||_1 + kappa1 tr(P B) - kappa2 log|B|  s.t.  B >= 0 (PSD), B <= I,
// with P = I - 11'. B is split into three copies: B1 carries the data and the
// trace term, B2 the entrywise cap, B3 the log-det barrier; S = B1 Pi is a
// separate sparse variable.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <future>
#include <optional>
#include <set>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lmptopo/errors.hpp"
#include "lmptopo/prox.hpp"
#include "lmptopo/types.hpp"

namespace lmptopo {

struct RecoveryParams {
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    double rho = 1e4;
    int max_iters = 5000;
    // Absolute bound on all three primal residuals; unset means 1e-4 * ||Pi||_F.
    std::optional<double> primal_tol;
    // Bound on the relative change of the (B2, B3, S) block between iterations.
    double dual_tol = 1e-7;
    double threshold_tau = 0.01;
    std::optional<double> target_degree;

    void validate() const {
        if (!(kappa1 > 0.0) || !(kappa2 > 0.0) || !(rho > 0.0)) throw BadConfig("kappa1, kappa2, rho must be positive");
        if (max_iters <= 0) throw BadConfig("max_iters must be positive");
        if (primal_tol && !(*primal_tol > 0.0)) throw BadConfig("primal_tol must be positive");
        if (!(dual_tol > 0.0)) throw BadConfig("dual_tol must be positive");
        if (!(threshold_tau >= 0.0)) throw BadConfig("threshold_tau must be nonnegative");
    }

    double resolved_primal_tol(double pi_norm) const {
        if (primal_tol) return *primal_tol;
        return std::max(1e-4 * pi_norm, 1e-12);
    }
};

/// P = I - 11'.
template <typename Scalar>
Mat<Scalar> centering_matrix(Eigen::Index n) {
    return Mat<Scalar>::Identity(n, n) - Mat<Scalar>::Ones(n, n);
}

template <typename Scalar>
struct AdmmState {
    Mat<Scalar> B1, B2, B3;
    Mat<Scalar> S;
    Mat<Scalar> M12, M13, M;
    Mat<Scalar> P;
    int iter = 0;
    // (||B1-B2||_F, ||B1-B3||_F, ||B1 Pi - S||_F) per iteration.
    std::vector<std::array<Scalar, 3>> residuals;
    std::vector<Scalar> dual_residuals;

    Eigen::Index size() const { return B1.rows(); }
};

template <typename Scalar>
AdmmState<Scalar> init_state(const Mat<Scalar>& pi) {
    const Eigen::Index n = pi.rows();
    if (n == 0 || pi.cols() == 0) throw EmptyHorizon("price matrix is empty");
    AdmmState<Scalar> s;
    s.B1 = s.B2 = s.B3 = Mat<Scalar>::Identity(n, n);
    s.S = pi;
    s.M12 = s.M13 = Mat<Scalar>::Zero(n, n);
    s.M = Mat<Scalar>::Zero(n, pi.cols());
    s.P = centering_matrix<Scalar>(n);
    return s;
}

/// Cached Cholesky factor of 2I + Pi Pi', shared by every B1 update of a run.
template <typename Scalar>
struct B1Factor {
    Eigen::LLT<Mat<Scalar>> llt;

    explicit B1Factor(const Mat<Scalar>& pi)
        : llt(Mat<Scalar>(Scalar(2) * Mat<Scalar>::Identity(pi.rows(), pi.rows()) + pi * pi.transpose())) {}
};

/// B1 = (B2 - M12 + B3 - M13 + (S - M) Pi' - (kappa1/rho) P) (2I + Pi Pi')^{-1}.
template <typename Scalar>
Mat<Scalar> update_B1(const AdmmState<Scalar>& s, const Mat<Scalar>& pi, const B1Factor<Scalar>& factor,
                      const RecoveryParams& params) {
    const Mat<Scalar> rhs = s.B2 - s.M12 + s.B3 - s.M13 + (s.S - s.M) * pi.transpose() -
                            Scalar(params.kappa1 / params.rho) * s.P;
    // X G = R with G symmetric  <=>  G X' = R'.
    return factor.llt.solve(rhs.transpose()).transpose();
}

template <typename Scalar>
Mat<Scalar> update_B2(const AdmmState<Scalar>& s) {
    const Eigen::Index n = s.size();
    return (s.B1 + s.M12).cwiseMin(Mat<Scalar>::Identity(n, n));
}

template <typename Scalar>
Mat<Scalar> update_B3(const AdmmState<Scalar>& s, const RecoveryParams& params) {
    return psd_logdet_prox(s.B1 + s.M13, Scalar(params.kappa2 / params.rho));
}

template <typename Scalar>
Mat<Scalar> update_S(const AdmmState<Scalar>& s, const Mat<Scalar>& pi, const RecoveryParams& params) {
    return soft_threshold(s.B1 * pi + s.M, Scalar(1.0 / params.rho));
}

template <typename Scalar>
void update_multipliers(AdmmState<Scalar>& s, const Mat<Scalar>& pi) {
    s.M12 += s.B1 - s.B2;
    s.M13 += s.B1 - s.B3;
    s.M += s.B1 * pi - s.S;
}

/// One full ADMM sweep; records residuals.
template <typename Scalar>
void admm_iteration(AdmmState<Scalar>& s, const Mat<Scalar>& pi, const B1Factor<Scalar>& factor,
                    const RecoveryParams& params) {
    const Mat<Scalar> prev_b2 = s.B2;
    const Mat<Scalar> prev_b3 = s.B3;
    const Mat<Scalar> prev_s = s.S;
    s.B1 = update_B1(s, pi, factor, params);
    s.B2 = update_B2(s);
    s.B3 = update_B3(s, params);
    s.S = update_S(s, pi, params);
    update_multipliers(s, pi);
    ++s.iter;
    const Mat<Scalar> b1pi = s.B1 * pi;
    s.residuals.push_back({(s.B1 - s.B2).norm(), (s.B1 - s.B3).norm(), (b1pi - s.S).norm()});
    // Change of the second block mapped back through the B1 constraints,
    // relative to the size of the current dual aggregate.
    const Scalar change = ((s.B2 - prev_b2) + (s.B3 - prev_b3) + (s.S - prev_s) * pi.transpose()).norm();
    const Scalar dual_scale = (s.M12 + s.M13 + s.M * pi.transpose()).norm() + s.B2.norm() + s.B3.norm();
    s.dual_residuals.push_back(change / std::max(dual_scale, Scalar(1e-30)));
}

template <typename Scalar>
struct BatchResult {
    Mat<Scalar> B_hat;  // 1/2 (B1 + B1')
    Mat<Scalar> S_hat;
    AdmmState<Scalar> state;
    bool converged = false;
    int iterations = 0;
    double primal_tol = 0.0;
    double wall_seconds = 0.0;
};

/// Runs the ADMM sweeps until all primal residuals are within primal_tol and
/// the relative dual change is within dual_tol, or max_iters is hit. Hitting
/// the cap is a soft failure: converged is false and the last iterate is returned.
template <typename Scalar>
BatchResult<Scalar> run_batch(const Mat<Scalar>& pi, const RecoveryParams& params) {
    params.validate();
    const auto start = std::chrono::steady_clock::now();
    BatchResult<Scalar> out;
    out.state = init_state(pi);
    out.primal_tol = params.resolved_primal_tol(double(pi.norm()));
    const B1Factor<Scalar> factor(pi);
    auto& s = out.state;
    while (s.iter < params.max_iters) {
        admm_iteration(s, pi, factor, params);
        const auto& r = s.residuals.back();
        const Scalar worst = std::max({r[0], r[1], r[2]});
        if (worst <= Scalar(out.primal_tol) && s.dual_residuals.back() <= Scalar(params.dual_tol)) {
            out.converged = true;
            break;
        }
    }
    out.iterations = s.iter;
    out.B_hat = (s.B1 + s.B1.transpose()) / Scalar(2);
    out.S_hat = s.S;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

template <typename Scalar>
struct SupportEstimate {
    Mat<Scalar> normalized;  // scaled by max diagonal, small entries zeroed
    std::set<std::pair<int, int>> edges;  // (i, j), i < j
    double average_degree = 0.0;
};

/// Scales by the maximum diagonal entry, zeroes entries below tau in
/// magnitude, and reads the edge set off the surviving off-diagonals.
template <typename Derived>
SupportEstimate<typename Derived::Scalar> normalize_and_threshold(const Eigen::MatrixBase<Derived>& b_hat, double tau) {
    using Scalar = typename Derived::Scalar;
    using std::abs;
    if (b_hat.rows() != b_hat.cols()) throw DimensionMismatch("estimate must be square");
    const Eigen::Index n = b_hat.rows();
    SupportEstimate<Scalar> out;
    if (n == 0) return out;
    const Scalar max_diag = b_hat.diagonal().maxCoeff();
    if (!(max_diag > Scalar(0))) throw DegenerateEstimate("maximum diagonal entry is not positive");
    out.normalized = b_hat / max_diag;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            if (abs(out.normalized(i, j)) < Scalar(tau)) out.normalized(i, j) = Scalar(0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (out.normalized(i, j) != Scalar(0) || out.normalized(j, i) != Scalar(0))
                out.edges.emplace(static_cast<int>(i), static_cast<int>(j));
    out.average_degree = 2.0 * static_cast<double>(out.edges.size()) / static_cast<double>(n);
    return out;
}

struct KappaCell {
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double average_degree = 0.0;
    int iterations = 0;
    bool converged = false;
};

template <typename Scalar>
struct TuningResult {
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    MatrixXd degree_table;  // rows: kappa1 grid, cols: kappa2 grid
    std::vector<KappaCell> cells;
    BatchResult<Scalar> best;
};

/// Sweeps the (kappa1, kappa2) grid and picks the pair whose recovered average
/// degree is closest to the target (first in row-major order on ties). Cells
/// run concurrently; each owns its own ADMM state.
template <typename Scalar>
TuningResult<Scalar> tune_kappas(const Mat<Scalar>& pi, const std::vector<double>& kappa1_grid,
                                 const std::vector<double>& kappa2_grid, double target_degree,
                                 const RecoveryParams& base, unsigned workers = 0) {
    if (kappa1_grid.empty() || kappa2_grid.empty()) throw BadConfig("kappa grid is empty");
    const std::size_t rows = kappa1_grid.size();
    const std::size_t cols = kappa2_grid.size();
    const std::size_t cells = rows * cols;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

    std::vector<std::optional<BatchResult<Scalar>>> results(cells);
    std::vector<KappaCell> summary(cells);
    auto run_cell = [&](std::size_t c) {
        RecoveryParams p = base;
        p.kappa1 = kappa1_grid[c / cols];
        p.kappa2 = kappa2_grid[c % cols];
        BatchResult<Scalar> r = run_batch(pi, p);
        const auto support = normalize_and_threshold(r.B_hat, p.threshold_tau);
        summary[c] = {p.kappa1, p.kappa2, support.average_degree, r.iterations, r.converged};
        results[c] = std::move(r);
    };
    if (workers <= 1) {
        for (std::size_t c = 0; c < cells; ++c) run_cell(c);
    } else {
        std::vector<std::future<void>> pending;
        for (std::size_t c = 0; c < cells; ++c) {
            pending.push_back(std::async(std::launch::async, run_cell, c));
            if (pending.size() >= workers) {
                for (auto& f : pending) f.get();
                pending.clear();
            }
        }
        for (auto& f : pending) f.get();
    }

    TuningResult<Scalar> out;
    out.degree_table.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::size_t best = 0;
    for (std::size_t c = 0; c < cells; ++c) {
        out.degree_table(static_cast<Eigen::Index>(c / cols), static_cast<Eigen::Index>(c % cols)) =
            summary[c].average_degree;
        if (std::abs(summary[c].average_degree - target_degree) <
            std::abs(summary[best].average_degree - target_degree))
            best = c;
    }
    out.cells = summary;
    out.kappa1 = summary[best].kappa1;
    out.kappa2 = summary[best].kappa2;
    out.best = std::move(*results[best]);
    return out;
}

}  // namespace lmptopo
