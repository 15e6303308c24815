#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lmptopo/errors.hpp"
#include "lmptopo/types.hpp"

namespace lmptopo {

struct Line {
    int from = 0;
    int to = 0;
    double reactance = 1.0;   // per unit, > 0
    double flow_limit = 1.0;  // MW, > 0
};

struct GridTopology {
    int bus_count = 0;  // N+1
    int reference_bus = 0;
    std::vector<Line> lines;

    int reduced_size() const { return bus_count - 1; }
};

/// Throws InvalidTopology on malformed lines or DisconnectedGrid.
void validate(const GridTopology& topology);

bool is_connected(int bus_count, const std::vector<Line>& lines);

/// Maps a full bus index to its row in the reduced (reference-deleted) system,
/// or -1 for the reference bus.
inline int reduced_index(const GridTopology& topology, int bus) {
    if (bus == topology.reference_bus) return -1;
    return bus < topology.reference_bus ? bus : bus - 1;
}

inline int full_index(const GridTopology& topology, int reduced) {
    return reduced < topology.reference_bus ? reduced : reduced + 1;
}

/// Undirected edge set of the reduced Laplacian, as (row, col) with row < col.
std::set<std::pair<int, int>> reduced_edge_set(const GridTopology& topology);

template <typename Scalar>
struct GridMatrices {
    Mat<Scalar> full_incidence;      // L x (N+1), row l: +1 at from, -1 at to
    Mat<Scalar> reduced_incidence;   // L x N, reference column deleted
    Vec<Scalar> susceptance;         // diagonal of D, 1/x_l
    Mat<Scalar> reduced_laplacian;   // B = A' D A
    Mat<Scalar> reduced_inverse;     // B^{-1}
    Mat<Scalar> full_laplacian;      // B~ = A~' D A~
    Mat<Scalar> shift_factors;       // L x (N+1), zero column at the reference bus
    Vec<Scalar> flow_limits;
    int reference_bus = 0;

    int line_count() const { return static_cast<int>(full_incidence.rows()); }
    int bus_count() const { return static_cast<int>(full_incidence.cols()); }
    auto reactance_diag() const { return susceptance.asDiagonal(); }
};

template <typename Scalar = double>
GridMatrices<Scalar> build_matrices(const GridTopology& topology, double condition_cap = 1e12) {
    validate(topology);
    const int L = static_cast<int>(topology.lines.size());
    const int n_full = topology.bus_count;
    const int n = n_full - 1;

    GridMatrices<Scalar> g;
    g.reference_bus = topology.reference_bus;
    g.full_incidence = Mat<Scalar>::Zero(L, n_full);
    g.susceptance.resize(L);
    g.flow_limits.resize(L);
    for (int l = 0; l < L; ++l) {
        const Line& line = topology.lines[l];
        g.full_incidence(l, line.from) = Scalar(1);
        g.full_incidence(l, line.to) = Scalar(-1);
        g.susceptance(l) = Scalar(1) / Scalar(line.reactance);
        g.flow_limits(l) = Scalar(line.flow_limit);
    }

    g.reduced_incidence.resize(L, n);
    for (int k = 0; k < n; ++k) g.reduced_incidence.col(k) = g.full_incidence.col(full_index(topology, k));

    const auto D = g.susceptance.asDiagonal();
    g.full_laplacian = g.full_incidence.transpose() * D * g.full_incidence;
    g.reduced_laplacian = g.reduced_incidence.transpose() * D * g.reduced_incidence;

    if (n > 0) {
        Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(g.reduced_laplacian, Eigen::EigenvaluesOnly);
        const Scalar lo = eig.eigenvalues().minCoeff();
        const Scalar hi = eig.eigenvalues().maxCoeff();
        if (!(lo > Scalar(0)) || hi / lo > Scalar(condition_cap))
            throw SingularMatrix("reduced Laplacian is numerically singular (condition estimate exceeds cap)");
        g.reduced_inverse = g.reduced_laplacian.ldlt().solve(Mat<Scalar>::Identity(n, n));
        g.reduced_inverse = (g.reduced_inverse + g.reduced_inverse.transpose()).eval() / Scalar(2);
    } else {
        g.reduced_inverse.resize(0, 0);
    }

    g.shift_factors = Mat<Scalar>::Zero(L, n_full);
    const Mat<Scalar> reduced_shift = D * g.reduced_incidence * g.reduced_inverse;
    for (int k = 0; k < n; ++k) g.shift_factors.col(full_index(topology, k)) = reduced_shift.col(k);
    return g;
}

/// Line flows f = T p for a balanced injection vector of length N+1.
template <typename Scalar>
Vec<Scalar> flows_from_injections(const GridMatrices<Scalar>& g, const Vec<Scalar>& injections,
                                  Scalar balance_tol = Scalar(1e-6)) {
    if (injections.size() != g.bus_count())
        throw DimensionMismatch("injection vector length does not match bus count");
    using std::abs;
    const Scalar imbalance = injections.sum();
    if (abs(imbalance) > balance_tol)
        throw Unbalanced("injections do not sum to zero (imbalance " + std::to_string(double(imbalance)) + ")");
    return g.shift_factors * injections;
}

/// Rebuilds the full Laplacian from its reduced block using zero row/column sums.
/// The reference bus is placed first.
template <typename Derived>
Mat<typename Derived::Scalar> reduced_to_full_laplacian(const Eigen::MatrixBase<Derived>& reduced) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = reduced.rows();
    if (reduced.cols() != n) throw DimensionMismatch("reduced Laplacian must be square");
    Mat<Scalar> full(n + 1, n + 1);
    full.bottomRightCorner(n, n) = reduced;
    full.block(1, 0, n, 1) = -reduced.rowwise().sum();
    full.block(0, 1, 1, n) = -reduced.colwise().sum();
    full(0, 0) = reduced.sum();
    return full;
}

/// Topology with the listed (from,to) lines removed and the given lines appended.
GridTopology swap_lines(const GridTopology& topology, const std::vector<std::pair<int, int>>& lines_out,
                        const std::vector<Line>& lines_in);

}  // namespace lmptopo
