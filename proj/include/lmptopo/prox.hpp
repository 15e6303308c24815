#pragma once

// Closed-form proximal and projection operators shared by the batch and the
// online recovery solvers. All kernels take dense inputs and return dense
// outputs; sparsity shows up only in the values.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "lmptopo/errors.hpp"
#include "lmptopo/types.hpp"

namespace lmptopo {

template <typename Scalar>
Scalar sign(Scalar x) {
    return (x > Scalar(0)) - (x < Scalar(0));
}

template <typename Scalar>
Scalar soft_threshold(Scalar x, Scalar beta) {
    using std::abs;
    return abs(x) > beta ? x - beta * sign(x) : Scalar(0);
}

/// Entrywise soft thresholding of a matrix expression.
template <typename Derived>
Mat<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar beta) {
    using Scalar = typename Derived::Scalar;
    return x.unaryExpr([beta](Scalar v) { return soft_threshold(v, beta); });
}

/// Minimizer of 1/2 ||X - B||_F^2 - alpha log|B| over B > 0.
///
/// Eigendecomposes the symmetric part of X as V diag(xi) V' and maps each
/// eigenvalue to the positive root of b^2 - xi b - alpha = 0.
template <typename Derived>
Mat<typename Derived::Scalar> psd_logdet_prox(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar alpha) {
    using Scalar = typename Derived::Scalar;
    using std::sqrt;
    if (x.rows() != x.cols()) throw DimensionMismatch("psd_logdet_prox needs a square matrix");
    if (!(alpha > Scalar(0))) throw BadConfig("psd_logdet_prox needs alpha > 0");
    const Mat<Scalar> sym = (x + x.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(sym);
    const Vec<Scalar> xi = eig.eigenvalues();
    Vec<Scalar> root(xi.size());
    for (Eigen::Index k = 0; k < xi.size(); ++k) {
        const Scalar disc = sqrt(xi(k) * xi(k) + Scalar(4) * alpha);
        // Cancellation-free form for negative eigenvalues.
        root(k) = xi(k) >= Scalar(0) ? (xi(k) + disc) / Scalar(2) : Scalar(2) * alpha / (disc - xi(k));
    }
    const auto& v = eig.eigenvectors();
    Mat<Scalar> out = v * root.asDiagonal() * v.transpose();
    return (out + out.transpose()) / Scalar(2);
}

/// Minimizer of ||X z||_1 + 1/2 ||X - Y||_F^2: a rank-one correction of Y.
template <typename DerivedY, typename DerivedZ>
Mat<typename DerivedY::Scalar> l1_row_prox(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedZ>& z) {
    using Scalar = typename DerivedY::Scalar;
    using std::abs;
    if (z.size() != y.cols()) throw DimensionMismatch("l1_row_prox: z length must equal Y columns");
    const Scalar zz = z.squaredNorm();
    if (zz == Scalar(0)) return y;
    const Vec<Scalar> yz = y * z;
    const Vec<Scalar> g = yz.unaryExpr([zz](Scalar v) { return sign(v) * std::min(abs(v) / zz, Scalar(1)); });
    return y - g * z.transpose();
}

template <typename Scalar = double>
struct HuberParams {
    Scalar kappa = Scalar(1);
    Scalar alpha = Scalar(1);

    void validate() const {
        if (!(kappa > Scalar(0)) || !(alpha > Scalar(0))) throw BadConfig("Huber kappa and alpha must be positive");
    }
};

/// Huber function: quadratic on [-kappa, kappa], linear outside.
template <typename Scalar>
Scalar huber_value(Scalar x, Scalar kappa) {
    using std::abs;
    const Scalar a = abs(x);
    return a <= kappa ? x * x / Scalar(2) : kappa * a - kappa * kappa / Scalar(2);
}

template <typename Derived>
typename Derived::Scalar huber_total(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar kappa) {
    using Scalar = typename Derived::Scalar;
    Scalar total(0);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) total += huber_value(x(i, j), kappa);
    return total;
}

/// Minimizer of alpha * sum huber_kappa(X z) + 1/2 ||X - Y||_F^2.
template <typename DerivedY, typename DerivedZ>
Mat<typename DerivedY::Scalar> huber_row_prox(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedZ>& z,
                                              const HuberParams<typename DerivedY::Scalar>& params) {
    using Scalar = typename DerivedY::Scalar;
    using std::abs;
    params.validate();
    if (z.size() != y.cols()) throw DimensionMismatch("huber_row_prox: z length must equal Y columns");
    const Scalar zz = z.squaredNorm();
    const Scalar knee = params.kappa * (Scalar(1) + params.alpha * zz);
    const Scalar slope = Scalar(1) / (Scalar(1) / params.alpha + zz);
    const Scalar cap = params.alpha * params.kappa;
    const Vec<Scalar> yz = y * z;
    const Vec<Scalar> h = yz.unaryExpr([&](Scalar v) { return abs(v) <= knee ? v * slope : sign(v) * cap; });
    return y - h * z.transpose();
}

}  // namespace lmptopo
