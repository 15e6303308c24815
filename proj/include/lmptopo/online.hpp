#pragma once

// Online ADMM over a stream of price vectors. Each interval runs one cycle:
// a proximal B1 step on the current loss, the B2 cap and B3 log-det updates,
// then the multiplier updates.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lmptopo/batch.hpp"
#include "lmptopo/errors.hpp"
#include "lmptopo/prox.hpp"
#include "lmptopo/types.hpp"

namespace lmptopo {

enum class OnlineLoss { L1, Huber };

inline std::string to_string(OnlineLoss loss) { return loss == OnlineLoss::L1 ? "l1" : "huber"; }

struct OnlineParams {
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    double kappa3 = 1.0;
    double rho = 1.0;
    double eta = 1.0;
    double horizon_T = 1.0;
    OnlineLoss loss = OnlineLoss::Huber;
    bool skip_uncongested = false;
    // Weight of kappa1 P in the anchor, in units of kappa1/(T(2 rho + eta)).
    // 1 is the completing-the-square value; 0.5 reproduces the other printed form.
    double anchor_kappa1_factor = 1.0;

    void validate() const {
        if (!(kappa1 > 0.0) || !(kappa2 > 0.0) || !(kappa3 > 0.0)) throw BadConfig("online kappas must be positive");
        if (!(rho > 0.0) || !(eta > 0.0)) throw BadConfig("online rho and eta must be positive");
        if (!(horizon_T > 0.0)) throw BadConfig("online horizon must be positive");
    }

    /// rho = eta = sqrt(T).
    static OnlineParams for_horizon(double horizon, OnlineLoss loss = OnlineLoss::Huber) {
        OnlineParams p;
        p.horizon_T = horizon;
        p.rho = p.eta = std::sqrt(horizon);
        p.loss = loss;
        return p;
    }
};

template <typename Scalar>
struct OnlineState {
    Mat<Scalar> B1, B2, B3;
    Mat<Scalar> M12, M13;
    Mat<Scalar> P;
    long t = 0;
    std::vector<std::vector<Scalar>> support_trace;

    Eigen::Index size() const { return B1.rows(); }
};

template <typename Scalar>
OnlineState<Scalar> init_online(Eigen::Index n, const std::optional<Mat<Scalar>>& warm_start = std::nullopt) {
    OnlineState<Scalar> s;
    if (warm_start) {
        if (warm_start->rows() != n || warm_start->cols() != n)
            throw DimensionMismatch("warm start must be " + std::to_string(n) + "x" + std::to_string(n));
        s.B1 = s.B2 = s.B3 = *warm_start;
    } else {
        s.B1 = s.B2 = s.B3 = Mat<Scalar>::Identity(n, n);
    }
    s.M12 = s.M13 = Mat<Scalar>::Zero(n, n);
    s.P = centering_matrix<Scalar>(n);
    return s;
}

/// Minimizer of the B1 subproblem without the data term:
/// (rho (B2 + B3 - M12 - M13) + eta B1 - (kappa1/T) P) / (2 rho + eta).
template <typename Scalar>
Mat<Scalar> compute_anchor(const OnlineState<Scalar>& s, const OnlineParams& params) {
    const Scalar denom = Scalar(2 * params.rho + params.eta);
    const Scalar trace_weight = Scalar(params.anchor_kappa1_factor * params.kappa1 / params.horizon_T);
    return (Scalar(params.rho) * (s.B2 + s.B3 - s.M12 - s.M13) + Scalar(params.eta) * s.B1 - trace_weight * s.P) /
           denom;
}

namespace detail {

template <typename Scalar>
void finish_step(OnlineState<Scalar>& s, const OnlineParams& params) {
    const Eigen::Index n = s.size();
    s.B2 = (s.B1 + s.M12).cwiseMin(Mat<Scalar>::Identity(n, n));
    s.B3 = psd_logdet_prox(s.B1 + s.M13, Scalar(params.kappa2 / (params.horizon_T * params.rho)));
    s.M12 += s.B1 - s.B2;
    s.M13 += s.B1 - s.B3;
    ++s.t;
}

template <typename Scalar>
void check_price(const OnlineState<Scalar>& s, const Vec<Scalar>& price) {
    if (price.size() != s.size()) throw DimensionMismatch("price vector length does not match state size");
}

}  // namespace detail

/// One cycle with f(B) = ||B pi||_1.
template <typename Scalar>
void step_l1(OnlineState<Scalar>& s, const Vec<Scalar>& price, const OnlineParams& params) {
    detail::check_price(s, price);
    const Mat<Scalar> anchor = compute_anchor(s, params);
    const Vec<Scalar> scaled = price / Scalar(2 * params.rho + params.eta);
    s.B1 = l1_row_prox(anchor, scaled);
    detail::finish_step(s, params);
}

/// One cycle with f(B) = sum huber_kappa3(B pi).
template <typename Scalar>
void step_huber(OnlineState<Scalar>& s, const Vec<Scalar>& price, const OnlineParams& params) {
    detail::check_price(s, price);
    const Mat<Scalar> anchor = compute_anchor(s, params);
    const HuberParams<Scalar> hp{Scalar(params.kappa3), Scalar(1.0 / (2 * params.rho + params.eta))};
    s.B1 = huber_row_prox(anchor, price, hp);
    detail::finish_step(s, params);
}

template <typename Scalar>
void step(OnlineState<Scalar>& s, const Vec<Scalar>& price, const OnlineParams& params) {
    if (params.loss == OnlineLoss::L1) step_l1(s, price, params);
    else step_huber(s, price, params);
}

/// Per-interval loss f_pi(B).
template <typename Scalar>
Scalar online_loss(const Mat<Scalar>& b, const Vec<Scalar>& price, const OnlineParams& params) {
    const Vec<Scalar> r = b * price;
    if (params.loss == OnlineLoss::L1) return r.cwiseAbs().sum();
    return huber_total(r, Scalar(params.kappa3));
}

/// |B1| entries at the watched (row, col) positions after max-diagonal normalization.
template <typename Scalar>
std::vector<Scalar> snapshot(const OnlineState<Scalar>& s, const std::vector<std::pair<int, int>>& watch) {
    std::vector<Scalar> out;
    out.reserve(watch.size());
    if (watch.empty()) return out;
    const Scalar max_diag = s.B1.diagonal().maxCoeff();
    const Scalar scale = max_diag > Scalar(0) ? max_diag : Scalar(1);
    for (const auto& [i, j] : watch) {
        if (i < 0 || j < 0 || i >= s.size() || j >= s.size()) throw DimensionMismatch("watch entry out of range");
        using std::abs;
        out.push_back(abs(s.B1(i, j)) / scale);
    }
    return out;
}

}  // namespace lmptopo
