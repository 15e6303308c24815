#include "lmptopo/market.hpp"

#include <cmath>

#include "lmptopo/errors.hpp"

namespace lmptopo {

std::string to_string(DispatchStatus status) {
    switch (status) {
        case DispatchStatus::Feasible: return "feasible";
        case DispatchStatus::Uncongested: return "uncongested";
        case DispatchStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

MarketInstance expand_blocks(const std::vector<OfferCurve>& offers, const VectorXd& bus_loads) {
    std::vector<double> cost, lower, upper;
    std::vector<int> bus;
    for (const auto& offer : offers) {
        if (offer.bus < 0 || offer.bus >= bus_loads.size()) throw BadConfig("offer bus out of range");
        for (std::size_t k = 0; k < offer.blocks.size(); ++k) {
            const OfferBlock& block = offer.blocks[k];
            if (!(block.quantity > 0.0)) throw BadConfig("offer block quantities must be positive");
            if (k > 0 && block.price < offer.blocks[k - 1].price)
                throw NonConvexOffer("offer at bus " + std::to_string(offer.bus) + " has decreasing block prices");
            cost.push_back(block.price);
            lower.push_back(0.0);
            upper.push_back(block.quantity);
            bus.push_back(offer.bus);
        }
    }
    for (Eigen::Index b = 0; b < bus_loads.size(); ++b) {
        if (bus_loads(b) == 0.0) continue;
        cost.push_back(0.0);
        lower.push_back(-bus_loads(b));
        upper.push_back(-bus_loads(b));
        bus.push_back(static_cast<int>(b));
    }
    MarketInstance inst;
    inst.cost = Eigen::Map<VectorXd>(cost.data(), static_cast<Eigen::Index>(cost.size()));
    inst.lower = Eigen::Map<VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    inst.upper = Eigen::Map<VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size()));
    inst.block_to_bus = std::move(bus);
    return inst;
}

namespace {

MatrixXd aggregation(const MarketInstance& instance, int bus_count) {
    MatrixXd agg = MatrixXd::Zero(bus_count, instance.variable_count());
    for (int j = 0; j < instance.variable_count(); ++j) agg(instance.block_to_bus[j], j) = 1.0;
    return agg;
}

}  // namespace

BoundedLp dispatch_lp(const MarketInstance& instance, const GridMatrices<double>& grid) {
    const int L = grid.line_count();
    const int nv = instance.variable_count();
    const MatrixXd agg = aggregation(instance, grid.bus_count());
    BoundedLp lp;
    lp.cost = instance.cost;
    lp.lower = instance.lower;
    lp.upper = instance.upper;
    lp.rows.resize(1 + L, nv);
    lp.rows.row(0).setOnes();
    lp.rows.bottomRows(L) = grid.shift_factors * agg;
    lp.row_lower.resize(1 + L);
    lp.row_upper.resize(1 + L);
    lp.row_lower(0) = 0.0;
    lp.row_upper(0) = 0.0;
    lp.row_lower.tail(L) = -grid.flow_limits;
    lp.row_upper.tail(L) = grid.flow_limits;
    return lp;
}

DispatchOutcome clear_market(const MarketInstance& instance, const GridMatrices<double>& grid,
                             const ClearingOptions& options, const std::optional<VectorXd>& loss_noise) {
    const int L = grid.line_count();
    const int n_full = grid.bus_count();
    const BoundedLp lp = dispatch_lp(instance, grid);
    const LpSolution sol = solve_lp_with_duals(lp, options.simplex);

    DispatchOutcome out;
    if (sol.status != LpStatus::Optimal) {
        out.status = DispatchStatus::Infeasible;
        return out;
    }
    out.injections = aggregation(instance, n_full) * sol.x;
    out.lambda0 = sol.row_duals(0);
    out.mu = sol.row_duals.tail(L);
    out.flows = grid.shift_factors * out.injections;
    out.objective = sol.objective;
    out.degenerate = sol.degenerate;
    out.kkt = kkt_report(lp, sol.x, sol.row_duals);

    out.lmp = VectorXd::Constant(n_full, out.lambda0) + grid.shift_factors.transpose() * out.mu;
    out.loss_noise = VectorXd::Zero(n_full - 1);
    if (loss_noise) {
        if (loss_noise->size() != n_full - 1) throw DimensionMismatch("loss noise must have length N");
        out.loss_noise = *loss_noise;
        out.lmp.tail(n_full - 1) += *loss_noise;
    }
    out.mcc = subtract_reference(out.lmp);

    for (int l = 0; l < L; ++l)
        if (std::abs(out.flows(l)) >= grid.flow_limits(l) - options.congestion_tol) out.congested.push_back(l);
    out.status = out.congested.empty() ? DispatchStatus::Uncongested : DispatchStatus::Feasible;
    return out;
}

VectorXd subtract_reference(const VectorXd& lmp) {
    if (lmp.size() == 0) return lmp;
    return lmp.tail(lmp.size() - 1).array() - lmp(0);
}

PriceMatrix assemble_price_matrix(const std::vector<DispatchOutcome>& outcomes, const RetentionPolicy& policy) {
    std::vector<const DispatchOutcome*> kept;
    for (const auto& o : outcomes) {
        if (o.status == DispatchStatus::Infeasible) continue;
        if (o.status == DispatchStatus::Uncongested && !policy.keep_uncongested) continue;
        kept.push_back(&o);
    }
    if (kept.empty()) throw EmptyHorizon("no intervals retained for the price matrix");
    const Eigen::Index n = kept.front()->mcc.size();
    PriceMatrix pm;
    pm.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t t = 0; t < kept.size(); ++t) {
        if (kept[t]->mcc.size() != n) throw DimensionMismatch("outcomes do not share one topology");
        pm.values.col(static_cast<Eigen::Index>(t)) = kept[t]->mcc;
        pm.interval_ids.push_back(kept[t]->interval);
    }
    return pm;
}

}  // namespace lmptopo
