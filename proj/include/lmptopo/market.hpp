#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmptopo/grid.hpp"
#include "lmptopo/simplex.hpp"
#include "lmptopo/types.hpp"

namespace lmptopo {

struct OfferBlock {
    double quantity = 0.0;  // MWh
    double price = 0.0;     // $/MWh
};

/// Convex piecewise-linear offer: block prices must be nondecreasing.
struct OfferCurve {
    int bus = 0;
    std::vector<OfferBlock> blocks;
};

/// One LP variable per offer block or fixed load.
struct MarketInstance {
    VectorXd cost;
    VectorXd lower;
    VectorXd upper;
    std::vector<int> block_to_bus;

    int variable_count() const { return static_cast<int>(cost.size()); }
};

/// Incremental block form: block k gets 0 <= p^k <= quantity_k at its own price.
/// Each nonzero entry of bus_loads (MW demand, length N+1) becomes a variable
/// fixed at -load. Throws NonConvexOffer when block prices decrease.
MarketInstance expand_blocks(const std::vector<OfferCurve>& offers, const VectorXd& bus_loads);

enum class DispatchStatus { Feasible, Uncongested, Infeasible };

std::string to_string(DispatchStatus status);

struct DispatchOutcome {
    int interval = 0;
    DispatchStatus status = DispatchStatus::Infeasible;
    VectorXd injections;  // per bus, N+1
    double lambda0 = 0.0;
    VectorXd mu;          // per line; mu_lower - mu_upper
    VectorXd flows;       // per line
    VectorXd lmp;         // per bus, N+1
    VectorXd mcc;         // per non-reference bus, N
    VectorXd loss_noise;  // per non-reference bus, N; the additive n_t
    std::vector<int> congested;
    double objective = 0.0;
    bool degenerate = false;
    KktReport kkt;
};

struct ClearingOptions {
    double congestion_tol = 1e-6;
    SimplexOptions simplex;
};

/// The dispatch LP: min c'x over block variables with the bus-aggregated
/// balance row first and one flow row per line after it.
BoundedLp dispatch_lp(const MarketInstance& instance, const GridMatrices<double>& grid);

/// Solves the dispatch and assembles LMP and MCC vectors. When loss_noise is
/// given (length N) it is added to the non-reference LMPs.
DispatchOutcome clear_market(const MarketInstance& instance, const GridMatrices<double>& grid,
                             const ClearingOptions& options = {},
                             const std::optional<VectorXd>& loss_noise = std::nullopt);

/// Drops the first entry after subtracting it from all others.
VectorXd subtract_reference(const VectorXd& lmp);

struct PriceMatrix {
    MatrixXd values;  // N x T
    std::vector<int> interval_ids;

    int horizon() const { return static_cast<int>(values.cols()); }
};

struct RetentionPolicy {
    bool keep_uncongested = false;
};

/// Stacks retained MCC vectors as columns. Throws EmptyHorizon when nothing survives.
PriceMatrix assemble_price_matrix(const std::vector<DispatchOutcome>& outcomes, const RetentionPolicy& policy = {});

}  // namespace lmptopo
