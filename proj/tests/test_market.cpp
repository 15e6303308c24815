#include <doctest.h>

#include <algorithm>
#include <random>

#include "lmptopo/io.hpp"
#include "lmptopo/market.hpp"
#include "oracles.hpp"

using namespace lmptopo;

namespace {

GridMatrices<double> two_bus_grid(double fmax) {
    return build_matrices<double>(GridTopology{2, 0, {{0, 1, 0.5, fmax}}});
}

VectorXd loads2(double at0, double at1) {
    VectorXd l(2);
    l << at0, at1;
    return l;
}

}  // namespace

TEST_SUITE("market") {

TEST_CASE("block expansion") {
    const std::vector<OfferCurve> offers{{0, {{20.0, 20.0}, {5.0, 23.0}}}};
    const MarketInstance inst = expand_blocks(offers, VectorXd::Zero(2));
    REQUIRE(inst.variable_count() == 2);
    CHECK(inst.cost(0) == 20.0);
    CHECK(inst.cost(1) == 23.0);
    CHECK(inst.lower.isZero());
    CHECK(inst.upper(0) == 20.0);
    CHECK(inst.upper(1) == 5.0);
    CHECK(inst.block_to_bus == std::vector<int>{0, 0});

    const MarketInstance single = expand_blocks({{1, {{7.0, 12.0}}}}, VectorXd::Zero(2));
    CHECK(single.variable_count() == 1);
    CHECK(single.block_to_bus[0] == 1);

    CHECK_THROWS_AS(expand_blocks({{0, {{10.0, 30.0}, {10.0, 25.0}}}}, VectorXd::Zero(2)), NonConvexOffer);
    CHECK_THROWS_AS(expand_blocks({{0, {{0.0, 30.0}}}}, VectorXd::Zero(2)), BadConfig);
    CHECK_THROWS_AS(expand_blocks({{4, {{1.0, 30.0}}}}, VectorXd::Zero(2)), BadConfig);
}

TEST_CASE("fixed loads become pinned variables") {
    const MarketInstance inst = expand_blocks({{0, {{100.0, 10.0}}}}, loads2(0.0, 50.0));
    REQUIRE(inst.variable_count() == 2);
    CHECK(inst.lower(1) == -50.0);
    CHECK(inst.upper(1) == -50.0);
    CHECK(inst.block_to_bus[1] == 1);
}

TEST_CASE("bundled offers keep the five-block generator") {
    const auto offers = load_offers(LMPTOPO_DATA_DIR "/ieee30_offers.json");
    REQUIRE(offers.size() == 6);
    const auto it = std::find_if(offers.begin(), offers.end(), [](const OfferCurve& c) { return c.bus == 21; });
    REQUIRE(it != offers.end());
    const MarketInstance inst = expand_blocks({*it}, VectorXd::Zero(30));
    REQUIRE(inst.variable_count() == 5);
    const std::vector<double> prices{16, 27, 41, 54, 66};
    for (int k = 0; k < 5; ++k) CHECK(inst.cost(k) == prices[static_cast<std::size_t>(k)]);
}

TEST_CASE("two-bus uncongested dispatch") {
    const auto grid = two_bus_grid(100.0);
    const MarketInstance inst = expand_blocks({{0, {{100.0, 10.0}}}}, loads2(0.0, 50.0));
    const DispatchOutcome out = clear_market(inst, grid);
    REQUIRE(out.status == DispatchStatus::Uncongested);
    CHECK(out.injections(0) == doctest::Approx(50.0));
    CHECK(out.injections(1) == doctest::Approx(-50.0));
    CHECK(out.lambda0 == doctest::Approx(10.0));
    CHECK(out.mu.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out.lmp(0) == doctest::Approx(10.0));
    CHECK(out.lmp(1) == doctest::Approx(10.0));
    CHECK(out.mcc.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out.congested.empty());
}

TEST_CASE("two-bus congested dispatch") {
    const auto grid = two_bus_grid(30.0);
    const MarketInstance inst =
        expand_blocks({{0, {{100.0, 10.0}}}, {1, {{50.0, 30.0}}}}, loads2(0.0, 50.0));
    const DispatchOutcome out = clear_market(inst, grid);
    REQUIRE(out.status == DispatchStatus::Feasible);
    CHECK(out.injections(0) == doctest::Approx(30.0));
    // Bus 1 nets the 20 MW local unit against its 50 MW load.
    CHECK(out.injections(1) == doctest::Approx(-30.0));
    CHECK(out.flows(0) == doctest::Approx(30.0));
    CHECK(out.congested == std::vector<int>{0});
    CHECK(out.lmp(0) == doctest::Approx(10.0));
    CHECK(out.lmp(1) == doctest::Approx(30.0));
    REQUIRE(out.mcc.size() == 1);
    CHECK(out.mcc(0) == doctest::Approx(20.0));
    // Upper flow limit binds, so mu = mu_lower - mu_upper < 0.
    CHECK(out.mu(0) < 0.0);
    const VectorXd from_mu = grid.reduced_inverse * grid.reduced_incidence.transpose() *
                         grid.susceptance.asDiagonal() * out.mu;
    CHECK((out.mcc - from_mu).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(out.kkt.worst() < 1e-9);
}

TEST_CASE("zero load gives a zero dispatch") {
    const auto grid = two_bus_grid(30.0);
    const MarketInstance inst = expand_blocks({{0, {{100.0, 10.0}}}, {1, {{50.0, 30.0}}}}, VectorXd::Zero(2));
    const DispatchOutcome out = clear_market(inst, grid);
    REQUIRE(out.status == DispatchStatus::Uncongested);
    CHECK(out.injections.isZero());
    CHECK(out.mu.isZero());
}

TEST_CASE("insufficient supply is infeasible") {
    const auto grid = two_bus_grid(30.0);
    const MarketInstance inst = expand_blocks({{0, {{100.0, 10.0}}}}, loads2(0.0, 50.0));
    CHECK(clear_market(inst, grid).status == DispatchStatus::Infeasible);
}

TEST_CASE("loss noise shifts the non-reference prices") {
    const auto grid = two_bus_grid(30.0);
    const MarketInstance inst =
        expand_blocks({{0, {{100.0, 10.0}}}, {1, {{50.0, 30.0}}}}, loads2(0.0, 50.0));
    VectorXd noise(1);
    noise << 0.25;
    const DispatchOutcome out = clear_market(inst, grid, {}, noise);
    CHECK(out.mcc(0) == doctest::Approx(20.25));
    CHECK_THROWS_AS(clear_market(inst, grid, {}, VectorXd::Zero(3)), DimensionMismatch);
}

TEST_CASE("subtract reference") {
    VectorXd lmp(3);
    lmp << 10, 30, 10;
    const VectorXd pi = subtract_reference(lmp);
    REQUIRE(pi.size() == 2);
    CHECK(pi(0) == 20.0);
    CHECK(pi(1) == 0.0);
    CHECK(subtract_reference(VectorXd::Constant(4, 17.5)).isZero());
    CHECK((subtract_reference(VectorXd(lmp.array() + 3.25)) - pi).norm() < 1e-12);
}

TEST_CASE("random markets obey the clearing invariants") {
    std::mt19937_64 rng(99);
    int congested = 0, feasible = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int buses = std::uniform_int_distribution<int>(3, 8)(rng);
        const GridTopology topo = oracle::random_grid(rng, buses, buses / 2, 5.0, 40.0);
        const auto grid = build_matrices<double>(topo);
        auto [offers, loads] = oracle::random_market(rng, buses, buses, 3);
        const MarketInstance inst = expand_blocks(offers, loads);
        const DispatchOutcome out = clear_market(inst, grid);
        if (out.status == DispatchStatus::Infeasible) continue;
        ++feasible;
        if (out.status == DispatchStatus::Feasible) ++congested;
        CAPTURE(trial);
        // Balance and flow limits.
        CHECK(std::abs(out.injections.sum()) < 1e-7);
        CHECK((out.flows.cwiseAbs() - grid.flow_limits).maxCoeff() <= 1e-7);
        // Complementary slackness per line.
        for (int l = 0; l < grid.line_count(); ++l)
            CHECK(std::abs(out.mu(l)) * (grid.flow_limits(l) - std::abs(out.flows(l))) <= 1e-6);
        // Price decomposition into congestion components.
        const VectorXd from_mu = grid.reduced_inverse * grid.reduced_incidence.transpose() *
                             grid.susceptance.asDiagonal() * out.mu;
        CHECK((out.mcc - from_mu).cwiseAbs().maxCoeff() <= 1e-6);
        // Each block sits at a bound whenever its profit at the local price is nonzero.
        const LpSolution sol = solve_lp_with_duals(dispatch_lp(inst, grid));
        for (int j = 0; j < inst.variable_count(); ++j) {
            const double profit = out.lmp(inst.block_to_bus[static_cast<std::size_t>(j)]) - inst.cost(j);
            if (profit > 1e-6) CHECK(sol.x(j) == doctest::Approx(inst.upper(j)));
            if (profit < -1e-6) CHECK(sol.x(j) == doctest::Approx(inst.lower(j)));
        }
        CHECK(out.kkt.worst() <= 1e-6);
        CHECK(std::abs(out.kkt.duality_gap) <= 1e-7 * (1.0 + std::abs(out.objective)));
        // Congestion set definition.
        for (int l : out.congested) CHECK(std::abs(out.flows(l)) >= grid.flow_limits(l) - 1e-6);
    }
    CHECK(feasible > 50);
    CHECK(congested > 10);
}

TEST_CASE("tiny dispatch LPs match vertex enumeration") {
    std::mt19937_64 rng(4);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const GridTopology topo = oracle::random_grid(rng, 3, 0, 5.0, 30.0);
        const auto grid = build_matrices<double>(topo);
        auto [offers, loads] = oracle::random_market(rng, 3, 2, 1);
        const MarketInstance inst = expand_blocks(offers, loads);
        if (inst.variable_count() > 6) continue;
        const BoundedLp lp = dispatch_lp(inst, grid);
        const auto ref = oracle::vertex_enumeration(lp);
        const LpSolution sol = solve_lp_with_duals(lp);
        CAPTURE(trial);
        if (!ref) {
            CHECK(sol.status == LpStatus::Infeasible);
            continue;
        }
        REQUIRE(sol.status == LpStatus::Optimal);
        CHECK(std::abs(sol.objective - *ref) <= 1e-8 * (1.0 + std::abs(*ref)));
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("price matrix assembly") {
    auto outcome = [](int id, DispatchStatus s, double v) {
        DispatchOutcome o;
        o.interval = id;
        o.status = s;
        o.mcc = VectorXd::Constant(2, v);
        return o;
    };
    const std::vector<DispatchOutcome> outs{outcome(0, DispatchStatus::Feasible, 1.0),
                                            outcome(1, DispatchStatus::Uncongested, 0.0),
                                            outcome(2, DispatchStatus::Infeasible, 0.0),
                                            outcome(3, DispatchStatus::Feasible, 2.0)};
    const PriceMatrix pm = assemble_price_matrix(outs);
    CHECK(pm.horizon() == 2);
    CHECK(pm.interval_ids == std::vector<int>{0, 3});
    CHECK(pm.values(1, 1) == 2.0);

    const PriceMatrix kept = assemble_price_matrix(outs, RetentionPolicy{true});
    CHECK(kept.horizon() == 3);
    CHECK(kept.interval_ids == std::vector<int>{0, 1, 3});
    CHECK(kept.values.col(1).isZero());

    const std::vector<DispatchOutcome> flat{outcome(0, DispatchStatus::Uncongested, 0.0)};
    CHECK_THROWS_AS(assemble_price_matrix(flat), EmptyHorizon);
    CHECK_THROWS_AS(assemble_price_matrix({}), EmptyHorizon);
}

}
