#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "lmptopo/batch.hpp"
#include "lmptopo/grid.hpp"
#include "lmptopo/io.hpp"
#include "lmptopo/online.hpp"
#include "lmptopo/scenario.hpp"

namespace lmptopo {

struct RecoveryReport {
    double edge_precision = 0.0;
    double edge_recall = 0.0;
    double edge_f1 = 0.0;
    double frobenius_error = 0.0;  // after max-diagonal normalization of both matrices
    double average_degree = 0.0;
    double true_average_degree = 0.0;
    int true_edges = 0;
    int estimated_edges = 0;
    double runtime = 0.0;
    int degeneracy_count = 0;
    std::vector<double> kappa1_grid, kappa2_grid;
    MatrixXd avg_degree;  // kappa1 rows x kappa2 cols, empty outside sweeps
};

/// Runtime is left out unless asked for, so reports of identical runs compare equal byte for byte.
json report_to_json(const RecoveryReport& report, bool include_runtime = false);

/// Edge precision/recall/F1 of an estimate against a known edge set.
void score_edges(const std::set<std::pair<int, int>>& estimated, const std::set<std::pair<int, int>>& truth,
                 RecoveryReport& report);

/// Support and Frobenius metrics of B_hat against the reduced Laplacian of the topology.
RecoveryReport evaluate(const MatrixXd& b_hat, const GridTopology& truth, double tau);

double true_average_degree(const GridTopology& topology);

struct BatchExperiment {
    GridTopology topology;
    SimulationResult simulation;
    TuningResult<double> tuning;
    SupportEstimate<double> support;
    RecoveryReport report;
};

/// Simulates the configured horizon, sweeps the kappa grid on the price
/// matrix and scores the chosen estimate. A missing target uses the true
/// average degree of the grid.
BatchExperiment run_batch_experiment(const ScenarioConfig& config, const std::vector<double>& kappa1_grid,
                                     const std::vector<double>& kappa2_grid, const RecoveryParams& base,
                                     std::optional<double> target_degree = std::nullopt);

/// Batch recovery on an existing price matrix with fixed kappas.
RecoveryReport recover_and_score(const MatrixXd& pi, const GridTopology& truth, const RecoveryParams& params,
                                 BatchResult<double>* result = nullptr);

struct SwapEvent {
    int interval = 0;  // first interval under the new topology
    std::vector<std::pair<int, int>> lines_out;
    std::vector<std::pair<int, int>> lines_in;  // new lines copy x and fmax of the line they replace
};

struct TrackingSetup {
    ScenarioConfig scenario;
    std::optional<SwapEvent> swap;
    std::vector<std::pair<int, int>> watch;  // full-bus (from, to) pairs
    OnlineParams online;                     // horizon_T, rho, eta reset from the stream when auto_horizon
    bool auto_horizon = true;
    RecoveryParams warm_start;               // batch solve on the warm-start window
    int warm_start_intervals = 288;          // leading intervals of the stream; 0 = cold start
    double threshold = 0.01;
};

struct WatchCrossing {
    std::pair<int, int> line;  // full-bus indices
    bool removed = false;
    bool added = false;
    std::optional<int> first_crossing;  // interval id
    std::optional<int> steps_to_cross;  // retained post-event steps until crossing
    double min_value = 0.0;
    double max_value = 0.0;
};

struct TrackingResult {
    std::vector<int> intervals;  // interval id of each processed step
    MatrixXd trace;              // steps x watched entries
    std::vector<WatchCrossing> watches;
    int post_event_steps = 0;
    int steps = 0;
    int infeasible = 0;
    int uncongested = 0;
    MatrixXd final_B;
    MatrixXd warm_start_B;
    double runtime = 0.0;
};

/// Simulates the stream with the swap applied at its interval, warm-starts
/// the online tracker from a batch solve, then feeds every retained price
/// vector in order and records the watched entries.
TrackingResult run_tracking_experiment(const TrackingSetup& setup);

json tracking_to_json(const TrackingResult& result);

/// Topology after a swap event; each incoming line takes the parameters of
/// the outgoing line at the same position.
GridTopology apply_swap(const GridTopology& topology, const SwapEvent& swap);

struct SyntheticInstance {
    GridTopology topology;
    MatrixXd pi;  // reduced prices, N x T
    std::vector<int> congested;
};

/// Random connected grid with buses in [min_buses, max_buses], a few
/// persistently congested lines with random signed multipliers, and the
/// noiseless prices they induce.
SyntheticInstance synthetic_instance(std::uint64_t seed, int min_buses = 7, int max_buses = 10, int congested = 3,
                                     int horizon = 60);

// Config sections. Missing keys keep the values of the base argument.
RecoveryParams recovery_from_json(const json& j, RecoveryParams base = {});
json recovery_to_json(const RecoveryParams& params);
OnlineParams online_from_json(const json& j, OnlineParams base = {});
SwapEvent swap_from_json(const json& j);
TrackingSetup tracking_from_json(const json& j, const ScenarioConfig& scenario);

}  // namespace lmptopo
