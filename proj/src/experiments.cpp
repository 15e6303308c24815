#include "lmptopo/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "lmptopo/errors.hpp"

namespace lmptopo {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json matrix_rows(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

std::pair<int, int> reduced_pair(const GridTopology& topology, std::pair<int, int> line) {
    const int i = reduced_index(topology, line.first);
    const int j = reduced_index(topology, line.second);
    if (line.first < 0 || line.second < 0 || line.first >= topology.bus_count || line.second >= topology.bus_count)
        throw BadConfig("watched line references a bus outside the grid");
    if (i < 0 || j < 0) throw BadConfig("watched line touches the reference bus, which has no reduced entry");
    return {i, j};
}

bool same_line(const Line& l, std::pair<int, int> p) {
    return (l.from == p.first && l.to == p.second) || (l.from == p.second && l.to == p.first);
}

}  // namespace

json report_to_json(const RecoveryReport& r, bool include_runtime) {
    json j = {{"edge_precision", r.edge_precision},
              {"edge_recall", r.edge_recall},
              {"edge_f1", r.edge_f1},
              {"frobenius_error", r.frobenius_error},
              {"average_degree", r.average_degree},
              {"true_average_degree", r.true_average_degree},
              {"true_edges", r.true_edges},
              {"estimated_edges", r.estimated_edges},
              {"degeneracy_count", r.degeneracy_count}};
    if (include_runtime) j["runtime"] = r.runtime;
    if (r.avg_degree.size() > 0) {
        j["kappa1_grid"] = r.kappa1_grid;
        j["kappa2_grid"] = r.kappa2_grid;
        j["avg_degree"] = matrix_rows(r.avg_degree);
    }
    return j;
}

void score_edges(const std::set<std::pair<int, int>>& estimated, const std::set<std::pair<int, int>>& truth,
                 RecoveryReport& report) {
    int hits = 0;
    for (const auto& e : estimated) hits += truth.count(e) ? 1 : 0;
    report.true_edges = static_cast<int>(truth.size());
    report.estimated_edges = static_cast<int>(estimated.size());
    if (estimated.empty() && truth.empty()) {
        report.edge_precision = report.edge_recall = report.edge_f1 = 1.0;
        return;
    }
    report.edge_precision = estimated.empty() ? 0.0 : double(hits) / double(estimated.size());
    report.edge_recall = truth.empty() ? 0.0 : double(hits) / double(truth.size());
    const double sum = report.edge_precision + report.edge_recall;
    report.edge_f1 = sum > 0.0 ? 2.0 * report.edge_precision * report.edge_recall / sum : 0.0;
}

double true_average_degree(const GridTopology& topology) {
    const int n = topology.reduced_size();
    if (n <= 0) return 0.0;
    return 2.0 * static_cast<double>(reduced_edge_set(topology).size()) / n;
}

RecoveryReport evaluate(const MatrixXd& b_hat, const GridTopology& truth, double tau) {
    const auto start = std::chrono::steady_clock::now();
    const int n = truth.reduced_size();
    if (b_hat.rows() != n || b_hat.cols() != n)
        throw DimensionMismatch("estimate is " + std::to_string(b_hat.rows()) + "x" + std::to_string(b_hat.cols()) +
                                ", grid needs " + std::to_string(n) + "x" + std::to_string(n));
    RecoveryReport report;
    const MatrixXd sym = (b_hat + b_hat.transpose()) / 2.0;
    const auto support = normalize_and_threshold(sym, tau);
    score_edges(support.edges, reduced_edge_set(truth), report);
    report.average_degree = support.average_degree;
    report.true_average_degree = true_average_degree(truth);

    const auto g = build_matrices<double>(truth);
    const MatrixXd b_true = g.reduced_laplacian / g.reduced_laplacian.diagonal().maxCoeff();
    const MatrixXd b_est = sym / sym.diagonal().maxCoeff();
    report.frobenius_error = (b_est - b_true).norm() / b_true.norm();
    report.runtime = seconds_since(start);
    return report;
}

RecoveryReport recover_and_score(const MatrixXd& pi, const GridTopology& truth, const RecoveryParams& params,
                                 BatchResult<double>* result) {
    const auto start = std::chrono::steady_clock::now();
    BatchResult<double> r = run_batch<double>(pi, params);
    RecoveryReport report = evaluate(r.B_hat, truth, params.threshold_tau);
    report.runtime = seconds_since(start);
    if (result) *result = std::move(r);
    return report;
}

BatchExperiment run_batch_experiment(const ScenarioConfig& config, const std::vector<double>& kappa1_grid,
                                     const std::vector<double>& kappa2_grid, const RecoveryParams& base,
                                     std::optional<double> target_degree) {
    const auto start = std::chrono::steady_clock::now();
    if (kappa1_grid.empty() || kappa2_grid.empty()) throw BadConfig("kappa grid is empty");
    BatchExperiment out;
    out.topology = load_grid(config.grid_file);
    const auto offers = load_offers(config.offers_file);
    const VectorXd demand = load_demand(config.demand_file, out.topology.bus_count);
    const ScenarioData data = generate_horizon(config, offers, demand);
    out.simulation = simulate(data, out.topology, config);

    const double target = target_degree.value_or(true_average_degree(out.topology));
    out.tuning = tune_kappas<double>(out.simulation.prices.values, kappa1_grid, kappa2_grid, target, base,
                                     config.workers);
    out.support = normalize_and_threshold(out.tuning.best.B_hat, base.threshold_tau);
    out.report = evaluate(out.tuning.best.B_hat, out.topology, base.threshold_tau);
    out.report.kappa1_grid = kappa1_grid;
    out.report.kappa2_grid = kappa2_grid;
    out.report.avg_degree = out.tuning.degree_table;
    out.report.degeneracy_count = out.simulation.degenerate;
    out.report.runtime = seconds_since(start);
    return out;
}

GridTopology apply_swap(const GridTopology& topology, const SwapEvent& swap) {
    if (swap.lines_out.size() != swap.lines_in.size())
        throw BadConfig("swap needs one incoming line per outgoing line");
    std::vector<Line> incoming;
    for (std::size_t k = 0; k < swap.lines_out.size(); ++k) {
        const auto it = std::find_if(topology.lines.begin(), topology.lines.end(),
                                     [&](const Line& l) { return same_line(l, swap.lines_out[k]); });
        if (it == topology.lines.end()) throw InvalidTopology("swap removes a line that is not in the grid");
        Line line = *it;
        line.from = swap.lines_in[k].first;
        line.to = swap.lines_in[k].second;
        incoming.push_back(line);
    }
    return swap_lines(topology, swap.lines_out, incoming);
}

TrackingResult run_tracking_experiment(const TrackingSetup& setup) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig& config = setup.scenario;
    const GridTopology topology = load_grid(config.grid_file);
    const auto offers = load_offers(config.offers_file);
    const VectorXd demand = load_demand(config.demand_file, topology.bus_count);
    const ScenarioData data = generate_horizon(config, offers, demand);
    const int count = data.interval_count();

    std::vector<GridMatrices<double>> grids{build_matrices<double>(scaled_topology(topology, config))};
    std::vector<int> grid_for_interval(static_cast<std::size_t>(count), 0);
    if (setup.swap) {
        if (setup.swap->interval < data.first_interval || setup.swap->interval >= data.first_interval + count)
            throw BadConfig("swap interval is outside the simulated horizon");
        grids.push_back(build_matrices<double>(scaled_topology(apply_swap(topology, *setup.swap), config)));
        for (int k = setup.swap->interval - data.first_interval; k < count; ++k) grid_for_interval[k] = 1;
    }
    const SimulationResult sim = simulate(data, grids, grid_for_interval, config);
    const PriceMatrix& prices = sim.prices;
    if (prices.horizon() == 0) throw EmptyHorizon("no retained intervals in the tracking stream");

    TrackingResult out;
    out.infeasible = sim.infeasible;
    out.uncongested = sim.uncongested;

    std::vector<std::pair<int, int>> watch_reduced;
    for (const auto& w : setup.watch) watch_reduced.push_back(reduced_pair(topology, w));

    const int event = setup.swap ? setup.swap->interval : std::numeric_limits<int>::max();
    const Eigen::Index n = prices.values.rows();
    std::optional<MatrixXd> warm;
    if (setup.warm_start_intervals > 0) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index k = 0; k < prices.horizon(); ++k) {
            const int id = prices.interval_ids[static_cast<std::size_t>(k)];
            if (id < data.first_interval + setup.warm_start_intervals && id < event) cols.push_back(k);
        }
        if (!cols.empty()) {
            MatrixXd window(n, static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c) window.col(static_cast<Eigen::Index>(c)) = prices.values.col(cols[c]);
            warm = run_batch<double>(window, setup.warm_start).B_hat;
        }
    }
    out.warm_start_B = warm ? *warm : MatrixXd::Identity(n, n);

    OnlineParams params = setup.online;
    if (setup.auto_horizon) {
        params.horizon_T = static_cast<double>(prices.horizon());
        params.rho = params.eta = std::sqrt(params.horizon_T);
    }
    params.validate();

    OnlineState<double> state = init_online<double>(n, warm);
    std::vector<std::vector<double>> rows;
    for (Eigen::Index k = 0; k < prices.horizon(); ++k) {
        const VectorXd price = prices.values.col(k);
        if (params.skip_uncongested && price.isZero(0.0)) continue;
        step(state, price, params);
        rows.push_back(snapshot(state, watch_reduced));
        out.intervals.push_back(prices.interval_ids[static_cast<std::size_t>(k)]);
        if (out.intervals.back() >= event) ++out.post_event_steps;
    }
    const auto steps = static_cast<Eigen::Index>(rows.size());
    out.trace.resize(steps, static_cast<Eigen::Index>(watch_reduced.size()));
    for (Eigen::Index k = 0; k < steps; ++k)
        for (std::size_t w = 0; w < watch_reduced.size(); ++w)
            out.trace(k, static_cast<Eigen::Index>(w)) = rows[static_cast<std::size_t>(k)][w];
    out.steps = static_cast<int>(steps);
    out.final_B = (state.B1 + state.B1.transpose()) / 2.0;

    for (std::size_t w = 0; w < setup.watch.size(); ++w) {
        WatchCrossing c;
        c.line = setup.watch[w];
        if (setup.swap) {
            for (const auto& l : setup.swap->lines_out)
                c.removed |= (l == c.line || l == std::make_pair(c.line.second, c.line.first));
            for (const auto& l : setup.swap->lines_in)
                c.added |= (l == c.line || l == std::make_pair(c.line.second, c.line.first));
        }
        const auto col = out.trace.col(static_cast<Eigen::Index>(w));
        c.min_value = steps > 0 ? col.minCoeff() : 0.0;
        c.max_value = steps > 0 ? col.maxCoeff() : 0.0;
        if (c.removed || c.added) {
            // First post-event step from which the entry stays on the new side of the threshold.
            auto on_new_side = [&](Eigen::Index k) { return c.removed ? col(k) < setup.threshold : col(k) > setup.threshold; };
            std::optional<Eigen::Index> settled;
            for (Eigen::Index k = steps - 1; k >= 0 && out.intervals[static_cast<std::size_t>(k)] >= event; --k) {
                if (!on_new_side(k)) break;
                settled = k;
            }
            if (settled) {
                c.first_crossing = out.intervals[static_cast<std::size_t>(*settled)];
                c.steps_to_cross = static_cast<int>(*settled - (steps - out.post_event_steps)) + 1;
            }
        }
        out.watches.push_back(c);
    }
    out.runtime = seconds_since(start);
    return out;
}

json tracking_to_json(const TrackingResult& r) {
    json watches = json::array();
    for (const auto& w : r.watches) {
        json j = {{"line", {w.line.first, w.line.second}},
                  {"removed", w.removed},
                  {"added", w.added},
                  {"min_value", w.min_value},
                  {"max_value", w.max_value}};
        j["first_crossing"] = w.first_crossing ? json(*w.first_crossing) : json(nullptr);
        j["steps_to_cross"] = w.steps_to_cross ? json(*w.steps_to_cross) : json(nullptr);
        watches.push_back(j);
    }
    return {{"steps", r.steps},
            {"post_event_steps", r.post_event_steps},
            {"infeasible", r.infeasible},
            {"uncongested", r.uncongested},
            {"runtime", r.runtime},
            {"watches", watches}};
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw BadConfig(std::string("bad value for '") + key + "': " + e.what());
    }
}

std::pair<int, int> pair_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw BadConfig("a line must be written as [from, to]");
    return {j[0].get<int>(), j[1].get<int>()};
}

std::vector<std::pair<int, int>> pairs_from_json(const json& j, const char* key) {
    std::vector<std::pair<int, int>> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw BadConfig(std::string("'") + key + "' must be a list of [from, to] pairs");
    for (const auto& p : j.at(key)) out.push_back(pair_from_json(p));
    return out;
}

}  // namespace

RecoveryParams recovery_from_json(const json& j, RecoveryParams p) {
    if (!j.is_object()) throw BadConfig("recovery section must be an object");
    p.kappa1 = get_or(j, "kappa1", p.kappa1);
    p.kappa2 = get_or(j, "kappa2", p.kappa2);
    p.rho = get_or(j, "rho", p.rho);
    p.max_iters = get_or(j, "max_iters", p.max_iters);
    p.dual_tol = get_or(j, "dual_tol", p.dual_tol);
    p.threshold_tau = get_or(j, "threshold_tau", p.threshold_tau);
    if (j.contains("primal_tol") && !j.at("primal_tol").is_null()) p.primal_tol = get_or(j, "primal_tol", 0.0);
    if (j.contains("target_degree") && !j.at("target_degree").is_null())
        p.target_degree = get_or(j, "target_degree", 0.0);
    p.validate();
    return p;
}

json recovery_to_json(const RecoveryParams& p) {
    json j = {{"kappa1", p.kappa1},     {"kappa2", p.kappa2},   {"rho", p.rho},
              {"max_iters", p.max_iters}, {"dual_tol", p.dual_tol}, {"threshold_tau", p.threshold_tau}};
    j["primal_tol"] = p.primal_tol ? json(*p.primal_tol) : json(nullptr);
    j["target_degree"] = p.target_degree ? json(*p.target_degree) : json(nullptr);
    return j;
}

OnlineParams online_from_json(const json& j, OnlineParams p) {
    if (!j.is_object()) throw BadConfig("online section must be an object");
    p.kappa1 = get_or(j, "kappa1", p.kappa1);
    p.kappa2 = get_or(j, "kappa2", p.kappa2);
    p.kappa3 = get_or(j, "kappa3", p.kappa3);
    p.rho = get_or(j, "rho", p.rho);
    p.eta = get_or(j, "eta", p.eta);
    p.horizon_T = get_or(j, "horizon_T", p.horizon_T);
    p.skip_uncongested = get_or(j, "skip_uncongested", p.skip_uncongested);
    p.anchor_kappa1_factor = get_or(j, "anchor_kappa1_factor", p.anchor_kappa1_factor);
    const std::string loss = get_or<std::string>(j, "loss", to_string(p.loss));
    if (loss == "l1") p.loss = OnlineLoss::L1;
    else if (loss == "huber") p.loss = OnlineLoss::Huber;
    else throw BadConfig("loss must be 'l1' or 'huber'");
    p.validate();
    return p;
}

SwapEvent swap_from_json(const json& j) {
    if (!j.is_object()) throw BadConfig("swap section must be an object");
    SwapEvent s;
    s.interval = get_or(j, "interval", -1);
    if (s.interval < 0) throw BadConfig("swap needs a nonnegative 'interval'");
    s.lines_out = pairs_from_json(j, "lines_out");
    s.lines_in = pairs_from_json(j, "lines_in");
    if (s.lines_out.size() != s.lines_in.size()) throw BadConfig("swap needs one incoming line per outgoing line");
    return s;
}

TrackingSetup tracking_from_json(const json& j, const ScenarioConfig& scenario) {
    if (!j.is_object()) throw BadConfig("tracking section must be an object");
    TrackingSetup t;
    t.scenario = scenario;
    if (j.contains("swap") && !j.at("swap").is_null()) t.swap = swap_from_json(j.at("swap"));
    t.watch = pairs_from_json(j, "watch");
    if (j.contains("online")) t.online = online_from_json(j.at("online"));
    t.auto_horizon = get_or(j, "auto_horizon", t.auto_horizon);
    if (j.contains("warm_start")) t.warm_start = recovery_from_json(j.at("warm_start"));
    t.warm_start_intervals = get_or(j, "warm_start_intervals", t.warm_start_intervals);
    t.threshold = get_or(j, "threshold", t.threshold);
    if (t.warm_start_intervals < 0) throw BadConfig("warm_start_intervals must be nonnegative");
    return t;
}

SyntheticInstance synthetic_instance(std::uint64_t seed, int min_buses, int max_buses, int congested, int horizon) {
    if (min_buses < 2 || max_buses < min_buses) throw BadConfig("bus range must satisfy 2 <= min <= max");
    if (congested < 1 || horizon < 1) throw BadConfig("need at least one congested line and one interval");
    auto rng = stream_rng(seed, kSyntheticStream, 0);
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1)); };

    SyntheticInstance inst;
    GridTopology& g = inst.topology;
    g.bus_count = pick(min_buses, max_buses);
    g.reference_bus = 0;
    std::set<std::pair<int, int>> edges;
    for (int b = 1; b < g.bus_count; ++b) edges.insert({pick(0, b - 1), b});
    int extra = g.bus_count / 2;
    const int possible = g.bus_count * (g.bus_count - 1) / 2;
    extra = std::min(extra, possible - static_cast<int>(edges.size()));
    while (extra > 0) {
        const int a = pick(0, g.bus_count - 1);
        const int b = pick(0, g.bus_count - 1);
        if (a != b && edges.insert({std::min(a, b), std::max(a, b)}).second) --extra;
    }
    for (const auto& [a, b] : edges) g.lines.push_back({a, b, uniform(rng, 0.05, 0.5), 100.0});
    validate(g);

    const int lines = static_cast<int>(g.lines.size());
    congested = std::min(congested, lines);
    while (static_cast<int>(inst.congested.size()) < congested) {
        const int l = pick(0, lines - 1);
        if (std::find(inst.congested.begin(), inst.congested.end(), l) == inst.congested.end())
            inst.congested.push_back(l);
    }
    std::sort(inst.congested.begin(), inst.congested.end());

    const auto m = build_matrices<double>(g);
    const MatrixXd map = m.reduced_inverse * m.reduced_incidence.transpose() * m.susceptance.asDiagonal();
    inst.pi.resize(g.reduced_size(), horizon);
    for (int t = 0; t < horizon; ++t) {
        VectorXd mu = VectorXd::Zero(lines);
        for (int l : inst.congested) mu(l) = uniform(rng, 1.0, 21.0) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
        inst.pi.col(t) = map * mu;
    }
    return inst;
}

}  // namespace lmptopo
