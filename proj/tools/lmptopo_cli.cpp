// Command-line front end: simulate, recover-batch, sweep, track, eval.
// Every run writes into its own directory together with a manifest.json.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmptopo/batch.hpp"
#include "lmptopo/errors.hpp"
#include "lmptopo/experiments.hpp"
#include "lmptopo/io.hpp"
#include "lmptopo/online.hpp"
#include "lmptopo/scenario.hpp"

namespace fs = std::filesystem;
using namespace lmptopo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

struct CommonOptions {
    std::string config;
    std::string run_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> days;
    std::optional<unsigned> workers;
};

struct RunConfig {
    fs::path path;
    json raw;
    ScenarioConfig scenario;
    RecoveryParams recovery;
};

json section(const json& raw, const char* key) {
    if (!raw.contains(key) || raw.at(key).is_null()) return json::object();
    return raw.at(key);
}

RunConfig load_run_config(const CommonOptions& opt) {
    RunConfig rc;
    rc.path = opt.config;
    rc.raw = read_json(rc.path);
    if (!rc.raw.is_object() || !rc.raw.contains("scenario")) throw BadConfig("config needs a 'scenario' section");
    json scenario = rc.raw.at("scenario");
    if (opt.seed) scenario["seed"] = *opt.seed;
    if (opt.days) scenario["days"] = *opt.days;
    if (opt.workers) scenario["workers"] = *opt.workers;
    rc.scenario = scenario_from_json(scenario, rc.path.parent_path());
    rc.recovery = recovery_from_json(section(rc.raw, "recovery"));
    return rc;
}

class Run {
public:
    Run(std::string command, const CommonOptions& opt)
        : command_(std::move(command)), dir_(opt.run_dir.empty() ? fs::path("runs") / command_ : fs::path(opt.run_dir)),
          start_(std::chrono::steady_clock::now()) {
        fs::create_directories(dir_);
        manifest_ = {{"command", command_}, {"config", opt.config}, {"outputs", json::array()}};
    }

    fs::path file(const std::string& name) {
        manifest_["outputs"].push_back(name);
        return dir_ / name;
    }

    void set(const std::string& key, json value) { manifest_[key] = std::move(value); }

    void finish() {
        manifest_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_json(dir_ / "manifest.json", manifest_);
        std::cout << "wrote " << (dir_ / "manifest.json").string() << '\n';
    }

private:
    std::string command_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    json manifest_;
};

void write_dispatch_log(const fs::path& path, const std::vector<DispatchOutcome>& log) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    for (const auto& o : log) out << outcome_to_json(o).dump() << '\n';
}

json simulation_summary(const SimulationResult& sim, const GridTopology& topology) {
    json lines = json::array();
    for (int l : sim.congested_lines) lines.push_back({topology.lines[l].from, topology.lines[l].to});
    return {{"intervals", sim.log.size()},   {"retained", sim.prices.horizon()},
            {"infeasible", sim.infeasible},  {"uncongested", sim.uncongested},
            {"degenerate", sim.degenerate},  {"congested_lines", lines}};
}

struct Simulated {
    GridTopology topology;
    SimulationResult sim;
    MatrixXd loads;
};

Simulated simulate_scenario(const ScenarioConfig& config) {
    Simulated s;
    s.topology = load_grid(config.grid_file);
    const auto offers = load_offers(config.offers_file);
    const VectorXd demand = load_demand(config.demand_file, s.topology.bus_count);
    const ScenarioData data = generate_horizon(config, offers, demand);
    s.loads = data.loads;
    s.sim = simulate(data, s.topology, config);
    return s;
}

json edges_json(const SupportEstimate<double>& support, const GridTopology* topology) {
    json edges = json::array();
    for (const auto& [i, j] : support.edges) {
        json e = {{"row", i}, {"col", j}, {"weight", support.normalized(i, j)}};
        if (topology) e["buses"] = {full_index(*topology, i), full_index(*topology, j)};
        edges.push_back(e);
    }
    return {{"average_degree", support.average_degree}, {"edges", edges}};
}

json diagnostics_json(const BatchResult<double>& r) {
    json primal = json::array();
    for (const auto& res : r.state.residuals) primal.push_back({res[0], res[1], res[2]});
    return {{"iterations", r.iterations},       {"converged", r.converged},
            {"primal_tol", r.primal_tol},        {"wall_seconds", r.wall_seconds},
            {"primal_residuals", primal},        {"dual_change", r.state.dual_residuals}};
}

void write_degree_table(const fs::path& path, const RecoveryReport& report) {
    std::vector<std::string> header{"kappa1"};
    for (double k2 : report.kappa2_grid) header.push_back("kappa2=" + format_double(k2));
    MatrixXd table(report.avg_degree.rows(), report.avg_degree.cols() + 1);
    for (Eigen::Index i = 0; i < table.rows(); ++i) table(i, 0) = report.kappa1_grid[static_cast<std::size_t>(i)];
    table.rightCols(report.avg_degree.cols()) = report.avg_degree;
    write_matrix_csv(path, table, header);
}

int cmd_simulate(const CommonOptions& opt, std::optional<double> flow_scale, bool keep_uncongested) {
    RunConfig rc = load_run_config(opt);
    if (flow_scale) rc.scenario.flow_limit_scale = *flow_scale;
    if (keep_uncongested) rc.scenario.keep_uncongested = true;
    rc.scenario.validate();
    Run run("simulate", opt);
    const Simulated s = simulate_scenario(rc.scenario);
    write_price_matrix(run.file("prices.csv"), s.sim.prices);
    write_loads(run.file("loads.csv"), s.loads);
    write_dispatch_log(run.file("dispatch.ndjson"), s.sim.log);
    const json summary = simulation_summary(s.sim, s.topology);
    write_json(run.file("summary.json"), summary);
    run.set("scenario", scenario_to_json(rc.scenario));
    run.set("summary", summary);
    run.finish();
    if (s.sim.prices.horizon() == 0) throw EmptyHorizon("no congested interval was retained");
    return kExitOk;
}

int cmd_recover(const CommonOptions& opt, const std::string& prices_path, std::optional<double> kappa1,
                std::optional<double> kappa2, std::optional<double> rho, std::optional<int> max_iters) {
    RunConfig rc = load_run_config(opt);
    if (kappa1) rc.recovery.kappa1 = *kappa1;
    if (kappa2) rc.recovery.kappa2 = *kappa2;
    if (rho) rc.recovery.rho = *rho;
    if (max_iters) rc.recovery.max_iters = *max_iters;
    rc.recovery.validate();
    Run run("recover-batch", opt);

    PriceMatrix prices;
    if (!prices_path.empty()) {
        prices = read_price_matrix(prices_path);
    } else {
        prices = simulate_scenario(rc.scenario).sim.prices;
        write_price_matrix(run.file("prices.csv"), prices);
    }
    if (prices.horizon() == 0) throw EmptyHorizon("price matrix has no columns");
    const GridTopology topology = load_grid(rc.scenario.grid_file);

    const BatchResult<double> result = run_batch<double>(prices.values, rc.recovery);
    const auto support = normalize_and_threshold(result.B_hat, rc.recovery.threshold_tau);
    write_matrix_csv(run.file("B_hat.csv"), result.B_hat);
    const GridTopology* topo = topology.reduced_size() == prices.values.rows() ? &topology : nullptr;
    write_json(run.file("edges.json"), edges_json(support, topo));
    write_json(run.file("diagnostics.json"), diagnostics_json(result));
    if (topo) {
        RecoveryReport report = evaluate(result.B_hat, topology, rc.recovery.threshold_tau);
        write_json(run.file("report.json"), report_to_json(report));
    }
    run.set("recovery", recovery_to_json(rc.recovery));
    run.set("converged", result.converged);
    run.set("iterations", result.iterations);
    run.finish();
    return kExitOk;
}

int cmd_sweep(const CommonOptions& opt, std::optional<double> rho, std::optional<int> max_iters,
              std::optional<double> target) {
    RunConfig rc = load_run_config(opt);
    if (rho) rc.recovery.rho = *rho;
    if (max_iters) rc.recovery.max_iters = *max_iters;
    rc.recovery.validate();
    const json sweep = section(rc.raw, "sweep");
    const std::vector<double> fallback{1e-3, 1e-2, 1e-1, 1.0, 10.0};
    const auto k1 = sweep.value("kappa1_grid", fallback);
    const auto k2 = sweep.value("kappa2_grid", fallback);
    if (!target && sweep.contains("target_degree") && !sweep.at("target_degree").is_null())
        target = sweep.at("target_degree").get<double>();
    Run run("sweep", opt);

    const BatchExperiment exp = run_batch_experiment(rc.scenario, k1, k2, rc.recovery, target);
    write_price_matrix(run.file("prices.csv"), exp.simulation.prices);
    write_degree_table(run.file("degree_table.csv"), exp.report);
    write_matrix_csv(run.file("B_hat.csv"), exp.tuning.best.B_hat);
    write_json(run.file("edges.json"), edges_json(exp.support, &exp.topology));
    json report = report_to_json(exp.report);
    report["kappa1"] = exp.tuning.kappa1;
    report["kappa2"] = exp.tuning.kappa2;
    json cells = json::array();
    for (const auto& c : exp.tuning.cells)
        cells.push_back({{"kappa1", c.kappa1}, {"kappa2", c.kappa2}, {"average_degree", c.average_degree},
                         {"iterations", c.iterations}, {"converged", c.converged}});
    report["cells"] = cells;
    report["simulation"] = simulation_summary(exp.simulation, exp.topology);
    write_json(run.file("report.json"), report);
    run.set("scenario", scenario_to_json(rc.scenario));
    run.set("recovery", recovery_to_json(rc.recovery));
    run.set("runtime", exp.report.runtime);
    run.finish();
    return kExitOk;
}

void write_trace(const fs::path& path, const std::vector<int>& intervals, const MatrixXd& trace,
                 const std::vector<std::pair<int, int>>& watch) {
    std::vector<std::string> header{"interval"};
    for (const auto& [a, b] : watch) header.push_back("line_" + std::to_string(a) + "_" + std::to_string(b));
    MatrixXd table(trace.rows(), trace.cols() + 1);
    for (Eigen::Index k = 0; k < trace.rows(); ++k) table(k, 0) = intervals[static_cast<std::size_t>(k)];
    table.rightCols(trace.cols()) = trace;
    write_matrix_csv(path, table, header);
}

int cmd_track_stream(const CommonOptions& opt, const RunConfig& rc, const TrackingSetup& setup,
                     const std::string& stream_path, const std::string& warm_path) {
    Run run("track", opt);
    const auto records = read_price_stream(stream_path);
    if (records.empty()) throw EmptyHorizon("price stream is empty");
    const GridTopology topology = load_grid(rc.scenario.grid_file);
    const Eigen::Index n = records.front().prices.size();
    std::optional<MatrixXd> warm;
    if (!warm_path.empty()) warm = read_matrix_csv(warm_path, false);
    std::vector<std::pair<int, int>> watch_reduced;
    for (const auto& [a, b] : setup.watch) {
        const int i = reduced_index(topology, a);
        const int j = reduced_index(topology, b);
        if (i < 0 || j < 0 || i >= n || j >= n) throw BadConfig("watched line is not an entry of the reduced matrix");
        watch_reduced.push_back({i, j});
    }
    OnlineParams params = setup.online;
    if (setup.auto_horizon) {
        params.horizon_T = static_cast<double>(records.size());
        params.rho = params.eta = std::sqrt(params.horizon_T);
    }
    params.validate();
    OnlineState<double> state = init_online<double>(n, warm);
    std::vector<int> intervals;
    std::vector<std::vector<double>> rows;
    for (const auto& rec : records) {
        if (params.skip_uncongested && rec.prices.isZero(0.0)) continue;
        step(state, rec.prices, params);
        rows.push_back(snapshot(state, watch_reduced));
        intervals.push_back(rec.interval);
    }
    MatrixXd trace(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(watch_reduced.size()));
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t w = 0; w < rows[k].size(); ++w) trace(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(w)) = rows[k][w];
    write_trace(run.file("trace.csv"), intervals, trace, setup.watch);
    write_matrix_csv(run.file("B_final.csv"), (state.B1 + state.B1.transpose()) / 2.0);
    run.set("steps", rows.size());
    run.set("online", {{"rho", params.rho}, {"eta", params.eta}, {"horizon_T", params.horizon_T},
                       {"loss", to_string(params.loss)}, {"anchor_kappa1_factor", params.anchor_kappa1_factor}});
    run.finish();
    return kExitOk;
}

int cmd_track(const CommonOptions& opt, const std::string& stream_path, const std::string& warm_path,
              const std::string& loss) {
    RunConfig rc = load_run_config(opt);
    TrackingSetup setup = tracking_from_json(section(rc.raw, "tracking"), rc.scenario);
    if (!loss.empty()) {
        json j = {{"loss", loss}};
        setup.online = online_from_json(j, setup.online);
    }
    if (!stream_path.empty()) return cmd_track_stream(opt, rc, setup, stream_path, warm_path);

    Run run("track", opt);
    const TrackingResult result = run_tracking_experiment(setup);
    write_trace(run.file("trace.csv"), result.intervals, result.trace, setup.watch);
    write_matrix_csv(run.file("B_final.csv"), result.final_B);
    write_matrix_csv(run.file("B_warm_start.csv"), result.warm_start_B);
    write_json(run.file("tracking.json"), tracking_to_json(result));
    run.set("scenario", scenario_to_json(rc.scenario));
    run.set("online", {{"loss", to_string(setup.online.loss)}, {"auto_horizon", setup.auto_horizon},
                       {"anchor_kappa1_factor", setup.online.anchor_kappa1_factor}});
    run.finish();
    return kExitOk;
}

int cmd_eval(const CommonOptions& opt, const std::string& estimate_path, std::optional<double> tau) {
    RunConfig rc = load_run_config(opt);
    const double threshold = tau.value_or(rc.recovery.threshold_tau);
    Run run("eval", opt);
    const GridTopology topology = load_grid(rc.scenario.grid_file);
    const MatrixXd estimate = read_matrix_csv(estimate_path, false);
    const RecoveryReport report = evaluate(estimate, topology, threshold);
    write_json(run.file("report.json"), report_to_json(report));
    run.set("estimate", estimate_path);
    run.set("tau", threshold);
    run.finish();
    return kExitOk;
}

void add_common(CLI::App* app, CommonOptions& opt) {
    app->add_option("-c,--config", opt.config, "run config JSON")->required()->check(CLI::ExistingFile);
    app->add_option("-o,--run-dir", opt.run_dir, "output directory (default runs/<command>)");
    app->add_option("--seed", opt.seed, "override scenario seed");
    app->add_option("--days", opt.days, "override number of simulated days");
    app->add_option("--workers", opt.workers, "worker threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid topology recovery from nodal prices"};
    app.require_subcommand(1);
    CommonOptions opt;

    auto* sim = app.add_subcommand("simulate", "clear the market over the configured horizon");
    add_common(sim, opt);
    std::optional<double> flow_scale;
    bool keep_uncongested = false;
    sim->add_option("--flow-limit-scale", flow_scale, "multiply every flow rating");
    sim->add_flag("--keep-uncongested", keep_uncongested, "retain intervals without congestion");

    auto* rec = app.add_subcommand("recover-batch", "batch recovery of the reduced Laplacian");
    add_common(rec, opt);
    std::string prices_path;
    std::optional<double> kappa1, kappa2, rho;
    std::optional<int> max_iters;
    rec->add_option("--prices", prices_path, "price matrix CSV (simulated from the scenario when absent)")
        ->check(CLI::ExistingFile);
    rec->add_option("--kappa1", kappa1);
    rec->add_option("--kappa2", kappa2);
    rec->add_option("--rho", rho);
    rec->add_option("--max-iters", max_iters);

    auto* sweep = app.add_subcommand("sweep", "kappa grid sweep with degree table and report");
    add_common(sweep, opt);
    std::optional<double> target;
    sweep->add_option("--rho", rho);
    sweep->add_option("--max-iters", max_iters);
    sweep->add_option("--target-degree", target);

    auto* track = app.add_subcommand("track", "online tracking over a price stream");
    add_common(track, opt);
    std::string stream_path, warm_path, loss;
    track->add_option("--stream", stream_path, "CSV rows or NDJSON price records instead of simulating")
        ->check(CLI::ExistingFile);
    track->add_option("--warm-start", warm_path, "N x N CSV used as the initial state with --stream")
        ->check(CLI::ExistingFile);
    track->add_option("--loss", loss, "l1 or huber")->check(CLI::IsMember({"l1", "huber"}));

    auto* ev = app.add_subcommand("eval", "score an estimate against the configured grid");
    add_common(ev, opt);
    std::string estimate_path;
    std::optional<double> tau;
    ev->add_option("--estimate", estimate_path, "N x N estimate CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--tau", tau, "support threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*sim) return cmd_simulate(opt, flow_scale, keep_uncongested);
        if (*rec) return cmd_recover(opt, prices_path, kappa1, kappa2, rho, max_iters);
        if (*sweep) return cmd_sweep(opt, rho, max_iters, target);
        if (*track) return cmd_track(opt, stream_path, warm_path, loss);
        if (*ev) return cmd_eval(opt, estimate_path, tau);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::Numerical ? kExitNumerical : kExitInput;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitInput;
}
