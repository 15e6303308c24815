// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any of them fails.

#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lmptopo/batch.hpp"
#include "lmptopo/experiments.hpp"
#include "lmptopo/io.hpp"
#include "lmptopo/market.hpp"
#include "lmptopo/online.hpp"
#include "lmptopo/prox.hpp"
#include "lmptopo/scenario.hpp"
#include "oracles.hpp"

using namespace lmptopo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const Outcome& o) {
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

double relative_gap(double ours, double reference) {
    return (ours - reference) / std::max(1.0, std::abs(reference));
}

// Feasibility facts of a finished batch run, gathered for criterion 5.
struct FeasibilityLog {
    int runs = 0;
    int bad = 0;
    double worst_s_gap = 0.0;  // ||S - B Pi|| / tol
    double worst_cap = -1e300; // max(B - I)
    double worst_eig = 1e300;  // min eig of sym(B3)
    std::vector<std::string> notes;

    void add(const std::string& name, const BatchResult<double>& r, const MatrixXd& pi) {
        ++runs;
        const MatrixXd& b = r.B_hat;
        const double s_gap = (r.S_hat - b * pi).norm() / r.primal_tol;
        const double cap = (b - MatrixXd::Identity(b.rows(), b.cols())).maxCoeff();
        const MatrixXd b3 = (r.state.B3 + r.state.B3.transpose()) / 2.0;
        const double eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(b3).eigenvalues().minCoeff();
        worst_s_gap = std::max(worst_s_gap, s_gap);
        worst_cap = std::max(worst_cap, cap);
        worst_eig = std::min(worst_eig, eig);
        if (s_gap > 10.0 || cap > 1e-6 || !(eig > 0.0)) {
            ++bad;
            notes.push_back(name + " (||S-BPi||/tol=" + fmt(s_gap) + ", max(B-I)=" + fmt(cap) +
                            ", min eig B3=" + fmt(eig) + ")");
        }
    }
};

FeasibilityLog feasibility;

const std::vector<double> kKappaGrid{1e-3, 1e-2, 1e-1, 1.0, 10.0};

// 1. Closed-form prox kernels against independent numerical minimizers.
Outcome prox_oracles() {
    const auto start = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> dim(1, 6);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    auto rnd = [&](int r, int c, double s) { return MatrixXd(MatrixXd::NullaryExpr(r, c, [&] { return s * g(rng); })); };

    double l1_gap = 0.0, huber_gap = 0.0, logdet_res = 0.0, soft_gap = 0.0;
    for (int k = 0; k < 100; ++k) {
        const int m = dim(rng), n = dim(rng);
        const MatrixXd y = rnd(m, n, 2.0);
        const VectorXd z = rnd(n, 1, u(rng));
        const MatrixXd x = l1_row_prox(y, z);
        const MatrixXd ref = oracle::l1_row(y, z, 100000);
        l1_gap = std::max(l1_gap, relative_gap(oracle::l1_row_objective(x, y, z), oracle::l1_row_objective(ref, y, z)));
    }
    for (int k = 0; k < 100; ++k) {
        const int m = dim(rng), n = dim(rng);
        const MatrixXd y = rnd(m, n, 2.0);
        const VectorXd z = rnd(n, 1, 1.0);
        const double kappa = u(rng), alpha = u(rng);
        const MatrixXd x = huber_row_prox(y, z, HuberParams<double>{kappa, alpha});
        const MatrixXd ref = oracle::huber_row(y, z, kappa, alpha, 100000);
        huber_gap = std::max(huber_gap, relative_gap(oracle::huber_row_objective(x, y, z, kappa, alpha),
                                                     oracle::huber_row_objective(ref, y, z, kappa, alpha)));
    }
    for (int k = 0; k < 100; ++k) {
        const int n = dim(rng);
        const MatrixXd y = rnd(n, n, 3.0);
        const double alpha = u(rng);
        const MatrixXd b = psd_logdet_prox(y, alpha);
        logdet_res = std::max(logdet_res, oracle::logdet_stationarity(b, y, alpha));
    }
    for (int i = 0; i < 100; ++i) {
        const double x = -10.0 + 20.0 * i / 99.0;
        const double beta = 0.05 * (i % 40);
        auto f = [&](double v) { return 0.5 * (v - x) * (v - x) + beta * std::abs(v); };
        const double ref = oracle::golden_min(f, -20.0, 20.0);
        soft_gap = std::max(soft_gap, relative_gap(f(soft_threshold(x, beta)), f(ref)));
    }
    const double secs = seconds_since(start);
    const bool pass = l1_gap <= 1e-5 && huber_gap <= 1e-5 && soft_gap <= 1e-5 && logdet_res <= 1e-8 && secs < 30.0;
    return {pass, "prox oracles: worst relative gap l1 " + fmt(l1_gap) + ", huber " + fmt(huber_gap) +
                      ", soft " + fmt(soft_gap) + "; logdet stationarity " + fmt(logdet_res) + "; " +
                      fmt(secs) + " s"};
}

// 2. Dispatch LP duals and objective.
Outcome lp_duals() {
    const auto start = Clock::now();
    std::mt19937_64 rng(202);
    double worst_kkt = 0.0, worst_cs = 0.0;
    int feasible = 0;
    for (int k = 0; k < 100; ++k) {
        const int buses = std::uniform_int_distribution<int>(3, 10)(rng);
        const GridTopology topo = oracle::random_grid(rng, buses, buses / 2, 5.0, 40.0);
        const auto grid = build_matrices<double>(topo);
        auto [offers, loads] = oracle::random_market(rng, buses, buses, 3);
        const DispatchOutcome out = clear_market(expand_blocks(offers, loads), grid);
        if (out.status == DispatchStatus::Infeasible) continue;
        ++feasible;
        worst_kkt = std::max(worst_kkt, out.kkt.worst());
        for (int l = 0; l < grid.line_count(); ++l)
            worst_cs = std::max(worst_cs, std::abs(out.mu(l)) * (grid.flow_limits(l) - std::abs(out.flows(l))));
    }
    double worst_obj = 0.0;
    int enumerated = 0;
    for (int k = 0; k < 200 && enumerated < 50; ++k) {
        const GridTopology topo = oracle::random_grid(rng, 3, 0, 5.0, 30.0);
        const auto grid = build_matrices<double>(topo);
        auto [offers, loads] = oracle::random_market(rng, 3, 2, 1);
        const MarketInstance inst = expand_blocks(offers, loads);
        if (inst.variable_count() > 6) continue;
        const BoundedLp lp = dispatch_lp(inst, grid);
        const auto ref = oracle::vertex_enumeration(lp);
        const LpSolution sol = solve_lp_with_duals(lp);
        if (!ref) {
            if (sol.status != LpStatus::Infeasible) worst_obj = 1e300;
            continue;
        }
        ++enumerated;
        if (sol.status != LpStatus::Optimal) worst_obj = 1e300;
        else worst_obj = std::max(worst_obj, std::abs(sol.objective - *ref) / (1.0 + std::abs(*ref)));
    }
    const double secs = seconds_since(start);
    const bool pass = worst_kkt <= 1e-6 && worst_cs <= 1e-6 && worst_obj <= 1e-8 && enumerated > 0 && secs < 60.0;
    return {pass, "LP duals: " + std::to_string(feasible) + "/100 feasible, worst KKT " + fmt(worst_kkt) +
                      ", worst slackness " + fmt(worst_cs) + "; " + std::to_string(enumerated) +
                      " enumerated, worst objective gap " + fmt(worst_obj) + "; " + fmt(secs) + " s"};
}

// 3. Noiseless synthetic support recovery with degree-tuned kappas.
Outcome synthetic_recovery() {
    const auto start = Clock::now();
    RecoveryParams base;
    base.rho = 100.0;
    base.max_iters = 5000;
    int good = 0;
    std::string f1s;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SyntheticInstance inst = synthetic_instance(seed);
        const double target = true_average_degree(inst.topology);
        const auto tuning = tune_kappas<double>(inst.pi, kKappaGrid, kKappaGrid, target, base);
        const RecoveryReport r = evaluate(tuning.best.B_hat, inst.topology, base.threshold_tau);
        feasibility.add("synthetic seed " + std::to_string(seed), tuning.best, inst.pi);
        if (r.edge_f1 >= 0.9) ++good;
        f1s += (f1s.empty() ? "" : " ") + fmt(r.edge_f1, 2);
    }
    const double secs = seconds_since(start);
    return {good >= 8 && secs < 300.0, "synthetic recovery: F1 >= 0.9 on " + std::to_string(good) +
                                           "/10 seeds (F1: " + f1s + "); " + fmt(secs) + " s"};
}

ScenarioConfig config_scenario(const char* name, json* raw = nullptr) {
    const fs::path path = fs::path(LMPTOPO_CONFIG_DIR) / name;
    const json j = read_json(path);
    if (raw) *raw = j;
    return scenario_from_json(j.at("scenario"), path.parent_path());
}

// 4. IEEE 30-bus day: degree table shape, (1,1) degree, convergence at rho = 1e4.
Outcome ieee30_day() {
    const auto start = Clock::now();
    json raw;
    const ScenarioConfig scenario = config_scenario("ieee30_day.json", &raw);
    const RecoveryParams base = recovery_from_json(raw.at("recovery"));
    const BatchExperiment exp = run_batch_experiment(scenario, kKappaGrid, kKappaGrid, base);
    const MatrixXd& table = exp.report.avg_degree;
    const MatrixXd& pi = exp.simulation.prices.values;
    feasibility.add("ieee30 tuned", exp.tuning.best, pi);

    bool monotone = true;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (kKappaGrid[static_cast<std::size_t>(i)] > 1.0) continue;
        for (Eigen::Index j = 1; j < table.cols(); ++j) monotone &= table(i, j) >= table(i, j - 1);
    }
    // Dense regime: the last column sits near the 5.9-6.0 plateau of the reference table and is flat across kappa1.
    const VectorXd last = table.col(table.cols() - 1);
    const bool saturated = last.minCoeff() >= 5.0 && last.maxCoeff() - last.minCoeff() <= 1.0;

    RecoveryParams p = base;
    p.kappa1 = p.kappa2 = 1.0;
    BatchResult<double> at11;
    const RecoveryReport r11 = recover_and_score(pi, exp.topology, p, &at11);
    feasibility.add("ieee30 (1,1)", at11, pi);
    const bool degree_ok = r11.average_degree >= 2.0 && r11.average_degree <= 3.5;
    const auto& res = at11.state.residuals.back();
    const double worst_res = std::max({res[0], res[1], res[2]});
    const double tol = 1e-4 * pi.norm();
    const bool converged = worst_res <= tol && at11.iterations <= 5000;

    std::ostringstream rows;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        rows << (i ? " | " : "");
        for (Eigen::Index j = 0; j < table.cols(); ++j) rows << (j ? " " : "") << fmt(table(i, j), 2);
    }
    const double secs = seconds_since(start);
    const bool pass = monotone && saturated && degree_ok && converged && secs < 900.0;
    return {pass, std::string("IEEE 30-bus (T=") + std::to_string(pi.cols()) + "): (a) nondecreasing in kappa2 " +
                      (monotone ? "yes" : "no") + ", kappa2=10 column saturated " + (saturated ? "yes" : "no") +
                      " [" + rows.str() + "]; (b) degree at (1,1) = " + fmt(r11.average_degree) + " (F1 " +
                      fmt(r11.edge_f1, 2) + "); (c) residual " + fmt(worst_res) + " vs " + fmt(tol) + " after " +
                      std::to_string(at11.iterations) + " iterations; " + fmt(secs) + " s"};
}

// 5. Feasibility of every batch solution produced by criteria 3 and 4.
Outcome batch_feasibility() {
    std::string detail = "ADMM feasibility over " + std::to_string(feasibility.runs) +
                         " runs: worst ||S-BPi||/tol " + fmt(feasibility.worst_s_gap) + ", worst max(B-I) " +
                         fmt(feasibility.worst_cap) + ", smallest eig B3 " + fmt(feasibility.worst_eig);
    for (const auto& n : feasibility.notes) detail += "; violates: " + n;
    return {feasibility.runs > 0 && feasibility.bad == 0, detail};
}

// 6. One online step against numerical minimization of the per-step objective.
Outcome online_steps() {
    const auto start = Clock::now();
    std::mt19937_64 rng(606);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    auto rnd = [&](int r, int c, double s) { return MatrixXd(MatrixXd::NullaryExpr(r, c, [&] { return s * g(rng); })); };
    const int n = 5;
    double worst[2] = {0.0, 0.0};
    for (int k = 0; k < 50; ++k) {
        OnlineState<double> s = init_online<double>(n);
        const MatrixXd a = rnd(n, n, 0.3);
        s.B1 = MatrixXd::Identity(n, n) + (a + a.transpose()) / 2.0;
        s.B2 = s.B1 + rnd(n, n, 0.1);
        s.B3 = s.B1 + rnd(n, n, 0.1);
        s.M12 = rnd(n, n, 0.2);
        s.M13 = rnd(n, n, 0.2);
        OnlineParams p;
        p.rho = u(rng);
        p.eta = u(rng);
        p.kappa1 = u(rng);
        p.kappa3 = u(rng) / 2.0;
        p.horizon_T = 1.0 + 10.0 * u(rng);
        const VectorXd price = rnd(n, 1, 1.5);
        const oracle::OnlineSubproblem sp{s.B1, s.B2, s.B3, s.M12, s.M13, s.P, p.kappa1, p.horizon_T, p.rho, p.eta};

        OnlineState<double> l1 = s;
        p.loss = OnlineLoss::L1;
        step(l1, price, p);
        const MatrixXd ref_l1 = oracle::online_l1(sp, price, 20000);
        worst[0] = std::max(worst[0], relative_gap(oracle::online_objective_l1(sp, l1.B1, price),
                                                   oracle::online_objective_l1(sp, ref_l1, price)));

        OnlineState<double> hu = s;
        p.loss = OnlineLoss::Huber;
        step(hu, price, p);
        const MatrixXd ref_hu = oracle::online_huber(sp, price, p.kappa3, 20000);
        worst[1] = std::max(worst[1], relative_gap(oracle::online_objective_huber(sp, hu.B1, price, p.kappa3),
                                                   oracle::online_objective_huber(sp, ref_hu, price, p.kappa3)));
    }
    const double secs = seconds_since(start);
    return {worst[0] <= 1e-5 && worst[1] <= 1e-5 && secs < 120.0,
            "online step: worst relative gap l1 " + fmt(worst[0]) + ", huber " + fmt(worst[1]) +
                " (anchor uses kappa1/(T(2rho+eta))); " + fmt(secs) + " s"};
}

// 7. Tracking a two-line swap on the 30-bus grid.
Outcome tracking() {
    const auto start = Clock::now();
    json raw;
    const ScenarioConfig scenario = config_scenario("ieee30_tracking.json", &raw);
    const TrackingSetup setup = tracking_from_json(raw.at("tracking"), scenario);
    const TrackingResult r = run_tracking_experiment(setup);
    const int budget = static_cast<int>(0.4 * r.post_event_steps);
    bool pass = true;
    std::string detail = "tracking (" + std::to_string(r.steps) + " steps, " + std::to_string(r.post_event_steps) +
                         " after the swap, budget " + std::to_string(budget) + "):";
    for (const auto& w : r.watches) {
        const std::string name = "(" + std::to_string(w.line.first + 1) + "," + std::to_string(w.line.second + 1) + ")";
        if (w.removed || w.added) {
            const bool ok = w.steps_to_cross && *w.steps_to_cross <= budget;
            pass &= ok;
            detail += " " + name + (w.removed ? " out " : " in ") +
                      (w.steps_to_cross ? std::to_string(*w.steps_to_cross) : std::string("never")) +
                      (ok ? "" : " [late]") + ";";
        } else {
            const bool ok = w.min_value > 0.01;
            pass &= ok;
            detail += " " + name + " persistent min " + fmt(w.min_value) + (ok ? "" : " [dropped]") + ";";
        }
    }
    const double secs = seconds_since(start);
    detail += " " + fmt(secs) + " s";
    return {pass && secs < 600.0, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Identical seeds and configs give byte-identical outputs.
Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "lmptopo_acceptance";
    fs::create_directories(dir);
    json raw;
    ScenarioConfig scenario = config_scenario("ieee30_day.json", &raw);
    RecoveryParams p = recovery_from_json(raw.at("recovery"));
    p.max_iters = 300;
    std::vector<std::string> prices, reports;
    for (int run = 0; run < 2; ++run) {
        scenario.workers = run == 0 ? 1 : 0;
        const GridTopology topo = load_grid(scenario.grid_file);
        const ScenarioData data =
            generate_horizon(scenario, load_offers(scenario.offers_file), load_demand(scenario.demand_file, topo.bus_count));
        const SimulationResult sim = simulate(data, topo, scenario);
        const fs::path pf = dir / ("prices_" + std::to_string(run) + ".csv");
        const fs::path rf = dir / ("report_" + std::to_string(run) + ".json");
        write_price_matrix(pf, sim.prices);
        write_json(rf, report_to_json(recover_and_score(sim.prices.values, topo, p)));
        prices.push_back(slurp(pf));
        reports.push_back(slurp(rf));
    }
    fs::remove_all(dir);
    const bool pass = !prices[0].empty() && prices[0] == prices[1] && reports[0] == reports[1];
    return {pass, std::string("determinism: price matrices ") + (prices[0] == prices[1] ? "identical" : "differ") +
                      ", reports " + (reports[0] == reports[1] ? "identical" : "differ") +
                      " (serial vs parallel clearing)"};
}

Outcome guarded(Outcome (*f)()) {
    try {
        return f();
    } catch (const std::exception& e) {
        return {false, std::string("threw: ") + e.what()};
    }
}

}  // namespace

// Optional arguments pick a subset of criteria by number. Criterion 5 reuses
// the runs of 3 and 4.
int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const std::vector<Outcome (*)()> checks{prox_oracles, lp_duals,     synthetic_recovery, ieee30_day,
                                             batch_feasibility, online_steps, tracking,          determinism};
    for (std::size_t k = 0; k < checks.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (only.empty() || only.count(id)) report(id, guarded(checks[k]));
    }
    std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criteria not met") << std::endl;
    return failures == 0 ? 0 : 1;
}
