#include "lmptopo/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <set>
#include <thread>

#include "lmptopo/errors.hpp"

namespace lmptopo {

namespace fs = std::filesystem;

void ScenarioConfig::validate() const {
    if (intervals_per_day <= 0) throw BadConfig("intervals_per_day must be positive");
    if (days <= 0) throw BadConfig("days must be positive");
    if (!(cost_jitter >= 0.0)) throw BadConfig("cost_jitter must be nonnegative");
    if (!(load_sigma_ratio >= 0.0 && load_sigma_ratio < 1.0)) throw BadConfig("load_sigma_ratio must be in [0, 1)");
    if (!(load_scale > 0.0) || !(cost_scale > 0.0)) throw BadConfig("load_scale and cost_scale must be positive");
    if (!(mlc_sigma >= 0.0)) throw BadConfig("mlc_sigma must be nonnegative");
    if (!(flow_limit_scale > 0.0)) throw BadConfig("flow_limit_scale must be positive");
    if (!(shape_amplitude_min >= 0.0 && shape_amplitude_max >= shape_amplitude_min && shape_amplitude_max < 1.0))
        throw BadConfig("shape amplitudes must satisfy 0 <= min <= max < 1");
    if (!(day_variation >= 0.0 && day_variation < 1.0)) throw BadConfig("day_variation must be in [0, 1)");
    if (peak_ratio && !(*peak_ratio > 0.0)) throw BadConfig("peak_ratio must be positive");
}

ScenarioConfig scenario_from_json(const json& j, const fs::path& base_dir) {
    ScenarioConfig c;
    auto path_of = [&](const char* key) -> fs::path {
        if (!j.contains(key)) throw BadConfig(std::string("config is missing '") + key + "'");
        fs::path p = j.at(key).get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
    };
    try {
        c.grid_file = path_of("grid_file");
        c.offers_file = path_of("offers_file");
        c.demand_file = path_of("demand_file");
        if (j.contains("loads_file") && !j.at("loads_file").is_null()) c.loads_file = path_of("loads_file");
        c.intervals_per_day = j.value("intervals_per_day", c.intervals_per_day);
        c.days = j.value("days", c.days);
        c.cost_jitter = j.value("cost_jitter", c.cost_jitter);
        c.load_sigma_ratio = j.value("load_sigma_ratio", c.load_sigma_ratio);
        c.load_scale = j.value("load_scale", c.load_scale);
        c.cost_scale = j.value("cost_scale", c.cost_scale);
        c.mlc_sigma = j.value("mlc_sigma", c.mlc_sigma);
        c.flow_limit_scale = j.value("flow_limit_scale", c.flow_limit_scale);
        c.seed = j.value("seed", c.seed);
        c.shape_amplitude_min = j.value("shape_amplitude_min", c.shape_amplitude_min);
        c.shape_amplitude_max = j.value("shape_amplitude_max", c.shape_amplitude_max);
        c.peak_hour = j.value("peak_hour", c.peak_hour);
        c.peak_hour_spread = j.value("peak_hour_spread", c.peak_hour_spread);
        c.day_variation = j.value("day_variation", c.day_variation);
        if (j.contains("peak_ratio") && !j.at("peak_ratio").is_null()) c.peak_ratio = j.at("peak_ratio").get<double>();
        c.keep_uncongested = j.value("keep_uncongested", c.keep_uncongested);
        c.workers = j.value("workers", c.workers);
    } catch (const json::exception& e) {
        throw BadConfig(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const fs::path& path) {
    return scenario_from_json(read_json(path), path.parent_path());
}

json scenario_to_json(const ScenarioConfig& c) {
    json j = {{"grid_file", c.grid_file.string()},
              {"offers_file", c.offers_file.string()},
              {"demand_file", c.demand_file.string()},
              {"intervals_per_day", c.intervals_per_day},
              {"days", c.days},
              {"cost_jitter", c.cost_jitter},
              {"load_sigma_ratio", c.load_sigma_ratio},
              {"load_scale", c.load_scale},
              {"cost_scale", c.cost_scale},
              {"mlc_sigma", c.mlc_sigma},
              {"flow_limit_scale", c.flow_limit_scale},
              {"seed", c.seed},
              {"shape_amplitude_min", c.shape_amplitude_min},
              {"shape_amplitude_max", c.shape_amplitude_max},
              {"peak_hour", c.peak_hour},
              {"peak_hour_spread", c.peak_hour_spread},
              {"day_variation", c.day_variation},
              {"keep_uncongested", c.keep_uncongested}};
    j["loads_file"] = c.loads_file ? json(c.loads_file->string()) : json(nullptr);
    j["peak_ratio"] = c.peak_ratio ? json(*c.peak_ratio) : json(nullptr);
    return j;
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(tag), lo(a), hi(a), lo(b), hi(b)};
    return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double standard_normal(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

struct BusProfile {
    double amplitude = 0.0;
    double peak = 0.0;
};

}  // namespace

ScenarioData generate_day(const ScenarioConfig& config, const std::vector<OfferCurve>& nominal_offers,
                          const VectorXd& nominal_demand, int day_index) {
    config.validate();
    const int per_day = config.intervals_per_day;
    const int buses = static_cast<int>(nominal_demand.size());
    ScenarioData data;
    data.first_interval = day_index * per_day;
    data.loads = MatrixXd::Zero(per_day, buses);

    std::vector<BusProfile> profiles(buses);
    for (int b = 0; b < buses; ++b) {
        auto rng = stream_rng(config.seed, kProfileStream, static_cast<std::uint64_t>(b));
        profiles[b].amplitude = uniform(rng, config.shape_amplitude_min, config.shape_amplitude_max);
        profiles[b].peak = config.peak_hour + uniform(rng, -config.peak_hour_spread, config.peak_hour_spread);
    }

    // Hourly site-level values, then scaled down and perturbed every interval.
    for (int b = 0; b < buses; ++b) {
        if (nominal_demand(b) == 0.0) continue;
        auto day_rng = stream_rng(config.seed, kDayStream, static_cast<std::uint64_t>(day_index), static_cast<std::uint64_t>(b));
        const double day_factor = 1.0 + uniform(day_rng, -config.day_variation, config.day_variation);
        std::vector<double> shape(24);
        for (int h = 0; h < 24; ++h)
            shape[h] = 1.0 + profiles[b].amplitude *
                                 std::cos(2.0 * std::numbers::pi * (h + 0.5 - profiles[b].peak) / 24.0);
        const double shape_max = *std::max_element(shape.begin(), shape.end());
        const double site_level = config.load_scale * nominal_demand(b);
        for (int k = 0; k < per_day; ++k) {
            const int hour = std::min(23, static_cast<int>(static_cast<long>(k) * 24 / per_day));
            double raw = site_level * day_factor * shape[hour];
            if (config.peak_ratio) raw = site_level * *config.peak_ratio * shape[hour] / shape_max;
            const double hourly = raw / config.load_scale;
            auto noise_rng = stream_rng(config.seed, kLoadNoiseStream,
                                        static_cast<std::uint64_t>(data.first_interval + k), static_cast<std::uint64_t>(b));
            const double value = hourly + config.load_sigma_ratio * hourly * standard_normal(noise_rng);
            data.loads(k, b) = std::max(0.0, value);
        }
    }

    data.offers.resize(per_day);
    data.loss_noise.resize(per_day);
    for (int k = 0; k < per_day; ++k) {
        const auto interval = static_cast<std::uint64_t>(data.first_interval + k);
        auto& offers = data.offers[k];
        offers = nominal_offers;
        for (std::size_t g = 0; g < offers.size(); ++g) {
            auto rng = stream_rng(config.seed, kOfferStream, interval, g);
            const double shift = uniform(rng, -config.cost_jitter, config.cost_jitter);
            for (auto& block : offers[g].blocks) block.price = block.price * config.cost_scale / 10.0 + shift;
        }
        data.loss_noise[k] = VectorXd::Zero(std::max(0, buses - 1));
        if (config.mlc_sigma > 0.0) {
            for (int b = 1; b < buses; ++b) {
                auto rng = stream_rng(config.seed, kLossStream, interval, static_cast<std::uint64_t>(b));
                data.loss_noise[k](b - 1) = config.mlc_sigma * standard_normal(rng);
            }
        }
    }
    return data;
}

ScenarioData generate_horizon(const ScenarioConfig& config, const std::vector<OfferCurve>& nominal_offers,
                              const VectorXd& nominal_demand) {
    if (config.loads_file) {
        // Explicit loads: offers and loss noise still come from the seeded streams.
        ScenarioConfig flat = config;
        const MatrixXd loads = read_loads(*config.loads_file);
        if (loads.cols() != nominal_demand.size()) throw BadConfig("loads file column count does not match bus count");
        flat.intervals_per_day = static_cast<int>(loads.rows());
        if (flat.intervals_per_day == 0) throw EmptyHorizon("loads file has no intervals");
        ScenarioData data = generate_day(flat, nominal_offers, nominal_demand, 0);
        data.loads = loads;
        return data;
    }
    ScenarioData all;
    for (int d = 0; d < config.days; ++d) {
        ScenarioData day = generate_day(config, nominal_offers, nominal_demand, d);
        if (d == 0) {
            all = std::move(day);
            continue;
        }
        MatrixXd stacked(all.loads.rows() + day.loads.rows(), all.loads.cols());
        stacked << all.loads, day.loads;
        all.loads = std::move(stacked);
        all.offers.insert(all.offers.end(), day.offers.begin(), day.offers.end());
        all.loss_noise.insert(all.loss_noise.end(), day.loss_noise.begin(), day.loss_noise.end());
    }
    return all;
}

GridTopology scaled_topology(const GridTopology& topology, const ScenarioConfig& config) {
    GridTopology out = topology;
    for (auto& line : out.lines) line.flow_limit *= config.flow_limit_scale;
    return out;
}

SimulationResult simulate(const ScenarioData& data, const std::vector<GridMatrices<double>>& grids,
                          const std::vector<int>& grid_for_interval, const ScenarioConfig& config) {
    const int count = data.interval_count();
    if (static_cast<int>(grid_for_interval.size()) != count) throw DimensionMismatch("one grid index per interval");
    std::vector<DispatchOutcome> log(count);

    auto clear_one = [&](int k) {
        const auto& grid = grids.at(static_cast<std::size_t>(grid_for_interval[k]));
        const MarketInstance inst = expand_blocks(data.offers[k], data.loads.row(k).transpose());
        std::optional<VectorXd> noise;
        if (config.mlc_sigma > 0.0) noise = data.loss_noise[k];
        DispatchOutcome out = clear_market(inst, grid, {}, noise);
        out.interval = data.first_interval + k;
        log[k] = std::move(out);
    };

    const unsigned workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1) {
        for (int k = 0; k < count; ++k) clear_one(k);
    } else {
        std::vector<std::future<void>> jobs;
        for (unsigned w = 0; w < workers; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (int k = static_cast<int>(w); k < count; k += static_cast<int>(workers)) clear_one(k);
            }));
        }
        for (auto& j : jobs) j.get();
    }

    SimulationResult result;
    std::set<int> lines;
    for (const auto& o : log) {
        if (o.status == DispatchStatus::Infeasible) ++result.infeasible;
        if (o.status == DispatchStatus::Uncongested) ++result.uncongested;
        if (o.status != DispatchStatus::Infeasible && o.degenerate) ++result.degenerate;
        lines.insert(o.congested.begin(), o.congested.end());
    }
    result.congested_lines.assign(lines.begin(), lines.end());
    result.log = std::move(log);
    result.prices = assemble_price_matrix(result.log, {config.keep_uncongested});
    return result;
}

SimulationResult simulate(const ScenarioData& data, const GridTopology& topology, const ScenarioConfig& config) {
    std::vector<GridMatrices<double>> grids{build_matrices<double>(scaled_topology(topology, config))};
    return simulate(data, grids, std::vector<int>(static_cast<std::size_t>(data.interval_count()), 0), config);
}

json outcome_to_json(const DispatchOutcome& o) {
    auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json j = {{"interval", o.interval}, {"status", to_string(o.status)}};
    if (o.status == DispatchStatus::Infeasible) return j;
    j["lambda0"] = o.lambda0;
    j["objective"] = o.objective;
    j["degenerate"] = o.degenerate;
    j["congested"] = o.congested;
    j["mu"] = vec(o.mu);
    j["flows"] = vec(o.flows);
    j["injections"] = vec(o.injections);
    j["mcc"] = vec(o.mcc);
    j["kkt_worst"] = o.kkt.worst();
    j["duality_gap"] = o.kkt.duality_gap;
    return j;
}

}  // namespace lmptopo
