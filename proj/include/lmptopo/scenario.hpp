#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lmptopo/grid.hpp"
#include "lmptopo/io.hpp"
#include "lmptopo/market.hpp"

namespace lmptopo {

struct ScenarioConfig {
    std::filesystem::path grid_file;
    std::filesystem::path offers_file;
    std::filesystem::path demand_file;
    std::optional<std::filesystem::path> loads_file;  // overrides the synthetic profiles

    int intervals_per_day = 288;
    int days = 1;
    double cost_jitter = 2.5;      // half-width of the uniform offer shift, $/MWh
    double load_sigma_ratio = 0.1; // 5-min Gaussian sigma as a fraction of the hourly value
    double load_scale = 7.0;       // divisor applied to site-level profiles
    double cost_scale = 10.0;      // offer prices are multiplied by cost_scale / 10
    double mlc_sigma = 0.0;        // additive loss-component noise, $/MWh
    double flow_limit_scale = 1.0;
    std::uint64_t seed = 1;

    // Synthetic daily shape: per-bus sinusoid with random amplitude and peak hour.
    double shape_amplitude_min = 0.05;
    double shape_amplitude_max = 0.1;
    double peak_hour = 18.0;
    double peak_hour_spread = 2.0;
    double day_variation = 0.05;          // per-day multiplicative spread across a multi-day run
    std::optional<double> peak_ratio;     // if set, daily per-bus max = peak_ratio x nominal

    bool keep_uncongested = false;
    unsigned workers = 0;  // 0: hardware concurrency

    void validate() const;
};

/// Reads a JSON config; relative paths resolve against the config's directory.
ScenarioConfig scenario_from_json(const json& j, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);
json scenario_to_json(const ScenarioConfig& config);

/// Deterministic generator for one (tag, a, b) stream of a seed, so draws for
/// one bus or interval never depend on how many other buses or intervals exist.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0);

enum StreamTag : std::uint64_t {
    kProfileStream = 1,
    kLoadNoiseStream = 2,
    kOfferStream = 3,
    kLossStream = 4,
    kDayStream = 5,
    kSyntheticStream = 6,
};

// Uniform and normal draws written out so that results do not depend on the
// standard library's distribution implementations.
double uniform01(std::mt19937_64& rng);
double uniform(std::mt19937_64& rng, double lo, double hi);
double standard_normal(std::mt19937_64& rng);

struct ScenarioData {
    MatrixXd loads;                               // intervals x buses, MW demand
    std::vector<std::vector<OfferCurve>> offers;  // per interval
    std::vector<VectorXd> loss_noise;             // per interval, length N
    int first_interval = 0;

    int interval_count() const { return static_cast<int>(loads.rows()); }
};

/// Loads and offers for one day (day_index counts from 0 in a multi-day run).
ScenarioData generate_day(const ScenarioConfig& config, const std::vector<OfferCurve>& nominal_offers,
                          const VectorXd& nominal_demand, int day_index = 0);

/// All config.days days back to back, or the explicit loads file if configured.
ScenarioData generate_horizon(const ScenarioConfig& config, const std::vector<OfferCurve>& nominal_offers,
                              const VectorXd& nominal_demand);

struct SimulationResult {
    PriceMatrix prices;
    std::vector<DispatchOutcome> log;
    int infeasible = 0;
    int uncongested = 0;
    int degenerate = 0;
    std::vector<int> congested_lines;  // union over the horizon
};

/// Clears every interval; grids[grid_for_interval[k]] is in force at interval k.
/// Intervals clear concurrently, results keep interval order.
SimulationResult simulate(const ScenarioData& data, const std::vector<GridMatrices<double>>& grids,
                          const std::vector<int>& grid_for_interval, const ScenarioConfig& config);

/// Single-topology convenience wrapper.
SimulationResult simulate(const ScenarioData& data, const GridTopology& topology, const ScenarioConfig& config);

/// The grid after applying the flow-limit scale knob.
GridTopology scaled_topology(const GridTopology& topology, const ScenarioConfig& config);

json outcome_to_json(const DispatchOutcome& outcome);

}  // namespace lmptopo
