#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmptopo/grid.hpp"
#include "lmptopo/market.hpp"
#include "lmptopo/types.hpp"

namespace lmptopo {

using json = nlohmann::json;

// Grid file: { "buses": N+1, "reference": 0, "lines": [{"from","to","x","fmax"}, ...] }
GridTopology grid_from_json(const json& j);
json grid_to_json(const GridTopology& topology);
GridTopology load_grid(const std::filesystem::path& path);
void save_grid(const std::filesystem::path& path, const GridTopology& topology);

// Offers file: { "generators": [{"bus": b, "blocks": [[MWh, $/MWh], ...]}, ...] }
std::vector<OfferCurve> offers_from_json(const json& j);
json offers_to_json(const std::vector<OfferCurve>& offers);
std::vector<OfferCurve> load_offers(const std::filesystem::path& path);

// Demand file: { "loads": [{"bus": b, "mw": value}, ...] }; returns MW per bus.
VectorXd demand_from_json(const json& j, int bus_count);
VectorXd load_demand(const std::filesystem::path& path, int bus_count);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

/// Plain numeric CSV, optional header row of column labels.
void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m,
                      const std::vector<std::string>& header = {});
MatrixXd read_matrix_csv(const std::filesystem::path& path, bool has_header, std::vector<std::string>* header = nullptr);

// Price matrix CSV: N rows x T columns, header = interval ids.
void write_price_matrix(const std::filesystem::path& path, const PriceMatrix& pm);
PriceMatrix read_price_matrix(const std::filesystem::path& path);

// Loads CSV: one row per interval, one column per bus (MW), header bus ids.
void write_loads(const std::filesystem::path& path, const MatrixXd& loads);
MatrixXd read_loads(const std::filesystem::path& path);

/// Price stream records: CSV rows of N floats, or NDJSON {"interval": i, "prices": [...]}.
struct PriceRecord {
    int interval = 0;
    VectorXd prices;
};
std::vector<PriceRecord> read_price_stream(const std::filesystem::path& path);

/// Round-trip exact decimal formatting for doubles.
std::string format_double(double v);

}  // namespace lmptopo
