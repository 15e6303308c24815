#include "lmptopo/io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "lmptopo/errors.hpp"

namespace lmptopo {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ParseError("cannot format number");
    return std::string(buf, ptr);
}

namespace {

double parse_double(const std::string& token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw ParseError("not a number: '" + token + "'");
    }
    while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
    if (used != token.size()) throw ParseError("not a number: '" + token + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t s = 0;
        while (s < cell.size() && cell[s] == ' ') ++s;
        out.push_back(cell.substr(s));
    }
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    return out;
}

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad field '") + key + "': " + e.what());
    }
}

}  // namespace

json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

GridTopology grid_from_json(const json& j) {
    GridTopology g;
    g.bus_count = required<int>(j, "buses");
    g.reference_bus = j.value("reference", 0);
    for (const auto& l : required<json>(j, "lines")) {
        Line line;
        line.from = required<int>(l, "from");
        line.to = required<int>(l, "to");
        line.reactance = required<double>(l, "x");
        line.flow_limit = required<double>(l, "fmax");
        g.lines.push_back(line);
    }
    validate(g);
    return g;
}

json grid_to_json(const GridTopology& topology) {
    json lines = json::array();
    for (const auto& l : topology.lines)
        lines.push_back({{"from", l.from}, {"to", l.to}, {"x", l.reactance}, {"fmax", l.flow_limit}});
    return {{"buses", topology.bus_count}, {"reference", topology.reference_bus}, {"lines", lines}};
}

GridTopology load_grid(const fs::path& path) { return grid_from_json(read_json(path)); }

void save_grid(const fs::path& path, const GridTopology& topology) { write_json(path, grid_to_json(topology)); }

std::vector<OfferCurve> offers_from_json(const json& j) {
    std::vector<OfferCurve> offers;
    for (const auto& g : required<json>(j, "generators")) {
        OfferCurve curve;
        curve.bus = required<int>(g, "bus");
        for (const auto& b : required<json>(g, "blocks")) {
            if (!b.is_array() || b.size() != 2) throw ParseError("offer block must be [MWh, $/MWh]");
            curve.blocks.push_back({b[0].get<double>(), b[1].get<double>()});
        }
        offers.push_back(std::move(curve));
    }
    return offers;
}

json offers_to_json(const std::vector<OfferCurve>& offers) {
    json gens = json::array();
    for (const auto& o : offers) {
        json blocks = json::array();
        for (const auto& b : o.blocks) blocks.push_back({b.quantity, b.price});
        gens.push_back({{"bus", o.bus}, {"blocks", blocks}});
    }
    return {{"generators", gens}};
}

std::vector<OfferCurve> load_offers(const fs::path& path) { return offers_from_json(read_json(path)); }

VectorXd demand_from_json(const json& j, int bus_count) {
    VectorXd d = VectorXd::Zero(bus_count);
    for (const auto& l : required<json>(j, "loads")) {
        const int bus = required<int>(l, "bus");
        if (bus < 0 || bus >= bus_count) throw ParseError("demand bus out of range");
        d(bus) += required<double>(l, "mw");
    }
    return d;
}

VectorXd load_demand(const fs::path& path, int bus_count) { return demand_from_json(read_json(path), bus_count); }

void write_matrix_csv(const fs::path& path, const MatrixXd& m, const std::vector<std::string>& header) {
    auto out = open_out(path);
    if (!header.empty()) {
        for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
        out << '\n';
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
}

MatrixXd read_matrix_csv(const fs::path& path, bool has_header, std::vector<std::string>* header) {
    auto in = open_in(path);
    std::string line;
    if (has_header) {
        if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header");
        if (header) *header = split_csv(line);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const auto& cell : split_csv(line)) row.push_back(parse_double(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(path.string() + ": ragged CSV row");
        rows.push_back(std::move(row));
    }
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
    return m;
}

void write_price_matrix(const fs::path& path, const PriceMatrix& pm) {
    std::vector<std::string> header;
    for (int id : pm.interval_ids) header.push_back(std::to_string(id));
    write_matrix_csv(path, pm.values, header);
}

PriceMatrix read_price_matrix(const fs::path& path) {
    std::vector<std::string> header;
    PriceMatrix pm;
    pm.values = read_matrix_csv(path, true, &header);
    for (const auto& h : header) pm.interval_ids.push_back(static_cast<int>(parse_double(h)));
    if (pm.values.rows() > 0 && static_cast<Eigen::Index>(pm.interval_ids.size()) != pm.values.cols())
        throw ParseError(path.string() + ": header length does not match column count");
    return pm;
}

void write_loads(const fs::path& path, const MatrixXd& loads) {
    std::vector<std::string> header;
    for (Eigen::Index b = 0; b < loads.cols(); ++b) header.push_back("bus" + std::to_string(b));
    write_matrix_csv(path, loads, header);
}

MatrixXd read_loads(const fs::path& path) { return read_matrix_csv(path, true); }

std::vector<PriceRecord> read_price_stream(const fs::path& path) {
    auto in = open_in(path);
    std::vector<PriceRecord> records;
    std::string line;
    int next_id = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        PriceRecord rec;
        if (line.front() == '{') {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw ParseError(path.string() + ": " + e.what());
            }
            rec.interval = j.value("interval", next_id);
            const auto prices = required<std::vector<double>>(j, "prices");
            rec.prices = Eigen::Map<const VectorXd>(prices.data(), static_cast<Eigen::Index>(prices.size()));
        } else {
            const auto cells = split_csv(line);
            rec.interval = next_id;
            rec.prices.resize(static_cast<Eigen::Index>(cells.size()));
            for (std::size_t k = 0; k < cells.size(); ++k) rec.prices(static_cast<Eigen::Index>(k)) = parse_double(cells[k]);
        }
        if (!records.empty() && rec.prices.size() != records.front().prices.size())
            throw ParseError(path.string() + ": price records have different lengths");
        next_id = rec.interval + 1;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace lmptopo
