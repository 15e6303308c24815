#include "lmptopo/grid.hpp"

#include <algorithm>
#include <queue>

namespace lmptopo {

bool is_connected(int bus_count, const std::vector<Line>& lines) {
    if (bus_count <= 1) return true;
    std::vector<std::vector<int>> adjacency(bus_count);
    for (const auto& line : lines) {
        adjacency[line.from].push_back(line.to);
        adjacency[line.to].push_back(line.from);
    }
    std::vector<bool> seen(bus_count, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int reached = 1;
    while (!frontier.empty()) {
        const int bus = frontier.front();
        frontier.pop();
        for (int next : adjacency[bus]) {
            if (!seen[next]) {
                seen[next] = true;
                ++reached;
                frontier.push(next);
            }
        }
    }
    return reached == bus_count;
}

void validate(const GridTopology& topology) {
    if (topology.bus_count < 1) throw InvalidTopology("grid needs at least one bus");
    if (topology.reference_bus < 0 || topology.reference_bus >= topology.bus_count)
        throw InvalidTopology("reference bus out of range");
    for (std::size_t l = 0; l < topology.lines.size(); ++l) {
        const Line& line = topology.lines[l];
        const std::string id = "line " + std::to_string(l);
        if (line.from < 0 || line.from >= topology.bus_count || line.to < 0 || line.to >= topology.bus_count)
            throw InvalidTopology(id + ": endpoint out of range");
        if (line.from == line.to) throw InvalidTopology(id + ": self loop");
        if (!(line.reactance > 0.0)) throw InvalidTopology(id + ": reactance must be positive");
        if (!(line.flow_limit > 0.0)) throw InvalidTopology(id + ": flow limit must be positive");
    }
    if (!is_connected(topology.bus_count, topology.lines)) throw DisconnectedGrid("grid graph is not connected");
}

std::set<std::pair<int, int>> reduced_edge_set(const GridTopology& topology) {
    std::set<std::pair<int, int>> edges;
    for (const auto& line : topology.lines) {
        const int a = reduced_index(topology, line.from);
        const int b = reduced_index(topology, line.to);
        if (a < 0 || b < 0) continue;
        edges.emplace(std::min(a, b), std::max(a, b));
    }
    return edges;
}

GridTopology swap_lines(const GridTopology& topology, const std::vector<std::pair<int, int>>& lines_out,
                        const std::vector<Line>& lines_in) {
    GridTopology out = topology;
    for (const auto& [a, b] : lines_out) {
        auto it = std::find_if(out.lines.begin(), out.lines.end(), [&](const Line& line) {
            return (line.from == a && line.to == b) || (line.from == b && line.to == a);
        });
        if (it == out.lines.end())
            throw InvalidTopology("line (" + std::to_string(a) + "," + std::to_string(b) + ") not in grid");
        out.lines.erase(it);
    }
    out.lines.insert(out.lines.end(), lines_in.begin(), lines_in.end());
    validate(out);
    return out;
}

}  // namespace lmptopo
