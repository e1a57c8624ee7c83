#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace routeworks {

struct NodeRec {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    double demand = 0.0;    // signed for pickup/delivery
    double tw_open = 0.0;
    double tw_close = 0.0;
    double service = 0.0;
};

// Square matrix of Euclidean travel times (travel time == distance).
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(int n) : n_(n), d_(static_cast<std::size_t>(n) * n, 0.0) {}

    double operator()(int i, int j) const { return d_[static_cast<std::size_t>(i) * n_ + j]; }
    double& at(int i, int j) { return d_[static_cast<std::size_t>(i) * n_ + j]; }
    int size() const { return n_; }

private:
    int n_ = 0;
    std::vector<double> d_;
};

// C-VRP(-TW) instance. Nodes 0..N+1; node N+1 duplicates the depot so every
// route is a plain index sequence with uniform matrix lookups.
struct Instance {
    std::string id;
    std::vector<NodeRec> nodes;
    double capacity = 0.0;
    int header_vehicles = 0;  // fleet size advertised by the source file, informational

    int customers() const { return static_cast<int>(nodes.size()) - 2; }
    int depot_start() const { return 0; }
    int depot_end() const { return static_cast<int>(nodes.size()) - 1; }
    double horizon_open() const { return nodes.front().tw_open; }
    double horizon_close() const { return nodes.front().tw_close; }
};

// C-PDP-TW instance. Nodes 0..2N+1; pickup r in 1..N pairs with delivery
// r+N; node 2N+1 duplicates the depot.
struct PdpInstance {
    std::string id;
    std::vector<NodeRec> nodes;
    double capacity = 0.0;
    int header_vehicles = 0;  // fleet size advertised by the source file, informational

    int requests() const { return (static_cast<int>(nodes.size()) - 2) / 2; }
    int customers() const { return static_cast<int>(nodes.size()) - 2; }
    int depot_start() const { return 0; }
    int depot_end() const { return static_cast<int>(nodes.size()) - 1; }
    int delivery_of(int pickup) const { return pickup + requests(); }
    int pickup_of(int delivery) const { return delivery - requests(); }
    bool is_pickup(int i) const { return i >= 1 && i <= requests(); }
    bool is_delivery(int i) const { return i > requests() && i <= customers(); }
    double horizon_open() const { return nodes.front().tw_open; }
    double horizon_close() const { return nodes.front().tw_close; }
};

enum class Rounding {
    Exact,         // full-precision Euclidean
    SolomonTrunc,  // truncate to one decimal, as the classic benchmark results assume
};

DistanceMatrix travel_matrix(const Instance& inst, Rounding r = Rounding::Exact);
DistanceMatrix travel_matrix(const PdpInstance& inst, Rounding r = Rounding::Exact);

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line(line) {}
    int line;
};

// Solomon benchmark layout.  `max_customers` < 0 keeps all rows; otherwise
// only the first `max_customers` customer rows are retained.
Instance parse_solomon(std::istream& in, int max_customers = -1);
Instance parse_solomon_text(const std::string& text, int max_customers = -1);
std::string serialize_solomon(const Instance& inst);

// Li & Lim benchmark layout (9 columns, pairing via the pickup/delivery
// index columns).  Pairing is re-normalized to pickup r <-> delivery r+N.
PdpInstance parse_li_lim(std::istream& in, int max_requests = -1);
PdpInstance parse_li_lim_text(const std::string& text, int max_requests = -1);
std::string serialize_li_lim(const PdpInstance& inst);

struct GenProfile {
    double capacity = 40.0;
    double horizon = 4.6;
    double service = 0.02;
    double p_tw = 0.5;          // probability of a tight window
    double tw_width_min = 0.2;
    double tw_width_max = 0.4;
    int demand_min = 1;         // C-VRP-TW customer demand range
    int demand_max = 9;
    int pd_demand_min = 1;      // C-PDP-TW pickup demand range
    int pd_demand_max = 5;
    bool integral = false;      // snap coordinates/times to integers (benchmark-style data)
    double coord_scale = 1.0;   // coordinates drawn uniform on [0, coord_scale]^2
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Instance generate_cvrptw(std::uint64_t seed, int n, const GenProfile& profile = {});
PdpInstance generate_pdptw(std::uint64_t seed, int n_requests, const GenProfile& profile = {});

struct Violation {
    int node = -1;
    std::string what;
};

std::vector<Violation> validate_instance(const Instance& inst);
std::vector<Violation> validate_instance(const PdpInstance& inst);

}  // namespace routeworks
