#include "routeworks/cvrptw_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace routeworks {

int RouteState::visited_count() const {
    return static_cast<int>(std::count(visited.begin(), visited.end(), std::uint8_t{1}));
}

bool RouteState::all_visited(int n_customers) const {
    return visited_count() == n_customers;
}

RouteState initial_state(const Instance& inst) {
    RouteState s;
    s.visited.assign(inst.nodes.size(), 0);
    s.active_route = {0};
    s.current = 0;
    s.clock = inst.nodes[0].tw_open;  // depot service is zero, so this is departure-ready
    s.load_used = 0.0;
    s.vehicles_used = 1;
    return s;
}

std::vector<std::uint8_t> feasible_mask(const RouteState& state, const Instance& inst,
                                        const DistanceMatrix& d, TwMode mode) {
    const int n = inst.customers();
    if (state.terminal(n)) throw ContractViolation("feasible_mask: state is terminal");
    std::vector<std::uint8_t> mask(inst.nodes.size(), 0);
    const int depot_end = inst.depot_end();
    const double b0 = inst.horizon_close();
    for (int i = 1; i <= n; ++i) {
        if (state.visited[i]) continue;
        const NodeRec& rec = inst.nodes[i];
        if (state.load_used + rec.demand > inst.capacity) continue;
        const double start = std::max(state.clock + d(state.current, i), rec.tw_open);
        if (mode == TwMode::Hard && start > rec.tw_close) continue;
        if (start + rec.service + d(i, depot_end) > b0) continue;
        mask[i] = 1;
    }
    if (state.active_route.size() > 1) mask[depot_end] = 1;  // no empty routes
    return mask;
}

StepOutcome step(const RouteState& state, int action, const Instance& inst,
                 const DistanceMatrix& d, TwMode mode) {
    const int n = inst.customers();
    const int depot_end = inst.depot_end();
    if (action <= 0 || action > depot_end) throw ContractViolation("step: bad action index");

    StepOutcome out;
    out.next_state = state;
    RouteState& s = out.next_state;

    if (action == depot_end) {
        if (state.active_route.size() <= 1) {
            throw ContractViolation("step: closing an empty route is forbidden");
        }
        out.added_distance = d(state.current, depot_end);
        s.active_route.push_back(depot_end);
        s.routes.push_back(std::move(s.active_route));
        s.active_route = {0};
        s.current = 0;
        s.clock = inst.nodes[0].tw_open;
        s.load_used = 0.0;
        if (!s.all_visited(n)) ++s.vehicles_used;  // dispatch the next vehicle
        return out;
    }

    if (state.visited[action]) throw ContractViolation("step: node already visited");
    const NodeRec& rec = inst.nodes[action];
    const double start = std::max(state.clock + d(state.current, action), rec.tw_open);
    if (mode == TwMode::Hard) {
        if (state.load_used + rec.demand > inst.capacity || start > rec.tw_close ||
            start + rec.service + d(action, depot_end) > inst.horizon_close()) {
            throw ContractViolation("step: infeasible action under hard time windows");
        }
    } else {
        out.lateness = std::max(0.0, start - rec.tw_close);
    }
    out.added_distance = d(state.current, action);
    s.visited[action] = 1;
    s.active_route.push_back(action);
    s.current = action;
    s.clock = start + rec.service;
    s.load_used += rec.demand;
    return out;
}

Solution extract_solution(const RouteState& state, const Instance& inst) {
    Solution sol;
    sol.instance_id = inst.id;
    sol.routes = state.routes;
    if (state.active_route.size() > 1) {
        auto open = state.active_route;
        open.push_back(inst.depot_end());
        sol.routes.push_back(std::move(open));
    }
    return sol;
}

namespace {

double route_distance(const std::vector<int>& route, const DistanceMatrix& d) {
    double total = 0.0;
    for (std::size_t k = 1; k < route.size(); ++k) total += d(route[k - 1], route[k]);
    return total;
}

// At-earliest replay of one route; returns total lateness, or infinity on an
// index error.
double route_lateness(const std::vector<int>& route, const std::vector<NodeRec>& nodes,
                      const DistanceMatrix& d) {
    double lateness = 0.0;
    double clock = nodes.front().tw_open;
    for (std::size_t k = 1; k < route.size(); ++k) {
        const NodeRec& rec = nodes[route[k]];
        const double start = std::max(clock + d(route[k - 1], route[k]), rec.tw_open);
        lateness += std::max(0.0, start - rec.tw_close);
        clock = start + rec.service;
    }
    return lateness;
}

double diameter(const DistanceMatrix& d) {
    double best = 0.0;
    const int n = d.size();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) best = std::max(best, d(i, j));
    return best;
}

template <typename Inst>
double cost_impl(const Solution& sol, const Inst& inst, const DistanceMatrix& d,
                 const Objective& objective) {
    std::vector<int> counts(inst.nodes.size(), 0);
    for (const auto& route : sol.routes)
        for (const int v : route)
            if (v != 0 && v != inst.depot_end()) ++counts[v];
    for (int i = 1; i <= inst.customers(); ++i) {
        if (counts[i] != 1) {
            throw ContractViolation("solution_cost: incomplete solution (customer " +
                                    std::to_string(i) + " visited " + std::to_string(counts[i]) +
                                    " times)");
        }
    }
    double dist = 0.0;
    for (const auto& route : sol.routes) dist += route_distance(route, d);

    switch (objective.kind) {
        case Objective::Kind::Distance:
            return dist;
        case Objective::Kind::VehiclesThenDistance: {
            const double big = 100.0 * diameter(d) * inst.customers();
            return big * sol.vehicles() + dist;
        }
        case Objective::Kind::SoftPenalized: {
            double lateness = 0.0;
            for (const auto& route : sol.routes) lateness += route_lateness(route, inst.nodes, d);
            return dist + objective.beta * lateness;
        }
    }
    return dist;
}

constexpr double kTol = 1e-9;

template <typename Inst>
void validate_impl(const Solution& sol, const Inst& inst, const DistanceMatrix& d,
                   std::vector<Violation>& out) {
    const int n = inst.customers();
    const int depot_end = inst.depot_end();
    std::vector<int> counts(inst.nodes.size(), 0);

    for (std::size_t r = 0; r < sol.routes.size(); ++r) {
        const auto& route = sol.routes[r];
        if (route.size() < 3) {
            out.push_back({-1, "route " + std::to_string(r) + " has no customers"});
            continue;
        }
        if (route.front() != 0) out.push_back({route.front(), "route does not start at depot 0"});
        if (route.back() != depot_end) {
            out.push_back({route.back(), "route does not end at depot " + std::to_string(depot_end)});
        }
        double clock = inst.nodes[0].tw_open;
        double load = 0.0;
        for (std::size_t k = 1; k < route.size(); ++k) {
            const int v = route[k];
            if (v < 0 || v > depot_end) {
                out.push_back({v, "node index out of range"});
                break;
            }
            if (k + 1 < route.size() && (v == 0 || v == depot_end)) {
                out.push_back({v, "depot in route interior"});
            }
            const NodeRec& rec = inst.nodes[v];
            const double start = std::max(clock + d(route[k - 1], v), rec.tw_open);
            if (start > rec.tw_close + kTol) {
                out.push_back({v, "time window violated (start " + std::to_string(start) + " > " +
                                      std::to_string(rec.tw_close) + ")"});
            }
            clock = start + rec.service;
            load += rec.demand;
            if (load > inst.capacity + kTol) out.push_back({v, "capacity exceeded"});
            if (load < -kTol) out.push_back({v, "negative load (delivery before pickup?)"});
            if (v != 0 && v != depot_end) ++counts[v];
        }
    }
    for (int i = 1; i <= n; ++i) {
        if (counts[i] == 0) out.push_back({i, "customer not visited"});
        if (counts[i] > 1) out.push_back({i, "customer visited more than once"});
    }
}

}  // namespace

double solution_cost(const Solution& sol, const Instance& inst, const DistanceMatrix& d,
                     const Objective& objective) {
    return cost_impl(sol, inst, d, objective);
}

double solution_cost(const Solution& sol, const PdpInstance& inst, const DistanceMatrix& d,
                     const Objective& objective) {
    return cost_impl(sol, inst, d, objective);
}

std::vector<Violation> validate_solution(const Solution& sol, const Instance& inst,
                                         const DistanceMatrix& d) {
    std::vector<Violation> out;
    validate_impl(sol, inst, d, out);
    return out;
}

std::vector<Violation> validate_solution(const Solution& sol, const PdpInstance& inst,
                                         const DistanceMatrix& d) {
    std::vector<Violation> out;
    validate_impl(sol, inst, d, out);
    // precedence: a pickup and its delivery share a route, pickup first
    const int n = inst.requests();
    std::vector<int> route_of(inst.nodes.size(), -1);
    std::vector<int> pos_of(inst.nodes.size(), -1);
    for (std::size_t r = 0; r < sol.routes.size(); ++r) {
        for (std::size_t k = 0; k < sol.routes[r].size(); ++k) {
            const int v = sol.routes[r][k];
            if (v > 0 && v < inst.depot_end()) {
                route_of[v] = static_cast<int>(r);
                pos_of[v] = static_cast<int>(k);
            }
        }
    }
    for (int u = 1; u <= n; ++u) {
        const int del = inst.delivery_of(u);
        if (route_of[u] < 0 || route_of[del] < 0) continue;  // missing nodes already reported
        if (route_of[u] != route_of[del]) {
            out.push_back({del, "delivery on a different route than its pickup"});
        } else if (pos_of[del] <= pos_of[u]) {
            out.push_back({del, "delivery precedes its pickup"});
        }
    }
    return out;
}

std::string write_solution_text(const Solution& sol, double distance) {
    std::ostringstream out;
    out.precision(17);
    out << sol.instance_id << " " << distance << " " << sol.vehicles() << "\n";
    for (const auto& route : sol.routes) {
        for (std::size_t k = 0; k < route.size(); ++k) {
            if (k) out << " ";
            out << route[k];
        }
        out << "\n";
    }
    return out.str();
}

Solution parse_solution_text(const std::string& text, double* distance_out) {
    std::istringstream in(text);
    Solution sol;
    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty solution text", 1);
    std::istringstream hs(header);
    double dist = 0.0;
    int vehicles = 0;
    if (!(hs >> sol.instance_id >> dist >> vehicles)) {
        throw ParseError("malformed solution header", 1);
    }
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<int> route;
        int v;
        while (ls >> v) route.push_back(v);
        if (!route.empty()) sol.routes.push_back(std::move(route));
    }
    if (static_cast<int>(sol.routes.size()) != vehicles) {
        throw ParseError("vehicle count does not match route lines", lineno);
    }
    if (distance_out) *distance_out = dist;
    return sol;
}

}  // namespace routeworks
