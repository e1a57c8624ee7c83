#pragma once

#include <string>
#include <vector>

#include "routeworks/common.hpp"
#include "routeworks/instances.hpp"

namespace routeworks {

enum class TwMode { Hard, Soft };

// Partially constructed C-VRP(-TW) solution.  `clock` is the departure time
// from `current` (earliest service start there plus its service time).
struct RouteState {
    std::vector<std::uint8_t> visited;       // per node; depots stay false
    std::vector<std::vector<int>> routes;    // closed routes, depot to depot
    std::vector<int> active_route;           // open route, starts at depot 0
    int current = 0;
    double clock = 0.0;
    double load_used = 0.0;
    int vehicles_used = 1;

    int visited_count() const;
    bool all_visited(int n_customers) const;
    bool terminal(int n_customers) const {
        return all_visited(n_customers) && active_route.size() == 1;
    }
};

struct StepOutcome {
    RouteState next_state;
    double added_distance = 0.0;
    double lateness = 0.0;  // 0 under hard time windows
};

// Complete or partial solution as plain routes (each depot to depot).
struct Solution {
    std::string instance_id;
    std::vector<std::vector<int>> routes;
    int vehicles() const { return static_cast<int>(routes.size()); }
};

struct Objective {
    enum class Kind { Distance, VehiclesThenDistance, SoftPenalized };
    Kind kind = Kind::Distance;
    double beta = 10.0;  // lateness weight for SoftPenalized

    static Objective distance() { return {Kind::Distance, 0.0}; }
    static Objective vehicles_then_distance() { return {Kind::VehiclesThenDistance, 0.0}; }
    static Objective soft_penalized(double beta = 10.0) { return {Kind::SoftPenalized, beta}; }
};

RouteState initial_state(const Instance& inst);

std::vector<std::uint8_t> feasible_mask(const RouteState& state, const Instance& inst,
                                        const DistanceMatrix& d, TwMode mode);

StepOutcome step(const RouteState& state, int action, const Instance& inst,
                 const DistanceMatrix& d, TwMode mode);

Solution extract_solution(const RouteState& state, const Instance& inst);

double solution_cost(const Solution& sol, const Instance& inst, const DistanceMatrix& d,
                     const Objective& objective);
double solution_cost(const Solution& sol, const PdpInstance& inst, const DistanceMatrix& d,
                     const Objective& objective);

std::vector<Violation> validate_solution(const Solution& sol, const Instance& inst,
                                         const DistanceMatrix& d);
std::vector<Violation> validate_solution(const Solution& sol, const PdpInstance& inst,
                                         const DistanceMatrix& d);

// Solution text format: header "<instance-id> <distance> <vehicles>", then
// one route per line as space-separated node indices including both depots.
std::string write_solution_text(const Solution& sol, double distance);
Solution parse_solution_text(const std::string& text, double* distance_out = nullptr);

}  // namespace routeworks
