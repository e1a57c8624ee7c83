#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routeworks/common.hpp"
#include "routeworks/cvrptw_env.hpp"
#include "routeworks/instances.hpp"

namespace routeworks {

// C-PDP-TW construction state.  `tau` is the committed route (append-only);
// `gamma` is the prospective delivery solution: deliveries of picked-up
// requests in the order they are currently planned.  `est_*` hold earliest
// service times under at-earliest scheduling; departure from a node is its
// est plus its service time.
struct PdpState {
    std::vector<int> tau;            // active route, starts {0}
    std::vector<int> gamma;          // pending deliveries, ordered
    std::vector<double> est_tau;     // aligned with tau
    std::vector<double> est_gamma;   // aligned with gamma
    std::vector<std::uint8_t> picked;     // per pickup index
    std::vector<std::uint8_t> delivered;  // per delivery index
    double load_used = 0.0;
    std::vector<std::vector<int>> routes;  // closed routes
    int vehicles_used = 1;

    int current() const { return tau.back(); }
    double est_current() const { return est_tau.back(); }
    int pending() const { return static_cast<int>(gamma.size()); }
    bool terminal(const PdpInstance& inst) const;
};

// Counts elementary comparisons/updates so the quadratic-complexity bound of
// the feasibility machinery can be measured.
struct OpCounter {
    unsigned long long ops = 0;
};

// Precomputed table over the chain Delta = {tau_v, gamma_1..gamma_w, depot}.
// Positions are 0..w+1; cumulative waits are stored for i <= j.
struct SlackTable {
    std::vector<int> delta;       // node ids along the chain, size w+2
    std::vector<double> est;      // earliest service times along delta
    std::vector<double> cum_wait; // (w+2)^2, valid for i <= j
    std::vector<double> slack;    // F per position
    int w = 0;                    // gamma length

    double wait(int i, int j) const {
        return cum_wait[static_cast<std::size_t>(i) * (w + 2) + j];
    }
    double& wait_at(int i, int j) {
        return cum_wait[static_cast<std::size_t>(i) * (w + 2) + j];
    }
};

// Result of the best-insertion feasibility check for one pickup.  Position x
// means the delivery is placed after gamma_x (x = 0: directly after the
// pickup, before gamma_1).
struct InsertionVerdict {
    int pickup = -1;
    std::vector<int> feasible_positions;  // ascending
    int best_position = -1;               // -1 when infeasible
    double added_cost = 0.0;              // detour length at best_position
};

PdpState initial_pdp_state(const PdpInstance& inst);

SlackTable precompute(const PdpState& state, const PdpInstance& inst, const DistanceMatrix& d,
                      OpCounter* counter = nullptr);

// `inject_bias` is a fault-injection hook for the verification harness: it
// loosens every window/slack comparison by that amount so the replay oracle
// can demonstrate that it catches a buggy checker.  Production callers leave
// it at 0.
InsertionVerdict check_insertion(const PdpState& state, const SlackTable& table, int u,
                                 const PdpInstance& inst, const DistanceMatrix& d,
                                 OpCounter* counter = nullptr, double inject_bias = 0.0);

// Union of feasible pickups, the front of gamma, front-promotable deliveries
// and (when gamma is empty and the route is nonempty) the closing depot.
std::vector<int> feasible_actions(const PdpState& state, const PdpInstance& inst,
                                  const DistanceMatrix& d);

PdpState step_pdp(const PdpState& state, int action, const PdpInstance& inst,
                  const DistanceMatrix& d);

// Exhaustive oracle: can pickup u be taken next at all, allowing ANY
// reordering of the pending deliveries?  Factorial guard: |gamma|+1 <= 9.
bool exact_feasible(const PdpState& state, int u, const PdpInstance& inst,
                    const DistanceMatrix& d);

Solution extract_solution(const PdpState& state, const PdpInstance& inst);

// Debug dump: one CSV row per pickup with positions bitmask, best position
// and added cost.
std::string verdicts_csv(const std::vector<InsertionVerdict>& verdicts);

}  // namespace routeworks
