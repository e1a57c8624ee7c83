#include "routeworks/pdptw_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace routeworks {

namespace {

inline double departure(const NodeRec& rec, double est) { return est + rec.service; }

inline void bump(OpCounter* c, unsigned long long k = 1) {
    if (c) c->ops += k;
}

}  // namespace

bool PdpState::terminal(const PdpInstance& inst) const {
    if (!gamma.empty() || tau.size() != 1) return false;
    for (int u = 1; u <= inst.requests(); ++u) {
        if (!picked[u]) return false;
    }
    return true;
}

PdpState initial_pdp_state(const PdpInstance& inst) {
    PdpState s;
    s.tau = {0};
    s.est_tau = {inst.nodes[0].tw_open};
    s.picked.assign(inst.requests() + 1, 0);
    s.delivered.assign(inst.requests() + 1, 0);
    s.load_used = 0.0;
    s.vehicles_used = 1;
    return s;
}

SlackTable precompute(const PdpState& state, const PdpInstance& inst, const DistanceMatrix& d,
                      OpCounter* counter) {
    const int w = state.pending();
    const int m = w + 2;
    SlackTable t;
    t.w = w;
    t.delta.resize(m);
    t.est.resize(m);
    t.delta[0] = state.current();
    t.est[0] = state.est_current();
    for (int k = 0; k < w; ++k) {
        t.delta[k + 1] = state.gamma[k];
        t.est[k + 1] = state.est_gamma[k];
    }
    const int depot = inst.depot_end();
    t.delta[m - 1] = depot;
    const NodeRec& last = inst.nodes[t.delta[m - 2]];
    t.est[m - 1] = std::max(inst.nodes[depot].tw_open,
                            departure(last, t.est[m - 2]) + d(t.delta[m - 2], depot));

    // cumulative waiting: w[i][j] = sum over i < p <= j of the idle time at p
    t.cum_wait.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = i + 1; j < m; ++j) {
            const NodeRec& prev = inst.nodes[t.delta[j - 1]];
            const double arrival = departure(prev, t.est[j - 1]) + d(t.delta[j - 1], t.delta[j]);
            acc += t.est[j] - arrival;
            t.wait_at(i, j) = acc;
            bump(counter);
        }
    }

    // forward time slack: F_i = min over j >= i of w[i][j] + (b_j - t_j).
    // Position 0 is the already-served current node, so its own window no
    // longer binds; only downstream terms enter its slack.
    t.slack.assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double f = i == 0 ? std::numeric_limits<double>::infinity()
                          : inst.nodes[t.delta[i]].tw_close - t.est[i];
        for (int j = i + 1; j < m; ++j) {
            f = std::min(f, t.wait(i, j) + (inst.nodes[t.delta[j]].tw_close - t.est[j]));
            bump(counter);
        }
        t.slack[i] = f;
    }
    return t;
}

InsertionVerdict check_insertion(const PdpState& state, const SlackTable& table, int u,
                                 const PdpInstance& inst, const DistanceMatrix& d,
                                 OpCounter* counter, double inject_bias) {
    if (u < 1 || u > inst.requests() || state.picked[u]) {
        throw ContractViolation("check_insertion: u is not an open pickup");
    }
    const NodeRec& pick = inst.nodes[u];
    if (state.load_used + pick.demand > inst.capacity) {
        throw ContractViolation("check_insertion: capacity must be masked before the check");
    }

    InsertionVerdict v;
    v.pickup = u;
    const int w = table.w;
    const int cur = table.delta[0];
    const int del = inst.delivery_of(u);
    const NodeRec& delv = inst.nodes[del];

    // simulated service time of the pickup
    const double t_u = std::max(departure(inst.nodes[cur], table.est[0]) + d(cur, u), pick.tw_open);
    bump(counter, 2);
    if (t_u > pick.tw_close + inject_bias) return v;
    const double dep_u = t_u + pick.service;

    // time shift the pickup alone causes at the head of the remaining chain
    const double shift_head = dep_u + d(u, table.delta[1]) - table.est[1];
    bump(counter, 2);
    if (shift_head > table.slack[1] + inject_bias) return v;

    double best_cost = 0.0;
    for (int x = 0; x <= w; ++x) {
        int pred;
        double dep_pred;
        if (x == 0) {
            pred = u;
            dep_pred = dep_u;
        } else {
            pred = table.delta[x];
            const double shifted = table.est[x] + std::max(0.0, shift_head - table.wait(1, x));
            dep_pred = departure(inst.nodes[pred], shifted);
        }
        const double t_del = std::max(delv.tw_open, dep_pred + d(pred, del));
        bump(counter, 2);
        if (t_del > delv.tw_close + inject_bias) continue;

        const int succ = table.delta[x + 1];
        const double shift_succ = (t_del + delv.service) + d(del, succ) - table.est[x + 1];
        bump(counter, 2);
        if (shift_succ > table.slack[x + 1] + inject_bias) continue;

        v.feasible_positions.push_back(x);
        const double cost = d(pred, del) + d(del, succ) - d(pred, succ);
        if (v.best_position < 0 || cost < best_cost) {
            best_cost = cost;
            v.best_position = x;
        }
    }
    v.added_cost = v.best_position >= 0 ? best_cost : 0.0;
    return v;
}

namespace {

// Front-promotion test for gamma[idx] (idx >= 1, 0-based): serve that
// delivery next and keep the rest of gamma in order.  Sound because the
// original slack table still covers the (longer) chain that retains the
// promoted node in its old spot.
bool promotable(const PdpState& state, const SlackTable& table, int idx,
                const PdpInstance& inst, const DistanceMatrix& d) {
    const int node = state.gamma[idx];
    const NodeRec& rec = inst.nodes[node];
    const int cur = state.current();
    const double t_x =
        std::max(departure(inst.nodes[cur], state.est_current()) + d(cur, node), rec.tw_open);
    if (t_x > rec.tw_close) return false;
    const int head = state.gamma[0];
    const double shift = departure(rec, t_x) + d(node, head) - table.est[1];
    return shift <= table.slack[1];
}

void recompute_gamma_est(PdpState& s, const PdpInstance& inst, const DistanceMatrix& d) {
    s.est_gamma.resize(s.gamma.size());
    int prev = s.current();
    double dep = departure(inst.nodes[prev], s.est_current());
    for (std::size_t k = 0; k < s.gamma.size(); ++k) {
        const int node = s.gamma[k];
        const NodeRec& rec = inst.nodes[node];
        const double t = std::max(dep + d(prev, node), rec.tw_open);
        s.est_gamma[k] = t;
        prev = node;
        dep = departure(rec, t);
    }
}

}  // namespace

std::vector<int> feasible_actions(const PdpState& state, const PdpInstance& inst,
                                  const DistanceMatrix& d) {
    if (state.terminal(inst)) throw ContractViolation("feasible_actions: state is terminal");
    std::vector<int> actions;
    const SlackTable table = precompute(state, inst, d);

    for (int u = 1; u <= inst.requests(); ++u) {
        if (state.picked[u]) continue;
        if (state.load_used + inst.nodes[u].demand > inst.capacity) continue;
        if (!check_insertion(state, table, u, inst, d).feasible_positions.empty()) {
            actions.push_back(u);
        }
    }
    if (!state.gamma.empty()) {
        actions.push_back(state.gamma[0]);  // head of gamma: feasible by construction
        for (std::size_t idx = 1; idx < state.gamma.size(); ++idx) {
            if (promotable(state, table, static_cast<int>(idx), inst, d)) {
                actions.push_back(state.gamma[idx]);
            }
        }
    } else if (state.tau.size() > 1) {
        actions.push_back(inst.depot_end());
    }
    std::sort(actions.begin(), actions.end());
    return actions;
}

PdpState step_pdp(const PdpState& state, int action, const PdpInstance& inst,
                  const DistanceMatrix& d) {
    PdpState s = state;
    const int n = inst.requests();
    const int depot = inst.depot_end();

    if (action == depot) {
        if (!state.gamma.empty() || state.tau.size() <= 1) {
            throw ContractViolation("step_pdp: depot requires an empty gamma and a nonempty route");
        }
        s.tau.push_back(depot);
        s.routes.push_back(std::move(s.tau));
        s.tau = {0};
        s.est_tau = {inst.nodes[0].tw_open};
        s.load_used = 0.0;
        bool open_pickups = false;
        for (int u = 1; u <= n; ++u) open_pickups |= !s.picked[u];
        if (open_pickups) ++s.vehicles_used;
        return s;
    }

    if (inst.is_pickup(action)) {
        const SlackTable table = precompute(state, inst, d);
        const InsertionVerdict v = check_insertion(state, table, action, inst, d);
        if (v.best_position < 0) {
            throw ContractViolation("step_pdp: pickup has no feasible delivery insertion");
        }
        const NodeRec& pick = inst.nodes[action];
        const double t_u = std::max(
            departure(inst.nodes[s.current()], s.est_current()) + d(s.current(), action),
            pick.tw_open);
        s.tau.push_back(action);
        s.est_tau.push_back(t_u);
        s.picked[action] = 1;
        s.load_used += pick.demand;
        s.gamma.insert(s.gamma.begin() + v.best_position, inst.delivery_of(action));
        recompute_gamma_est(s, inst, d);
        return s;
    }

    if (inst.is_delivery(action)) {
        const auto it = std::find(s.gamma.begin(), s.gamma.end(), action);
        if (it == s.gamma.end()) {
            throw ContractViolation("step_pdp: delivery is not pending");
        }
        const std::size_t idx = static_cast<std::size_t>(it - s.gamma.begin());
        if (idx > 0) {
            const SlackTable table = precompute(state, inst, d);
            if (!promotable(state, table, static_cast<int>(idx), inst, d)) {
                throw ContractViolation("step_pdp: delivery cannot be promoted to the front");
            }
        }
        s.gamma.erase(it);
        const NodeRec& rec = inst.nodes[action];
        const double t =
            std::max(departure(inst.nodes[s.current()], s.est_current()) + d(s.current(), action),
                     rec.tw_open);
        s.tau.push_back(action);
        s.est_tau.push_back(t);
        s.delivered[inst.pickup_of(action)] = 1;
        s.load_used += rec.demand;  // negative demand frees capacity
        recompute_gamma_est(s, inst, d);
        return s;
    }

    throw ContractViolation("step_pdp: bad action index");
}

bool exact_feasible(const PdpState& state, int u, const PdpInstance& inst,
                    const DistanceMatrix& d) {
    const int w = state.pending();
    if (w + 1 > 9) {
        throw ContractViolation(
            "exact_feasible: factorial guard exceeded; shrink the test instance");
    }
    const NodeRec& pick = inst.nodes[u];
    const double t_u = std::max(
        departure(inst.nodes[state.current()], state.est_current()) + d(state.current(), u),
        pick.tw_open);
    if (t_u > pick.tw_close) return false;

    std::vector<int> pool = state.gamma;
    pool.push_back(inst.delivery_of(u));
    std::sort(pool.begin(), pool.end());

    const int depot = inst.depot_end();
    do {
        double dep = t_u + pick.service;
        int prev = u;
        bool ok = true;
        for (const int node : pool) {
            const NodeRec& rec = inst.nodes[node];
            const double t = std::max(dep + d(prev, node), rec.tw_open);
            if (t > rec.tw_close) {
                ok = false;
                break;
            }
            dep = t + rec.service;
            prev = node;
        }
        if (ok && dep + d(prev, depot) <= inst.nodes[depot].tw_close) return true;
    } while (std::next_permutation(pool.begin(), pool.end()));
    return false;
}

Solution extract_solution(const PdpState& state, const PdpInstance& inst) {
    Solution sol;
    sol.instance_id = inst.id;
    sol.routes = state.routes;
    if (state.tau.size() > 1) {
        auto open = state.tau;
        open.push_back(inst.depot_end());
        sol.routes.push_back(std::move(open));
    }
    return sol;
}

std::string verdicts_csv(const std::vector<InsertionVerdict>& verdicts) {
    std::ostringstream out;
    out << "pickup,positions_mask,best_position,added_cost\n";
    out.precision(17);
    for (const auto& v : verdicts) {
        unsigned long long mask = 0;
        for (const int x : v.feasible_positions) {
            if (x < 64) mask |= 1ULL << x;
        }
        out << v.pickup << "," << mask << "," << v.best_position << "," << v.added_cost << "\n";
    }
    return out.str();
}

}  // namespace routeworks
