#include "routeworks/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "routeworks/cvrptw_env.hpp"
#include "routeworks/policy.hpp"
#include "routeworks/rng.hpp"
#include "routeworks/training.hpp"

namespace routeworks {

namespace {

using Clock = std::chrono::steady_clock;

struct Timer {
    Clock::time_point t0 = Clock::now();
    double secs() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }
};

std::string fmt(double v, int prec = 6) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

}  // namespace

std::string SweepReport::line() const {
    std::ostringstream ss;
    ss << (pass() ? "PASS" : "FAIL") << "  " << suite << "  cases=" << cases
       << " checks=" << checks << " failures=" << failures << "  " << fmt(seconds, 3) << "s";
    if (!detail.empty()) ss << "  [" << detail << "]";
    return ss.str();
}

bool replay_route_feasible(const PdpInstance& inst, const DistanceMatrix& d,
                           const std::vector<int>& order) {
    if (order.empty() || order.front() != 0) return false;
    double clock = inst.nodes[0].tw_open;  // departure-ready at the depot
    for (std::size_t k = 1; k < order.size(); ++k) {
        const NodeRec& rec = inst.nodes[order[k]];
        const double start = std::max(clock + d(order[k - 1], order[k]), rec.tw_open);
        if (start > rec.tw_close) return false;
        clock = start + rec.service;
    }
    return true;
}

namespace {

// One random construction episode; calls `on_state` before every action.
template <typename Fn>
void pdp_random_walk(const PdpInstance& inst, const DistanceMatrix& d, Rng& rng,
                     const Fn& on_state) {
    PdpState state = initial_pdp_state(inst);
    while (!state.terminal(inst)) {
        on_state(state);
        const auto actions = feasible_actions(state, inst, d);
        const int pick = static_cast<int>(rng.uniform_int(0, static_cast<int>(actions.size()) - 1));
        state = step_pdp(state, actions[pick], inst, d);
    }
}

struct PdpPool {
    std::vector<PdpInstance> instances;
    std::vector<DistanceMatrix> matrices;
};

PdpPool make_pdp_pool(int count, std::uint64_t seed, const GenProfile& profile = {}) {
    PdpPool pool;
    pool.instances.reserve(count);
    pool.matrices.reserve(count);
    for (int i = 0; i < count; ++i) {
        pool.instances.push_back(
            generate_pdptw(Rng::derive(seed, i), 4 + i % 7, profile));
        pool.matrices.push_back(travel_matrix(pool.instances.back()));
    }
    return pool;
}

// Remaining plan for an accepted insertion of pickup u at position x.
std::vector<int> insertion_order(const PdpState& state, const PdpInstance& inst, int u, int x) {
    std::vector<int> order = state.tau;
    order.push_back(u);
    for (int k = 0; k < x; ++k) order.push_back(state.gamma[k]);
    order.push_back(inst.delivery_of(u));
    for (std::size_t k = x; k < state.gamma.size(); ++k) order.push_back(state.gamma[k]);
    order.push_back(inst.depot_end());
    return order;
}

}  // namespace

SweepReport insertion_soundness_sweep(unsigned long long min_states, int instance_seeds,
                                      double inject_bias, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = inject_bias == 0.0 ? "insertion-soundness"
                                   : "insertion-soundness(bias=" + fmt(inject_bias, 3) + ")";
    const PdpPool pool = make_pdp_pool(instance_seeds, Rng::derive(seed, 0x5053));

    std::uint64_t walk = 0;
    while (rep.cases < min_states) {
        const int si = static_cast<int>(walk % pool.instances.size());
        const PdpInstance& inst = pool.instances[si];
        const DistanceMatrix& d = pool.matrices[si];
        Rng rng(Rng::derive(seed, 0xA110 + walk));
        pdp_random_walk(inst, d, rng, [&](const PdpState& state) {
            if (rep.cases >= min_states || state.pending() > 6) return;
            ++rep.cases;
            const SlackTable table = precompute(state, inst, d);
            // the head of gamma must replay clean with zero shift
            if (!state.gamma.empty()) {
                std::vector<int> order = state.tau;
                order.insert(order.end(), state.gamma.begin(), state.gamma.end());
                order.push_back(inst.depot_end());
                ++rep.checks;
                if (!replay_route_feasible(inst, d, order)) ++rep.failures;
            }
            for (int u = 1; u <= inst.requests(); ++u) {
                if (state.picked[u]) continue;
                if (state.load_used + inst.nodes[u].demand > inst.capacity) continue;
                const InsertionVerdict v =
                    check_insertion(state, table, u, inst, d, nullptr, inject_bias);
                for (const int x : v.feasible_positions) {
                    ++rep.checks;
                    if (!replay_route_feasible(inst, d, insertion_order(state, inst, u, x))) {
                        ++rep.failures;
                    }
                }
            }
        });
        ++walk;
    }
    rep.seconds = timer.secs();
    return rep;
}

SweepReport empty_gamma_agreement_sweep(unsigned long long min_cases, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "empty-gamma-agreement";
    const PdpPool pool = make_pdp_pool(50, Rng::derive(seed, 0x4547));

    std::uint64_t walk = 0;
    while (rep.cases < min_cases) {
        const int si = static_cast<int>(walk % pool.instances.size());
        const PdpInstance& inst = pool.instances[si];
        const DistanceMatrix& d = pool.matrices[si];
        Rng rng(Rng::derive(seed, 0xE0 + walk));
        pdp_random_walk(inst, d, rng, [&](const PdpState& state) {
            if (rep.cases >= min_cases || !state.gamma.empty()) return;
            const SlackTable table = precompute(state, inst, d);
            for (int u = 1; u <= inst.requests(); ++u) {
                if (state.picked[u] || rep.cases >= min_cases) continue;
                if (state.load_used + inst.nodes[u].demand > inst.capacity) continue;
                ++rep.cases;
                ++rep.checks;
                const bool heuristic =
                    !check_insertion(state, table, u, inst, d).feasible_positions.empty();
                const bool exact = exact_feasible(state, u, inst, d);
                if (heuristic != exact) ++rep.failures;
            }
        });
        ++walk;
    }
    rep.seconds = timer.secs();
    return rep;
}

SweepReport insertion_completeness_measure(unsigned long long min_cases, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "insertion-completeness(statistic)";
    const PdpPool pool = make_pdp_pool(50, Rng::derive(seed, 0x4349));

    unsigned long long exact_yes = 0, missed = 0;
    std::uint64_t walk = 0;
    while (rep.cases < min_cases) {
        const int si = static_cast<int>(walk % pool.instances.size());
        const PdpInstance& inst = pool.instances[si];
        const DistanceMatrix& d = pool.matrices[si];
        Rng rng(Rng::derive(seed, 0xC0DE + walk));
        pdp_random_walk(inst, d, rng, [&](const PdpState& state) {
            if (rep.cases >= min_cases || state.pending() > 6) return;
            const SlackTable table = precompute(state, inst, d);
            for (int u = 1; u <= inst.requests(); ++u) {
                if (state.picked[u] || rep.cases >= min_cases) continue;
                if (state.load_used + inst.nodes[u].demand > inst.capacity) continue;
                ++rep.cases;
                const bool heuristic =
                    !check_insertion(state, table, u, inst, d).feasible_positions.empty();
                const bool exact = exact_feasible(state, u, inst, d);
                if (exact) {
                    ++exact_yes;
                    if (!heuristic) ++missed;
                }
                if (heuristic && !exact) ++rep.failures;  // would contradict soundness
            }
        });
        ++walk;
    }
    rep.checks = exact_yes;
    rep.detail = "false-negative rate " +
                 fmt(exact_yes ? static_cast<double>(missed) / exact_yes : 0.0, 4) + " (" +
                 std::to_string(missed) + "/" + std::to_string(exact_yes) + ")";
    rep.seconds = timer.secs();
    return rep;
}

namespace {

// From-scratch one-step feasibility for the C-VRP-TW mask comparison.
bool ref_one_step_feasible(const Instance& inst, const DistanceMatrix& d, const RouteState& s,
                           int candidate, TwMode mode) {
    const int depot_end = inst.depot_end();
    if (candidate == depot_end) return s.active_route.size() > 1;
    if (candidate <= 0 || candidate >= depot_end) return false;
    if (s.visited[candidate]) return false;

    double load = 0.0;
    for (std::size_t k = 1; k < s.active_route.size(); ++k) {
        load += inst.nodes[s.active_route[k]].demand;
    }
    if (load + inst.nodes[candidate].demand > inst.capacity) return false;

    double clock = inst.nodes[0].tw_open;
    for (std::size_t k = 1; k < s.active_route.size(); ++k) {
        const NodeRec& rec = inst.nodes[s.active_route[k]];
        clock = std::max(clock + d(s.active_route[k - 1], s.active_route[k]), rec.tw_open) +
                rec.service;
    }
    const NodeRec& rec = inst.nodes[candidate];
    const double start = std::max(clock + d(s.active_route.back(), candidate), rec.tw_open);
    if (mode == TwMode::Hard && start > rec.tw_close) return false;
    return start + rec.service + d(candidate, depot_end) <= inst.horizon_close();
}

}  // namespace

SweepReport mask_equivalence_sweep(int min_states, int max_customers, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "mask-equivalence";
    std::uint64_t walk = 0;
    while (rep.cases < static_cast<unsigned long long>(min_states)) {
        const int n = 3 + static_cast<int>(walk % (max_customers - 2));
        const Instance inst = generate_cvrptw(Rng::derive(seed, 0x6D + walk), n);
        const DistanceMatrix d = travel_matrix(inst);
        Rng rng(Rng::derive(seed, 0x6E + walk));
        RouteState state = initial_state(inst);
        while (!state.terminal(n) && rep.cases < static_cast<unsigned long long>(min_states)) {
            ++rep.cases;
            const auto mask = feasible_mask(state, inst, d, TwMode::Hard);
            std::vector<int> feasible;
            for (int i = 0; i <= inst.depot_end(); ++i) {
                ++rep.checks;
                const bool ref = ref_one_step_feasible(inst, d, state, i, TwMode::Hard);
                if (ref != static_cast<bool>(mask[i])) ++rep.failures;
                if (mask[i]) feasible.push_back(i);
            }
            const int a = feasible[rng.uniform_int(0, static_cast<int>(feasible.size()) - 1)];
            state = step(state, a, inst, d, TwMode::Hard).next_state;
        }
        ++walk;
    }
    rep.seconds = timer.secs();
    return rep;
}

SweepReport precompute_recompute_sweep(int min_chains, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "precompute-recompute";
    const PdpPool pool = make_pdp_pool(40, Rng::derive(seed, 0x5052));
    constexpr double tol = 1e-9;

    std::uint64_t walk = 0;
    while (rep.cases < static_cast<unsigned long long>(min_chains)) {
        const int si = static_cast<int>(walk % pool.instances.size());
        const PdpInstance& inst = pool.instances[si];
        const DistanceMatrix& d = pool.matrices[si];
        Rng rng(Rng::derive(seed, 0x50 + walk));
        pdp_random_walk(inst, d, rng, [&](const PdpState& state) {
            if (rep.cases >= static_cast<unsigned long long>(min_chains)) return;
            ++rep.cases;
            const SlackTable table = precompute(state, inst, d);
            const int m = table.w + 2;

            // independent earliest service times: replay tau from the depot,
            // then walk the pending chain
            std::vector<double> est(m, 0.0);
            {
                double clock = inst.nodes[0].tw_open;
                for (std::size_t k = 1; k < state.tau.size(); ++k) {
                    const NodeRec& rec = inst.nodes[state.tau[k]];
                    clock = std::max(clock + d(state.tau[k - 1], state.tau[k]), rec.tw_open);
                    est[0] = clock;
                    clock += rec.service;
                }
                if (state.tau.size() == 1) est[0] = inst.nodes[0].tw_open;
                int prev = state.tau.back();
                double dep = est[0] + inst.nodes[prev].service;
                for (int k = 1; k < m; ++k) {
                    const int node = table.delta[k];
                    const NodeRec& rec = inst.nodes[node];
                    est[k] = std::max(dep + d(prev, node), rec.tw_open);
                    dep = est[k] + rec.service;
                    prev = node;
                }
            }
            for (int k = 0; k < m; ++k) {
                ++rep.checks;
                if (std::abs(est[k] - table.est[k]) > tol) ++rep.failures;
            }

            // direct evaluation of the defining sums
            for (int i = 0; i < m; ++i) {
                for (int j = i; j < m; ++j) {
                    double sum = 0.0;
                    for (int p = i + 1; p <= j; ++p) {
                        const NodeRec& prev = inst.nodes[table.delta[p - 1]];
                        sum += est[p] -
                               (est[p - 1] + prev.service + d(table.delta[p - 1], table.delta[p]));
                    }
                    ++rep.checks;
                    if (std::abs(sum - table.wait(i, j)) > tol) ++rep.failures;
                }
                // position 0 is already served; its own window term is skipped
                double f = 1e300;
                for (int j = i == 0 ? 1 : i; j < m; ++j) {
                    double w = 0.0;
                    for (int p = i + 1; p <= j; ++p) {
                        const NodeRec& prev = inst.nodes[table.delta[p - 1]];
                        w += est[p] -
                             (est[p - 1] + prev.service + d(table.delta[p - 1], table.delta[p]));
                    }
                    f = std::min(f, w + inst.nodes[table.delta[j]].tw_close - est[j]);
                }
                ++rep.checks;
                if (std::abs(f - table.slack[i]) > tol) ++rep.failures;
                if (table.slack[i] < -tol) ++rep.failures;  // slack is nonnegative on feasible chains
            }
        });
        ++walk;
    }
    rep.seconds = timer.secs();
    return rep;
}

namespace {

using LossBuilder = std::function<Var(Tape&, const ParamStore&)>;

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

// Central finite differences against the tape gradient on random coordinates.
double max_fd_rel_err(ParamStore& store, const LossBuilder& build, int probes, Rng& rng,
                      double h = 1e-5) {
    Gradients grads = store.zero_grads();
    {
        Tape tape;
        Var loss = build(tape, store);
        tape.backward(loss, grads);
    }
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const int pi = static_cast<int>(rng.uniform_int(0, store.count() - 1));
        Tensor& val = store.value(pi);
        const int k = static_cast<int>(rng.uniform_int(0, val.size() - 1));
        const double orig = val.data()[k];
        val.data()[k] = orig + h;
        double up;
        {
            Tape tape;
            up = tape.value(build(tape, store)).value();
        }
        val.data()[k] = orig - h;
        double dn;
        {
            Tape tape;
            dn = tape.value(build(tape, store)).value();
        }
        val.data()[k] = orig;
        worst = std::max(worst, rel_err(grads.g[pi][k], (up - dn) / (2.0 * h)));
    }
    return worst;
}

Tensor random_tensor(int rows, int cols, Rng& rng, double lo = 0.2, double hi = 1.2,
                     bool signed_vals = true) {
    Tensor t(rows, cols);
    for (int i = 0; i < t.size(); ++i) {
        double v = rng.uniform(lo, hi);
        if (signed_vals && rng.uniform() < 0.5) v = -v;
        t.data()[i] = v;
    }
    return t;
}

}  // namespace

SweepReport gradient_op_sweep(std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "gradient-ops";
    Rng rng(Rng::derive(seed, 0x6F70));
    constexpr double tol = 1e-4;
    constexpr int probes = 20;
    double worst_overall = 0.0;

    auto run_case = [&](const std::string& name, ParamStore& store, const LossBuilder& build) {
        ++rep.cases;
        ++rep.checks;
        const double worst = max_fd_rel_err(store, build, probes, rng);
        worst_overall = std::max(worst_overall, worst);
        if (worst >= tol) {
            ++rep.failures;
            rep.detail += name + "=" + fmt(worst, 3) + " ";
        }
    };

    // fixed projection weights keep per-element gradients distinct without
    // changing the loss between finite-difference evaluations
    std::vector<Tensor> proj_pool;
    for (int n = 0; n <= 16; ++n) proj_pool.push_back(random_tensor(n, 1, rng));
    auto project = [&proj_pool](Tape& t, Var out, int out_cols) {
        return t.sum(t.matmul(out, t.constant(proj_pool[out_cols])));
    };

    for (const bool ta : {false, true}) {
        for (const bool tb : {false, true}) {
            ParamStore s;
            s.add("A", random_tensor(ta ? 4 : 3, ta ? 3 : 4, rng));
            s.add("B", random_tensor(tb ? 5 : 4, tb ? 4 : 5, rng));
            run_case("matmul", s, [&, ta, tb](Tape& t, const ParamStore& st) {
                return project(t, t.matmul(t.param(st, 0), t.param(st, 1), ta, tb), 5);
            });
        }
    }
    {
        ParamStore s;
        s.add("A", random_tensor(3, 4, rng));
        s.add("B", random_tensor(3, 4, rng));
        run_case("add", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.add(t.param(st, 0), t.param(st, 1)), 4);
        });
    }
    {
        ParamStore s;
        s.add("A", random_tensor(3, 4, rng));
        s.add("b", random_tensor(1, 4, rng));
        run_case("add_rowvec", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.add_rowvec(t.param(st, 0), t.param(st, 1)), 4);
        });
    }
    {
        ParamStore s;
        s.add("A", random_tensor(3, 4, rng));
        run_case("scale", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.scale(t.param(st, 0), -1.7), 4);
        });
        run_case("relu", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.relu(t.param(st, 0)), 4);
        });
        run_case("tanh_clip", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.tanh_clip(t.param(st, 0), 10.0), 4);
        });
        run_case("softmax", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.softmax(t.param(st, 0)), 4);
        });
        const std::vector<std::uint8_t> mask = {1, 0, 1, 1};
        run_case("softmax_masked", s, [&, mask](Tape& t, const ParamStore& st) {
            return project(t, t.softmax(t.param(st, 0), &mask), 4);
        });
        run_case("slice_concat", s, [&](Tape& t, const ParamStore& st) {
            Var a = t.param(st, 0);
            return project(t, t.concat_cols({t.slice_cols(a, 2, 4), t.slice_cols(a, 0, 2)}), 4);
        });
        run_case("row_mean", s, [&](Tape& t, const ParamStore& st) {
            Var a = t.param(st, 0);
            return project(t, t.concat_cols({t.row(a, 2), t.mean_rows(a)}), 8);
        });
        run_case("sum_pick", s, [&](Tape& t, const ParamStore& st) {
            Var a = t.param(st, 0);
            return t.add(t.sum(a), t.pick(a, 1, 2));
        });
    }
    {
        ParamStore s;
        s.add("A", random_tensor(3, 4, rng, 0.3, 2.0, false));  // positive for log
        run_case("log", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.log(t.param(st, 0)), 4);
        });
    }
    {
        ParamStore s;
        s.add("X", random_tensor(5, 4, rng));
        s.add("gain", random_tensor(1, 4, rng, 0.5, 1.5, false));
        s.add("bias", random_tensor(1, 4, rng, 0.0, 0.5));
        run_case("instance_norm", s, [&](Tape& t, const ParamStore& st) {
            return project(t, t.instance_norm(t.param(st, 0), t.param(st, 1), t.param(st, 2)), 4);
        });
    }
    {
        // composite chain through every op family
        ParamStore s;
        s.add("X", random_tensor(4, 6, rng));
        s.add("W1", random_tensor(6, 8, rng));
        s.add("b1", random_tensor(1, 8, rng));
        s.add("gain", random_tensor(1, 8, rng, 0.5, 1.5, false));
        s.add("bias", random_tensor(1, 8, rng, 0.0, 0.5));
        s.add("W2", random_tensor(8, 4, rng));
        const std::vector<std::uint8_t> mask = {1, 1, 0, 1};
        run_case("composite", s, [&, mask](Tape& t, const ParamStore& st) {
            Var h = t.relu(t.add_rowvec(t.matmul(t.param(st, 0), t.param(st, 1)),
                                        t.param(st, 2)));
            h = t.instance_norm(h, t.param(st, 3), t.param(st, 4));
            Var logits = t.tanh_clip(t.matmul(h, t.param(st, 5)), 10.0);
            Var p = t.softmax(logits, &mask);
            Var picked = t.log(t.pick(p, 2, 1));
            return t.add(picked, t.scale(t.sum(t.mean_rows(p)), 0.37));
        });
    }

    rep.detail = "worst rel err " + fmt(worst_overall, 3) + (rep.detail.empty() ? "" : "; " + rep.detail);
    rep.seconds = timer.secs();
    return rep;
}

SweepReport gradient_end_to_end_sweep(std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "gradient-end-to-end";
    constexpr double tol = 1e-3;

    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    cfg.d_emb = 32;
    cfg.heads = 4;
    cfg.ff_dim = 64;
    cfg.layers = 2;
    ParamStore store = init_params(cfg, Rng::derive(seed, 0xE2E));

    const int batch = 2, n_starts = 3, customers = 5;
    std::vector<Instance> instances;
    std::vector<DistanceMatrix> matrices;
    std::vector<std::vector<std::vector<int>>> actions(batch);
    std::vector<std::vector<double>> costs(batch);

    // freeze the batch: sample trajectories once, then differentiate the
    // advantage-weighted log-likelihood of those fixed trajectories
    for (int b = 0; b < batch; ++b) {
        instances.push_back(generate_cvrptw(Rng::derive(seed, 0xF0 + b), customers));
        matrices.push_back(travel_matrix(instances.back()));
        const CvrptwSim sim(instances[b], matrices[b], TwMode::Hard);
        const auto starts = sample_start_nodes(instances[b], matrices[b], TwMode::Hard, n_starts,
                                               Rng::derive(seed, 0xA0 + b));
        Tape tape;
        const Embeddings emb = encode(tape, featurize(instances[b], cfg), store, cfg);
        for (int j = 0; j < n_starts; ++j) {
            const auto r = rollout(tape, emb, sim, store, cfg, DecodeMode::Sample,
                                   Rng::derive(seed, 0xB0 + b * 16 + j), starts[j]);
            actions[b].push_back(r.actions);
            costs[b].push_back(
                solution_cost(r.solution, instances[b], matrices[b], Objective::distance()));
        }
    }

    const LossBuilder build = [&](Tape& tape, const ParamStore& st) -> Var {
        Var loss;
        for (int b = 0; b < batch; ++b) {
            const CvrptwSim sim(instances[b], matrices[b], TwMode::Hard);
            const Embeddings emb = encode(tape, featurize(instances[b], cfg), st, cfg);
            double baseline = 0.0;
            for (const double c : costs[b]) baseline += c;
            baseline /= n_starts;
            for (int j = 0; j < n_starts; ++j) {
                Var lp = replay_log_prob(tape, emb, sim, st, cfg, actions[b][j], true);
                Var term = tape.scale(lp, (costs[b][j] - baseline) /
                                              (static_cast<double>(batch) * n_starts));
                loss = loss.valid() ? tape.add(loss, term) : term;
            }
        }
        return loss;
    };

    Rng rng(Rng::derive(seed, 0xFD));
    rep.cases = 1;
    rep.checks = 20;
    const double worst = max_fd_rel_err(store, build, 20, rng);
    if (worst >= tol) ++rep.failures;
    rep.detail = "worst rel err " + fmt(worst, 3);
    rep.seconds = timer.secs();
    return rep;
}

SweepReport encoder_invariance_sweep(int cases, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "encoder-invariance";
    constexpr double tol = 1e-9;

    for (int c = 0; c < cases; ++c) {
        ++rep.cases;
        const bool pdp = c % 2 == 1;
        PolicyConfig cfg;
        cfg.variant = pdp ? Variant::Cpdptw : Variant::Cvrptw;
        ParamStore store = init_params(cfg, Rng::derive(seed, 0x111 + c));
        Rng rng(Rng::derive(seed, 0x222 + c));

        Tensor base_features, perm_features;
        std::vector<int> node_perm;  // new row index -> old row index
        if (!pdp) {
            const int n = 3 + c % 6;
            const Instance inst = generate_cvrptw(Rng::derive(seed, 0x333 + c), n);
            base_features = featurize(inst, cfg);
            std::vector<int> perm(n);
            for (int i = 0; i < n; ++i) perm[i] = i + 1;
            for (int i = n - 1; i > 0; --i) {
                std::swap(perm[i], perm[rng.uniform_int(0, i)]);
            }
            Instance shuffled = inst;
            for (int i = 0; i < n; ++i) {
                shuffled.nodes[i + 1] = inst.nodes[perm[i]];
                shuffled.nodes[i + 1].id = i + 1;
            }
            perm_features = featurize(shuffled, cfg);
            node_perm.assign(inst.nodes.size(), 0);
            node_perm[0] = 0;
            for (int i = 0; i < n; ++i) node_perm[i + 1] = perm[i];
            node_perm[n + 1] = n + 1;
        } else {
            const int n = 3 + c % 4;
            const PdpInstance inst = generate_pdptw(Rng::derive(seed, 0x444 + c), n);
            base_features = featurize(inst, cfg);
            std::vector<int> perm(n);  // permutation of requests
            for (int i = 0; i < n; ++i) perm[i] = i + 1;
            for (int i = n - 1; i > 0; --i) {
                std::swap(perm[i], perm[rng.uniform_int(0, i)]);
            }
            PdpInstance shuffled = inst;
            for (int i = 0; i < n; ++i) {
                shuffled.nodes[i + 1] = inst.nodes[perm[i]];
                shuffled.nodes[i + 1].id = i + 1;
                shuffled.nodes[i + 1 + n] = inst.nodes[perm[i] + n];
                shuffled.nodes[i + 1 + n].id = i + 1 + n;
            }
            perm_features = featurize(shuffled, cfg);
            node_perm.assign(inst.nodes.size(), 0);
            node_perm[0] = 0;
            for (int i = 0; i < n; ++i) {
                node_perm[i + 1] = perm[i];
                node_perm[i + 1 + n] = perm[i] + n;
            }
            node_perm[2 * n + 1] = 2 * n + 1;
        }

        Tape t1(false), t2(false);
        const Embeddings e1 = encode(t1, base_features, store, cfg);
        const Embeddings e2 = encode(t2, perm_features, store, cfg);
        const Tensor& w1 = t1.value(e1.omega);
        const Tensor& w2 = t2.value(e2.omega);
        double worst = 0.0;
        for (int r = 0; r < w2.rows(); ++r) {
            for (int k = 0; k < w2.cols(); ++k) {
                worst = std::max(worst, std::abs(w2.at(r, k) - w1.at(node_perm[r], k)));
            }
        }
        const Tensor& g1 = t1.value(e1.omega_graph);
        const Tensor& g2 = t2.value(e2.omega_graph);
        for (int k = 0; k < g1.cols(); ++k) {
            worst = std::max(worst, std::abs(g1.at(0, k) - g2.at(0, k)));
        }
        ++rep.checks;
        if (worst > tol) {
            ++rep.failures;
            rep.detail = "max deviation " + fmt(worst, 3);
        }
    }
    rep.seconds = timer.secs();
    return rep;
}

SweepReport decode_normalization_sweep(int rollouts, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "decode-normalization";

    for (int c = 0; c < rollouts; ++c) {
        ++rep.cases;
        const bool pdp = c % 2 == 1;
        PolicyConfig cfg;
        cfg.variant = pdp ? Variant::Cpdptw : Variant::Cvrptw;
        ParamStore store = init_params(cfg, Rng::derive(seed, 0x888 + c));
        Rng rng(Rng::derive(seed, 0x999 + c));

        auto drive = [&](auto sim) {
            Tape tape(false);
            const Embeddings emb = encode(tape, featurize(sim.instance(), cfg), store, cfg);
            auto state = sim.initial();
            while (!sim.terminal(state)) {
                const auto mask = sim.mask(state);
                const Var pv = decode_step(tape, emb, sim.context(state), mask, store, cfg);
                const Tensor& p = tape.value(pv);
                double total = 0.0;
                std::vector<int> feasible;
                for (int i = 0; i < p.cols(); ++i) {
                    total += p.at(0, i);
                    if (!mask[i] && p.at(0, i) != 0.0) ++rep.failures;  // exact zero required
                    if (mask[i]) feasible.push_back(i);
                }
                ++rep.checks;
                if (std::abs(total - 1.0) > 1e-12) ++rep.failures;
                state = sim.apply(state,
                                  feasible[rng.uniform_int(0, static_cast<int>(feasible.size()) - 1)]);
            }
        };

        if (pdp) {
            const PdpInstance inst = generate_pdptw(Rng::derive(seed, 0xAAA + c), 3 + c % 4);
            const DistanceMatrix d = travel_matrix(inst);
            drive(PdptwSim(inst, d));
        } else {
            const Instance inst = generate_cvrptw(Rng::derive(seed, 0xBBB + c), 4 + c % 5);
            const DistanceMatrix d = travel_matrix(inst);
            drive(CvrptwSim(inst, d, TwMode::Hard));
        }
    }
    rep.seconds = timer.secs();
    return rep;
}

SweepReport complexity_fit_sweep(const std::vector<int>& sizes, double max_exponent,
                                 double max_ratio_factor, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "complexity-fit";

    GenProfile wide;
    wide.p_tw = 0.0;        // full-horizon windows keep long chains feasible
    wide.horizon = 400.0;
    wide.capacity = 1e9;
    constexpr int reps = 5;

    std::vector<double> mean_ops;
    for (const int w : sizes) {
        double total = 0.0;
        for (int r = 0; r < reps; ++r) {
            const PdpInstance inst =
                generate_pdptw(Rng::derive(seed, 0x777 + r), std::max(70, w + 6), wide);
            const DistanceMatrix d = travel_matrix(inst);
            PdpState state = initial_pdp_state(inst);
            int next_pickup = 1;
            while (state.pending() < w) {
                state = step_pdp(state, next_pickup++, inst, d);
            }
            OpCounter counter;
            const SlackTable table = precompute(state, inst, d, &counter);
            int tested = 0;
            for (int u = next_pickup; u <= inst.requests() && tested < 3; ++u, ++tested) {
                check_insertion(state, table, u, inst, d, &counter);
            }
            total += static_cast<double>(counter.ops);
        }
        mean_ops.push_back(total / reps);
        ++rep.cases;
    }

    // least-squares slope in log-log space
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int k = static_cast<int>(sizes.size());
    for (int i = 0; i < k; ++i) {
        const double x = std::log(static_cast<double>(sizes[i]));
        const double y = std::log(mean_ops[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);

    // constant-factor guard normalized by the full chain length (the
    // precompute runs over current node + gamma + depot = w + 2 entries)
    double min_ratio = 1e300, max_ratio = 0.0;
    for (int i = 0; i < k; ++i) {
        const double chain = static_cast<double>(sizes[i]) + 2.0;
        const double r = mean_ops[i] / (chain * chain);
        min_ratio = std::min(min_ratio, r);
        max_ratio = std::max(max_ratio, r);
    }

    rep.checks = 2;
    if (slope > max_exponent) ++rep.failures;
    if (max_ratio / min_ratio > max_ratio_factor) ++rep.failures;
    rep.detail = "fit exponent " + fmt(slope, 4) + ", ops/w^2 spread x" +
                 fmt(max_ratio / min_ratio, 3);
    rep.seconds = timer.secs();
    return rep;
}

SweepReport lexicographic_cost_sweep(int pairs, std::uint64_t seed) {
    Timer timer;
    SweepReport rep;
    rep.suite = "lexicographic-cost";
    Rng rng(Rng::derive(seed, 0x1E));
    for (int c = 0; c < pairs; ++c) {
        ++rep.cases;
        const int n = 4 + static_cast<int>(rng.uniform_int(0, 6));
        const Instance inst = generate_cvrptw(Rng::derive(seed, 0x2E + c), n);
        const DistanceMatrix d = travel_matrix(inst);

        auto random_solution = [&]() {
            std::vector<int> customers(n);
            for (int i = 0; i < n; ++i) customers[i] = i + 1;
            for (int i = n - 1; i > 0; --i) std::swap(customers[i], customers[rng.uniform_int(0, i)]);
            const int k = 1 + static_cast<int>(rng.uniform_int(0, n - 1));
            Solution sol;
            sol.instance_id = inst.id;
            sol.routes.assign(k, {0});
            for (int i = 0; i < n; ++i) sol.routes[i % k].push_back(customers[i]);
            for (auto& route : sol.routes) route.push_back(inst.depot_end());
            return sol;
        };
        const Solution s1 = random_solution();
        const Solution s2 = random_solution();
        if (s1.vehicles() == s2.vehicles()) continue;
        ++rep.checks;
        const double c1 = solution_cost(s1, inst, d, Objective::vehicles_then_distance());
        const double c2 = solution_cost(s2, inst, d, Objective::vehicles_then_distance());
        const bool ordered = (s1.vehicles() < s2.vehicles()) == (c1 < c2);
        if (!ordered) ++rep.failures;
    }
    rep.seconds = timer.secs();
    return rep;
}

}  // namespace routeworks
