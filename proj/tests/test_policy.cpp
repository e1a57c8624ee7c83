#include "routeworks/policy.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "routeworks/rng.hpp"
#include "routeworks/verify.hpp"

using namespace routeworks;

TEST_CASE("featurize dimensions and depot conventions") {
    PolicyConfig cv;
    cv.variant = Variant::Cvrptw;
    const Instance inst = generate_cvrptw(1, 6);
    const Tensor f = featurize(inst, cv);
    CHECK(f.cols() == 5);
    CHECK(f.rows() == 8);
    CHECK(f.at(0, 2) == 0.0);  // depot demand
    CHECK(f.at(0, 3) == 0.0);
    CHECK(f.at(0, 4) == 1.0);  // full horizon

    PolicyConfig pd;
    pd.variant = Variant::Cpdptw;
    const PdpInstance pinst = generate_pdptw(1, 4);
    const Tensor g = featurize(pinst, pd);
    CHECK(g.cols() == 8);
    CHECK(g.at(0, 5) == 0.0);                       // depot flag
    CHECK(g.at(1, 5) == -1.0);                      // pickup flag
    CHECK(g.at(1 + pinst.requests(), 5) == 1.0);    // delivery flag
    CHECK(g.at(1, 6) == pinst.nodes[pinst.delivery_of(1)].x);
    CHECK(g.at(1 + pinst.requests(), 6) == 0.0);    // deliveries zero-padded

    pd.pair_encoding = false;
    CHECK(featurize(pinst, pd).cols() == 6);

    PolicyConfig plain;
    plain.variant = Variant::Cvrp;
    CHECK(featurize(inst, plain).cols() == 3);
}

TEST_CASE("generated features stay within [-1, 1]") {
    PolicyConfig pd;
    pd.variant = Variant::Cpdptw;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const PdpInstance inst = generate_pdptw(seed, 5);
        const Tensor f = featurize(inst, pd);
        for (int i = 0; i < f.size(); ++i) {
            CHECK(f.data()[i] >= -1.0 - 1e-12);
            CHECK(f.data()[i] <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("encoder output shape and graph embedding mean") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    const Instance inst = generate_cvrptw(2, 5);
    ParamStore store = init_params(cfg, 0);
    Tape tape(false);
    const Embeddings emb = encode(tape, featurize(inst, cfg), store, cfg);
    const Tensor& omega = tape.value(emb.omega);
    CHECK(omega.rows() == 7);  // N + 2
    CHECK(omega.cols() == cfg.d_emb);
    const Tensor& graph = tape.value(emb.omega_graph);
    for (int c = 0; c < cfg.d_emb; ++c) {
        double mean = 0.0;
        for (int r = 0; r < omega.rows(); ++r) mean += omega.at(r, c);
        mean /= omega.rows();
        CHECK(std::abs(graph.at(0, c) - mean) <= 1e-12);
    }
}

TEST_CASE("encoder permutation equivariance sweep") {
    const auto rep = encoder_invariance_sweep(6, 1);
    INFO(rep.line());
    CHECK(rep.pass());
}

TEST_CASE("single feasible node gets probability one") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    const Instance inst = generate_cvrptw(3, 4);
    ParamStore store = init_params(cfg, 1);
    Tape tape(false);
    const Embeddings emb = encode(tape, featurize(inst, cfg), store, cfg);
    std::vector<std::uint8_t> mask(inst.nodes.size(), 0);
    mask[2] = 1;
    DecoderContext ctx;
    const Var p = decode_step(tape, emb, ctx, mask, store, cfg);
    CHECK(tape.value(p).at(0, 2) == 1.0);
    std::vector<std::uint8_t> none(inst.nodes.size(), 0);
    CHECK_THROWS_AS(decode_step(tape, emb, ctx, none, store, cfg), ContractViolation);
}

TEST_CASE("decoder normalization sweep") {
    const auto rep = decode_normalization_sweep(6, 2);
    INFO(rep.line());
    CHECK(rep.pass());
}

TEST_CASE("greedy rollouts are deterministic and sampled ones reproducible") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    const Instance inst = generate_cvrptw(4, 8);
    const auto d = travel_matrix(inst);
    ParamStore store = init_params(cfg, 2);
    const CvrptwSim sim(inst, d, TwMode::Hard);

    Tape t1(false), t2(false);
    const auto r1 = rollout(t1, encode(t1, featurize(inst, cfg), store, cfg), sim, store, cfg,
                            DecodeMode::Greedy, 0);
    const auto r2 = rollout(t2, encode(t2, featurize(inst, cfg), store, cfg), sim, store, cfg,
                            DecodeMode::Greedy, 99);  // greedy ignores the seed
    CHECK(r1.actions == r2.actions);
    CHECK(r1.log_prob == r2.log_prob);

    Tape t3(false), t4(false);
    const auto s1 = rollout(t3, encode(t3, featurize(inst, cfg), store, cfg), sim, store, cfg,
                            DecodeMode::Sample, 1234);
    const auto s2 = rollout(t4, encode(t4, featurize(inst, cfg), store, cfg), sim, store, cfg,
                            DecodeMode::Sample, 1234);
    CHECK(s1.actions == s2.actions);
}

TEST_CASE("log-prob sum equals the product of chosen step probabilities") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    const Instance inst = generate_cvrptw(5, 6);
    const auto d = travel_matrix(inst);
    ParamStore store = init_params(cfg, 3);
    const CvrptwSim sim(inst, d, TwMode::Hard);

    Tape tape(false);
    const Embeddings emb = encode(tape, featurize(inst, cfg), store, cfg);
    const auto r = rollout(tape, emb, sim, store, cfg, DecodeMode::Sample, 42);

    // replay manually, multiplying probabilities
    RouteState state = initial_state(inst);
    double product = 1.0;
    for (const int a : r.actions) {
        const auto mask = feasible_mask(state, inst, d, TwMode::Hard);
        const Var p = decode_step(tape, emb, sim.context(state), mask, store, cfg);
        product *= tape.value(p).at(0, a);
        state = step(state, a, inst, d, TwMode::Hard).next_state;
    }
    CHECK(std::exp(r.log_prob) == doctest::Approx(product).epsilon(1e-9));
}

TEST_CASE("forced POMO starts skip the first decode step") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    const Instance inst = generate_cvrptw(6, 6);
    const auto d = travel_matrix(inst);
    ParamStore store = init_params(cfg, 4);
    const CvrptwSim sim(inst, d, TwMode::Hard);
    Tape tape(false);
    const Embeddings emb = encode(tape, featurize(inst, cfg), store, cfg);
    const auto r = rollout(tape, emb, sim, store, cfg, DecodeMode::Sample, 7, 3);
    CHECK(r.actions.front() == 3);
    // replay excluding the forced first action reproduces the log-prob
    Tape t2(false);
    const Embeddings emb2 = encode(t2, featurize(inst, cfg), store, cfg);
    const Var lp = replay_log_prob(t2, emb2, sim, store, cfg, r.actions, true);
    CHECK(t2.value(lp).value() == doctest::Approx(r.log_prob).epsilon(1e-12));
}

TEST_CASE("hard rollouts from a random policy always validate") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cvrptw;
    ParamStore store = init_params(cfg, 5);
    for (int c = 0; c < 25; ++c) {
        const Instance inst = generate_cvrptw(2000 + c, 3 + c % 8);
        const auto d = travel_matrix(inst);
        const CvrptwSim sim(inst, d, TwMode::Hard);
        Tape tape(false);
        const auto r = rollout(tape, encode(tape, featurize(inst, cfg), store, cfg), sim, store,
                               cfg, DecodeMode::Sample, 100 + c);
        CHECK(validate_solution(r.solution, inst, d).empty());
    }
    PolicyConfig pd;
    pd.variant = Variant::Cpdptw;
    ParamStore pstore = init_params(pd, 6);
    for (int c = 0; c < 25; ++c) {
        const PdpInstance inst = generate_pdptw(3000 + c, 2 + c % 6);
        const auto d = travel_matrix(inst);
        const PdptwSim sim(inst, d);
        Tape tape(false);
        const auto r = rollout(tape, encode(tape, featurize(inst, pd), pstore, pd), sim, pstore,
                               pd, DecodeMode::Sample, 200 + c);
        CHECK(validate_solution(r.solution, inst, d).empty());
    }
}

TEST_CASE("greedy heuristic visits colinear customers in line order") {
    Instance inst;
    inst.id = "line";
    inst.capacity = 100;
    inst.nodes = {{0, 0, 0, 0, 0, 100, 0},
                  {1, 1, 0, 1, 0, 100, 0},
                  {2, 2, 0, 1, 0, 100, 0},
                  {3, 3, 0, 1, 0, 100, 0},
                  {4, 0, 0, 0, 0, 100, 0}};
    const auto d = travel_matrix(inst);
    const Solution sol = greedy_heuristic(inst, d, TwMode::Hard, HeuristicRule::NearestFeasible);
    REQUIRE(sol.routes.size() == 1);
    CHECK(sol.routes[0] == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("heuristic solutions are always feasible and above the exact optimum") {
    for (int c = 0; c < 20; ++c) {
        const Instance inst = generate_cvrptw(4000 + c, 3 + c % 5);
        const auto d = travel_matrix(inst);
        const Solution sol =
            greedy_heuristic(inst, d, TwMode::Hard, HeuristicRule::NearestFeasible);
        CHECK(validate_solution(sol, inst, d).empty());
    }
    for (int c = 0; c < 20; ++c) {
        const PdpInstance inst = generate_pdptw(5000 + c, 2 + c % 5);
        const auto d = travel_matrix(inst);
        for (const auto rule : {HeuristicRule::NearestFeasible, HeuristicRule::CheapestInsertion}) {
            const Solution sol = greedy_heuristic(inst, d, rule);
            CHECK(validate_solution(sol, inst, d).empty());
        }
    }
}

TEST_CASE("greedy heuristic never beats brute force on tiny instances") {
    // exhaustive single-route-set optimum via recursion over feasible actions
    struct Search {
        const Instance& inst;
        const DistanceMatrix& d;
        double best = 1e300;
        Search(const Instance& i, const DistanceMatrix& dm) : inst(i), d(dm) {}
        void go(const RouteState& s, double dist) {
            if (dist >= best) return;
            if (s.terminal(inst.customers())) {
                best = std::min(best, dist);
                return;
            }
            const auto mask = feasible_mask(s, inst, d, TwMode::Hard);
            for (int a = 1; a <= inst.depot_end(); ++a) {
                if (!mask[a]) continue;
                const auto out = step(s, a, inst, d, TwMode::Hard);
                go(out.next_state, dist + out.added_distance);
            }
        }
    };
    for (int c = 0; c < 6; ++c) {
        const Instance inst = generate_cvrptw(6000 + c, 5);
        const auto d = travel_matrix(inst);
        Search search(inst, d);
        search.go(initial_state(inst), 0.0);
        const Solution sol =
            greedy_heuristic(inst, d, TwMode::Hard, HeuristicRule::NearestFeasible);
        const double greedy_cost = solution_cost(sol, inst, d, Objective::distance());
        CHECK(greedy_cost >= search.best - 1e-9);
    }
}

TEST_CASE("policy checkpoints carry their sidecar metadata") {
    PolicyConfig cfg;
    cfg.variant = Variant::Cpdptw;
    cfg.pair_encoding = false;
    cfg.context_clock = false;
    ParamStore store = init_params(cfg, 7);
    const auto path = (std::filesystem::temp_directory_path() / "rw_policy_test.ckpt").string();
    save_policy(path, store, cfg);
    const auto [back, loaded] = load_policy(path);
    CHECK(loaded.variant == Variant::Cpdptw);
    CHECK(loaded.pair_encoding == false);
    CHECK(loaded.context_clock == false);
    CHECK(back.count() == store.count());
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".meta");
}
