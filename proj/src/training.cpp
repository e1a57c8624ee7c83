#include "routeworks/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "routeworks/rng.hpp"

namespace routeworks {

namespace {

std::vector<int> pick_starts(std::vector<int> candidates, int n, std::uint64_t seed) {
    if (candidates.empty()) {
        throw ContractViolation("sample_start_nodes: no feasible first action");
    }
    Rng rng(seed);
    // partial Fisher-Yates
    const int take = std::min<int>(n, static_cast<int>(candidates.size()));
    for (int i = 0; i < take; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(0, static_cast<int>(candidates.size()) - 1 - i));
        std::swap(candidates[i], candidates[j]);
    }
    std::vector<int> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(candidates[i % take]);
    return out;
}

}  // namespace

std::vector<int> sample_start_nodes(const Instance& inst, const DistanceMatrix& d, TwMode mode,
                                    int n, std::uint64_t seed) {
    const auto mask = feasible_mask(initial_state(inst), inst, d, mode);
    std::vector<int> candidates;
    for (int i = 1; i <= inst.customers(); ++i) {
        if (mask[i]) candidates.push_back(i);
    }
    return pick_starts(std::move(candidates), n, seed);
}

std::vector<int> sample_start_nodes(const PdpInstance& inst, const DistanceMatrix& d, int n,
                                    std::uint64_t seed) {
    auto candidates = feasible_actions(initial_pdp_state(inst), inst, d);
    candidates.erase(std::remove(candidates.begin(), candidates.end(), inst.depot_end()),
                     candidates.end());
    return pick_starts(std::move(candidates), n, seed);
}

double training_cost(const TrainConfig& cfg, const Solution& sol, const Instance& inst,
                     const DistanceMatrix& d) {
    const Objective obj = cfg.tw_mode == TwMode::Soft ? Objective::soft_penalized(cfg.soft_beta)
                                                      : Objective::distance();
    return solution_cost(sol, inst, d, obj);
}

double training_cost(const TrainConfig& cfg, const Solution& sol, const PdpInstance& inst,
                     const DistanceMatrix& d) {
    (void)cfg;
    return solution_cost(sol, inst, d, Objective::distance());
}

namespace {

struct InstanceResult {
    double baseline = 0.0;
    double best = 0.0;
    double sum = 0.0;
};

// Runs one instance's POMO group on its own tape and accumulates the
// advantage-weighted gradient.
template <typename Inst, typename Sim>
InstanceResult run_instance(const Inst& inst, const Sim& sim, ParamStore& store,
                            const TrainConfig& cfg, std::uint64_t inst_seed, Gradients& grads) {
    const int n_starts = cfg.pomo_starts;
    Tape tape;
    const Tensor features = featurize(inst, cfg.policy);
    const Embeddings emb = encode(tape, features, store, cfg.policy);

    std::vector<int> starts;
    if constexpr (std::is_same_v<Sim, PdptwSim>) {
        starts = sample_start_nodes(inst, sim.dist(), n_starts, Rng::derive(inst_seed, 1));
    } else {
        starts = sample_start_nodes(inst, sim.dist(), TwMode::Hard, n_starts,
                                    Rng::derive(inst_seed, 1));
    }

    std::vector<Var> logps(n_starts);
    std::vector<double> costs(n_starts);
    for (int j = 0; j < n_starts; ++j) {
        const auto r = rollout(tape, emb, sim, store, cfg.policy, DecodeMode::Sample,
                               Rng::derive(inst_seed, 100 + j), starts[j]);
        logps[j] = r.log_prob_var;
        costs[j] = training_cost(cfg, r.solution, inst, sim.dist());
    }

    InstanceResult res;
    for (const double c : costs) res.sum += c;
    res.baseline = res.sum / n_starts;
    res.best = *std::min_element(costs.begin(), costs.end());

    const double scale = 1.0 / (static_cast<double>(cfg.batch) * n_starts);
    Var loss;
    for (int j = 0; j < n_starts; ++j) {
        Var term = tape.scale(logps[j], (costs[j] - res.baseline) * scale);
        loss = loss.valid() ? tape.add(loss, term) : term;
    }
    tape.backward(loss, grads);
    return res;
}

}  // namespace

BatchStats train_step(ParamStore& store, const TrainConfig& cfg, std::int64_t global_step) {
    if (cfg.pomo_starts < 2) {
        throw ContractViolation("train_step: the POMO baseline needs at least 2 starts");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t step_seed = Rng::derive(cfg.seed, 0x73746570ULL + static_cast<std::uint64_t>(global_step));

    BatchStats stats;
    stats.baselines.reserve(cfg.batch);
    Gradients grads = store.zero_grads();
    double best = 0.0;
    double total = 0.0;
    bool have_best = false;

    for (int b = 0; b < cfg.batch; ++b) {
        const std::uint64_t inst_seed = Rng::derive(step_seed, b);
        InstanceResult res;
        if (cfg.variant == Variant::Cpdptw) {
            const PdpInstance inst = generate_pdptw(inst_seed, cfg.customers, cfg.profile);
            const DistanceMatrix d = travel_matrix(inst);
            res = run_instance(inst, PdptwSim(inst, d), store, cfg, inst_seed, grads);
        } else {
            const Instance inst = generate_cvrptw(inst_seed, cfg.customers, cfg.profile);
            const DistanceMatrix d = travel_matrix(inst);
            res = run_instance(inst, CvrptwSim(inst, d, cfg.tw_mode), store, cfg, inst_seed,
                               grads);
        }
        stats.baselines.push_back(res.baseline);
        total += res.sum;
        if (!have_best || res.best < best) {
            best = res.best;
            have_best = true;
        }
    }

    stats.mean_cost = total / (static_cast<double>(cfg.batch) * cfg.pomo_starts);
    stats.best_cost = best;
    stats.grad_norm = grads.norm();
    store.adam_step(grads, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

void train(const TrainConfig& cfg, const std::string& resume_from,
           const std::function<void(int, int, const BatchStats&)>& on_step) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    ParamStore store = resume_from.empty() ? init_params(cfg.policy, cfg.seed)
                                           : ParamStore::load_file(resume_from);
    std::int64_t global_step = store.adam_t();  // one Adam step per training step

    const std::string log_path = cfg.out_dir + "/training_log.csv";
    std::ofstream log(log_path, global_step == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw ContractViolation("train: cannot open " + log_path);
    if (global_step == 0) {
        log << "# seed=" << cfg.seed << " variant=" << variant_name(cfg.variant)
            << " batch=" << cfg.batch << " pomo_starts=" << cfg.pomo_starts
            << " lr=" << cfg.lr << " customers=" << cfg.customers << "\n";
        log << "epoch,step,mean_cost,best_cost,grad_norm,seconds\n";
    }
    log.precision(12);

    while (global_step < static_cast<std::int64_t>(cfg.epochs) * cfg.steps_per_epoch) {
        const int epoch = static_cast<int>(global_step / cfg.steps_per_epoch) + 1;
        const int step_in_epoch = static_cast<int>(global_step % cfg.steps_per_epoch) + 1;
        const BatchStats stats = train_step(store, cfg, global_step);
        ++global_step;
        log << epoch << "," << step_in_epoch << "," << stats.mean_cost << ","
            << stats.best_cost << "," << stats.grad_norm << "," << stats.seconds << "\n";
        log.flush();
        if (on_step) on_step(epoch, step_in_epoch, stats);
        if (step_in_epoch == cfg.steps_per_epoch) {
            save_policy(cfg.out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt", store,
                        cfg.policy);
        }
    }
}

}  // namespace routeworks
