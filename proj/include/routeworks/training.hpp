#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "routeworks/instances.hpp"
#include "routeworks/params.hpp"
#include "routeworks/policy.hpp"

namespace routeworks {

struct TrainConfig {
    Variant variant = Variant::Cvrptw;
    TwMode tw_mode = TwMode::Hard;
    double soft_beta = 10.0;      // lateness weight when tw_mode is Soft
    int batch = 80;               // B
    int pomo_starts = 16;         // N
    int epochs = 200;
    int steps_per_epoch = 250;    // 20000 instances / batch of 80
    double lr = 1e-4;
    int customers = 50;           // requests for C-PDP-TW
    std::uint64_t seed = 0;
    GenProfile profile{};
    PolicyConfig policy{};
    std::string out_dir = "runs";
};

struct BatchStats {
    double mean_cost = 0.0;
    double best_cost = 0.0;
    std::vector<double> baselines;  // b_i per instance
    double grad_norm = 0.0;
    double seconds = 0.0;
};

// Distinct feasible first actions, uniformly sampled without replacement;
// cycled when fewer than `n` exist.
std::vector<int> sample_start_nodes(const Instance& inst, const DistanceMatrix& d, TwMode mode,
                                    int n, std::uint64_t seed);
std::vector<int> sample_start_nodes(const PdpInstance& inst, const DistanceMatrix& d, int n,
                                    std::uint64_t seed);

// One REINFORCE step on a fresh batch: B generated instances, N sampled
// rollouts each from sampled starts, shared-mean baseline, Adam update.
BatchStats train_step(ParamStore& store, const TrainConfig& cfg, std::int64_t global_step);

// Full epoch loop: per-epoch checkpoints (epoch_<k>.ckpt) and a CSV log.
// `resume_from` restarts from a checkpoint's recorded step count.
void train(const TrainConfig& cfg, const std::string& resume_from = "",
           const std::function<void(int, int, const BatchStats&)>& on_step = {});

// Training cost of a complete solution under the configured objective.
double training_cost(const TrainConfig& cfg, const Solution& sol, const Instance& inst,
                     const DistanceMatrix& d);
double training_cost(const TrainConfig& cfg, const Solution& sol, const PdpInstance& inst,
                     const DistanceMatrix& d);

}  // namespace routeworks
