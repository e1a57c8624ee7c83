#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routeworks/cvrptw_env.hpp"
#include "routeworks/instances.hpp"
#include "routeworks/params.hpp"
#include "routeworks/pdptw_env.hpp"
#include "routeworks/tensor.hpp"

namespace routeworks {

enum class Variant { Cvrp, Cvrptw, Cpdptw };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct PolicyConfig {
    int d_emb = 128;
    int layers = 3;
    int heads = 8;
    int ff_dim = 512;
    Variant variant = Variant::Cvrptw;
    bool pair_encoding = true;  // C-PDP-TW: pickups carry their delivery's coordinates
    bool context_clock = true;  // TW variants: current clock joins the decoder context
    double logit_clip = 10.0;

    int d_key() const { return d_emb / heads; }
    int input_dim() const;
    int context_extra() const;  // scalars appended to the last-node embedding
};

// Node feature matrix: (x, y, demand/capacity), TW variants add
// (open/L, close/L), C-PDP-TW adds the -1/0/+1 role flag and (optionally)
// the paired delivery coordinates on pickup rows.
Tensor featurize(const Instance& inst, const PolicyConfig& cfg);
Tensor featurize(const PdpInstance& inst, const PolicyConfig& cfg);

ParamStore init_params(const PolicyConfig& cfg, std::uint64_t seed);

// Tape handles for one encoded instance; the decoder keys/values are
// projected once and reused across decode steps.
struct Embeddings {
    Var omega;        // [n, d_emb]
    Var omega_graph;  // [1, d_emb]
    Var glimpse_k;
    Var glimpse_v;
    Var final_k;
    int n = 0;
};

Embeddings encode(Tape& tape, const Tensor& features, const ParamStore& store,
                  const PolicyConfig& cfg);

struct DecoderContext {
    int last_node = 0;
    double capacity_frac = 1.0;  // residual capacity / capacity
    double clock_frac = 0.0;     // departure time / horizon close
};

// One decoding step: masked probabilities over the nodes.
Var decode_step(Tape& tape, const Embeddings& emb, const DecoderContext& ctx,
                const std::vector<std::uint8_t>& mask, const ParamStore& store,
                const PolicyConfig& cfg);

// Environment adapters with the uniform surface the rollout loop needs.
class CvrptwSim {
public:
    CvrptwSim(const Instance& inst, const DistanceMatrix& d, TwMode mode)
        : inst_(&inst), d_(&d), mode_(mode) {}
    using State = RouteState;
    State initial() const { return initial_state(*inst_); }
    bool terminal(const State& s) const { return s.terminal(inst_->customers()); }
    std::vector<std::uint8_t> mask(const State& s) const {
        return feasible_mask(s, *inst_, *d_, mode_);
    }
    State apply(const State& s, int action) const {
        return step(s, action, *inst_, *d_, mode_).next_state;
    }
    DecoderContext context(const State& s) const;
    Solution solution(const State& s) const { return extract_solution(s, *inst_); }
    int node_count() const { return static_cast<int>(inst_->nodes.size()); }
    const Instance& instance() const { return *inst_; }
    const DistanceMatrix& dist() const { return *d_; }

private:
    const Instance* inst_;
    const DistanceMatrix* d_;
    TwMode mode_;
};

class PdptwSim {
public:
    PdptwSim(const PdpInstance& inst, const DistanceMatrix& d) : inst_(&inst), d_(&d) {}
    using State = PdpState;
    State initial() const { return initial_pdp_state(*inst_); }
    bool terminal(const State& s) const { return s.terminal(*inst_); }
    std::vector<std::uint8_t> mask(const State& s) const;
    State apply(const State& s, int action) const { return step_pdp(s, action, *inst_, *d_); }
    DecoderContext context(const State& s) const;
    Solution solution(const State& s) const { return extract_solution(s, *inst_); }
    int node_count() const { return static_cast<int>(inst_->nodes.size()); }
    const PdpInstance& instance() const { return *inst_; }
    const DistanceMatrix& dist() const { return *d_; }

private:
    const PdpInstance* inst_;
    const DistanceMatrix* d_;
};

enum class DecodeMode { Greedy, Sample };

struct RolloutResult {
    Solution solution;
    double log_prob = 0.0;   // sum over decoded (non-forced) steps
    Var log_prob_var;        // valid on a recording tape
    std::vector<int> actions;
};

// Encode-once / decode-many construction.  `start_node` >= 0 forces the
// first action (POMO-style start) without a decode step; its probability is
// not part of the returned log-prob.
template <typename Sim>
RolloutResult rollout(Tape& tape, const Embeddings& emb, const Sim& sim, const ParamStore& store,
                      const PolicyConfig& cfg, DecodeMode mode, std::uint64_t seed,
                      int start_node = -1);

// Log-probability of a fixed action sequence under the current parameters
// (used by the frozen-batch gradient checks).
template <typename Sim>
Var replay_log_prob(Tape& tape, const Embeddings& emb, const Sim& sim, const ParamStore& store,
                    const PolicyConfig& cfg, const std::vector<int>& actions, bool first_forced);

enum class HeuristicRule { NearestFeasible, CheapestInsertion };

Solution greedy_heuristic(const Instance& inst, const DistanceMatrix& d, TwMode mode,
                          HeuristicRule rule);
Solution greedy_heuristic(const PdpInstance& inst, const DistanceMatrix& d, HeuristicRule rule);

// Checkpoint plus a sidecar text header with the policy metadata.
void save_policy(const std::string& path, const ParamStore& store, const PolicyConfig& cfg);
std::pair<ParamStore, PolicyConfig> load_policy(const std::string& path);

}  // namespace routeworks
