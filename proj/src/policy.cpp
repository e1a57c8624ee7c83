#include "routeworks/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "routeworks/rng.hpp"

namespace routeworks {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Cvrp: return "cvrp";
        case Variant::Cvrptw: return "cvrptw";
        case Variant::Cpdptw: return "cpdptw";
    }
    return "cvrptw";
}

Variant variant_from_name(const std::string& name) {
    if (name == "cvrp") return Variant::Cvrp;
    if (name == "cvrptw") return Variant::Cvrptw;
    if (name == "cpdptw") return Variant::Cpdptw;
    throw ContractViolation("unknown variant: " + name);
}

int PolicyConfig::input_dim() const {
    switch (variant) {
        case Variant::Cvrp: return 3;
        case Variant::Cvrptw: return 5;
        case Variant::Cpdptw: return pair_encoding ? 8 : 6;
    }
    return 5;
}

int PolicyConfig::context_extra() const {
    if (variant == Variant::Cvrp) return 1;  // residual capacity
    return context_clock ? 2 : 1;            // + current clock
}

Tensor featurize(const Instance& inst, const PolicyConfig& cfg) {
    if (cfg.variant == Variant::Cpdptw) {
        throw ContractViolation("featurize: C-PDP-TW variant needs a PdpInstance");
    }
    const int n = static_cast<int>(inst.nodes.size());
    const double horizon = inst.horizon_close();
    Tensor f(n, cfg.input_dim());
    for (int i = 0; i < n; ++i) {
        const NodeRec& rec = inst.nodes[i];
        f.at(i, 0) = rec.x;
        f.at(i, 1) = rec.y;
        f.at(i, 2) = rec.demand / inst.capacity;
        if (cfg.variant == Variant::Cvrptw) {
            f.at(i, 3) = rec.tw_open / horizon;
            f.at(i, 4) = rec.tw_close / horizon;
        }
    }
    return f;
}

Tensor featurize(const PdpInstance& inst, const PolicyConfig& cfg) {
    if (cfg.variant != Variant::Cpdptw) {
        throw ContractViolation("featurize: PdpInstance needs the C-PDP-TW variant");
    }
    const int n = static_cast<int>(inst.nodes.size());
    const double horizon = inst.horizon_close();
    Tensor f(n, cfg.input_dim());
    for (int i = 0; i < n; ++i) {
        const NodeRec& rec = inst.nodes[i];
        f.at(i, 0) = rec.x;
        f.at(i, 1) = rec.y;
        f.at(i, 2) = rec.demand / inst.capacity;
        f.at(i, 3) = rec.tw_open / horizon;
        f.at(i, 4) = rec.tw_close / horizon;
        double flag = 0.0;
        if (inst.is_pickup(i)) flag = -1.0;
        else if (inst.is_delivery(i)) flag = 1.0;
        f.at(i, 5) = flag;
        if (cfg.pair_encoding && inst.is_pickup(i)) {
            const NodeRec& del = inst.nodes[inst.delivery_of(i)];
            f.at(i, 6) = del.x;
            f.at(i, 7) = del.y;
        }
    }
    return f;
}

namespace {

Tensor uniform_init(int rows, int cols, double span, Rng& rng) {
    Tensor t(rows, cols);
    for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-span, span);
    return t;
}

Tensor const_init(int rows, int cols, double v) {
    Tensor t(rows, cols);
    for (int i = 0; i < t.size(); ++i) t.data()[i] = v;
    return t;
}

}  // namespace

ParamStore init_params(const PolicyConfig& cfg, std::uint64_t seed) {
    if (cfg.d_emb % cfg.heads != 0) {
        throw ContractViolation("PolicyConfig: d_emb must be divisible by heads");
    }
    Rng rng(Rng::derive(seed, 0x706172));  // "par"
    ParamStore store;
    const int d = cfg.d_emb;
    auto linear = [&](const std::string& name, int in, int out, bool bias) {
        const double span = 1.0 / std::sqrt(static_cast<double>(in));
        store.add(name + ".W", uniform_init(in, out, span, rng));
        if (bias) store.add(name + ".b", uniform_init(1, out, span, rng));
    };

    linear("embed", cfg.input_dim(), d, true);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "enc" + std::to_string(l);
        linear(p + ".attn.q", d, d, false);
        linear(p + ".attn.k", d, d, false);
        linear(p + ".attn.v", d, d, false);
        linear(p + ".attn.o", d, d, false);
        store.add(p + ".norm1.gain", const_init(1, d, 1.0));
        store.add(p + ".norm1.bias", const_init(1, d, 0.0));
        linear(p + ".ff.1", d, cfg.ff_dim, true);
        linear(p + ".ff.2", cfg.ff_dim, d, true);
        store.add(p + ".norm2.gain", const_init(1, d, 1.0));
        store.add(p + ".norm2.bias", const_init(1, d, 0.0));
    }
    linear("dec.proj", d + cfg.context_extra(), d, false);
    linear("dec.glimpse.q", d, d, false);
    linear("dec.glimpse.k", d, d, false);
    linear("dec.glimpse.v", d, d, false);
    linear("dec.glimpse.o", d, d, false);
    linear("dec.final.q", d, d, false);
    linear("dec.final.k", d, d, false);
    return store;
}

namespace {

Var multi_head_attention(Tape& tape, Var query, Var q_w, Var keys, Var values, Var out_w,
                         const PolicyConfig& cfg, const std::vector<std::uint8_t>* mask) {
    const int dk = cfg.d_key();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    Var q = tape.matmul(query, q_w);
    std::vector<Var> heads;
    heads.reserve(cfg.heads);
    for (int h = 0; h < cfg.heads; ++h) {
        const int c0 = h * dk, c1 = (h + 1) * dk;
        Var qh = tape.slice_cols(q, c0, c1);
        Var kh = tape.slice_cols(keys, c0, c1);
        Var vh = tape.slice_cols(values, c0, c1);
        Var scores = tape.scale(tape.matmul(qh, kh, false, true), inv_sqrt_dk);
        Var attn = tape.softmax(scores, mask);
        heads.push_back(tape.matmul(attn, vh));
    }
    return tape.matmul(tape.concat_cols(heads), out_w);
}

Var param_var(Tape& tape, const ParamStore& store, const std::string& name) {
    const int idx = store.index_of(name);
    if (idx < 0) throw ContractViolation("missing parameter " + name);
    return tape.param(store, idx);
}

}  // namespace

Embeddings encode(Tape& tape, const Tensor& features, const ParamStore& store,
                  const PolicyConfig& cfg) {
    if (features.cols() != cfg.input_dim()) {
        throw ContractViolation("encode: feature dimension does not match the config");
    }
    Var x = tape.constant(features);
    Var z = tape.add_rowvec(tape.matmul(x, param_var(tape, store, "embed.W")),
                            param_var(tape, store, "embed.b"));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "enc" + std::to_string(l);
        Var keys = tape.matmul(z, param_var(tape, store, p + ".attn.k.W"));
        Var values = tape.matmul(z, param_var(tape, store, p + ".attn.v.W"));
        Var mha = multi_head_attention(tape, z, param_var(tape, store, p + ".attn.q.W"), keys,
                                       values, param_var(tape, store, p + ".attn.o.W"), cfg,
                                       nullptr);
        z = tape.instance_norm(tape.add(z, mha), param_var(tape, store, p + ".norm1.gain"),
                               param_var(tape, store, p + ".norm1.bias"));
        Var ff = tape.add_rowvec(
            tape.matmul(
                tape.relu(tape.add_rowvec(tape.matmul(z, param_var(tape, store, p + ".ff.1.W")),
                                          param_var(tape, store, p + ".ff.1.b"))),
                param_var(tape, store, p + ".ff.2.W")),
            param_var(tape, store, p + ".ff.2.b"));
        z = tape.instance_norm(tape.add(z, ff), param_var(tape, store, p + ".norm2.gain"),
                               param_var(tape, store, p + ".norm2.bias"));
    }
    Embeddings emb;
    emb.omega = z;
    emb.omega_graph = tape.mean_rows(z);
    emb.glimpse_k = tape.matmul(z, param_var(tape, store, "dec.glimpse.k.W"));
    emb.glimpse_v = tape.matmul(z, param_var(tape, store, "dec.glimpse.v.W"));
    emb.final_k = tape.matmul(z, param_var(tape, store, "dec.final.k.W"));
    emb.n = features.rows();
    return emb;
}

Var decode_step(Tape& tape, const Embeddings& emb, const DecoderContext& ctx,
                const std::vector<std::uint8_t>& mask, const ParamStore& store,
                const PolicyConfig& cfg) {
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) {
        throw ContractViolation("decode_step: empty feasibility mask");
    }
    std::vector<double> extra = {ctx.capacity_frac};
    if (cfg.context_extra() > 1) extra.push_back(ctx.clock_frac);
    Var ctx_in = tape.concat_cols(
        {tape.row(emb.omega, ctx.last_node), tape.constant(Tensor::row(std::move(extra)))});
    Var context = tape.add(emb.omega_graph,
                           tape.matmul(ctx_in, param_var(tape, store, "dec.proj.W")));

    Var glimpse = multi_head_attention(tape, context, param_var(tape, store, "dec.glimpse.q.W"),
                                       emb.glimpse_k, emb.glimpse_v,
                                       param_var(tape, store, "dec.glimpse.o.W"), cfg, &mask);
    Var qf = tape.matmul(glimpse, param_var(tape, store, "dec.final.q.W"));
    Var logits = tape.scale(tape.matmul(qf, emb.final_k, false, true),
                            1.0 / std::sqrt(static_cast<double>(cfg.d_emb)));
    return tape.softmax(tape.tanh_clip(logits, cfg.logit_clip), &mask);
}

DecoderContext CvrptwSim::context(const State& s) const {
    DecoderContext ctx;
    ctx.last_node = s.current;
    ctx.capacity_frac = (inst_->capacity - s.load_used) / inst_->capacity;
    ctx.clock_frac = s.clock / inst_->horizon_close();
    return ctx;
}

std::vector<std::uint8_t> PdptwSim::mask(const State& s) const {
    std::vector<std::uint8_t> m(inst_->nodes.size(), 0);
    for (const int a : feasible_actions(s, *inst_, *d_)) m[a] = 1;
    return m;
}

DecoderContext PdptwSim::context(const State& s) const {
    DecoderContext ctx;
    ctx.last_node = s.current();
    ctx.capacity_frac = (inst_->capacity - s.load_used) / inst_->capacity;
    const NodeRec& cur = inst_->nodes[s.current()];
    ctx.clock_frac = (s.est_current() + cur.service) / inst_->horizon_close();
    return ctx;
}

namespace {

int choose_action(const Tensor& probs, const std::vector<std::uint8_t>& mask, DecodeMode mode,
                  Rng& rng) {
    const int n = probs.cols();
    if (mode == DecodeMode::Greedy) {
        int best = -1;
        double best_p = -1.0;
        for (int i = 0; i < n; ++i) {
            if (!mask[i]) continue;
            if (probs.at(0, i) > best_p) {  // ties resolve to the lowest index
                best_p = probs.at(0, i);
                best = i;
            }
        }
        return best;
    }
    const double u = rng.uniform();
    double acc = 0.0;
    int last_feasible = -1;
    for (int i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        last_feasible = i;
        acc += probs.at(0, i);
        if (u < acc) return i;
    }
    return last_feasible;  // u fell into the rounding tail
}

}  // namespace

template <typename Sim>
RolloutResult rollout(Tape& tape, const Embeddings& emb, const Sim& sim, const ParamStore& store,
                      const PolicyConfig& cfg, DecodeMode mode, std::uint64_t seed,
                      int start_node) {
    RolloutResult out;
    Rng rng(seed);
    typename Sim::State state = sim.initial();
    Var logp;
    bool first = true;
    while (!sim.terminal(state)) {
        int action;
        if (first && start_node >= 0) {
            action = start_node;
        } else {
            const auto mask = sim.mask(state);
            Var p = decode_step(tape, emb, sim.context(state), mask, store, cfg);
            action = choose_action(tape.value(p), mask, mode, rng);
            Var step_logp = tape.log(tape.pick(p, 0, action));
            logp = logp.valid() ? tape.add(logp, step_logp) : step_logp;
        }
        first = false;
        state = sim.apply(state, action);
        out.actions.push_back(action);
    }
    if (!logp.valid()) logp = tape.constant(Tensor::scalar(0.0));
    out.log_prob_var = logp;
    out.log_prob = tape.value(logp).value();
    out.solution = sim.solution(state);
    return out;
}

template <typename Sim>
Var replay_log_prob(Tape& tape, const Embeddings& emb, const Sim& sim, const ParamStore& store,
                    const PolicyConfig& cfg, const std::vector<int>& actions, bool first_forced) {
    typename Sim::State state = sim.initial();
    Var logp;
    for (std::size_t k = 0; k < actions.size(); ++k) {
        if (!(k == 0 && first_forced)) {
            const auto mask = sim.mask(state);
            Var p = decode_step(tape, emb, sim.context(state), mask, store, cfg);
            Var step_logp = tape.log(tape.pick(p, 0, actions[k]));
            logp = logp.valid() ? tape.add(logp, step_logp) : step_logp;
        }
        state = sim.apply(state, actions[k]);
    }
    if (!logp.valid()) logp = tape.constant(Tensor::scalar(0.0));
    return logp;
}

template RolloutResult rollout<CvrptwSim>(Tape&, const Embeddings&, const CvrptwSim&,
                                          const ParamStore&, const PolicyConfig&, DecodeMode,
                                          std::uint64_t, int);
template RolloutResult rollout<PdptwSim>(Tape&, const Embeddings&, const PdptwSim&,
                                         const ParamStore&, const PolicyConfig&, DecodeMode,
                                         std::uint64_t, int);
template Var replay_log_prob<CvrptwSim>(Tape&, const Embeddings&, const CvrptwSim&,
                                        const ParamStore&, const PolicyConfig&,
                                        const std::vector<int>&, bool);
template Var replay_log_prob<PdptwSim>(Tape&, const Embeddings&, const PdptwSim&,
                                       const ParamStore&, const PolicyConfig&,
                                       const std::vector<int>&, bool);

Solution greedy_heuristic(const Instance& inst, const DistanceMatrix& d, TwMode mode,
                          HeuristicRule) {
    // both rules reduce to nearest-feasible for pure node construction
    RouteState state = initial_state(inst);
    const int depot_end = inst.depot_end();
    while (!state.terminal(inst.customers())) {
        const auto mask = feasible_mask(state, inst, d, mode);
        int best = -1;
        double best_d = 0.0;
        for (int i = 1; i < depot_end; ++i) {
            if (!mask[i]) continue;
            const double dist = d(state.current, i);
            if (best < 0 || dist < best_d) {
                best = i;
                best_d = dist;
            }
        }
        if (best < 0) best = depot_end;
        state = step(state, best, inst, d, mode).next_state;
    }
    return extract_solution(state, inst);
}

Solution greedy_heuristic(const PdpInstance& inst, const DistanceMatrix& d, HeuristicRule rule) {
    PdpState state = initial_pdp_state(inst);
    const int depot_end = inst.depot_end();
    while (!state.terminal(inst)) {
        const auto actions = feasible_actions(state, inst, d);
        SlackTable table;
        if (rule == HeuristicRule::CheapestInsertion) table = precompute(state, inst, d);
        int best = -1;
        double best_score = 0.0;
        for (const int a : actions) {
            if (a == depot_end) continue;
            double score = d(state.current(), a);
            if (rule == HeuristicRule::CheapestInsertion && inst.is_pickup(a)) {
                score += check_insertion(state, table, a, inst, d).added_cost;
            }
            if (best < 0 || score < best_score) {
                best = a;
                best_score = score;
            }
        }
        if (best < 0) best = depot_end;
        state = step_pdp(state, best, inst, d);
    }
    return extract_solution(state, inst);
}

void save_policy(const std::string& path, const ParamStore& store, const PolicyConfig& cfg) {
    store.save_file(path);
    std::ofstream meta(path + ".meta", std::ios::trunc);
    if (!meta) throw ContractViolation("save_policy: cannot open " + path + ".meta");
    meta << "variant " << variant_name(cfg.variant) << "\n";
    meta << "d_emb " << cfg.d_emb << "\n";
    meta << "layers " << cfg.layers << "\n";
    meta << "heads " << cfg.heads << "\n";
    meta << "ff_dim " << cfg.ff_dim << "\n";
    meta << "pair_encoding " << (cfg.pair_encoding ? 1 : 0) << "\n";
    meta << "context_clock " << (cfg.context_clock ? 1 : 0) << "\n";
    meta << "logit_clip " << cfg.logit_clip << "\n";
}

std::pair<ParamStore, PolicyConfig> load_policy(const std::string& path) {
    ParamStore store = ParamStore::load_file(path);
    PolicyConfig cfg;
    std::ifstream meta(path + ".meta");
    if (!meta) throw ContractViolation("load_policy: missing sidecar " + path + ".meta");
    std::string key;
    while (meta >> key) {
        if (key == "variant") {
            std::string v;
            meta >> v;
            cfg.variant = variant_from_name(v);
        } else if (key == "d_emb") meta >> cfg.d_emb;
        else if (key == "layers") meta >> cfg.layers;
        else if (key == "heads") meta >> cfg.heads;
        else if (key == "ff_dim") meta >> cfg.ff_dim;
        else if (key == "pair_encoding") { int v; meta >> v; cfg.pair_encoding = v != 0; }
        else if (key == "context_clock") { int v; meta >> v; cfg.context_clock = v != 0; }
        else if (key == "logit_clip") meta >> cfg.logit_clip;
        else { std::string skip; meta >> skip; }
    }
    return {std::move(store), cfg};
}

}  // namespace routeworks
