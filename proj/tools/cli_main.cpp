#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "routeworks/policy.hpp"
#include "routeworks/report.hpp"
#include "routeworks/rng.hpp"
#include "routeworks/training.hpp"
#include "routeworks/verify.hpp"

namespace fs = std::filesystem;
using namespace routeworks;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// Expands a single '*' wildcard against the parent directory; plain paths
// pass through.
std::vector<std::string> expand_patterns(const std::vector<std::string>& patterns) {
    std::vector<std::string> files;
    for (const auto& pat : patterns) {
        const auto star = pat.find('*');
        if (star == std::string::npos) {
            files.push_back(pat);
            continue;
        }
        const fs::path p(pat);
        const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        const std::string name = p.filename().string();
        const auto s = name.find('*');
        const std::string prefix = name.substr(0, s);
        const std::string suffix = name.substr(s + 1);
        std::vector<std::string> matched;
        if (fs::exists(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                const std::string f = entry.path().filename().string();
                if (f.size() >= prefix.size() + suffix.size() && f.rfind(prefix, 0) == 0 &&
                    f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0) {
                    matched.push_back(entry.path().string());
                }
            }
        }
        std::sort(matched.begin(), matched.end());
        files.insert(files.end(), matched.begin(), matched.end());
    }
    return files;
}

struct SolveOptions {
    std::vector<std::string> patterns;
    std::string checkpoint;
    std::string mode = "greedy";
    int k = 16;
    std::string variant = "cvrptw";
    std::string rounding = "exact";
    std::string out_dir = "solutions";
    std::string tw = "hard";
    std::string best_known_path;
    int max_customers = -1;
    int max_requests = -1;
    std::uint64_t seed = 0;
};

template <typename Sim, typename Inst>
std::pair<Solution, double> policy_solve(const Inst& inst, const Sim& sim,
                                         const ParamStore& store, const PolicyConfig& cfg,
                                         const SolveOptions& opt, std::uint64_t seed) {
    Tape tape(false);
    const Embeddings emb = encode(tape, featurize(inst, cfg), store, cfg);
    const std::size_t base = tape.mark();
    if (opt.mode == "greedy") {
        const auto r = rollout(tape, emb, sim, store, cfg, DecodeMode::Greedy, seed);
        return {r.solution, solution_cost(r.solution, inst, sim.dist(), Objective::distance())};
    }
    // best-of-k sampling, k seeds derived per rollout
    Solution best;
    double best_cost = 0.0;
    bool have = false;
    for (int j = 0; j < opt.k; ++j) {
        const auto r =
            rollout(tape, emb, sim, store, cfg, DecodeMode::Sample, Rng::derive(seed, j));
        const double c = solution_cost(r.solution, inst, sim.dist(), Objective::distance());
        if (!have || c < best_cost) {
            best = r.solution;
            best_cost = c;
            have = true;
        }
        tape.truncate(base);  // drop the decode nodes, keep the encoding
    }
    return {best, best_cost};
}

int cmd_solve(const SolveOptions& opt) {
    const auto files = expand_patterns(opt.patterns);
    if (files.empty()) {
        std::cerr << "solve: no instance files matched\n";
        return 2;
    }
    fs::create_directories(opt.out_dir);

    BestKnown best_known;
    if (!opt.best_known_path.empty()) best_known = load_best_known(opt.best_known_path);

    const Rounding rounding =
        opt.rounding == "solomon" ? Rounding::SolomonTrunc : Rounding::Exact;
    const bool pdp = opt.variant == "cpdptw";
    const bool heuristic_mode = opt.mode == "nearest" || opt.mode == "cheapest";

    ParamStore store;
    PolicyConfig cfg;
    if (!heuristic_mode) {
        if (!opt.checkpoint.empty()) {
            auto loaded = load_policy(opt.checkpoint);
            store = std::move(loaded.first);
            cfg = loaded.second;
        } else {
            cfg.variant = pdp ? Variant::Cpdptw : Variant::Cvrptw;
            store = init_params(cfg, opt.seed);
        }
        if ((cfg.variant == Variant::Cpdptw) != pdp) {
            std::cerr << "solve: checkpoint variant does not match --variant\n";
            return 2;
        }
    }

    std::vector<ResultRow> rows;
    bool all_feasible = true;
    for (const auto& file : files) {
        const auto t0 = std::chrono::steady_clock::now();
        ResultRow row;
        Solution sol;
        double distance = 0.0;
        std::vector<Violation> violations;
        if (pdp) {
            PdpInstance inst = parse_li_lim_text(read_file(file), opt.max_requests);
            inst.id = fs::path(file).stem().string();
            const DistanceMatrix d = travel_matrix(inst, rounding);
            if (heuristic_mode) {
                sol = greedy_heuristic(inst, d,
                                       opt.mode == "nearest" ? HeuristicRule::NearestFeasible
                                                             : HeuristicRule::CheapestInsertion);
                distance = solution_cost(sol, inst, d, Objective::distance());
            } else {
                const PdptwSim sim(inst, d);
                std::tie(sol, distance) =
                    policy_solve(inst, sim, store, cfg, opt, Rng::derive(opt.seed, rows.size()));
            }
            violations = validate_solution(sol, inst, d);
        } else {
            Instance inst = parse_solomon_text(read_file(file), opt.max_customers);
            if (!inst.id.size()) inst.id = fs::path(file).stem().string();
            const DistanceMatrix d = travel_matrix(inst, rounding);
            const TwMode mode = opt.tw == "soft" ? TwMode::Soft : TwMode::Hard;
            if (heuristic_mode) {
                sol = greedy_heuristic(inst, d, mode, HeuristicRule::NearestFeasible);
                distance = solution_cost(sol, inst, d, Objective::distance());
            } else {
                const CvrptwSim sim(inst, d, mode);
                std::tie(sol, distance) =
                    policy_solve(inst, sim, store, cfg, opt, Rng::derive(opt.seed, rows.size()));
            }
            violations = validate_solution(sol, inst, d);
        }
        row.id = sol.instance_id;
        row.vehicles = sol.vehicles();
        row.distance = distance;
        row.feasible = violations.empty();
        row.gap_percent = gap_percent(distance, best_known, row.id);
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all_feasible &= row.feasible;

        write_file(opt.out_dir + "/" + row.id + ".sol", write_solution_text(sol, distance));
        std::cout << row.id << "  vehicles=" << row.vehicles << "  distance=" << row.distance
                  << (row.gap_percent ? "  gap%=" + std::to_string(*row.gap_percent) : "")
                  << "  feasible=" << (row.feasible ? "yes" : "NO") << "\n";
        rows.push_back(std::move(row));
    }
    write_file(opt.out_dir + "/results.csv", result_rows_csv(rows));
    std::cout << "wrote " << rows.size() << " solutions to " << opt.out_dir << "\n";
    return all_feasible ? 0 : 1;
}

TrainConfig parse_train_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::string key, value;
        if (ls >> key >> value) kv[key] = value;
    }
    auto require = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("config: missing key '" + key + "'");
        return it->second;
    };
    auto optional = [&](const std::string& key, const std::string& fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };

    TrainConfig cfg;
    cfg.variant = variant_from_name(require("variant"));
    cfg.customers = std::stoi(require("customers"));
    cfg.batch = std::stoi(require("batch"));
    cfg.pomo_starts = std::stoi(require("pomo_starts"));
    cfg.epochs = std::stoi(require("epochs"));
    cfg.steps_per_epoch = std::stoi(require("steps_per_epoch"));
    cfg.lr = std::stod(require("lr"));
    cfg.seed = std::stoull(require("seed"));
    cfg.out_dir = require("out_dir");
    cfg.tw_mode = optional("tw", "hard") == "soft" ? TwMode::Soft : TwMode::Hard;
    cfg.soft_beta = std::stod(optional("soft_beta", "10"));
    cfg.policy.variant = cfg.variant;
    cfg.policy.d_emb = std::stoi(optional("d_emb", "128"));
    cfg.policy.layers = std::stoi(optional("layers", "3"));
    cfg.policy.heads = std::stoi(optional("heads", "8"));
    cfg.policy.ff_dim = std::stoi(optional("ff_dim", "512"));
    cfg.policy.pair_encoding = optional("pair_encoding", "1") != "0";
    cfg.policy.context_clock = optional("context_clock", "1") != "0";
    cfg.profile.capacity = std::stod(optional("gen_capacity", "40"));
    cfg.profile.horizon = std::stod(optional("gen_horizon", "4.6"));
    cfg.profile.p_tw = std::stod(optional("gen_p_tw", "0.5"));
    cfg.profile.service = std::stod(optional("gen_service", "0.02"));
    return cfg;
}

int cmd_train(const std::string& config_path, const std::string& resume, bool dry_run) {
    const TrainConfig cfg = parse_train_config(config_path);
    std::cout << "config ok: variant=" << variant_name(cfg.variant)
              << " customers=" << cfg.customers << " batch=" << cfg.batch
              << " pomo_starts=" << cfg.pomo_starts << " epochs=" << cfg.epochs
              << " steps_per_epoch=" << cfg.steps_per_epoch << " lr=" << cfg.lr
              << " seed=" << cfg.seed << " out=" << cfg.out_dir << "\n";
    if (dry_run) return 0;
    train(cfg, resume, [&](int epoch, int step, const BatchStats& s) {
        std::cout << "epoch " << epoch << " step " << step << "  mean=" << s.mean_cost
                  << "  best=" << s.best_cost << "  |g|=" << s.grad_norm << "  "
                  << s.seconds << "s\n";
    });
    return 0;
}

int cmd_eval(const std::string& results_path, const std::string& out_csv) {
    const auto rows = parse_result_rows_csv(read_file(results_path));
    const auto fams = aggregate_by_family(rows);
    std::cout << family_table_text(fams);
    if (!out_csv.empty()) {
        write_file(out_csv, family_table_csv(fams));
        std::cout << "wrote " << out_csv << "\n";
    }
    return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seeds, unsigned long long states,
               unsigned long long cases, double inject_bias, const std::string& dump_path) {
    std::vector<SweepReport> reports;
    const bool all = suite == "all";
    if (all || suite == "insertion") {
        reports.push_back(insertion_soundness_sweep(states, static_cast<int>(seeds), inject_bias));
        if (inject_bias == 0.0) reports.push_back(empty_gamma_agreement_sweep(cases));
    }
    if (all || suite == "completeness") {
        reports.push_back(insertion_completeness_measure(cases));
    }
    if (all || suite == "mask") {
        reports.push_back(mask_equivalence_sweep(static_cast<int>(states), 8));
    }
    if (all || suite == "precompute") {
        reports.push_back(precompute_recompute_sweep(static_cast<int>(cases)));
    }
    if (all || suite == "gradient") {
        reports.push_back(gradient_op_sweep());
        reports.push_back(gradient_end_to_end_sweep());
    }
    if (all || suite == "encoder") {
        reports.push_back(encoder_invariance_sweep(8));
        reports.push_back(decode_normalization_sweep(8));
    }
    if (all || suite == "complexity") {
        reports.push_back(complexity_fit_sweep({4, 8, 16, 32, 64}, 2.2, 4.0));
    }
    if (all || suite == "lexicographic") {
        reports.push_back(lexicographic_cost_sweep(static_cast<int>(cases)));
    }
    if (reports.empty()) {
        std::cerr << "verify: unknown suite '" << suite << "'\n";
        return 2;
    }
    bool ok = true;
    std::ostringstream dump;
    for (const auto& r : reports) {
        std::cout << r.line() << "\n";
        dump << r.line() << "\n";
        ok &= r.pass();
    }
    if (!dump_path.empty()) write_file(dump_path, dump.str());
    return ok ? 0 : 1;
}

// Writes the Li&Lim-format companion dataset (locally generated surrogates;
// see data/li_lim/README.md).
int cmd_gen_lilim(const std::string& out_dir) {
    fs::create_directories(out_dir);
    GenProfile lr1;
    lr1.integral = true;
    lr1.coord_scale = 100.0;
    lr1.capacity = 200.0;
    lr1.horizon = 1000.0;
    lr1.service = 10.0;
    lr1.p_tw = 0.65;
    lr1.tw_width_min = 60.0;
    lr1.tw_width_max = 180.0;
    lr1.pd_demand_min = 5;
    lr1.pd_demand_max = 35;

    GenProfile lr2 = lr1;
    lr2.horizon = 3000.0;
    lr2.p_tw = 0.4;
    lr2.tw_width_min = 120.0;
    lr2.tw_width_max = 360.0;

    int written = 0;
    auto emit = [&](const std::string& id, const GenProfile& profile, std::uint64_t seed) {
        PdpInstance inst = generate_pdptw(seed, 53, profile);
        inst.id = id;
        inst.header_vehicles = 25;
        write_file(out_dir + "/" + id + ".txt", serialize_li_lim(inst));
        ++written;
    };
    for (int i = 1; i <= 12; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "lr1%02d", i);
        emit(id, lr1, 710100 + i);
    }
    for (int i = 1; i <= 11; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "lr2%02d", i);
        emit(id, lr2, 720200 + i);
    }
    std::cout << "wrote " << written << " files to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constructive routing workbench (C-VRP-TW / C-PDP-TW)"};
    app.require_subcommand(1);

    SolveOptions solve_opt;
    auto* solve = app.add_subcommand("solve", "solve benchmark instances with a policy");
    solve->add_option("--instances", solve_opt.patterns, "instance files or glob")->required();
    solve->add_option("--checkpoint", solve_opt.checkpoint, "policy checkpoint path");
    solve->add_option("--mode", solve_opt.mode, "greedy|sample|nearest|cheapest")
        ->check(CLI::IsMember({"greedy", "sample", "nearest", "cheapest"}));
    solve->add_option("--k", solve_opt.k, "samples for best-of-k");
    solve->add_option("--variant", solve_opt.variant, "cvrptw|cpdptw")
        ->check(CLI::IsMember({"cvrptw", "cpdptw"}));
    solve->add_option("--rounding", solve_opt.rounding, "solomon|exact")
        ->check(CLI::IsMember({"solomon", "exact"}));
    solve->add_option("--out", solve_opt.out_dir, "output directory");
    solve->add_option("--tw", solve_opt.tw, "hard|soft")->check(CLI::IsMember({"hard", "soft"}));
    solve->add_option("--best-known", solve_opt.best_known_path, "reference table csv");
    solve->add_option("--max-customers", solve_opt.max_customers, "truncate solomon instances");
    solve->add_option("--max-requests", solve_opt.max_requests, "truncate li&lim instances");
    solve->add_option("--seed", solve_opt.seed, "sampling seed");

    std::string train_config, train_resume;
    bool dry_run = false;
    auto* train_cmd = app.add_subcommand("train", "train a policy from a config file");
    train_cmd->add_option("--config", train_config, "config file")->required();
    train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");
    train_cmd->add_flag("--dry-run", dry_run, "validate the config without training");

    std::string eval_results, eval_out;
    std::string eval_group = "family";
    auto* eval_cmd = app.add_subcommand("eval", "aggregate result rows per instance family");
    eval_cmd->add_option("--results", eval_results, "results csv from solve")->required();
    eval_cmd->add_option("--group", eval_group, "grouping (family)");
    eval_cmd->add_option("--out", eval_out, "write aggregate csv here");

    std::string verify_suite = "all";
    std::uint64_t verify_seeds = 20;
    unsigned long long verify_states = 20000, verify_cases = 2000;
    double inject_bias = 0.0;
    std::string verify_dump;
    auto* verify_cmd = app.add_subcommand("verify", "run the derived-oracle suites");
    verify_cmd->add_option("--suite", verify_suite,
                           "all|insertion|gradient|mask|precompute|encoder|complexity|"
                           "lexicographic|completeness");
    verify_cmd->add_option("--seeds", verify_seeds, "instance seeds for the sweeps");
    verify_cmd->add_option("--states", verify_states, "state count target");
    verify_cmd->add_option("--cases", verify_cases, "case count target");
    verify_cmd->add_option("--inject-bias", inject_bias,
                           "fault injection: loosen checker comparisons by this amount");
    verify_cmd->add_option("--dump", verify_dump, "write the report lines to a file");

    std::string gen_out = "data/li_lim";
    auto* gen_cmd = app.add_subcommand("gen-lilim", "regenerate the companion li&lim-format dataset");
    gen_cmd->add_option("--out", gen_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(solve_opt);
        if (train_cmd->parsed()) return cmd_train(train_config, train_resume, dry_run);
        if (eval_cmd->parsed()) return cmd_eval(eval_results, eval_out);
        if (verify_cmd->parsed()) {
            return cmd_verify(verify_suite, verify_seeds, verify_states, verify_cases,
                              inject_bias, verify_dump);
        }
        if (gen_cmd->parsed()) return cmd_gen_lilim(gen_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
