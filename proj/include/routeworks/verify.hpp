#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routeworks/instances.hpp"
#include "routeworks/pdptw_env.hpp"

namespace routeworks {

// Outcome of one verification sweep.  `cases` counts sampled situations,
// `checks` individual assertions inside them.
struct SweepReport {
    std::string suite;
    unsigned long long cases = 0;
    unsigned long long checks = 0;
    unsigned long long failures = 0;
    double seconds = 0.0;
    std::string detail;

    bool pass() const { return failures == 0; }
    std::string line() const;
};

// Independent at-earliest simulator: serves `order` (starting at depot 0)
// and checks every window plus the final depot return.  Recomputes all
// times from instance data only.
bool replay_route_feasible(const PdpInstance& inst, const DistanceMatrix& d,
                           const std::vector<int>& order);

// Every position accepted by the insertion check must replay feasible.
// `inject_bias` > 0 implants a bug in the checker; the sweep must then fail.
SweepReport insertion_soundness_sweep(unsigned long long min_states, int instance_seeds,
                                      double inject_bias = 0.0, std::uint64_t seed = 0);

// check_insertion and the exhaustive oracle agree exactly when gamma is empty.
SweepReport empty_gamma_agreement_sweep(unsigned long long min_cases, std::uint64_t seed = 0);

// Incompleteness statistic (reported, not asserted): how often the in-order
// insertion check misses a reordering the exhaustive oracle finds.
SweepReport insertion_completeness_measure(unsigned long long min_cases, std::uint64_t seed = 0);

// feasible_mask equals a from-scratch one-step reference checker.
SweepReport mask_equivalence_sweep(int min_states, int max_customers, std::uint64_t seed = 0);

// Cumulative waits and slacks match a direct evaluation of their defining
// sums on independently recomputed service times.
SweepReport precompute_recompute_sweep(int min_chains, std::uint64_t seed = 0);

// Finite-difference checks: every tape op, then the frozen end-to-end
// REINFORCE gradient.
SweepReport gradient_op_sweep(std::uint64_t seed = 0);
SweepReport gradient_end_to_end_sweep(std::uint64_t seed = 0);

// Encoder permutation equivariance / graph-embedding invariance (1e-9) and
// decoder normalization (1e-12, masked entries exactly zero).
SweepReport encoder_invariance_sweep(int cases, std::uint64_t seed = 0);
SweepReport decode_normalization_sweep(int rollouts, std::uint64_t seed = 0);

// Operation counts of precompute + check_insertion fitted against |gamma|.
SweepReport complexity_fit_sweep(const std::vector<int>& sizes, double max_exponent,
                                 double max_ratio_factor, std::uint64_t seed = 0);

// VehiclesThenDistance orders by vehicle count first on random solution pairs.
SweepReport lexicographic_cost_sweep(int pairs, std::uint64_t seed = 0);

}  // namespace routeworks
