// Brute-force reference solvers: exhaustive association search (also the
// training-label generator), full-permutation sequencing, and grid-search
// splits. Deliberately simple; used as ground truth by tests and the harness.
#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "habmec/scenario.hpp"
#include "habmec/scheduler.hpp"

namespace habmec::oracle {

struct OracleResult {
    std::vector<int> assoc;               // best association, assoc[m] = HAB index
    scheduler::AllocationDecision decision;  // ranks and splits for the winner
    double utility = 0.0;
    // Optional audit table: (candidate code, utility) in enumeration order.
    std::vector<std::pair<uint64_t, double>> table;
};

// Memo for per-(instant, HAB, user-subset) subproblem solutions so the N^M
// enumeration shares work across candidates. Keyed by user bitmask.
class PerHabCache {
public:
    explicit PerHabCache(const scenario::Scenario& sc, const scenario::TaskTrace& trace);
    // Solution for HAB n serving exactly the users in `mask` at instant t.
    const scheduler::PerHabSolution& solve(std::size_t t, std::size_t n, uint64_t mask);
    // The subproblem itself (rates, sizes) for utility assembly.
    scheduler::PerHabProblem problem(std::size_t t, std::size_t n, uint64_t mask) const;

private:
    const scenario::Scenario& sc_;
    const scenario::TaskTrace& trace_;
    std::size_t cached_t_ = SIZE_MAX;
    std::vector<std::unordered_map<uint64_t, scheduler::PerHabSolution>> memo_;  // per HAB
};

// Enumerates all N^M associations at instant t and returns the minimizer
// (lexicographically first on ties). Guard: N^M <= 1e7.
OracleResult exhaustive_association(const scenario::Scenario& sc,
                                    const scenario::TaskTrace& trace, std::size_t t,
                                    PerHabCache* cache = nullptr,
                                    bool keep_table = false);

// Minimum weighted delay over all |l|! service orders, |l| <= 8.
std::pair<std::vector<int>, double> brute_force_sequence(const std::vector<double>& l);

// Grid oracle for the split problem: per-user scalar scans on a step grid,
// then (when the budget binds) a greedy marginal walk back to feasibility.
// For small full grids (step coarse, k <= 4) enumerates the whole lattice.
struct GridResult {
    std::vector<double> beta;
    double objective = 0.0;
};
GridResult grid_search_splits(const scheduler::PerHabProblem& p,
                              const std::vector<int>& ranks, double step);

struct LabeledData {
    std::vector<scenario::UserSamples> per_user;  // size M
    std::vector<scenario::FeatureNorm> norms;     // size M
    std::vector<std::vector<int>> assoc;          // oracle association per [t][m]
    std::vector<double> oracle_utility;           // optimal utility per instant
};

// Runs the exhaustive oracle on instants 0..T-1, emits per-user datasets:
// feature at t (position + task size, normalized), label = association at
// t+1, sample owned by the HAB serving the user at t.
LabeledData label_dataset(const scenario::Scenario& sc, const scenario::TaskTrace& trace,
                          std::size_t T);

}  // namespace habmec::oracle
