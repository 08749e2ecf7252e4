// Per-HAB service sequencing and task-split optimization, plus evaluation of
// the global weighted energy+delay objective under its constraints.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "habmec/netmodel.hpp"

namespace habmec::scheduler {

// One HAB's decoupled subproblem: the users it serves this instant, their
// task sizes and link rates, shared compute constants, and the energy budget.
struct PerHabProblem {
    std::vector<std::size_t> users;  // global user indices
    std::vector<double> z;           // bits, per listed user
    std::vector<double> uplink;      // bits/s, per listed user
    std::vector<double> downlink;    // bits/s, per listed user
    const netmodel::RadioParams* radio = nullptr;
    const netmodel::ComputeParams* compute = nullptr;

    std::size_t size() const { return users.size(); }
    void validate() const;
};

struct SplitResult {
    std::vector<double> beta;  // per listed user
    double objective = 0.0;    // weighted energy+delay for the fixed ranks
    double multiplier = 0.0;   // budget-constraint dual variable
    bool budget_tight = false;
};

struct PerHabSolution {
    std::vector<int> ranks;    // per listed user, 1..|users|
    std::vector<double> beta;  // per listed user
    double objective = 0.0;
    bool converged = true;     // false when the rank/split alternation hit its cap
    int iterations = 0;
};

// Full per-instant decision across all users and HABs.
struct AllocationDecision {
    std::vector<int> assoc;    // assoc[m] = serving HAB index
    std::vector<int> rank;     // rank[m] within its HAB's queue, 1-based
    std::vector<double> beta;  // beta[m]
    double utility = 0.0;
};

// TDMA wait before user at position `who` starts: sum of processing times of
// users ranked earlier. `ranks` must be a permutation of 1..l.size().
double access_delay(const std::vector<int>& ranks, const std::vector<double>& l,
                    std::size_t who);

// Sum over users of (|queue| - rank + 1) * l; equals the direct queue
// simulation sum of (access delay + own processing time).
double weighted_sum_delay(const std::vector<double>& l, const std::vector<int>& ranks);

// Shortest-job-first ranks: ascending processing time, ties by ascending index.
std::vector<int> sjf_sequence(const std::vector<double>& l);

// Per-user task time at split beta, for the epigraph pieces of the objective.
double task_time(const PerHabProblem& p, std::size_t i, double beta);

// Minimizes sum_i wE*e_i(beta) + wT*(|Q|-q_i+1)*tau_i(beta) over beta in
// [0,1]^k subject to the HAB energy budget, for fixed ranks. Exact via
// single-multiplier bisection on the dualized budget constraint; the
// objective is piecewise linear per user, so candidate minimizers live at
// breakpoints. Budget met within 1e-9; throws InfeasibleBudget when even
// beta = 0 overruns the budget.
SplitResult optimize_splits(const PerHabProblem& p, const std::vector<int>& ranks);

// Alternates sjf_sequence on l(beta) with optimize_splits until the ranks
// stabilize (cap 20 rounds); returns the best iterate seen.
PerHabSolution solve_per_hab(const PerHabProblem& p);

// Hab-side energy actually drawn by the decision (budget-constraint side).
double hab_energy_used(const PerHabProblem& p, const std::vector<double>& beta);

// Validates the decision against all problem constraints; returns a report
// of violations (empty string when clean).
std::string validate_decision(const AllocationDecision& d,
                              const netmodel::RadioParams& rp,
                              const netmodel::ComputeParams& cp,
                              const std::vector<PerHabProblem>& per_hab);

// Weighted energy+delay of a full decision, evaluated through the access-delay
// queue simulation. Throws ConstraintViolation with the report when invalid.
double utility(const AllocationDecision& d, const netmodel::RadioParams& rp,
               const netmodel::ComputeParams& cp,
               const std::vector<PerHabProblem>& per_hab);

}  // namespace habmec::scheduler
