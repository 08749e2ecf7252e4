#include "habmec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace habmec::oracle {

namespace {
constexpr double kBudgetTol = 1e-9;
}

PerHabCache::PerHabCache(const scenario::Scenario& sc, const scenario::TaskTrace& trace)
    : sc_(sc), trace_(trace), memo_(sc.N) {}

scheduler::PerHabProblem PerHabCache::problem(std::size_t t, std::size_t n,
                                              uint64_t mask) const {
    std::vector<std::size_t> users;
    for (std::size_t m = 0; m < sc_.M; ++m)
        if (mask & (uint64_t(1) << m)) users.push_back(m);
    return sc_.subproblem(trace_, t, n, std::move(users));
}

const scheduler::PerHabSolution& PerHabCache::solve(std::size_t t, std::size_t n,
                                                    uint64_t mask) {
    if (t != cached_t_) {
        for (auto& m : memo_) m.clear();
        cached_t_ = t;
    }
    auto& habmemo = memo_.at(n);
    auto it = habmemo.find(mask);
    if (it == habmemo.end()) {
        const scheduler::PerHabProblem p = problem(t, n, mask);
        it = habmemo.emplace(mask, scheduler::solve_per_hab(p)).first;
    }
    return it->second;
}

OracleResult exhaustive_association(const scenario::Scenario& sc,
                                    const scenario::TaskTrace& trace, std::size_t t,
                                    PerHabCache* cache, bool keep_table) {
    const std::size_t M = sc.M, N = sc.N;
    if (M > 63) throw SizeError("exhaustive search: more than 63 users");
    if (std::pow(double(N), double(M)) > 1e7 + 0.5)
        throw SizeError("exhaustive search: N^M exceeds the 1e7 enumeration guard");

    PerHabCache local_cache(sc, trace);
    PerHabCache& cc = cache ? *cache : local_cache;

    std::vector<int> digits(M, 0);
    std::vector<uint64_t> masks(N, 0);
    for (std::size_t m = 0; m < M; ++m) masks[0] |= uint64_t(1) << m;

    OracleResult best;
    bool have_best = false;
    bool any_feasible = false;
    uint64_t code = 0;
    for (;;) {
        double total = 0.0;
        bool feasible = true;
        for (std::size_t n = 0; n < N && feasible; ++n) {
            if (!masks[n]) continue;
            try {
                total += cc.solve(t, n, masks[n]).objective;
            } catch (const InfeasibleBudget&) {
                feasible = false;
            }
        }
        if (feasible) {
            any_feasible = true;
            if (keep_table) best.table.emplace_back(code, total);
            if (!have_best || total < best.utility) {
                have_best = true;
                best.utility = total;
                best.assoc.assign(digits.begin(), digits.end());
            }
        } else if (keep_table) {
            best.table.emplace_back(code, std::numeric_limits<double>::infinity());
        }
        // Odometer increment in lexicographic order (last digit fastest).
        std::size_t pos = M;
        while (pos > 0) {
            --pos;
            masks[digits[pos]] &= ~(uint64_t(1) << pos);
            if (++digits[pos] < int(N)) {
                masks[digits[pos]] |= uint64_t(1) << pos;
                break;
            }
            digits[pos] = 0;
            masks[0] |= uint64_t(1) << pos;
            if (pos == 0) {
                pos = SIZE_MAX;
                break;
            }
        }
        ++code;
        if (pos == SIZE_MAX || M == 0) break;
    }
    if (!any_feasible)
        throw InfeasibleBudget("exhaustive search: every association violates a budget");

    // Assemble the winning decision from the cached per-HAB solutions.
    best.decision.assoc = best.assoc;
    best.decision.rank.assign(M, 0);
    best.decision.beta.assign(M, 0.0);
    std::vector<uint64_t> win_masks(N, 0);
    for (std::size_t m = 0; m < M; ++m) win_masks[best.assoc[m]] |= uint64_t(1) << m;
    for (std::size_t n = 0; n < N; ++n) {
        if (!win_masks[n]) continue;
        const auto& sol = cc.solve(t, n, win_masks[n]);
        const auto p = cc.problem(t, n, win_masks[n]);
        for (std::size_t i = 0; i < p.users.size(); ++i) {
            best.decision.rank[p.users[i]] = sol.ranks[i];
            best.decision.beta[p.users[i]] = sol.beta[i];
        }
    }
    best.decision.utility = best.utility;
    return best;
}

std::pair<std::vector<int>, double> brute_force_sequence(const std::vector<double>& l) {
    const std::size_t k = l.size();
    if (k > 8) throw SizeError("brute_force_sequence: more than 8 users");
    if (k == 0) throw SizeError("brute_force_sequence: empty input");
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> ranks(k), best_ranks;
    double best = std::numeric_limits<double>::infinity();
    do {
        for (std::size_t pos = 0; pos < k; ++pos) ranks[order[pos]] = int(pos) + 1;
        const double v = scheduler::weighted_sum_delay(l, ranks);
        if (v < best) {
            best = v;
            best_ranks = ranks;
        }
    } while (std::next_permutation(order.begin(), order.end()));
    return {best_ranks, best};
}

namespace {

// Objective and budget pieces for the grid oracle, evaluated straight from
// the model formulas (an independent path from optimize_splits' algebra).
struct GridEval {
    const scheduler::PerHabProblem& p;
    const std::vector<int>& ranks;

    double phi(std::size_t i, double beta) const {
        const auto& cp = *p.compute;
        const double tau = scheduler::task_time(p, i, beta);
        const double e = netmodel::user_energy(p.z[i], beta, p.uplink[i], *p.radio, cp,
                                               p.users[i]);
        const double c = double(p.size()) - ranks[i] + 1.0;
        return cp.weight_energy * e + cp.weight_time * c * tau;
    }
    double draw(std::size_t i, double beta) const {
        return netmodel::hab_energy(p.z[i], beta, p.downlink[i], *p.radio, *p.compute);
    }
};

}  // namespace

GridResult grid_search_splits(const scheduler::PerHabProblem& p,
                              const std::vector<int>& ranks, double step) {
    p.validate();
    if (!(step > 0.0 && step <= 0.1))
        throw DomainError("grid_search_splits: step must lie in (0, 0.1]");
    const std::size_t k = p.size();
    if (ranks.size() != k) throw SizeError("grid_search_splits: ranks size mismatch");
    const std::size_t J = std::size_t(std::llround(1.0 / step));
    const double budget = p.compute->energy_budget;
    GridEval ev{p, ranks};

    const double fixed_draw = double(k) * p.compute->hab_hover_energy;
    if (fixed_draw > budget + kBudgetTol)
        throw InfeasibleBudget("grid oracle: budget infeasible at zero offload");

    auto grid = [&](std::size_t j) { return double(j) / double(J); };

    // Exhaustive lattice walk for small instances.
    double combos = 1.0;
    for (std::size_t i = 0; i < k; ++i) combos *= double(J + 1);
    if (k <= 4 && combos <= 2e5) {
        std::vector<std::size_t> jj(k, 0);
        GridResult best;
        bool have = false;
        for (;;) {
            double obj = 0.0, used = fixed_draw;
            for (std::size_t i = 0; i < k; ++i) {
                obj += ev.phi(i, grid(jj[i]));
                used += ev.draw(i, grid(jj[i])) - p.compute->hab_hover_energy;
            }
            if (used <= budget + kBudgetTol && (!have || obj < best.objective)) {
                have = true;
                best.objective = obj;
                best.beta.resize(k);
                for (std::size_t i = 0; i < k; ++i) best.beta[i] = grid(jj[i]);
            }
            std::size_t pos = k;
            while (pos > 0 && ++jj[--pos] > J) jj[pos] = 0;
            if (pos == 0 && jj[0] == 0) break;
        }
        if (!have) throw InfeasibleBudget("grid oracle: no feasible lattice point");
        return best;
    }

    // Large instances: per-user scans, then a greedy marginal walk back to
    // feasibility when the unconstrained pick overruns the budget.
    std::vector<std::vector<double>> cost(k), usage(k);
    std::vector<std::size_t> at(k, 0);
    double used = fixed_draw;
    for (std::size_t i = 0; i < k; ++i) {
        cost[i].resize(J + 1);
        usage[i].resize(J + 1);
        std::size_t bestj = 0;
        for (std::size_t j = 0; j <= J; ++j) {
            cost[i][j] = ev.phi(i, grid(j));
            usage[i][j] = ev.draw(i, grid(j)) - p.compute->hab_hover_energy;
            if (cost[i][j] < cost[i][bestj]) bestj = j;
        }
        at[i] = bestj;
        used += usage[i][bestj];
    }

    if (used > budget + kBudgetTol) {
        // Cheapest objective increase per joule released first.
        using Move = std::pair<double, std::size_t>;  // (ratio, user)
        auto ratio = [&](std::size_t i) {
            const double dobj = cost[i][at[i] - 1] - cost[i][at[i]];
            const double dusage = usage[i][at[i]] - usage[i][at[i] - 1];
            return dusage > 0.0 ? dobj / dusage : std::numeric_limits<double>::infinity();
        };
        std::priority_queue<Move, std::vector<Move>, std::greater<Move>> heap;
        for (std::size_t i = 0; i < k; ++i)
            if (at[i] > 0) heap.push({ratio(i), i});
        while (used > budget + kBudgetTol && !heap.empty()) {
            const std::size_t i = heap.top().second;
            heap.pop();
            used -= usage[i][at[i]] - usage[i][at[i] - 1];
            --at[i];
            if (at[i] > 0) heap.push({ratio(i), i});
        }
        if (used > budget + kBudgetTol)
            throw InfeasibleBudget("grid oracle: no feasible lattice point");
        // The last release may have overshot: climb each user back up while
        // feasibility allows (single pass, ascending index).
        for (std::size_t i = 0; i < k; ++i) {
            while (at[i] < J && cost[i][at[i] + 1] < cost[i][at[i]] &&
                   used + (usage[i][at[i] + 1] - usage[i][at[i]]) <= budget + kBudgetTol) {
                used += usage[i][at[i] + 1] - usage[i][at[i]];
                ++at[i];
            }
        }
    }

    GridResult res;
    res.beta.resize(k);
    res.objective = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        res.beta[i] = grid(at[i]);
        res.objective += cost[i][at[i]];
    }
    return res;
}

LabeledData label_dataset(const scenario::Scenario& sc, const scenario::TaskTrace& trace,
                          std::size_t T) {
    if (T < 2) throw SizeError("label_dataset: need at least two instants");
    if (trace.T < T || trace.M != sc.M)
        throw SizeError("label_dataset: trace does not cover the requested horizon");
    const std::size_t M = sc.M, N = sc.N;

    LabeledData out;
    out.assoc.resize(T);
    out.oracle_utility.resize(T);
    PerHabCache cache(sc, trace);
    for (std::size_t t = 0; t < T; ++t) {
        const OracleResult best = exhaustive_association(sc, trace, t, &cache);
        out.assoc[t] = best.assoc;
        out.oracle_utility[t] = best.utility;
    }

    out.per_user.resize(M);
    out.norms.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        auto& us = out.per_user[m];
        us.X.resize(N);
        us.labels.resize(N);
        us.t.resize(N);
        auto& norm = out.norms[m];
        for (int c = 0; c < 3; ++c) {
            norm.lo[c] = std::numeric_limits<double>::infinity();
            norm.hi[c] = -std::numeric_limits<double>::infinity();
        }
        for (std::size_t t = 0; t + 1 < T; ++t) {
            const Vec3 pos = sc.user_position(m, t);
            const double raw[3] = {pos.x, pos.y, trace.at(m, t)};
            for (int c = 0; c < 3; ++c) {
                norm.lo[c] = std::min(norm.lo[c], raw[c]);
                norm.hi[c] = std::max(norm.hi[c], raw[c]);
            }
        }
        for (std::size_t t = 0; t + 1 < T; ++t) {
            const Vec3 pos = sc.user_position(m, t);
            const double raw[3] = {pos.x, pos.y, trace.at(m, t)};
            double feat[3];
            norm.apply(raw, feat);
            const int owner = out.assoc[t][m];
            us.X[owner].insert(us.X[owner].end(), feat, feat + 3);
            us.labels[owner].push_back(out.assoc[t + 1][m] == owner ? 1.0 : 0.0);
            us.t[owner].push_back(t);
        }
    }
    return out;
}

}  // namespace habmec::oracle
