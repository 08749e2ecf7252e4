#include "habmec/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace habmec::scheduler {

namespace {

constexpr double kBudgetTol = 1e-9;

void check_permutation(const std::vector<int>& ranks, std::size_t k) {
    if (ranks.size() != k) throw ConstraintViolation("ranks: size mismatch");
    std::vector<char> seen(k + 1, 0);
    for (int q : ranks) {
        if (q < 1 || std::size_t(q) > k || seen[q])
            throw ConstraintViolation("ranks: not a permutation of 1..k");
        seen[q] = 1;
    }
}

// Piecewise-linear data for one listed user at fixed ranks:
//   objective phi(b) = wE*(e0 + e1*b) + wT*c*max(A*b, B*(1-b))
//   budget usage slope s (J per unit of b).
struct Pieces {
    double e0, e1, A, B, c, s;
};

Pieces make_pieces(const PerHabProblem& p, std::size_t i, double c) {
    const auto& cp = *p.compute;
    const auto& rp = *p.radio;
    const std::size_t m = p.users[i];
    const double z = p.z[i];
    const double fU = cp.user_cpu_freq.at(m);
    Pieces w;
    w.e0 = cp.user_op_energy.at(m) + cp.user_chip_coeff.at(m) * fU * fU * z;
    w.e1 = z * (rp.tx_power_user / p.uplink[i] - cp.user_chip_coeff.at(m) * fU * fU);
    w.A = z * (1.0 / p.uplink[i] + cp.hab_cycles_per_bit / cp.hab_cpu_freq + 1.0 / p.downlink[i]);
    w.B = cp.user_cycles_per_bit.at(m) * z / cp.user_cpu_freq.at(m);
    w.c = c;
    w.s = z * (cp.hab_chip_coeff * cp.hab_cpu_freq * cp.hab_cpu_freq + rp.tx_power_hab / p.downlink[i]);
    return w;
}

double phi(const Pieces& w, double b, double wE, double wT) {
    return wE * (w.e0 + w.e1 * b) + wT * w.c * std::max(w.A * b, w.B * (1.0 - b));
}

// Minimizer of phi + nu*s*b over [0,1]: the objective is convex piecewise
// linear with at most one interior breakpoint, so candidates suffice.
// Ties resolve to the smallest b.
double best_beta(const Pieces& w, double nu, double wE, double wT) {
    double cand[3];
    int nc = 0;
    cand[nc++] = 0.0;
    if (w.A + w.B > 0.0) {
        const double x = w.B / (w.A + w.B);
        if (x > 0.0 && x < 1.0) cand[nc++] = x;
    }
    cand[nc++] = 1.0;
    double bb = cand[0];
    double bv = phi(w, cand[0], wE, wT) + nu * w.s * cand[0];
    for (int j = 1; j < nc; ++j) {
        const double v = phi(w, cand[j], wE, wT) + nu * w.s * cand[j];
        if (v < bv) {
            bv = v;
            bb = cand[j];
        }
    }
    return bb;
}

}  // namespace

void PerHabProblem::validate() const {
    if (users.empty()) throw ConstraintViolation("per-hab problem: empty user list");
    const std::size_t k = users.size();
    if (z.size() != k || uplink.size() != k || downlink.size() != k)
        throw ConstraintViolation("per-hab problem: vector size mismatch");
    if (!radio || !compute) throw ConstraintViolation("per-hab problem: missing parameter blocks");
    for (std::size_t i = 0; i < k; ++i) {
        if (!(z[i] >= 0) || !std::isfinite(z[i]))
            throw ConstraintViolation("per-hab problem: bad task size");
        if (!(uplink[i] > 0) || !(downlink[i] > 0))
            throw ConstraintViolation("per-hab problem: rates must be positive");
    }
}

double access_delay(const std::vector<int>& ranks, const std::vector<double>& l,
                    std::size_t who) {
    check_permutation(ranks, l.size());
    if (who >= l.size()) throw ConstraintViolation("access_delay: user index out of range");
    double wait = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i)
        if (ranks[i] < ranks[who]) wait += l[i];
    return wait;
}

double weighted_sum_delay(const std::vector<double>& l, const std::vector<int>& ranks) {
    check_permutation(ranks, l.size());
    const double k = double(l.size());
    double total = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) total += (k - ranks[i] + 1.0) * l[i];
    return total;
}

std::vector<int> sjf_sequence(const std::vector<double>& l) {
    for (double v : l)
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("sjf_sequence: processing times must be finite and nonnegative");
    std::vector<std::size_t> order(l.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return l[a] < l[b]; });
    std::vector<int> ranks(l.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = int(pos) + 1;
    return ranks;
}

double task_time(const PerHabProblem& p, std::size_t i, double beta) {
    return netmodel::total_task_time(p.z[i], beta, p.uplink[i], p.downlink[i], *p.compute,
                                     p.users[i]);
}

double hab_energy_used(const PerHabProblem& p, const std::vector<double>& beta) {
    double used = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        used += netmodel::hab_energy(p.z[i], beta[i], p.downlink[i], *p.radio, *p.compute);
    return used;
}

SplitResult optimize_splits(const PerHabProblem& p, const std::vector<int>& ranks) {
    p.validate();
    const std::size_t k = p.size();
    check_permutation(ranks, k);
    const double wE = p.compute->weight_energy;
    const double wT = p.compute->weight_time;
    const double budget = p.compute->energy_budget;
    const double fixed_draw = double(k) * p.compute->hab_hover_energy;

    if (fixed_draw > budget + kBudgetTol)
        throw InfeasibleBudget(strfmt(
            "budget infeasible: %zu users draw %.17g J hover energy against budget %.17g J",
            k, fixed_draw, budget));

    std::vector<Pieces> w(k);
    for (std::size_t i = 0; i < k; ++i)
        w[i] = make_pieces(p, i, double(k) - ranks[i] + 1.0);

    auto solve_at = [&](double nu, std::vector<double>& beta) {
        double usage = fixed_draw;
        for (std::size_t i = 0; i < k; ++i) {
            beta[i] = best_beta(w[i], nu, wE, wT);
            usage += w[i].s * beta[i];
        }
        return usage;
    };
    auto objective_of = [&](const std::vector<double>& beta) {
        double obj = 0.0;
        for (std::size_t i = 0; i < k; ++i) obj += phi(w[i], beta[i], wE, wT);
        return obj;
    };

    SplitResult res;
    res.beta.assign(k, 0.0);
    const double usage0 = solve_at(0.0, res.beta);
    if (usage0 <= budget + kBudgetTol) {
        res.objective = objective_of(res.beta);
        res.multiplier = 0.0;
        res.budget_tight = usage0 >= budget - kBudgetTol;
        return res;
    }

    // The budget binds: bisect the multiplier. Usage is nonincreasing in nu
    // and reaches the feasible fixed draw as nu grows, so doubling finds an
    // upper bracket.
    std::vector<double> beta_lo = res.beta, beta_hi(k, 0.0);
    double nu_lo = 0.0, nu_hi = 1.0;
    while (solve_at(nu_hi, beta_hi) > budget + kBudgetTol) {
        nu_lo = nu_hi;
        beta_lo = beta_hi;
        nu_hi *= 2.0;
        if (nu_hi > 1e30) throw InfeasibleBudget("budget bisection failed to bracket");
    }
    std::vector<double> beta_mid(k, 0.0);
    for (int it = 0; it < 200 && nu_hi - nu_lo > 1e-13 * std::max(1.0, nu_hi); ++it) {
        const double nu = 0.5 * (nu_lo + nu_hi);
        if (solve_at(nu, beta_mid) > budget + kBudgetTol) {
            nu_lo = nu;
            beta_lo = beta_mid;
        } else {
            nu_hi = nu;
            beta_hi = beta_mid;
        }
    }

    // At the critical multiplier the switching users are indifferent between
    // their two candidate splits, so filling the slack from the feasible side
    // toward the infeasible side preserves optimality while landing exactly
    // on the budget.
    double usage = fixed_draw;
    for (std::size_t i = 0; i < k; ++i) usage += w[i].s * beta_hi[i];
    double headroom = budget - usage;
    res.beta = beta_hi;
    for (std::size_t i = 0; i < k && headroom > 0.0; ++i) {
        const double gap = beta_lo[i] - beta_hi[i];
        if (gap <= 0.0 || w[i].s <= 0.0) continue;
        const double full_cost = w[i].s * gap;
        if (full_cost <= headroom) {
            res.beta[i] = beta_lo[i];
            headroom -= full_cost;
        } else {
            res.beta[i] += headroom / w[i].s;
            headroom = 0.0;
        }
    }
    res.objective = objective_of(res.beta);
    res.multiplier = 0.5 * (nu_lo + nu_hi);
    res.budget_tight = true;
    return res;
}

PerHabSolution solve_per_hab(const PerHabProblem& p) {
    p.validate();
    const std::size_t k = p.size();
    PerHabSolution best;
    bool have_best = false;
    std::vector<double> beta(k, 0.5);
    std::vector<int> prev_ranks;
    bool converged = false;
    int its = 0;
    for (int round = 0; round < 20; ++round) {
        std::vector<double> l(k);
        for (std::size_t i = 0; i < k; ++i) l[i] = task_time(p, i, beta[i]);
        std::vector<int> ranks = sjf_sequence(l);
        if (ranks == prev_ranks) {
            converged = true;
            break;
        }
        SplitResult sr = optimize_splits(p, ranks);
        ++its;
        beta = sr.beta;
        if (!have_best || sr.objective < best.objective) {
            best.ranks = ranks;
            best.beta = sr.beta;
            best.objective = sr.objective;
            have_best = true;
        }
        prev_ranks = std::move(ranks);
    }
    best.converged = converged;
    best.iterations = its;
    return best;
}

std::string validate_decision(const AllocationDecision& d,
                              const netmodel::RadioParams& rp,
                              const netmodel::ComputeParams& cp,
                              const std::vector<PerHabProblem>& per_hab) {
    (void)rp;
    std::ostringstream rep;
    const std::size_t M = d.assoc.size();
    const std::size_t N = per_hab.size();
    if (d.rank.size() != M || d.beta.size() != M) {
        rep << "decision: field sizes disagree\n";
        return rep.str();
    }
    std::vector<std::vector<std::size_t>> members(N);
    for (std::size_t m = 0; m < M; ++m) {
        if (d.assoc[m] < 0 || std::size_t(d.assoc[m]) >= N) {
            rep << "user " << m << ": not associated with any HAB\n";
            continue;
        }
        members[d.assoc[m]].push_back(m);
        if (!(d.beta[m] >= 0.0 && d.beta[m] <= 1.0))
            rep << "user " << m << ": split " << d.beta[m] << " outside [0,1]\n";
    }
    for (std::size_t n = 0; n < N; ++n) {
        const auto& p = per_hab[n];
        if (p.users != members[n]) {
            rep << "hab " << n << ": listed users disagree with the association\n";
            continue;
        }
        if (p.users.empty()) continue;
        const std::size_t k = p.users.size();
        std::vector<char> seen(k + 1, 0);
        bool perm_ok = true;
        for (std::size_t m : p.users) {
            const int q = d.rank[m];
            if (q < 1 || std::size_t(q) > k || seen[q]) {
                perm_ok = false;
                break;
            }
            seen[q] = 1;
        }
        if (!perm_ok) rep << "hab " << n << ": ranks are not a permutation of 1.." << k << "\n";
        std::vector<double> beta(k);
        for (std::size_t i = 0; i < k; ++i) beta[i] = d.beta[p.users[i]];
        const double used = hab_energy_used(p, beta);
        if (used > cp.energy_budget + kBudgetTol)
            rep << "hab " << n << ": energy " << fmt_g17(used) << " J exceeds budget "
                << fmt_g17(cp.energy_budget) << " J\n";
    }
    return rep.str();
}

double utility(const AllocationDecision& d, const netmodel::RadioParams& rp,
               const netmodel::ComputeParams& cp,
               const std::vector<PerHabProblem>& per_hab) {
    const std::string report = validate_decision(d, rp, cp, per_hab);
    if (!report.empty()) throw ConstraintViolation("invalid decision:\n" + report);
    double total = 0.0;
    for (const auto& p : per_hab) {
        if (p.users.empty()) continue;
        const std::size_t k = p.users.size();
        std::vector<double> l(k), beta(k);
        std::vector<int> ranks(k);
        for (std::size_t i = 0; i < k; ++i) {
            beta[i] = d.beta[p.users[i]];
            ranks[i] = d.rank[p.users[i]];
            l[i] = task_time(p, i, beta[i]);
        }
        for (std::size_t i = 0; i < k; ++i) {
            const double e = netmodel::user_energy(p.z[i], beta[i], p.uplink[i], rp, cp,
                                                   p.users[i]);
            const double t = access_delay(ranks, l, i) + l[i];
            total += cp.weight_energy * e + cp.weight_time * t;
        }
    }
    return total;
}

}  // namespace habmec::scheduler
