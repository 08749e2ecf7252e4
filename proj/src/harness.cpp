#include "habmec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "habmec/rng.hpp"
#include "habmec/scheduler.hpp"

namespace habmec::harness {

namespace {

// Maps each feature instant of a user's sample set to (owning HAB, index
// within that HAB's block) for O(1) feature lookup during evaluation.
struct SampleIndex {
    std::vector<int> hab;
    std::vector<std::size_t> idx;
};

SampleIndex index_samples(const scenario::UserSamples& s, std::size_t horizon) {
    SampleIndex si;
    si.hab.assign(horizon, -1);
    si.idx.assign(horizon, 0);
    for (std::size_t n = 0; n < s.habs(); ++n)
        for (std::size_t i = 0; i < s.t[n].size(); ++i) {
            si.hab.at(s.t[n][i]) = int(n);
            si.idx.at(s.t[n][i]) = i;
        }
    return si;
}

Eigen::VectorXd feature_at(const scenario::UserSamples& s, const SampleIndex& si,
                           std::size_t t) {
    const int n = si.hab.at(t);
    if (n < 0) throw SizeError("evaluation: no sample at the requested instant");
    const std::size_t i = si.idx[t];
    Eigen::VectorXd x(3);
    for (int r = 0; r < 3; ++r) x(r) = s.X[std::size_t(n)][3 * i + r];
    return x;
}

struct InstantEval {
    double utility = 0.0;
    double energy_term = 0.0;
    double time_term = 0.0;
};

// Utility and its components for a fixed association at one instant, via the
// memoized per-HAB solver; re-validates the assembled decision against every
// constraint before reporting.
InstantEval evaluate_association(const scenario::Scenario& sc,
                                 oracle::PerHabCache& cache, std::size_t t,
                                 const std::vector<int>& assoc) {
    const std::size_t M = sc.M, N = sc.N;
    std::vector<uint64_t> masks(N, 0);
    for (std::size_t m = 0; m < M; ++m) {
        if (assoc[m] < 0 || std::size_t(assoc[m]) >= N)
            throw ConstraintViolation("evaluation: user not associated with any HAB");
        masks[std::size_t(assoc[m])] |= uint64_t(1) << m;
    }
    scheduler::AllocationDecision d;
    d.assoc = assoc;
    d.rank.assign(M, 0);
    d.beta.assign(M, 0.0);
    std::vector<scheduler::PerHabProblem> per_hab(N);
    InstantEval ev;
    for (std::size_t n = 0; n < N; ++n) {
        if (!masks[n]) continue;
        const auto& sol = cache.solve(t, n, masks[n]);
        scheduler::PerHabProblem p = cache.problem(t, n, masks[n]);
        const std::size_t k = p.users.size();
        std::vector<double> l(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t u = p.users[i];
            d.rank[u] = sol.ranks[i];
            d.beta[u] = sol.beta[i];
            l[i] = scheduler::task_time(p, i, sol.beta[i]);
            ev.energy_term += p.compute->weight_energy *
                              netmodel::user_energy(p.z[i], sol.beta[i], p.uplink[i],
                                                    *p.radio, *p.compute, u);
        }
        ev.time_term +=
            p.compute->weight_time * scheduler::weighted_sum_delay(l, sol.ranks);
        ev.utility += sol.objective;
        per_hab[n] = std::move(p);
    }
    d.utility = ev.utility;
    const std::string report =
        scheduler::validate_decision(d, sc.radio, sc.compute, per_hab);
    if (!report.empty())
        throw ConstraintViolation("evaluated decision violates constraints:\n" + report);
    return ev;
}

bool hab_feasible(oracle::PerHabCache& cache, std::size_t t, std::size_t n,
                  uint64_t mask) {
    if (!mask) return true;
    try {
        cache.solve(t, n, mask);
        return true;
    } catch (const InfeasibleBudget&) {
        return false;
    }
}

// Moves users off budget-infeasible HABs, one at a time, to the best-scoring
// HAB that stays feasible after accepting them. Deterministic: lowest
// infeasible HAB first, its lowest-indexed user first, candidate HABs in
// descending score order (ties to the lower index).
std::vector<int> repair_association(const scenario::Scenario& sc,
                                    oracle::PerHabCache& cache, std::size_t t,
                                    std::vector<int> assoc,
                                    const std::vector<Eigen::VectorXd>& scores) {
    const std::size_t M = sc.M, N = sc.N;
    for (std::size_t guard = 0; guard <= M * N; ++guard) {
        std::vector<uint64_t> masks(N, 0);
        for (std::size_t m = 0; m < M; ++m)
            masks[std::size_t(assoc[m])] |= uint64_t(1) << m;
        int bad = -1;
        for (std::size_t n = 0; n < N; ++n) {
            if (!hab_feasible(cache, t, n, masks[n])) {
                bad = int(n);
                break;
            }
        }
        if (bad < 0) return assoc;

        std::size_t user = M;
        for (std::size_t m = 0; m < M; ++m)
            if (masks[std::size_t(bad)] & (uint64_t(1) << m)) {
                user = m;
                break;
            }
        std::vector<std::size_t> order;
        for (std::size_t n = 0; n < N; ++n)
            if (int(n) != bad) order.push_back(n);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scores[user](Eigen::Index(a)) > scores[user](Eigen::Index(b));
        });
        bool moved = false;
        for (std::size_t c : order) {
            if (hab_feasible(cache, t, c, masks[c] | (uint64_t(1) << user))) {
                assoc[user] = int(c);
                moved = true;
                break;
            }
        }
        if (!moved)
            throw ConstraintViolation(
                "prediction repair failed: no HAB can feasibly serve a user");
    }
    throw ConstraintViolation("prediction repair did not terminate");
}

std::pair<std::size_t, std::size_t> accuracy_counts(
    const fedsvm::FedSvmState& model, const scenario::UserSamples& test,
    const std::vector<std::vector<int>>& reference_assoc, std::size_t user) {
    std::size_t correct = 0, total = 0;
    Eigen::VectorXd x(3);
    for (std::size_t n = 0; n < test.habs(); ++n) {
        for (std::size_t i = 0; i < test.t[n].size(); ++i) {
            for (int r = 0; r < 3; ++r) x(r) = test.X[n][3 * i + r];
            const std::size_t target = test.t[n][i] + 1;
            const int pred = fedsvm::predict_association(model.W, x);
            correct += (pred == reference_assoc.at(target).at(user)) ? 1 : 0;
            ++total;
        }
    }
    return {correct, total};
}

struct Moments {
    double mean = 0.0, stdev = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments mo;
    if (v.empty()) return mo;
    for (double x : v) mo.mean += x;
    mo.mean /= double(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - mo.mean) * (x - mo.mean);
        mo.stdev = std::sqrt(ss / double(v.size() - 1));
    }
    return mo;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

const char* kMethods[4] = {"fl", "local", "global", "oracle"};

}  // namespace

std::vector<fedsvm::LocalDataset> to_datasets(const scenario::UserSamples& s) {
    std::vector<fedsvm::LocalDataset> out;
    out.reserve(s.habs());
    for (std::size_t n = 0; n < s.habs(); ++n)
        out.push_back(fedsvm::LocalDataset::from_flat(s.X[n], s.labels[n]));
    return out;
}

fedsvm::FedSvmState baseline_local(const std::vector<fedsvm::LocalDataset>& datasets,
                                   fedsvm::Hyper hy, uint64_t seed) {
    hy.lambda2 = 0.0;  // no coupling between the per-HAB models
    const std::size_t N = datasets.size();
    if (N < 1) throw SizeError("baseline_local: need at least one node");
    Eigen::Index d = 3;
    for (const auto& ds : datasets)
        if (ds.K() > 0) d = Eigen::Index(ds.dim());

    fedsvm::FedSvmState out;
    out.hyper = hy;
    out.W = Eigen::MatrixXd::Zero(d, Eigen::Index(N));
    out.Omega = Eigen::MatrixXd::Identity(Eigen::Index(N), Eigen::Index(N)) / double(N);
    out.alpha.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        fedsvm::TrainOptions opt;
        opt.max_iters = 2000;
        opt.gap_target = 1e-9;
        opt.seed = Rng::mix(seed, 0x10CA1000ull + n);
        std::vector<fedsvm::LocalDataset> own{datasets[n]};
        fedsvm::FedSvmState state = fedsvm::train(own, hy, opt).first;
        out.W.col(Eigen::Index(n)) = state.W.col(0);
        out.alpha[n] = state.alpha.empty() ? Eigen::VectorXd() : state.alpha[0];
    }
    return out;
}

std::pair<fedsvm::FedSvmState, fedsvm::ConvergenceTrace> baseline_global(
    const std::vector<fedsvm::LocalDataset>& datasets, const fedsvm::Hyper& hy,
    fedsvm::TrainOptions opt) {
    return fedsvm::train(datasets, hy, opt);
}

double accuracy_rate(const fedsvm::FedSvmState& model, const scenario::UserSamples& test,
                     const std::vector<std::vector<int>>& reference_assoc,
                     std::size_t user) {
    const auto [correct, total] = accuracy_counts(model, test, reference_assoc, user);
    if (total == 0) throw SizeError("accuracy_rate: empty test set");
    return double(correct) / double(total);
}

namespace {

RepetitionResult run_repetition(const scenario::Settings& base, std::size_t rep) {
    RepetitionResult out;
    const uint64_t rep_seed = Rng::mix(base.seed, 0x9E900000ull + rep);
    out.seed = rep_seed;
    try {
        scenario::Settings s = base;
        s.seed = rep_seed;
        const scenario::Scenario sc = s.build_scenario();
        const scenario::TaskTrace traffic =
            scenario::synth_traffic(rep_seed, s.users, s.instants, s.traffic());
        const oracle::LabeledData labeled = oracle::label_dataset(sc, traffic, s.instants);

        const std::size_t samples = s.instants - 1;  // one per feature instant
        std::size_t t_split =
            std::size_t(std::floor(s.train_fraction * double(samples)));
        t_split = std::max<std::size_t>(1, std::min(t_split, samples - 1));

        const std::size_t M = s.users;
        fedsvm::Hyper hy;
        hy.lambda1 = s.lambda1;
        hy.lambda2 = s.lambda2;
        hy.eta = s.eta;
        hy.theta_target = s.theta_target;
        hy.sigma_prime = s.sigma_prime;
        hy.eps_omega = s.eps_omega;

        std::vector<fedsvm::FedSvmState> fl(M), local(M), global(M);
        std::vector<scenario::UserSamples> tests(M);
        std::vector<SampleIndex> indices(M);
        for (std::size_t m = 0; m < M; ++m) {
            const auto& full = labeled.per_user[m];
            const auto train_s = scenario::take_range(full, 0, t_split);
            tests[m] = scenario::take_range(full, t_split, samples);
            indices[m] = index_samples(full, samples);
            const auto ds = to_datasets(train_s);

            fedsvm::TrainOptions fl_opt;
            fl_opt.max_iters = s.train_iters;
            fl_opt.gap_target = s.gap_target;
            fl_opt.seed = Rng::mix(rep_seed, 0xF1000000ull + m);
            fl[m] = fedsvm::train(ds, hy, fl_opt).first;
            fl[m].norm = labeled.norms[m];

            local[m] = baseline_local(ds, hy, Rng::mix(rep_seed, 0x20CA0000ull + m));
            local[m].norm = labeled.norms[m];

            fedsvm::TrainOptions gl_opt;
            gl_opt.max_iters = std::max<std::size_t>(2000, 4 * s.train_iters);
            gl_opt.gap_target = std::min(1e-8, s.gap_target * 0.01);
            gl_opt.seed = Rng::mix(rep_seed, 0x610B0000ull + m);
            global[m] = baseline_global(ds, hy, gl_opt).first;
            global[m].norm = labeled.norms[m];
        }

        // Pooled accuracy over users and test samples.
        const std::vector<fedsvm::FedSvmState>* models[3] = {&fl, &local, &global};
        double acc[4] = {0, 0, 0, 1.0};
        for (int mi = 0; mi < 3; ++mi) {
            std::size_t correct = 0, total = 0;
            for (std::size_t m = 0; m < M; ++m) {
                const auto [c, n] =
                    accuracy_counts((*models[mi])[m], tests[m], labeled.assoc, m);
                correct += c;
                total += n;
            }
            if (total == 0) throw SizeError("experiment: no test samples");
            acc[mi] = double(correct) / double(total);
        }

        // End-to-end utility on the test window: the decision predicted from
        // features at t applies at instant t + 1.
        oracle::PerHabCache cache(sc, traffic);
        InstantEval sums[4];
        double worst[4] = {0, 0, 0, 0};
        std::size_t count = 0;
        for (std::size_t t = t_split; t < samples; ++t) {
            const std::size_t decision_t = t + 1;
            const InstantEval oracle_ev =
                evaluate_association(sc, cache, decision_t, labeled.assoc[decision_t]);
            const double ref = labeled.oracle_utility[decision_t];
            if (std::abs(oracle_ev.utility - ref) >
                1e-9 * std::max(1.0, std::abs(ref)))
                throw Error("internal: evaluated reference utility diverged from the "
                            "labeling pass");
            for (int mi = 0; mi < 3; ++mi) {
                std::vector<int> assoc(M, 0);
                std::vector<Eigen::VectorXd> scores(M);
                for (std::size_t m = 0; m < M; ++m) {
                    const Eigen::VectorXd x =
                        feature_at(labeled.per_user[m], indices[m], t);
                    scores[m] = (*models[mi])[m].W.transpose() * x;
                    assoc[m] = fedsvm::predict_association((*models[mi])[m].W, x);
                }
                assoc = repair_association(sc, cache, decision_t, std::move(assoc),
                                           scores);
                const InstantEval ev = evaluate_association(sc, cache, decision_t, assoc);
                sums[mi].utility += ev.utility;
                sums[mi].energy_term += ev.energy_term;
                sums[mi].time_term += ev.time_term;
                worst[mi] = std::min(worst[mi], ev.utility - oracle_ev.utility);
            }
            sums[3].utility += oracle_ev.utility;
            sums[3].energy_term += oracle_ev.energy_term;
            sums[3].time_term += oracle_ev.time_term;
            ++count;
        }
        if (count == 0) throw SizeError("experiment: empty evaluation window");

        for (int mi = 0; mi < 4; ++mi) {
            MethodStats st;
            st.method = kMethods[mi];
            st.accuracy = acc[mi];
            st.mean_utility = sums[mi].utility / double(count);
            st.mean_energy_term = sums[mi].energy_term / double(count);
            st.mean_time_term = sums[mi].time_term / double(count);
            st.worst_gap_vs_reference = worst[mi];
            out.methods.push_back(std::move(st));
        }
    } catch (const Error& e) {
        out.failed = true;
        out.error = e.what();
        out.methods.clear();
    }
    return out;
}

}  // namespace

ExperimentReport run_experiment(const scenario::Settings& s) {
    if (s.reps < 1) throw DomainError("experiment: need at least one repetition");
    ExperimentReport report;
    report.config_hash = s.hash();
    report.reps.resize(s.reps);
    parallel_for(s.reps, [&](std::size_t r) { report.reps[r] = run_repetition(s, r); });

    for (int mi = 0; mi < 4; ++mi) {
        std::vector<double> accs, utils;
        for (const auto& rep : report.reps) {
            if (rep.failed) continue;
            accs.push_back(rep.methods[std::size_t(mi)].accuracy);
            utils.push_back(rep.methods[std::size_t(mi)].mean_utility);
        }
        Aggregate agg;
        agg.method = kMethods[mi];
        const Moments am = moments(accs), um = moments(utils);
        agg.accuracy_mean = am.mean;
        agg.accuracy_std = am.stdev;
        agg.utility_mean = um.mean;
        agg.utility_std = um.stdev;
        agg.reps_ok = accs.size();
        report.aggregates.push_back(std::move(agg));
    }
    return report;
}

std::string ExperimentReport::report_csv() const {
    std::string out =
        "config_hash,rep,seed,method,accuracy,mean_utility,mean_energy_term,"
        "mean_time_term,worst_gap_vs_reference,failed,error\n";
    for (std::size_t r = 0; r < reps.size(); ++r) {
        const auto& rep = reps[r];
        if (rep.failed) {
            out += strfmt("%016llx,%zu,%llu,failed,,,,,,1,%s\n",
                          (unsigned long long)config_hash, r,
                          (unsigned long long)rep.seed, sanitize(rep.error).c_str());
            continue;
        }
        for (const auto& st : rep.methods) {
            out += strfmt("%016llx,%zu,%llu,%s,%s,%s,%s,%s,%s,0,\n",
                          (unsigned long long)config_hash, r,
                          (unsigned long long)rep.seed, st.method.c_str(),
                          fmt_g17(st.accuracy).c_str(),
                          fmt_g17(st.mean_utility).c_str(),
                          fmt_g17(st.mean_energy_term).c_str(),
                          fmt_g17(st.mean_time_term).c_str(),
                          fmt_g17(st.worst_gap_vs_reference).c_str());
        }
    }
    return out;
}

std::string ExperimentReport::summary_csv() const {
    std::string out =
        "config_hash,method,accuracy_mean,accuracy_std,utility_mean,utility_std,"
        "reps_ok\n";
    for (const auto& agg : aggregates) {
        out += strfmt("%016llx,%s,%s,%s,%s,%s,%zu\n", (unsigned long long)config_hash,
                      agg.method.c_str(), fmt_g17(agg.accuracy_mean).c_str(),
                      fmt_g17(agg.accuracy_std).c_str(),
                      fmt_g17(agg.utility_mean).c_str(),
                      fmt_g17(agg.utility_std).c_str(), agg.reps_ok);
    }
    return out;
}

std::vector<SweepPoint> sample_sweep(const scenario::Settings& base,
                                     const std::vector<std::size_t>& sizes,
                                     std::size_t seeds) {
    if (sizes.empty()) throw DomainError("sweep: no sizes requested");
    if (seeds < 1) throw DomainError("sweep: need at least one seed");
    const std::size_t samples = base.instants - 1;
    const std::size_t pool = *std::max_element(sizes.begin(), sizes.end());
    for (std::size_t sz : sizes)
        if (sz < 1) throw DomainError("sweep: sizes must be positive");
    if (pool + 1 >= samples)
        throw SizeError("sweep: largest size leaves no test window");

    struct Accum {
        double fl = 0, local = 0, global = 0;
    };
    std::vector<std::vector<Accum>> per_seed(seeds,
                                             std::vector<Accum>(sizes.size()));

    parallel_for(seeds, [&](std::size_t i) {
        const uint64_t seed_i = Rng::mix(base.seed, 0x5EED0000ull + i);
        scenario::Settings s = base;
        s.seed = seed_i;
        const scenario::Scenario sc = s.build_scenario();
        const scenario::TaskTrace traffic =
            scenario::synth_traffic(seed_i, s.users, s.instants, s.traffic());
        const oracle::LabeledData labeled = oracle::label_dataset(sc, traffic, s.instants);

        fedsvm::Hyper hy;
        hy.lambda1 = s.lambda1;
        hy.lambda2 = s.lambda2;
        hy.eta = s.eta;
        hy.theta_target = s.theta_target;
        hy.sigma_prime = s.sigma_prime;
        hy.eps_omega = s.eps_omega;

        for (std::size_t zi = 0; zi < sizes.size(); ++zi) {
            std::size_t correct[3] = {0, 0, 0}, total[3] = {0, 0, 0};
            for (std::size_t m = 0; m < s.users; ++m) {
                const auto& full = labeled.per_user[m];
                const auto pool_s = scenario::take_range(full, 0, pool);
                const auto train_s = scenario::take_first(pool_s, sizes[zi]);
                const auto test_s = scenario::take_range(full, pool, samples);
                const auto ds = to_datasets(train_s);

                fedsvm::TrainOptions fl_opt;
                fl_opt.max_iters = s.train_iters;
                fl_opt.gap_target = s.gap_target;
                fl_opt.seed = Rng::mix(seed_i, 0xF1000000ull + m);
                fedsvm::FedSvmState fl_state = fedsvm::train(ds, hy, fl_opt).first;
                fl_state.norm = labeled.norms[m];

                fedsvm::FedSvmState local_state =
                    baseline_local(ds, hy, Rng::mix(seed_i, 0x20CA0000ull + m));
                local_state.norm = labeled.norms[m];

                fedsvm::TrainOptions gl_opt;
                gl_opt.max_iters = std::max<std::size_t>(2000, 4 * s.train_iters);
                gl_opt.gap_target = std::min(1e-8, s.gap_target * 0.01);
                gl_opt.seed = Rng::mix(seed_i, 0x610B0000ull + m);
                fedsvm::FedSvmState gl_state = baseline_global(ds, hy, gl_opt).first;
                gl_state.norm = labeled.norms[m];

                const fedsvm::FedSvmState* states[3] = {&fl_state, &local_state,
                                                        &gl_state};
                for (int mi = 0; mi < 3; ++mi) {
                    const auto [c, n] =
                        accuracy_counts(*states[mi], test_s, labeled.assoc, m);
                    correct[mi] += c;
                    total[mi] += n;
                }
            }
            for (int mi = 0; mi < 3; ++mi)
                if (total[mi] == 0) throw SizeError("sweep: no test samples");
            per_seed[i][zi].fl = double(correct[0]) / double(total[0]);
            per_seed[i][zi].local = double(correct[1]) / double(total[1]);
            per_seed[i][zi].global = double(correct[2]) / double(total[2]);
        }
    });

    std::vector<SweepPoint> curve(sizes.size());
    for (std::size_t zi = 0; zi < sizes.size(); ++zi) {
        curve[zi].samples = sizes[zi];
        for (std::size_t i = 0; i < seeds; ++i) {
            curve[zi].fl += per_seed[i][zi].fl;
            curve[zi].local += per_seed[i][zi].local;
            curve[zi].global += per_seed[i][zi].global;
        }
        curve[zi].fl /= double(seeds);
        curve[zi].local /= double(seeds);
        curve[zi].global /= double(seeds);
    }
    return curve;
}

}  // namespace habmec::harness
