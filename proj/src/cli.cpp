#include "habmec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>

#include <CLI11.hpp>

#include "habmec/fedsvm.hpp"
#include "habmec/harness.hpp"
#include "habmec/oracle.hpp"
#include "habmec/rng.hpp"
#include "habmec/scenario.hpp"
#include "habmec/scheduler.hpp"

namespace habmec::cli {

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    bool quiet = false;
    std::optional<uint64_t> seed;
    std::optional<std::size_t> users, habs, instants, reps;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "settings file (key = value lines)");
    cmd->add_option("--seed", o.seed, "master seed (overrides config)");
    cmd->add_option("--out", o.out_dir, "output directory (default: out)");
    cmd->add_option("--users", o.users, "number of users M");
    cmd->add_option("--habs", o.habs, "number of HABs N");
    cmd->add_option("--instants", o.instants, "number of time instants T");
    cmd->add_option("--reps", o.reps, "experiment repetitions");
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

scenario::Settings resolve(const CommonOpts& o) {
    scenario::Settings s;
    if (!o.config_path.empty()) s = scenario::Settings::from_file(o.config_path);
    if (o.seed) s.seed = *o.seed;
    if (o.users) s.users = *o.users;
    if (o.habs) s.habs = *o.habs;
    if (o.instants) s.instants = *o.instants;
    if (o.reps) s.reps = *o.reps;
    return s;
}

void write_file(const CommonOpts& o, const std::string& name,
                const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string());
    const fs::path path = dir / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << content;
    f.flush();
    if (!f.good()) throw Error("write failed: " + path.string());
    if (!o.quiet) std::printf("wrote %s\n", path.string().c_str());
}

std::string hash_line(const scenario::Settings& s) {
    return strfmt("# config_hash %016llx\n", (unsigned long long)s.hash());
}

// --- simulate -------------------------------------------------------------

int cmd_simulate(const CommonOpts& o) {
    const scenario::Settings s = resolve(o);
    const scenario::Scenario sc = s.build_scenario();
    const scenario::TaskTrace trace =
        scenario::synth_traffic(s.seed, s.users, s.instants, s.traffic());
    const uint64_t hash = s.hash();

    std::string decisions = "config_hash,t,user,hab,rank,beta\n";
    std::string utility = "config_hash,t,utility\n";
    oracle::PerHabCache cache(sc, trace);
    for (std::size_t t = 0; t < s.instants; ++t) {
        const oracle::OracleResult best =
            oracle::exhaustive_association(sc, trace, t, &cache);
        for (std::size_t m = 0; m < s.users; ++m)
            decisions += strfmt("%016llx,%zu,%zu,%d,%d,%s\n", (unsigned long long)hash,
                                t, m, best.assoc[m], best.decision.rank[m],
                                fmt_g17(best.decision.beta[m]).c_str());
        utility += strfmt("%016llx,%zu,%s\n", (unsigned long long)hash, t,
                          fmt_g17(best.utility).c_str());
    }
    write_file(o, "decisions.csv", decisions);
    write_file(o, "utility.csv", utility);
    return 0;
}

// --- train ----------------------------------------------------------------

int cmd_train(const CommonOpts& o) {
    const scenario::Settings s = resolve(o);
    const scenario::Scenario sc = s.build_scenario();
    const scenario::TaskTrace trace =
        scenario::synth_traffic(s.seed, s.users, s.instants, s.traffic());
    const oracle::LabeledData labeled = oracle::label_dataset(sc, trace, s.instants);

    const std::size_t samples = s.instants - 1;
    std::size_t t_split = std::size_t(std::floor(s.train_fraction * double(samples)));
    t_split = std::max<std::size_t>(1, std::min(t_split, samples - 1));

    fedsvm::Hyper hy;
    hy.lambda1 = s.lambda1;
    hy.lambda2 = s.lambda2;
    hy.eta = s.eta;
    hy.theta_target = s.theta_target;
    hy.sigma_prime = s.sigma_prime;
    hy.eps_omega = s.eps_omega;

    for (std::size_t m = 0; m < s.users; ++m) {
        const auto train_s = scenario::take_range(labeled.per_user[m], 0, t_split);
        const auto ds = harness::to_datasets(train_s);
        fedsvm::TrainOptions opt;
        opt.max_iters = s.train_iters;
        opt.gap_target = s.gap_target;
        opt.seed = Rng::mix(s.seed, 0xF1000000ull + m);
        auto [state, conv] = fedsvm::train(ds, hy, opt);
        state.norm = labeled.norms[m];
        write_file(o, strfmt("model_user%zu.txt", m),
                   hash_line(s) + fedsvm::serialize_model(state));
        write_file(o, strfmt("trace_user%zu.csv", m), hash_line(s) + conv.csv());
    }
    return 0;
}

// --- evaluate ---------------------------------------------------------------

int cmd_evaluate(const CommonOpts& o) {
    const scenario::Settings s = resolve(o);
    const auto start = std::chrono::steady_clock::now();
    const harness::ExperimentReport report = harness::run_experiment(s);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_file(o, "report.csv", report.report_csv());
    write_file(o, "summary.csv", report.summary_csv());
    write_file(o, "timings.csv",
               strfmt("config_hash,phase,seconds\n%016llx,evaluate,%s\n",
                      (unsigned long long)s.hash(), fmt_g17(secs).c_str()));
    if (!o.quiet)
        for (const auto& agg : report.aggregates)
            std::printf("%-7s accuracy %.4f +- %.4f   utility %.6g +- %.3g  (%zu reps)\n",
                        agg.method.c_str(), agg.accuracy_mean, agg.accuracy_std,
                        agg.utility_mean, agg.utility_std, agg.reps_ok);
    return 0;
}

// --- oracle -----------------------------------------------------------------

int cmd_oracle(const CommonOpts& o) {
    const scenario::Settings s = resolve(o);
    const scenario::Scenario sc = s.build_scenario();
    const scenario::TaskTrace trace =
        scenario::synth_traffic(s.seed, s.users, s.instants, s.traffic());
    const oracle::LabeledData labeled = oracle::label_dataset(sc, trace, s.instants);
    const uint64_t hash = s.hash();

    std::string labels = "config_hash,user,t,serving_hab,label,next_hab\n";
    for (std::size_t m = 0; m < s.users; ++m)
        for (std::size_t t = 0; t + 1 < s.instants; ++t)
            labels += strfmt("%016llx,%zu,%zu,%d,%d,%d\n", (unsigned long long)hash, m,
                             t, labeled.assoc[t][m],
                             labeled.assoc[t + 1][m] == labeled.assoc[t][m] ? 1 : 0,
                             labeled.assoc[t + 1][m]);
    write_file(o, "labels.csv", labels);
    return 0;
}

// --- verify -----------------------------------------------------------------

struct Check {
    const char* name;
    void (*fn)();
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Error("check failed: " + what);
}

void check_delay_identity() {
    Rng rng(101);
    for (int it = 0; it < 200; ++it) {
        const std::size_t k = 1 + rng.uniform_int(10);
        std::vector<double> l(k);
        for (auto& v : l) v = rng.uniform(1e-3, 5.0);
        std::vector<int> ranks(k);
        for (std::size_t i = 0; i < k; ++i) ranks[i] = int(i) + 1;
        for (std::size_t i = k; i > 1; --i)
            std::swap(ranks[i - 1], ranks[rng.uniform_int(i)]);
        double direct = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            direct += scheduler::access_delay(ranks, l, i) + l[i];
        const double identity = scheduler::weighted_sum_delay(l, ranks);
        require(std::abs(direct - identity) <= 1e-12 * std::max(1.0, direct),
                "weighted delay identity");
    }
}

void check_sjf_optimal() {
    Rng rng(102);
    for (int it = 0; it < 100; ++it) {
        const std::size_t k = 2 + rng.uniform_int(5);
        std::vector<double> l(k);
        for (auto& v : l) v = rng.uniform(1e-3, 5.0);
        const auto ranks = scheduler::sjf_sequence(l);
        const double mine = scheduler::weighted_sum_delay(l, ranks);
        const double best = oracle::brute_force_sequence(l).second;
        require(mine == best, "shortest-job-first optimality");
    }
}

scheduler::PerHabProblem random_problem(Rng& rng, const netmodel::RadioParams& rp,
                                        netmodel::ComputeParams& cp, std::size_t k) {
    scheduler::PerHabProblem p;
    p.radio = &rp;
    p.compute = &cp;
    for (std::size_t i = 0; i < k; ++i) {
        p.users.push_back(i);
        p.z.push_back(std::floor(rng.uniform(1e5, 2e6)));
        p.uplink.push_back(rng.uniform(1e6, 1e8));
        p.downlink.push_back(rng.uniform(1e6, 1e8));
    }
    return p;
}

void check_split_optimality() {
    Rng rng(103);
    netmodel::RadioParams rp;
    for (int it = 0; it < 50; ++it) {
        const std::size_t k = 1 + rng.uniform_int(4);
        netmodel::ComputeParams cp = netmodel::ComputeParams::uniform(k);
        cp.energy_budget = rng.uniform(10.0, 2000.0);
        scheduler::PerHabProblem p = random_problem(rng, rp, cp, k);
        std::vector<int> ranks(k);
        for (std::size_t i = 0; i < k; ++i) ranks[i] = int(i) + 1;
        scheduler::SplitResult res;
        try {
            res = scheduler::optimize_splits(p, ranks);
        } catch (const InfeasibleBudget&) {
            continue;
        }
        for (double b : res.beta) require(b >= -1e-9 && b <= 1.0 + 1e-9, "split bounds");
        require(scheduler::hab_energy_used(p, res.beta) <=
                    cp.energy_budget * (1.0 + 1e-9) + 1e-9,
                "split budget");
        const auto grid = oracle::grid_search_splits(p, ranks, 1e-3);
        require(res.objective <= grid.objective + 1e-9 * std::max(1.0, grid.objective),
                "split no worse than lattice search");
    }
}

void check_structure_update() {
    Rng rng(104);
    for (int it = 0; it < 10; ++it) {
        const Eigen::Index d = 3, n = 3;
        Eigen::MatrixXd W(d, n);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < n; ++j) W(i, j) = rng.uniform(-1.0, 1.0);
        const Eigen::MatrixXd omega = fedsvm::update_structure_matrix(W, 1e-10);
        const auto value = [&](const Eigen::MatrixXd& om) {
            return (W * om.inverse() * W.transpose()).trace();
        };
        const double closed = value(omega);
        Eigen::MatrixXd g = W.transpose() * W;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        const double target = std::pow(es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum(), 2);
        require(std::abs(closed - target) <= 1e-6 * std::max(1.0, target),
                "structure matrix attains the closed-form value");
        for (int s = 0; s < 200; ++s) {
            Rng sub(Rng::mix(104, uint64_t(it * 1000 + s)));
            const Eigen::MatrixXd rnd = fedsvm::random_feasible_structure(std::size_t(n), sub);
            require(closed <= value(rnd + Eigen::MatrixXd::Identity(n, n) * 1e-10) + 1e-8,
                    "structure matrix beats random feasible samples");
        }
    }
}

void check_dual_machinery() {
    Rng rng(105);
    for (int it = 0; it < 100; ++it) {
        const double a = rng.uniform_int(2) ? 1.0 : 0.0;
        const double u = rng.uniform(-3.0, 3.0);
        const double v = 2.0 * (u - a);
        const double loss = (a - u) * (a - u);
        const double conj = a * v + v * v / 4.0;
        require(std::abs(loss + conj - u * v) <= 1e-10, "Fenchel-Young equality");
    }
    // G(0) equals the sum of squared labels.
    std::vector<fedsvm::LocalDataset> ds;
    std::vector<double> flat;
    std::vector<double> labels;
    double sumsq = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double a = (i % 2 == 0) ? 1.0 : 0.0;
        for (int r = 0; r < 3; ++r) flat.push_back(rng.uniform(0.0, 0.57));
        labels.push_back(a);
        sumsq += a * a;
    }
    ds.push_back(fedsvm::LocalDataset::from_flat(flat, labels));
    ds.push_back(fedsvm::LocalDataset());
    fedsvm::Hyper hy;
    const Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(2, 2) * 0.5;
    std::vector<Eigen::VectorXd> alpha{Eigen::VectorXd::Zero(6), Eigen::VectorXd()};
    const double gap0 = fedsvm::duality_gap(alpha, omega, ds, hy);
    require(std::abs(gap0 - sumsq) <= 1e-12 * std::max(1.0, sumsq),
            "zero-dual duality gap equals sum of squared labels");
}

void check_training_loop() {
    Rng rng(106);
    std::vector<fedsvm::LocalDataset> ds;
    for (int n = 0; n < 3; ++n) {
        std::vector<double> flat, labels;
        const int K = 8 + int(rng.uniform_int(5));
        for (int i = 0; i < K; ++i) {
            double x[3];
            for (double& c : x) c = rng.uniform(0.0, 0.577);
            for (double c : x) flat.push_back(c);
            labels.push_back((x[0] + x[1] > 0.577) ? 1.0 : 0.0);
        }
        ds.push_back(fedsvm::LocalDataset::from_flat(flat, labels));
    }
    fedsvm::Hyper hy;
    fedsvm::TrainOptions opt;
    opt.max_iters = 25;
    opt.gap_target = 0.0;
    opt.seed = 7;
    auto [state, trace] = fedsvm::train(ds, hy, opt);
    for (const auto& it : trace.iters) {
        require(it.gap >= -1e-9, "duality gap nonnegative");
        require(it.lemma2_lhs <= it.lemma2_rhs +
                                     1e-9 * std::max({1.0, std::abs(it.lemma2_lhs),
                                                      std::abs(it.lemma2_rhs)}),
                "per-iteration descent inequality");
    }
    auto [state2, trace2] = fedsvm::train(ds, hy, opt);
    require(state.W == state2.W && trace.csv() == trace2.csv(),
            "training determinism");
    const std::string text = fedsvm::serialize_model(state);
    const fedsvm::FedSvmState back = fedsvm::parse_model(text);
    require(back.W == state.W && back.Omega == state.Omega &&
                fedsvm::serialize_model(back) == text,
            "model serialization round-trip");
}

void check_oracle_and_validation() {
    scenario::Settings s;
    s.users = 3;
    s.habs = 2;
    s.instants = 4;
    s.seed = 11;
    const scenario::Scenario sc = s.build_scenario();
    const scenario::TaskTrace trace =
        scenario::synth_traffic(s.seed, s.users, s.instants, s.traffic());
    oracle::PerHabCache cache(sc, trace);
    const auto best = oracle::exhaustive_association(sc, trace, 0, &cache, true);
    require(best.table.size() == 8, "enumeration visits every candidate");
    double min_util = std::numeric_limits<double>::infinity();
    for (const auto& [code, util] : best.table) min_util = std::min(min_util, util);
    require(std::isfinite(min_util) && best.utility <= min_util + 1e-12,
            "exhaustive search returns the minimum");
    std::vector<scheduler::PerHabProblem> per_hab(s.habs);
    std::vector<uint64_t> masks(s.habs, 0);
    for (std::size_t m = 0; m < s.users; ++m)
        masks[std::size_t(best.assoc[m])] |= uint64_t(1) << m;
    for (std::size_t n = 0; n < s.habs; ++n)
        if (masks[n]) per_hab[n] = cache.problem(0, n, masks[n]);
    const std::string report =
        scheduler::validate_decision(best.decision, sc.radio, sc.compute, per_hab);
    require(report.empty(), "oracle decision passes validation: " + report);
    const oracle::LabeledData labeled = oracle::label_dataset(sc, trace, s.instants);
    std::size_t total = 0;
    for (const auto& us : labeled.per_user) total += us.total();
    require(total == s.users * (s.instants - 1), "one sample per user per instant");
}

const Check kChecks[] = {
    {"delay-identity", check_delay_identity},
    {"sjf-optimality", check_sjf_optimal},
    {"split-optimality", check_split_optimality},
    {"structure-update", check_structure_update},
    {"dual-machinery", check_dual_machinery},
    {"training-loop", check_training_loop},
    {"oracle-validation", check_oracle_and_validation},
};

int cmd_verify(const CommonOpts& o) {
    int failures = 0;
    for (const Check& c : kChecks) {
        try {
            c.fn();
            if (!o.quiet) std::printf("ok   %s\n", c.name);
        } catch (const std::exception& e) {
            ++failures;
            std::fprintf(stderr, "FAIL %s: %s\n", c.name, e.what());
        }
    }
    if (!o.quiet)
        std::printf("%zu checks, %d failures\n", std::size(kChecks), failures);
    return failures == 0 ? 0 : 2;
}

}  // namespace

int run_main(const std::vector<std::string>& args) {
    CLI::App app{"HAB-MEC offloading simulator and federated SVM trainer"};
    app.require_subcommand(1);

    CommonOpts sim_o, train_o, eval_o, oracle_o, verify_o;
    CLI::App* sim = app.add_subcommand(
        "simulate", "run the reference solver over one scenario and write decisions");
    add_common(sim, sim_o);
    CLI::App* train = app.add_subcommand(
        "train", "train the federated models and write model/trace files");
    add_common(train, train_o);
    CLI::App* eval = app.add_subcommand(
        "evaluate", "full experiment: accuracy and utility vs baselines");
    add_common(eval, eval_o);
    CLI::App* orc = app.add_subcommand(
        "oracle", "write exhaustive-search association labels");
    add_common(orc, oracle_o);
    CLI::App* ver = app.add_subcommand("verify", "run the invariant smoke suite");
    add_common(ver, verify_o);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_o);
        if (train->parsed()) return cmd_train(train_o);
        if (eval->parsed()) return cmd_evaluate(eval_o);
        if (orc->parsed()) return cmd_oracle(oracle_o);
        if (ver->parsed()) return cmd_verify(verify_o);
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.is_validation() ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
}

}  // namespace habmec::cli
