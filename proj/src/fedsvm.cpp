#include "habmec/fedsvm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "habmec/rng.hpp"

namespace habmec::fedsvm {

namespace {

constexpr double kMu2 = 0.5;  // strong convexity of the squared-loss conjugate

bool finite(double v) { return std::isfinite(v); }

// sum_k l*(-alpha_k; a_k) with l*(-alpha) = -a*alpha + alpha^2/4.
double conjugate_sum(const Eigen::VectorXd& a, const Eigen::VectorXd& alpha) {
    return -a.dot(alpha) + 0.25 * alpha.squaredNorm();
}

double rstar(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Minv) {
    return 0.25 * (Z * Minv).cwiseProduct(Z).sum();
}

double rate_s(double mu1, double sigma_prime) {
    return mu1 * kMu2 / (mu1 * kMu2 + sigma_prime);
}

}  // namespace

void Hyper::validate() const {
    if (!(lambda1 > 0.0) || !finite(lambda1))
        throw DomainError("hyper: lambda1 must be positive");
    if (!(lambda2 >= 0.0) || !finite(lambda2))
        throw DomainError("hyper: lambda2 must be nonnegative");
    if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("hyper: eta must lie in (0,1]");
    if (!(theta_target > 0.0 && theta_target < 1.0))
        throw DomainError("hyper: theta_target must lie in (0,1)");
    if (!(sigma_prime > 0.0 && sigma_prime <= 1.0))
        throw DomainError("hyper: sigma_prime must lie in (0,1]");
    if (!(eps_omega >= 0.0)) throw DomainError("hyper: eps_omega must be nonnegative");
    if (local_pass_cap < 1) throw DomainError("hyper: local_pass_cap must be >= 1");
}

LocalDataset::LocalDataset(Eigen::MatrixXd X, Eigen::VectorXd labels)
    : X_(std::move(X)),
      a_(std::move(labels)),
      reads_(std::make_shared<std::atomic<uint64_t>>(0)) {
    if (X_.cols() != a_.size())
        throw SizeError("dataset: feature columns and labels disagree");
}

LocalDataset LocalDataset::from_flat(const std::vector<double>& flat,
                                     const std::vector<double>& labels) {
    if (flat.size() != 3 * labels.size())
        throw SizeError("dataset: flat feature block is not 3 x K");
    const std::size_t K = labels.size();
    Eigen::MatrixXd X(3, K);
    for (std::size_t k = 0; k < K; ++k)
        for (int r = 0; r < 3; ++r) X(r, k) = flat[3 * k + r];
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(labels.data(), K);
    return LocalDataset(std::move(X), std::move(a));
}

void LocalDataset::validate() const {
    if (!X_.allFinite() || !a_.allFinite())
        throw DomainError("dataset: non-finite entries");
    for (Eigen::Index k = 0; k < X_.cols(); ++k)
        if (X_.col(k).norm() > 1.0 + 1e-9)
            throw DomainError("dataset: feature norm exceeds 1 after scaling");
    for (Eigen::Index k = 0; k < a_.size(); ++k)
        if (a_(k) != 0.0 && a_(k) != 1.0)
            throw DomainError("dataset: labels must be 0 or 1");
}

StructureOps analyze_structure(const Eigen::MatrixXd& omega, const Hyper& hy) {
    hy.validate();
    const Eigen::Index N = omega.rows();
    if (N < 1 || omega.cols() != N) throw SizeError("structure matrix must be square");
    if (!omega.allFinite()) throw DomainError("structure matrix has non-finite entries");
    if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > 1e-8)
        throw DomainError("structure matrix must be symmetric");
    if (std::abs(omega.trace() - 1.0) > 1e-6)
        throw DomainError("structure matrix must have trace 1");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
    if (es.info() != Eigen::Success)
        throw SingularityError("structure matrix eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-8)
        throw DomainError("structure matrix must be positive semidefinite");
    for (Eigen::Index i = 0; i < N; ++i) {
        if (hy.eps_omega > 0.0)
            ev(i) = std::max(ev(i), hy.eps_omega);
        else if (!(ev(i) > 0.0))
            throw SingularityError(
                "structure matrix is singular and the eigenvalue floor is disabled");
    }
    // M = lambda1*I + lambda2*Omega^{-1} shares Omega's eigenvectors.
    Eigen::VectorXd mev(N), minv_ev(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        mev(i) = hy.lambda1 + hy.lambda2 / ev(i);
        minv_ev(i) = 1.0 / mev(i);
    }
    StructureOps ops;
    const Eigen::MatrixXd& V = es.eigenvectors();
    ops.M = V * mev.asDiagonal() * V.transpose();
    ops.Minv = V * minv_ev.asDiagonal() * V.transpose();
    ops.mu1 = 2.0 * mev.minCoeff();
    return ops;
}

Eigen::MatrixXd dual_z(const std::vector<Eigen::VectorXd>& alpha,
                       const std::vector<LocalDataset>& datasets) {
    const std::size_t N = datasets.size();
    if (alpha.size() != N) throw SizeError("dual vector count differs from node count");
    Eigen::Index d = 0;
    for (const auto& ds : datasets)
        if (ds.K() > 0) d = std::max<Eigen::Index>(d, Eigen::Index(ds.dim()));
    if (d == 0) d = 3;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d, Eigen::Index(N));
    for (std::size_t n = 0; n < N; ++n) {
        if (datasets[n].K() == 0) {
            if (alpha[n].size() != 0)
                throw SizeError("dual vector length differs from its dataset");
            continue;
        }
        if (alpha[n].size() != Eigen::Index(datasets[n].K()))
            throw SizeError("dual vector length differs from its dataset");
        if (Eigen::Index(datasets[n].dim()) != d)
            throw SizeError("datasets disagree on feature dimension");
        Z.col(Eigen::Index(n)) = datasets[n].X() * alpha[n];
    }
    return Z;
}

double primal_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& omega,
                        const std::vector<LocalDataset>& datasets, const Hyper& hy) {
    const StructureOps ops = analyze_structure(omega, hy);
    if (W.cols() != Eigen::Index(datasets.size()))
        throw SizeError("model columns differ from node count");
    double loss = 0.0;
    for (std::size_t n = 0; n < datasets.size(); ++n) {
        const auto& ds = datasets[n];
        if (ds.K() == 0) continue;
        if (Eigen::Index(ds.dim()) != W.rows())
            throw SizeError("model rows differ from the feature dimension");
        loss += (ds.labels() - ds.X().transpose() * W.col(Eigen::Index(n))).squaredNorm();
    }
    return loss + (W * ops.M).cwiseProduct(W).sum();
}

Eigen::MatrixXd primal_from_dual(const std::vector<Eigen::VectorXd>& alpha,
                                 const Eigen::MatrixXd& omega,
                                 const std::vector<LocalDataset>& datasets,
                                 const Hyper& hy) {
    const StructureOps ops = analyze_structure(omega, hy);
    return 0.5 * dual_z(alpha, datasets) * ops.Minv;
}

double dual_objective(const std::vector<Eigen::VectorXd>& alpha,
                      const Eigen::MatrixXd& omega,
                      const std::vector<LocalDataset>& datasets, const Hyper& hy) {
    const StructureOps ops = analyze_structure(omega, hy);
    double val = rstar(dual_z(alpha, datasets), ops.Minv);
    for (std::size_t n = 0; n < datasets.size(); ++n)
        if (datasets[n].K() > 0) val += conjugate_sum(datasets[n].labels(), alpha[n]);
    return val;
}

double duality_gap(const std::vector<Eigen::VectorXd>& alpha,
                   const Eigen::MatrixXd& omega,
                   const std::vector<LocalDataset>& datasets, const Hyper& hy) {
    return primal_objective(primal_from_dual(alpha, omega, datasets, hy), omega,
                            datasets, hy) +
           dual_objective(alpha, omega, datasets, hy);
}

double local_subproblem(const Eigen::VectorXd& delta, const Eigen::MatrixXd& W,
                        const std::vector<Eigen::VectorXd>& alpha, std::size_t n,
                        const Eigen::MatrixXd& omega,
                        const std::vector<LocalDataset>& datasets, const Hyper& hy) {
    const StructureOps ops = analyze_structure(omega, hy);
    if (n >= datasets.size()) throw SizeError("local subproblem: node out of range");
    const double constant =
        rstar(dual_z(alpha, datasets), ops.Minv) / double(datasets.size());
    const auto& ds = datasets[n];
    if (ds.K() == 0) {
        if (delta.size() != 0) throw SizeError("local subproblem: delta length");
        return constant;
    }
    if (delta.size() != Eigen::Index(ds.K()))
        throw SizeError("local subproblem: delta length");
    const Eigen::VectorXd v = ds.X() * delta;
    return conjugate_sum(ds.labels(), alpha[n] + delta) +
           W.col(Eigen::Index(n)).dot(v) +
           (hy.sigma_prime / (2.0 * ops.mu1)) * v.squaredNorm() + constant;
}

LocalSolveResult solve_local_mu(const LocalDataset& ds, const Eigen::VectorXd& w_n,
                                const Eigen::VectorXd& alpha_n, double mu1,
                                const Hyper& hy) {
    LocalSolveResult res;
    const std::size_t K = ds.K();
    if (K == 0) {
        res.delta.resize(0);
        return res;
    }
    const Eigen::MatrixXd& X = ds.X();
    const Eigen::VectorXd& a = ds.labels();
    const Eigen::Index d = X.rows();
    const double c = hy.sigma_prime / mu1;

    // Surrogate minus its value at 0: g0.delta + |delta|^2/4 + (c/2)|X delta|^2.
    const Eigen::VectorXd g0 =
        -a + 0.5 * alpha_n + X.transpose() * w_n;  // gradient at delta = 0
    const Eigen::VectorXd b = -g0;

    // Exact minimizer via the Woodbury identity: H = I/2 + c X^T X,
    // H^{-1} b = 2b - 4 X^T (I/c + 2 X X^T)^{-1} X b, a d x d solve.
    Eigen::MatrixXd core = 2.0 * (X * X.transpose());
    core += (1.0 / c) * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd xb = X * b;
    const Eigen::VectorXd delta_star = 2.0 * b - 4.0 * (X.transpose() * core.llt().solve(xb));
    const double exact_dec = 0.5 * b.dot(delta_star);
    res.exact_decrease = std::max(0.0, exact_dec);

    Eigen::VectorXd delta = Eigen::VectorXd::Zero(Eigen::Index(K));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);  // X * delta, maintained
    Eigen::VectorXd sqnorm = Eigen::VectorXd::Zero(Eigen::Index(K));
    for (Eigen::Index k = 0; k < Eigen::Index(K); ++k)
        sqnorm(k) = X.col(k).squaredNorm();

    if (res.exact_decrease <= 0.0) {
        // Already optimal: the zero update is exact.
        res.delta = std::move(delta);
        res.theta = 0.0;
        return res;
    }

    double theta = 1.0;
    int pass = 0;
    while (pass < int(hy.local_pass_cap)) {
        ++pass;
        for (Eigen::Index k = 0; k < Eigen::Index(K); ++k) {
            const double grad = g0(k) + 0.5 * delta(k) + c * X.col(k).dot(v);
            const double curv = 0.5 + c * sqnorm(k);
            const double step = grad / curv;
            if (step != 0.0) {
                v -= step * X.col(k);
                delta(k) -= step;
            }
        }
        const double dec = -(g0.dot(delta) + 0.25 * delta.squaredNorm() +
                             0.5 * c * v.squaredNorm());
        theta = (res.exact_decrease - dec) / res.exact_decrease;
        theta = std::max(0.0, theta);
        res.decrease = dec;
        if (theta <= hy.theta_target) break;
    }
    res.delta = std::move(delta);
    res.theta = theta;
    res.passes = pass;
    return res;
}

LocalSolveResult solve_local(const LocalDataset& ds, const Eigen::VectorXd& w_n,
                             const Eigen::VectorXd& alpha_n,
                             const Eigen::MatrixXd& omega, const Hyper& hy) {
    return solve_local_mu(ds, w_n, alpha_n, analyze_structure(omega, hy).mu1, hy);
}

Eigen::MatrixXd update_structure_matrix(const Eigen::MatrixXd& W, double eps_omega) {
    const Eigen::Index N = W.cols();
    if (N < 1) throw SizeError("structure update: no model columns");
    if (!W.allFinite()) throw DomainError("structure update: non-finite model");
    Eigen::MatrixXd A = W.transpose() * W;
    A += eps_omega * Eigen::MatrixXd::Identity(N, N);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw SingularityError("structure update: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const double tr = ev.sum();
    if (!(tr > 0.0)) return Eigen::MatrixXd::Identity(N, N) / double(N);
    Eigen::MatrixXd omega =
        es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose() / tr;
    return 0.5 * (omega + omega.transpose());
}

Eigen::MatrixXd random_feasible_structure(std::size_t N, Rng& rng) {
    if (N < 1) throw SizeError("structure init: need at least one node");
    const Eigen::Index n = Eigen::Index(N);
    Eigen::MatrixXd U(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) U(i, j) = rng.uniform();
    Eigen::MatrixXd S = 0.5 * (U + U.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const double tr = ev.sum();
    if (!(tr > 0.0)) return Eigen::MatrixXd::Identity(Eigen::Index(N), Eigen::Index(N)) /
                            double(N);
    Eigen::MatrixXd omega =
        es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose() / tr;
    return 0.5 * (omega + omega.transpose());
}

int predict_association(const Eigen::MatrixXd& W, const Eigen::VectorXd& x) {
    if (W.cols() < 1) throw SizeError("predict: empty model");
    if (W.rows() != x.size()) throw SizeError("predict: feature dimension mismatch");
    int best = 0;
    double best_score = W.col(0).dot(x);
    for (Eigen::Index n = 1; n < W.cols(); ++n) {
        const double s = W.col(n).dot(x);
        if (s > best_score) {
            best_score = s;
            best = int(n);
        }
    }
    return best;
}

double ConvergenceTrace::s_min() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& it : iters) s = std::min(s, it.s);
    return iters.empty() ? 0.0 : s;
}

double ConvergenceTrace::theta_max() const {
    double t = 0.0;
    for (const auto& it : iters) t = std::max(t, it.theta);
    return t;
}

std::string ConvergenceTrace::csv() const {
    std::string out =
        "iter,dual,primal,gap,lemma2_lhs,lemma2_rhs,theta,s,mu1\n";
    for (std::size_t h = 0; h < iters.size(); ++h) {
        const auto& it = iters[h];
        out += strfmt("%zu,%s,%s,%s,%s,%s,%s,%s,%s\n", h, fmt_g17(it.dual).c_str(),
                      fmt_g17(it.primal).c_str(), fmt_g17(it.gap).c_str(),
                      fmt_g17(it.lemma2_lhs).c_str(), fmt_g17(it.lemma2_rhs).c_str(),
                      fmt_g17(it.theta).c_str(), fmt_g17(it.s).c_str(),
                      fmt_g17(it.mu1).c_str());
    }
    out += strfmt("%zu,%s,%s,%s,,,,,\n", iters.size(), fmt_g17(final_dual).c_str(),
                  fmt_g17(final_primal).c_str(), fmt_g17(final_gap).c_str());
    return out;
}

std::pair<FedSvmState, ConvergenceTrace> train(const std::vector<LocalDataset>& datasets,
                                               const Hyper& hy,
                                               const TrainOptions& opt) {
    hy.validate();
    const std::size_t N = datasets.size();
    if (N < 1) throw SizeError("train: need at least one node");
    Eigen::Index d = 0;
    for (const auto& ds : datasets) {
        ds.validate();
        if (ds.K() > 0) {
            if (d == 0) d = Eigen::Index(ds.dim());
            if (Eigen::Index(ds.dim()) != d)
                throw SizeError("train: inconsistent feature dimensions");
        }
    }
    if (d == 0) d = 3;

    Rng rng(Rng::mix(opt.seed, 0xFED50001u));
    Eigen::MatrixXd omega = random_feasible_structure(N, rng);
    std::vector<Eigen::VectorXd> alpha(N);
    for (std::size_t n = 0; n < N; ++n)
        alpha[n] = Eigen::VectorXd::Zero(Eigen::Index(datasets[n].K()));

    ConvergenceTrace trace;
    trace.eta = hy.eta;
    FedSvmState state;
    state.hyper = hy;

    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t iters_above_best = 0;
    std::vector<LocalSolveResult> results(N);

    for (std::size_t h = 0;; ++h) {
        const StructureOps ops = analyze_structure(omega, hy);
        const Eigen::MatrixXd Z = dual_z(alpha, datasets);
        const Eigen::MatrixXd W = 0.5 * Z * ops.Minv;

        double dual = rstar(Z, ops.Minv);
        double loss = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            if (datasets[n].K() == 0) continue;
            dual += conjugate_sum(datasets[n].labels(), alpha[n]);
            loss += (datasets[n].labels() -
                     datasets[n].X().transpose() * W.col(Eigen::Index(n)))
                        .squaredNorm();
        }
        const double primal = loss + (W * ops.M).cwiseProduct(W).sum();
        const double gap = primal + dual;
        if (!finite(gap))
            throw TrainDiverged("training produced a non-finite duality gap",
                                std::move(trace));
        // The gap legitimately rises for a few iterations while the structure
        // matrix re-orients, so a 10x climb from the minimum only counts as
        // divergence once it returns to the initial gap's scale or persists.
        if (gap > 10.0 * best_gap + 1e-12 * std::max(1.0, trace.initial_gap()))
            ++iters_above_best;
        else
            iters_above_best = 0;
        if (iters_above_best > 0 &&
            (gap > 0.5 * trace.initial_gap() || iters_above_best >= 50))
            throw TrainDiverged(
                strfmt("duality gap %.6g exceeded 10x its best value %.6g at iteration %zu",
                       gap, best_gap, h),
                std::move(trace));
        best_gap = std::min(best_gap, gap);

        if (gap <= opt.gap_target || h >= opt.max_iters) {
            trace.final_dual = dual;
            trace.final_primal = primal;
            trace.final_gap = gap;
            trace.reached_gap = gap <= opt.gap_target;
            state.W = W;
            state.Omega = omega;
            state.alpha = alpha;
            return {std::move(state), std::move(trace)};
        }

        // Independent per-node solves; results land in index-addressed slots.
        parallel_for(N, [&](std::size_t n) {
            results[n] =
                solve_local_mu(datasets[n], W.col(Eigen::Index(n)), alpha[n], ops.mu1, hy);
        });

        IterRecord rec;
        rec.dual = dual;
        rec.primal = primal;
        rec.gap = gap;
        rec.mu1 = ops.mu1;
        rec.s = rate_s(ops.mu1, hy.sigma_prime);
        for (std::size_t n = 0; n < N; ++n) rec.theta = std::max(rec.theta, results[n].theta);

        // Surrogate upper bound (checked every iteration): D(alpha + eta*delta)
        // under the current M vs (1-eta)*D + eta*sum_n G_n(delta_n).
        double sum_g = rstar(Z, ops.Minv);  // the N constant shares add back R*(Z)
        Eigen::MatrixXd Znew = Z;
        std::vector<Eigen::VectorXd> alpha_new(N);
        double conj_new = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            if (datasets[n].K() == 0) {
                alpha_new[n] = alpha[n];
                continue;
            }
            const auto& ds = datasets[n];
            const Eigen::VectorXd v = ds.X() * results[n].delta;
            sum_g += conjugate_sum(ds.labels(), alpha[n] + results[n].delta) +
                     W.col(Eigen::Index(n)).dot(v) +
                     (hy.sigma_prime / (2.0 * ops.mu1)) * v.squaredNorm();
            alpha_new[n] = alpha[n] + hy.eta * results[n].delta;
            Znew.col(Eigen::Index(n)) += hy.eta * v;
            conj_new += conjugate_sum(ds.labels(), alpha_new[n]);
        }
        rec.lemma2_lhs = conj_new + rstar(Znew, ops.Minv);
        rec.lemma2_rhs = (1.0 - hy.eta) * dual + hy.eta * sum_g;
        trace.iters.push_back(rec);

        alpha = std::move(alpha_new);
        // Broadcast models computed with this iteration's M, then adapt the
        // structure matrix to them.
        const Eigen::MatrixXd Wbcast = 0.5 * Znew * ops.Minv;
        omega = update_structure_matrix(Wbcast, hy.eps_omega);
    }
}

BoundReport convergence_bound_check(const ConvergenceTrace& trace, double s, double eta,
                                    double theta, double dstar) {
    BoundReport rep;
    rep.rate = 1.0 - s * eta * (1.0 - theta);
    std::string msg;

    // Dual values along the trajectory: iterate records then the final state.
    std::vector<double> duals, gaps;
    for (const auto& it : trace.iters) {
        duals.push_back(it.dual);
        gaps.push_back(it.gap);
    }
    duals.push_back(trace.final_dual);
    gaps.push_back(trace.final_gap);

    for (std::size_t h = 0; h < trace.iters.size(); ++h) {
        const auto& it = trace.iters[h];
        const double tol = 1e-9 * std::max({1.0, std::abs(it.lemma2_lhs),
                                            std::abs(it.lemma2_rhs)});
        if (it.lemma2_lhs > it.lemma2_rhs + tol) {
            rep.lemma2_ok = false;
            rep.first_violation = std::min(rep.first_violation, h);
            if (msg.empty())
                msg = strfmt("surrogate bound violated at iteration %zu (lhs %.17g > rhs %.17g)",
                             h, it.lemma2_lhs, it.lemma2_rhs);
        }
    }

    const double d0 = duals.front() - dstar;
    const double floor_d = 1e-12 * std::max(1.0, std::abs(d0));
    double envelope = d0;
    for (std::size_t h = 0; h < duals.size(); ++h) {
        const double sub = duals[h] - dstar;
        if (sub > envelope + floor_d && sub > floor_d) {
            rep.dual_envelope_ok = false;
            rep.first_violation = std::min(rep.first_violation, h);
            if (msg.empty())
                msg = strfmt("dual envelope violated at iteration %zu (%.17g > %.17g)", h,
                             sub, envelope);
        }
        envelope *= rep.rate;
    }

    const double g0 = gaps.front();
    const double floor_g = 1e-12 * std::max(1.0, std::abs(g0));
    double genv = g0;
    for (std::size_t h = 0; h < gaps.size(); ++h) {
        if (gaps[h] > genv + floor_g && gaps[h] > floor_g) {
            rep.gap_envelope_ok = false;
            rep.first_violation = std::min(rep.first_violation, h);
            if (msg.empty())
                msg = strfmt("gap envelope violated at iteration %zu (%.17g > %.17g)", h,
                             gaps[h], genv);
        }
        genv *= rep.rate;
    }

    rep.message = rep.ok() ? "all convergence bounds hold" : msg;
    return rep;
}

namespace {

void put_vals(std::string& out, const char* key, const double* v, std::size_t n) {
    out += key;
    for (std::size_t i = 0; i < n; ++i) {
        out += ' ';
        out += fmt_g17(v[i]);
    }
    out += '\n';
}

}  // namespace

std::string serialize_model(const FedSvmState& state) {
    const Eigen::Index d = state.W.rows(), N = state.W.cols();
    if (state.Omega.rows() != N || state.Omega.cols() != N)
        throw SizeError("serialize: structure matrix does not match the model");
    std::string out = "habmec-model 1\n";
    out += strfmt("dims %lld %lld\n", (long long)d, (long long)N);
    const double hy[6] = {state.hyper.lambda1, state.hyper.lambda2, state.hyper.eta,
                          state.hyper.theta_target, state.hyper.sigma_prime,
                          state.hyper.eps_omega};
    put_vals(out, "hyper", hy, 6);
    put_vals(out, "norm_lo", state.norm.lo, 3);
    put_vals(out, "norm_hi", state.norm.hi, 3);
    std::vector<double> w(std::size_t(d * N)), om(std::size_t(N * N));
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < N; ++c) w[std::size_t(r * N + c)] = state.W(r, c);
    for (Eigen::Index r = 0; r < N; ++r)
        for (Eigen::Index c = 0; c < N; ++c) om[std::size_t(r * N + c)] = state.Omega(r, c);
    put_vals(out, "w", w.data(), w.size());
    put_vals(out, "omega", om.data(), om.size());
    out += "end\n";
    return out;
}

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream in(line);
    std::string t;
    while (in >> t) toks.push_back(t);
    return toks;
}

double parse_double(const std::string& tok, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (!end || *end != '\0')
        throw ParseError(std::string("model: bad numeric value in ") + what);
    return v;
}

long long parse_int(const std::string& tok, const char* what) {
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (!end || *end != '\0')
        throw ParseError(std::string("model: bad integer value in ") + what);
    return v;
}

}  // namespace

FedSvmState parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_tokens = [&](const char* key, std::size_t count) {
        if (!std::getline(in, line)) throw ParseError("model: truncated file");
        auto toks = tokens_of(line);
        if (toks.empty() || toks[0] != key)
            throw ParseError(std::string("model: expected '") + key + "' line");
        if (count != SIZE_MAX && toks.size() != count + 1)
            throw ParseError(std::string("model: wrong value count on '") + key + "'");
        return toks;
    };

    // Leading '#' lines are annotations (the CLI stamps the config hash).
    do {
        if (!std::getline(in, line))
            throw ParseError("model: missing or unsupported header");
    } while (!line.empty() && line[0] == '#');
    if (line != "habmec-model 1")
        throw ParseError("model: missing or unsupported header");
    auto dims = next_tokens("dims", 2);
    const long long d = parse_int(dims[1], "dims");
    const long long N = parse_int(dims[2], "dims");
    if (d < 1 || N < 1 || d > 4096 || N > 4096) throw ParseError("model: bad dimensions");

    FedSvmState state;
    auto hy = next_tokens("hyper", 6);
    state.hyper.lambda1 = parse_double(hy[1], "hyper");
    state.hyper.lambda2 = parse_double(hy[2], "hyper");
    state.hyper.eta = parse_double(hy[3], "hyper");
    state.hyper.theta_target = parse_double(hy[4], "hyper");
    state.hyper.sigma_prime = parse_double(hy[5], "hyper");
    state.hyper.eps_omega = parse_double(hy[6], "hyper");

    auto lo = next_tokens("norm_lo", 3);
    auto hi = next_tokens("norm_hi", 3);
    for (int i = 0; i < 3; ++i) {
        state.norm.lo[i] = parse_double(lo[std::size_t(i) + 1], "norm_lo");
        state.norm.hi[i] = parse_double(hi[std::size_t(i) + 1], "norm_hi");
    }

    auto w = next_tokens("w", std::size_t(d) * std::size_t(N));
    state.W.resize(d, N);
    for (long long r = 0; r < d; ++r)
        for (long long c = 0; c < N; ++c)
            state.W(r, c) = parse_double(w[std::size_t(r * N + c) + 1], "w");
    auto om = next_tokens("omega", std::size_t(N) * std::size_t(N));
    state.Omega.resize(N, N);
    for (long long r = 0; r < N; ++r)
        for (long long c = 0; c < N; ++c)
            state.Omega(r, c) = parse_double(om[std::size_t(r * N + c) + 1], "omega");
    if (!std::getline(in, line) || tokens_of(line) != std::vector<std::string>{"end"})
        throw ParseError("model: missing end marker");
    return state;
}

}  // namespace habmec::fedsvm
