// Federated multi-task learning engine: per-user linear models across N HAB
// tasks with squared loss and a trace-style structure regularizer, trained by
// distributed dual coordinate ascent. One independent model state per user.
#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "habmec/common.hpp"
#include "habmec/rng.hpp"

namespace habmec::fedsvm {

struct Hyper {
    double lambda1 = 0.1;      // ridge weight, > 0
    double lambda2 = 0.1;      // cross-task coupling weight, > 0
    double eta = 1.0;          // aggregation step, (0, 1]
    double theta_target = 0.1; // local solve accuracy, (0, 1)
    double sigma_prime = 1.0;  // subproblem curvature safety factor, (0, 1]
    double eps_omega = 1e-8;   // eigenvalue floor for structure-matrix inverses
    std::size_t local_pass_cap = 50;  // coordinate-descent passes per local solve

    void validate() const;
};

// One HAB's share of a user's history. Feature matrix is d x K (one sample
// per column), labels are 0/1. Every read of the data bumps a counter so
// tests can audit which solver touched which HAB's samples; copies share the
// counter, so handing a copy to a solver still registers on the original.
class LocalDataset {
public:
    LocalDataset() : reads_(std::make_shared<std::atomic<uint64_t>>(0)) {}
    LocalDataset(Eigen::MatrixXd X, Eigen::VectorXd labels);
    // Builds from a flattened column-major (3 x K) feature block.
    static LocalDataset from_flat(const std::vector<double>& flat,
                                  const std::vector<double>& labels);

    std::size_t K() const { return std::size_t(X_.cols()); }
    std::size_t dim() const { return std::size_t(X_.rows()); }
    const Eigen::MatrixXd& X() const { touch(); return X_; }
    const Eigen::VectorXd& labels() const { touch(); return a_; }
    uint64_t reads() const { return reads_->load(std::memory_order_relaxed); }

    // Feature norms <= 1, labels in {0, 1}, everything finite.
    void validate() const;

private:
    void touch() const { reads_->fetch_add(1, std::memory_order_relaxed); }

    Eigen::MatrixXd X_;  // d x K
    Eigen::VectorXd a_;  // K
    std::shared_ptr<std::atomic<uint64_t>> reads_;
};

// Spectral quantities shared by everything that touches the structure matrix:
// M = lambda1*I + lambda2*Omega^{-1} (eigenvalue-floored inverse), its
// inverse, and the strong-convexity constant mu1 = 2*lambda_min(M).
struct StructureOps {
    Eigen::MatrixXd M;
    Eigen::MatrixXd Minv;
    double mu1 = 0.0;
};
// Validates Omega (symmetric, PSD up to the floor, trace 1) and factors it.
// With eps_omega = 0 a singular Omega raises SingularityError.
StructureOps analyze_structure(const Eigen::MatrixXd& omega, const Hyper& hy);

// Z(alpha): d x N, column n = X_n * alpha_n.
Eigen::MatrixXd dual_z(const std::vector<Eigen::VectorXd>& alpha,
                       const std::vector<LocalDataset>& datasets);

// sum_n sum_k (a - w_n.x)^2 + lambda1*|W|_F^2 + lambda2*tr(W Omega^-1 W^T).
double primal_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& omega,
                        const std::vector<LocalDataset>& datasets, const Hyper& hy);

// W(alpha) = (1/2) Z(alpha) M^{-1}; the conjugate-gradient map.
Eigen::MatrixXd primal_from_dual(const std::vector<Eigen::VectorXd>& alpha,
                                 const Eigen::MatrixXd& omega,
                                 const std::vector<LocalDataset>& datasets,
                                 const Hyper& hy);

// D(alpha) = sum_n sum_k (-a*alpha + alpha^2/4) + (1/4) tr(Z M^{-1} Z^T).
// Minimized by training; -min D equals the primal minimum.
double dual_objective(const std::vector<Eigen::VectorXd>& alpha,
                      const Eigen::MatrixXd& omega,
                      const std::vector<LocalDataset>& datasets, const Hyper& hy);

// primal_objective at W(alpha) plus D(alpha); >= 0, zero exactly at optimum.
double duality_gap(const std::vector<Eigen::VectorXd>& alpha,
                   const Eigen::MatrixXd& omega,
                   const std::vector<LocalDataset>& datasets, const Hyper& hy);

// Node n's surrogate objective at update delta: conjugate terms at
// alpha_n + delta, the cross term <w_n, X_n delta>, the curvature term
// (sigma'/(2 mu1)) |X_n delta|^2, and the constant share (1/N) R*(Z(alpha))
// so the surrogates sum to D(alpha) at delta = 0.
double local_subproblem(const Eigen::VectorXd& delta, const Eigen::MatrixXd& W,
                        const std::vector<Eigen::VectorXd>& alpha, std::size_t n,
                        const Eigen::MatrixXd& omega,
                        const std::vector<LocalDataset>& datasets, const Hyper& hy);

struct LocalSolveResult {
    Eigen::VectorXd delta;  // proposed dual update for this node
    double theta = 0.0;     // measured normalized suboptimality of delta
    int passes = 0;         // coordinate-descent passes used
    double decrease = 0.0;  // surrogate decrease achieved from delta = 0
    double exact_decrease = 0.0;  // surrogate decrease of the exact minimizer
};

// Exact cyclic coordinate descent on node n's quadratic surrogate until the
// measured accuracy theta <= theta_target (theta is exact: the quadratic's
// minimizer is computed in closed form through a d x d solve) or the pass cap.
LocalSolveResult solve_local(const LocalDataset& ds, const Eigen::VectorXd& w_n,
                             const Eigen::VectorXd& alpha_n,
                             const Eigen::MatrixXd& omega, const Hyper& hy);
// Same, with mu1 already known (training fast path).
LocalSolveResult solve_local_mu(const LocalDataset& ds, const Eigen::VectorXd& w_n,
                                const Eigen::VectorXd& alpha_n, double mu1,
                                const Hyper& hy);

// Closed-form structure update: (W^T W + eps*I)^{1/2} / tr(...). Returns the
// uniform I/N when W = 0 and eps = 0. Symmetric PSD with unit trace.
Eigen::MatrixXd update_structure_matrix(const Eigen::MatrixXd& W, double eps_omega);

// Random symmetric PSD trace-one matrix: uniform entries, symmetrized,
// eigenvalues clipped at zero, trace-normalized.
Eigen::MatrixXd random_feasible_structure(std::size_t N, Rng& rng);

// argmax_n w_n.x, ties to the lowest index.
int predict_association(const Eigen::MatrixXd& W, const Eigen::VectorXd& x);

struct IterRecord {
    double dual = 0.0;        // D at iteration start
    double primal = 0.0;      // primal at the matched W
    double gap = 0.0;         // primal + dual
    double lemma2_lhs = 0.0;  // D(alpha + eta*delta) under this iteration's M
    double lemma2_rhs = 0.0;  // (1-eta)*D + eta*sum of local surrogates
    double theta = 0.0;       // worst measured local accuracy this iteration
    double s = 0.0;           // mu1*mu2/(mu1*mu2 + sigma') at this iteration's M
    double mu1 = 0.0;
};

struct ConvergenceTrace {
    std::vector<IterRecord> iters;  // one per completed update
    double final_dual = 0.0;
    double final_primal = 0.0;
    double final_gap = 0.0;
    bool reached_gap = false;  // stopped on the gap target (vs the iteration cap)
    double eta = 1.0;

    double initial_gap() const { return iters.empty() ? final_gap : iters.front().gap; }
    double s_min() const;      // weakest per-iteration rate constant
    double theta_max() const;  // worst local accuracy over the run
    std::string csv() const;   // deterministic rendering, %.17g
};

struct FedSvmState {
    Eigen::MatrixXd W;      // d x N
    Eigen::MatrixXd Omega;  // N x N, symmetric PSD, trace 1
    std::vector<Eigen::VectorXd> alpha;
    Hyper hyper;
    FeatureNorm norm;  // training-time feature scaling, stored with the model
};

// Thrown when the duality gap runs away (10x its best value); carries the
// trace for diagnostics.
class TrainDiverged : public DivergenceError {
public:
    TrainDiverged(const std::string& msg, ConvergenceTrace tr)
        : DivergenceError(msg), trace(std::move(tr)) {}
    ConvergenceTrace trace;
};

struct TrainOptions {
    std::size_t max_iters = 500;
    double gap_target = 1e-6;  // absolute duality-gap stop
    uint64_t seed = 1;         // random feasible initial structure matrix
};

// Distributed training loop. Per iteration: factor the structure matrix,
// recover W, record dual/primal/gap, run the per-node local solves (results
// reduced in ascending node order), check the surrogate upper bound, apply
// alpha += eta*delta, broadcast W, update the structure matrix. Stops when
// the gap reaches the target or at the iteration cap.
std::pair<FedSvmState, ConvergenceTrace> train(const std::vector<LocalDataset>& datasets,
                                               const Hyper& hy,
                                               const TrainOptions& opt);

struct BoundReport {
    bool lemma2_ok = true;        // per-iteration surrogate upper bound
    bool dual_envelope_ok = true; // geometric dual-suboptimality envelope
    bool gap_envelope_ok = true;  // geometric duality-gap envelope
    std::size_t first_violation = SIZE_MAX;  // iteration index of first failure
    double rate = 0.0;            // 1 - s*eta*(1-theta)
    std::string message;          // human-readable summary

    bool ok() const { return lemma2_ok && dual_envelope_ok && gap_envelope_ok; }
};

// Verifies, on a recorded trace: (a) the per-iteration surrogate inequality
// (tolerance 1e-9); (b) D_h - dstar <= rate^h * (D_0 - dstar); (c) gap_h <=
// rate^h * gap_0, with rate = 1 - s*eta*(1-theta). dstar should be the best
// dual value over an extended run. Iterations whose remaining suboptimality
// is below 1e-12 of the initial one count as satisfied (numerical floor).
BoundReport convergence_bound_check(const ConvergenceTrace& trace, double s, double eta,
                                    double theta, double dstar);

// Versioned text serialization of a trained model (alpha not included):
// dims, hyperparameters, normalization constants, W, Omega. Lossless: every
// double rendered with 17 significant digits.
std::string serialize_model(const FedSvmState& state);
FedSvmState parse_model(const std::string& text);

}  // namespace habmec::fedsvm
