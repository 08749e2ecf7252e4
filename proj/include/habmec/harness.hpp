// Experiment orchestration: trains the federated models and both baselines,
// evaluates prediction accuracy and end-to-end utility against the
// exhaustive-search reference, and aggregates repetitions into CSV reports.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "habmec/fedsvm.hpp"
#include "habmec/oracle.hpp"
#include "habmec/scenario.hpp"

namespace habmec::harness {

// One user's per-HAB sample blocks as solver datasets (3 x K_n each).
std::vector<fedsvm::LocalDataset> to_datasets(const scenario::UserSamples& s);

// Per-HAB independent ridge models: coupling weight zero, each HAB fits its
// own samples only, no communication. Column n of the result is HAB n's
// model; HABs with no samples keep the zero model.
fedsvm::FedSvmState baseline_local(const std::vector<fedsvm::LocalDataset>& datasets,
                                   fedsvm::Hyper hy, uint64_t seed);

// The same multi-task objective solved centrally: the identical solver driven
// to a tighter stop (and an independent structure-matrix start), serving as
// the reference optimum the federated run is compared against.
std::pair<fedsvm::FedSvmState, fedsvm::ConvergenceTrace> baseline_global(
    const std::vector<fedsvm::LocalDataset>& datasets, const fedsvm::Hyper& hy,
    fedsvm::TrainOptions opt);

// Fraction of `test` samples whose predicted association equals the
// reference association at the sample's target instant (feature instant + 1).
double accuracy_rate(const fedsvm::FedSvmState& model, const scenario::UserSamples& test,
                     const std::vector<std::vector<int>>& reference_assoc,
                     std::size_t user);

struct MethodStats {
    std::string method;        // "fl", "local", "global", "oracle"
    double accuracy = 0.0;     // pooled over users and test samples; 1 for oracle
    double mean_utility = 0.0; // mean weighted energy+delay over test instants
    double mean_energy_term = 0.0;
    double mean_time_term = 0.0;
    double worst_gap_vs_reference = 0.0;  // min over instants of (method - oracle)
};

struct RepetitionResult {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<MethodStats> methods;
};

struct Aggregate {
    std::string method;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double utility_mean = 0.0, utility_std = 0.0;
    std::size_t reps_ok = 0;
};

struct ExperimentReport {
    uint64_t config_hash = 0;
    std::vector<RepetitionResult> reps;
    std::vector<Aggregate> aggregates;

    // One row per method x repetition, deterministic rendering.
    std::string report_csv() const;
    // One row per method: mean +- std across successful repetitions.
    std::string summary_csv() const;
};

// Full protocol, repeated `s.reps` times with derived seeds: scenario +
// traffic -> exhaustive labels -> train federated/local/global -> accuracy
// and end-to-end utility on the chronological test window (predictions feed
// the scheduler; an infeasible predicted association falls back per user to
// the best-scoring HAB that stays feasible). Failed repetitions are recorded,
// not silently dropped.
ExperimentReport run_experiment(const scenario::Settings& s);

// Accuracy-vs-training-samples sweep on a fixed test window: per seed and
// per requested size, train on the chronologically first `size` samples and
// score on the shared test window. Returns seed-averaged accuracy curves.
struct SweepPoint {
    std::size_t samples = 0;
    double fl = 0.0, local = 0.0, global = 0.0;
};
std::vector<SweepPoint> sample_sweep(const scenario::Settings& base,
                                     const std::vector<std::size_t>& sizes,
                                     std::size_t seeds);

}  // namespace habmec::harness
