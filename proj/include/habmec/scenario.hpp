// Scenario construction: geometry sampling, traffic generation/ingestion,
// resolved run settings, and train/test dataset assembly.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "habmec/netmodel.hpp"
#include "habmec/scheduler.hpp"

namespace habmec::scenario {

struct TrafficParams {
    double mu = 4.605170185988092;  // ln(100): mean task around 100 KB
    double sigma = 0.5;             // lognormal spread
    double ar = 0.8;                // AR(1) coefficient of the driving process
};

struct TaskTrace {
    std::size_t M = 0, T = 0;
    std::vector<double> z;  // bits, row-major [m*T + t], whole and positive

    double at(std::size_t m, std::size_t t) const { return z.at(m * T + t); }
    void validate() const;
};

struct Scenario {
    std::size_t M = 0, N = 0;
    double radius = 2500.0;           // m, user/HAB placement disc
    double coverage_radius = 1700.0;  // m, nominal per-HAB footprint
    uint64_t seed = 1;
    bool deterministic_fading = true;
    double ricean_k = 10.0;  // fading K-factor when sampling small-scale gains
    bool mobility = false;
    netmodel::RadioParams radio;
    netmodel::ComputeParams compute;
    std::vector<Vec3> hab_positions;
    std::vector<Vec3> user_positions;                 // at t = 0
    std::vector<std::vector<Vec3>> user_positions_t;  // per instant when mobile

    Vec3 user_position(std::size_t m, std::size_t t) const;
    netmodel::Geometry geometry_at(std::size_t t) const;
    bool covered(std::size_t m, std::size_t n, std::size_t t = 0) const;

    struct Link {
        double up_gain = 0, dn_gain = 0, up_rate = 0, dn_rate = 0;
    };
    Link link(std::size_t m, std::size_t n, std::size_t t) const;

    // Subproblem for HAB n serving `users` (ascending indices) at instant t.
    scheduler::PerHabProblem subproblem(const TaskTrace& trace, std::size_t t,
                                        std::size_t n,
                                        std::vector<std::size_t> users) const;
};

// Every tunable of a run, with engineering defaults (units in the name or
// comment). Defaults match the reference constants documented in README.md.
struct Settings {
    uint64_t seed = 1;
    std::size_t users = 8;     // M
    std::size_t habs = 3;      // N
    std::size_t instants = 60; // T
    std::size_t reps = 100;    // experiment repetitions
    double radius_m = 2500.0;
    double coverage_radius_m = 1700.0;
    // Radio.
    double hab_height_m = 17.0e3;
    double bandwidth_hz = 10.0e6;
    double carrier_freq_hz = 28.0e9;
    double tx_power_hab_w = 20.0;
    double tx_power_user_w = 0.5;
    double noise_dbm = -95.0;
    double rolloff = 65.0;
    double user_antenna_gain = 1.0;
    double rain_db_per_km = 1.45;
    double ricean_gain_db = -20.0;
    bool deterministic_fading = true;
    double ricean_k = 10.0;
    bool gain_log_natural = true;
    bool attenuation_exponent_negative = false;
    // Compute and energy.
    double hab_cpu_hz = 10.0e9;
    double hab_cycles_per_bit = 1500.0;
    double hab_chip_coeff = 3.44e-23;   // J*s^2
    double user_cpu_hz = 0.5e9;
    double user_cycles_per_bit = 1500.0;
    double user_chip_coeff = 3.44e-23;  // J*s^2
    double user_op_energy_j = 0.0;
    double hab_hover_energy_j = 0.0;
    double energy_budget_j = 6000.0;    // per HAB per instant; binds sometimes
    double weight_energy = 0.5;
    double weight_time = 0.5;
    // Traffic.
    double traffic_mu = 4.605170185988092;
    double traffic_sigma = 0.5;
    double traffic_ar = 0.8;
    bool mobility = false;
    // Learning.
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    double eta = 1.0;
    double theta_target = 0.1;
    double sigma_prime = 1.0;
    double eps_omega = 1e-8;
    std::size_t train_iters = 500;
    double gap_target = 1e-6;
    double train_fraction = 0.7;

    // Applies one key=value pair; unknown keys or malformed values throw
    // ConfigError naming the key.
    void set(const std::string& key, const std::string& value);
    static Settings from_file(const std::string& path);
    // Sorted key=value rendering of every effective setting.
    std::string canonical() const;
    uint64_t hash() const { return fnv1a(canonical()); }
    // Writes a fully commented config template with current values.
    static std::string documented_template();

    Scenario build_scenario() const;
    TrafficParams traffic() const { return {traffic_mu, traffic_sigma, traffic_ar}; }
};

// Uniform placement in the disc, reference constants, deterministic per seed.
Scenario generate_scenario(uint64_t seed, std::size_t M, std::size_t N, double radius);
Scenario generate_scenario(const Settings& s);

// Lognormal AR(1) traffic: z = round(exp(mu + sigma*y_t) * 8000) bits.
TaskTrace synth_traffic(uint64_t seed, std::size_t M, std::size_t T,
                        const TrafficParams& tp);

// CSV trace exchange, schema `user_id,t,bits`, dense instants per user.
TaskTrace ingest_trace(const std::string& path);
void export_trace(const std::string& path, const TaskTrace& trace);

// One user's federated samples: per HAB a (3 x K_n) column-major feature
// block, labels, and the feature instants.
struct UserSamples {
    std::vector<std::vector<double>> X;
    std::vector<std::vector<double>> labels;
    std::vector<std::vector<std::size_t>> t;

    std::size_t habs() const { return X.size(); }
    std::size_t total() const;
};

using habmec::FeatureNorm;

// Chronological split over the user's pooled timeline: train keeps the
// earliest `fraction` of samples (at least one sample on each side).
std::pair<UserSamples, UserSamples> split_train_test(const UserSamples& s,
                                                     double fraction);

// Samples whose feature instant lies in [t_lo, t_hi).
UserSamples take_range(const UserSamples& s, std::size_t t_lo, std::size_t t_hi);

// The k chronologically earliest samples.
UserSamples take_first(const UserSamples& s, std::size_t k);

}  // namespace habmec::scenario
