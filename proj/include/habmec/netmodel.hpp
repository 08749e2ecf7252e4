// Physical-layer and compute-layer primitives: channel gains, data rates,
// transmission and compute delays, per-task energy. All functions are pure.
#pragma once

#include <cstddef>
#include <vector>

#include "habmec/common.hpp"

namespace habmec::netmodel {

enum class Direction { uplink, downlink };
enum class Where { edge, local };

struct RadioParams {
    double speed_of_light = 3.0e8;    // m/s
    double carrier_freq = 28.0e9;     // Hz
    double bandwidth = 10.0e6;        // Hz
    double tx_power_hab = 20.0;       // W
    double tx_power_user = 0.5;       // W
    double noise_power = 3.162277660168379e-13;  // W linear (-95 dBm)
    double rolloff = 65.0;            // antenna pattern exponent, >= 1
    double user_antenna_gain = 1.0;   // linear
    double hab_height = 17.0e3;       // m
    double rain_attenuation = 1.45;   // dB/km
    double ricean_gain_hab = 0.01;    // linear (-20 dB), uplink small-scale
    double ricean_gain_user = 0.01;   // linear (-20 dB), downlink small-scale
    // The boresight-gain normalization is ambiguous between log bases; the
    // natural-log reading matches the 3 dB beamwidth convention and is the
    // default. Flipping attenuation_exponent_negative makes the rain factor
    // attenuate (< 1) instead of the as-printed amplification (>= 1).
    bool gain_log_natural = true;
    bool attenuation_exponent_negative = false;

    void validate() const;
};

struct ComputeParams {
    double hab_cpu_freq = 10.0e9;      // Hz
    double hab_cycles_per_bit = 1500;  // cycles/bit
    double hab_chip_coeff = 3.44e-23;  // J*s^2
    double hab_hover_energy = 0.0;     // J per served user per instant
    double energy_budget = 6.0e3;      // J per HAB per instant
    double weight_energy = 0.5;
    double weight_time = 0.5;
    std::vector<double> user_cpu_freq;       // Hz, per user
    std::vector<double> user_cycles_per_bit; // cycles/bit, per user
    std::vector<double> user_chip_coeff;     // J*s^2, per user
    std::vector<double> user_op_energy;      // J, per user

    std::size_t users() const { return user_cpu_freq.size(); }
    void validate() const;
    // Fills the per-user vectors with M copies of the defaults.
    static ComputeParams uniform(std::size_t M, double f_U = 0.5e9,
                                 double omega_U = 1500, double sigma_m = 3.44e-23,
                                 double O_m = 0.0);
};

struct Geometry {
    std::vector<Vec3> hab_positions;   // z = hab height
    std::vector<Vec3> user_positions;  // z = 0

    std::size_t habs() const { return hab_positions.size(); }
    std::size_t users() const { return user_positions.size(); }
    // Slant distance between user m and HAB n, meters.
    double slant_distance(std::size_t m, std::size_t n) const;
    // Angle off the HAB's nadir-pointing boresight, radians in [0, pi/2).
    double boresight_angle(std::size_t m, std::size_t n) const;
};

// Directional antenna factor cos(psi)^rho * 32*log(2) / (2*(2*acos(0.5^(1/rho)))^2).
double boresight_gain(double psi, double rolloff, bool log_natural = true);

// Cloud/rain factor 10^(3*chi*r_km / (10*H_km)); exponent negated when the
// attenuation flag is set.
double rain_attenuation_factor(double r_m, double chi_db_per_km, double hab_height_m,
                               bool exponent_negative = false);

// Link gain at an explicit slant distance and boresight angle. Zero at
// psi = pi/2 exactly; psi beyond the boresight hemisphere is a domain error.
double channel_gain_at(const RadioParams& p, double r_m, double psi, Direction dir);

// Full link gain for user m and HAB n (geometry-derived r and psi).
double channel_gain(const RadioParams& p, const Geometry& g, std::size_t m,
                    std::size_t n, Direction dir);

// Shannon rate a * B * log2(1 + P*gain/noise); P chosen by direction.
double data_rate(const RadioParams& p, double gain, int a, Direction dir);

// beta*z/rate. Zero traffic transmits nothing, so rate 0 is then fine.
double tx_delay(double z_bits, double beta, double rate);

// edge: omega_B*beta*z/f_B; local: omega_U_m*(1-beta)*z/f_U_m.
double compute_time(double z_bits, double beta, const ComputeParams& cp, Where where,
                    std::size_t m);

// max(uplink tx + edge compute + downlink tx, local compute).
double total_task_time(double z_bits, double beta, double uplink_rate,
                       double downlink_rate, const ComputeParams& cp, std::size_t m);

// O_m + sigma_m*f_U^2*(1-beta)*z + P_U*beta*z/uplink_rate.
double user_energy(double z_bits, double beta, double uplink_rate,
                   const RadioParams& rp, const ComputeParams& cp, std::size_t m);

// O_n + sigma*f_B^2*beta*z + P_B*beta*z/downlink_rate. The onboard compute
// term carries no cycles-per-bit factor by design (see README defaults).
double hab_energy(double z_bits, double beta, double downlink_rate,
                  const RadioParams& rp, const ComputeParams& cp);

}  // namespace habmec::netmodel
