#include "habmec/netmodel.hpp"

#include <algorithm>
#include <cmath>

namespace habmec::netmodel {

namespace {
constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const char* msg) {
    if (!ok) throw DomainError(msg);
}
}  // namespace

void RadioParams::validate() const {
    require(speed_of_light > 0 && carrier_freq > 0 && bandwidth > 0, "radio: C, f_c, B must be positive");
    require(tx_power_hab > 0 && tx_power_user > 0 && noise_power > 0, "radio: powers and noise must be positive");
    require(rolloff >= 1.0, "radio: rolloff must be >= 1");
    require(user_antenna_gain >= 0 && ricean_gain_hab >= 0 && ricean_gain_user >= 0, "radio: gains must be nonnegative");
    require(hab_height > 0, "radio: hab_height must be positive");
    require(rain_attenuation >= 0, "radio: rain_attenuation must be nonnegative");
}

void ComputeParams::validate() const {
    require(hab_cpu_freq > 0 && hab_cycles_per_bit > 0, "compute: hab frequency and cycles/bit must be positive");
    require(hab_chip_coeff >= 0 && hab_hover_energy >= 0, "compute: hab energy coefficients must be nonnegative");
    require(energy_budget > 0, "compute: energy budget must be positive");
    require(weight_energy >= 0 && weight_time >= 0 && weight_energy + weight_time > 0,
            "compute: weights must be nonnegative with positive sum");
    const std::size_t M = user_cpu_freq.size();
    require(user_cycles_per_bit.size() == M && user_chip_coeff.size() == M && user_op_energy.size() == M,
            "compute: per-user vectors must have equal length");
    for (std::size_t m = 0; m < M; ++m) {
        require(user_cpu_freq[m] > 0 && user_cycles_per_bit[m] > 0, "compute: user frequency and cycles/bit must be positive");
        require(user_chip_coeff[m] >= 0 && user_op_energy[m] >= 0, "compute: user energy coefficients must be nonnegative");
    }
}

ComputeParams ComputeParams::uniform(std::size_t M, double f_U, double omega_U,
                                     double sigma_m, double O_m) {
    ComputeParams cp;
    cp.user_cpu_freq.assign(M, f_U);
    cp.user_cycles_per_bit.assign(M, omega_U);
    cp.user_chip_coeff.assign(M, sigma_m);
    cp.user_op_energy.assign(M, O_m);
    return cp;
}

double Geometry::slant_distance(std::size_t m, std::size_t n) const {
    const Vec3& u = user_positions.at(m);
    const Vec3& h = hab_positions.at(n);
    const double dx = u.x - h.x, dy = u.y - h.y, dz = u.z - h.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double Geometry::boresight_angle(std::size_t m, std::size_t n) const {
    const double r = slant_distance(m, n);
    const double height = hab_positions.at(n).z - user_positions.at(m).z;
    require(height > 0 && r >= height, "geometry: HAB must be above the user");
    return std::acos(std::min(1.0, height / r));
}

double boresight_gain(double psi, double rolloff, bool log_natural) {
    require(rolloff >= 1.0, "boresight_gain: rolloff must be >= 1");
    require(psi >= 0.0 && psi <= kPi / 2, "boresight_gain: psi outside [0, pi/2]");
    const double log2v = log_natural ? std::log(2.0) : std::log10(2.0);
    const double half_bw = 2.0 * std::acos(std::pow(0.5, 1.0 / rolloff));
    const double norm = 32.0 * log2v / (2.0 * half_bw * half_bw);
    return std::pow(std::cos(psi), rolloff) * norm;
}

double rain_attenuation_factor(double r_m, double chi_db_per_km, double hab_height_m,
                               bool exponent_negative) {
    require(r_m > 0 && hab_height_m > 0, "rain_attenuation: distances must be positive");
    const double exponent = 3.0 * chi_db_per_km * (r_m / 1000.0) / (10.0 * (hab_height_m / 1000.0));
    return std::pow(10.0, exponent_negative ? -exponent : exponent);
}

double channel_gain_at(const RadioParams& p, double r_m, double psi, Direction dir) {
    const double r = r_m;
    require(r > 0, "channel_gain: zero distance");
    if (psi > kPi / 2) throw DomainError("channel_gain: user outside boresight hemisphere");
    const double fs = p.speed_of_light / (4.0 * kPi * r * p.carrier_freq);
    const double gh = boresight_gain(psi, p.rolloff, p.gain_log_natural);
    const double att = rain_attenuation_factor(r, p.rain_attenuation, p.hab_height,
                                               p.attenuation_exponent_negative);
    const double phi = dir == Direction::uplink ? p.ricean_gain_hab : p.ricean_gain_user;
    return fs * gh * p.user_antenna_gain * att * phi;
}

double channel_gain(const RadioParams& p, const Geometry& g, std::size_t m,
                    std::size_t n, Direction dir) {
    return channel_gain_at(p, g.slant_distance(m, n), g.boresight_angle(m, n), dir);
}

double data_rate(const RadioParams& p, double gain, int a, Direction dir) {
    require(gain >= 0, "data_rate: negative gain");
    if (a == 0) return 0.0;
    const double power = dir == Direction::uplink ? p.tx_power_user : p.tx_power_hab;
    return p.bandwidth * std::log2(1.0 + power * gain / p.noise_power);
}

double tx_delay(double z_bits, double beta, double rate) {
    require(beta >= 0.0 && beta <= 1.0, "tx_delay: beta outside [0,1]");
    require(z_bits >= 0.0, "tx_delay: negative task size");
    const double load = beta * z_bits;
    if (load == 0.0) return 0.0;
    if (rate <= 0.0) throw InfeasibleLinkError("tx_delay: positive traffic over zero-rate link");
    return load / rate;
}

double compute_time(double z_bits, double beta, const ComputeParams& cp, Where where,
                    std::size_t m) {
    require(beta >= 0.0 && beta <= 1.0, "compute_time: beta outside [0,1]");
    require(z_bits >= 0.0, "compute_time: negative task size");
    if (where == Where::edge) return cp.hab_cycles_per_bit * beta * z_bits / cp.hab_cpu_freq;
    return cp.user_cycles_per_bit.at(m) * (1.0 - beta) * z_bits / cp.user_cpu_freq.at(m);
}

double total_task_time(double z_bits, double beta, double uplink_rate,
                       double downlink_rate, const ComputeParams& cp, std::size_t m) {
    const double edge_path = tx_delay(z_bits, beta, uplink_rate) +
                             compute_time(z_bits, beta, cp, Where::edge, m) +
                             tx_delay(z_bits, beta, downlink_rate);
    const double local_path = compute_time(z_bits, beta, cp, Where::local, m);
    return std::max(edge_path, local_path);
}

double user_energy(double z_bits, double beta, double uplink_rate,
                   const RadioParams& rp, const ComputeParams& cp, std::size_t m) {
    const double f = cp.user_cpu_freq.at(m);
    return cp.user_op_energy.at(m) + cp.user_chip_coeff.at(m) * f * f * (1.0 - beta) * z_bits +
           rp.tx_power_user * tx_delay(z_bits, beta, uplink_rate);
}

double hab_energy(double z_bits, double beta, double downlink_rate,
                  const RadioParams& rp, const ComputeParams& cp) {
    const double f = cp.hab_cpu_freq;
    return cp.hab_hover_energy + cp.hab_chip_coeff * f * f * beta * z_bits +
           rp.tx_power_hab * tx_delay(z_bits, beta, downlink_rate);
}

}  // namespace habmec::netmodel
