#include "habmec/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "habmec/rng.hpp"

namespace habmec::scenario {

namespace {

double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

Vec3 sample_disc(Rng& rng, double radius, double z) {
    const double r = radius * std::sqrt(rng.uniform());
    const double th = 2.0 * 3.14159265358979323846 * rng.uniform();
    return {r * std::cos(th), r * std::sin(th), z};
}

double horizontal_dist(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

// Squared Ricean magnitude with unit mean power for K-factor k.
double ricean_power(Rng& rng, double k) {
    const double los = std::sqrt(k / (k + 1.0));
    const double sd = std::sqrt(1.0 / (2.0 * (k + 1.0)));
    const double re = los + sd * rng.normal();
    const double im = sd * rng.normal();
    return re * re + im * im;
}

}  // namespace

void TaskTrace::validate() const {
    if (z.size() != M * T) throw ConstraintViolation("trace: size mismatch");
    for (double v : z)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConstraintViolation("trace: task sizes must be positive and finite");
}

Vec3 Scenario::user_position(std::size_t m, std::size_t t) const {
    if (!mobility || user_positions_t.empty()) return user_positions.at(m);
    if (t >= user_positions_t.size())
        throw DomainError("scenario: instant beyond the precomputed mobility horizon");
    return user_positions_t[t].at(m);
}

netmodel::Geometry Scenario::geometry_at(std::size_t t) const {
    netmodel::Geometry g;
    g.hab_positions = hab_positions;
    if (!mobility || user_positions_t.empty()) {
        g.user_positions = user_positions;
    } else {
        if (t >= user_positions_t.size())
            throw DomainError("scenario: instant beyond the precomputed mobility horizon");
        g.user_positions = user_positions_t[t];
    }
    return g;
}

bool Scenario::covered(std::size_t m, std::size_t n, std::size_t t) const {
    return horizontal_dist(user_position(m, t), hab_positions.at(n)) <= coverage_radius;
}

Scenario::Link Scenario::link(std::size_t m, std::size_t n, std::size_t t) const {
    const netmodel::Geometry g = geometry_at(t);
    netmodel::RadioParams rp = radio;
    if (!deterministic_fading) {
        Rng up_rng(Rng::mix(Rng::mix(seed, 0xFAD0), (uint64_t(m) << 40) ^ (uint64_t(n) << 20) ^ (t << 1)));
        Rng dn_rng(Rng::mix(Rng::mix(seed, 0xFAD0), (uint64_t(m) << 40) ^ (uint64_t(n) << 20) ^ (t << 1) ^ 1));
        rp.ricean_gain_hab = radio.ricean_gain_hab * ricean_power(up_rng, ricean_k);
        rp.ricean_gain_user = radio.ricean_gain_user * ricean_power(dn_rng, ricean_k);
    }
    Link lk;
    lk.up_gain = netmodel::channel_gain(rp, g, m, n, netmodel::Direction::uplink);
    lk.dn_gain = netmodel::channel_gain(rp, g, m, n, netmodel::Direction::downlink);
    lk.up_rate = netmodel::data_rate(rp, lk.up_gain, 1, netmodel::Direction::uplink);
    lk.dn_rate = netmodel::data_rate(rp, lk.dn_gain, 1, netmodel::Direction::downlink);
    return lk;
}

scheduler::PerHabProblem Scenario::subproblem(const TaskTrace& trace, std::size_t t,
                                              std::size_t n,
                                              std::vector<std::size_t> users) const {
    scheduler::PerHabProblem p;
    p.users = std::move(users);
    p.radio = &radio;
    p.compute = &compute;
    p.z.reserve(p.users.size());
    p.uplink.reserve(p.users.size());
    p.downlink.reserve(p.users.size());
    for (std::size_t m : p.users) {
        const Link lk = link(m, n, t);
        p.z.push_back(trace.at(m, t));
        p.uplink.push_back(lk.up_rate);
        p.downlink.push_back(lk.dn_rate);
    }
    return p;
}

void Settings::set(const std::string& key, const std::string& value) {
    auto bad = [&](const char* why) {
        throw ConfigError("config: key '" + key + "': " + why + " (value '" + value + "')");
    };
    auto as_u64 = [&]() -> uint64_t {
        try {
            std::size_t pos = 0;
            const uint64_t v = std::stoull(value, &pos);
            if (pos != value.size()) bad("trailing characters");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            bad("not an unsigned integer");
        }
        return 0;
    };
    auto as_double = [&]() -> double {
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) bad("trailing characters");
            if (!std::isfinite(v)) bad("not finite");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            bad("not a number");
        }
        return 0;
    };
    auto as_bool = [&]() -> bool {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        bad("expected true/false/1/0");
        return false;
    };

    if (key == "seed") seed = as_u64();
    else if (key == "users") users = as_u64();
    else if (key == "habs") habs = as_u64();
    else if (key == "instants") instants = as_u64();
    else if (key == "reps") reps = as_u64();
    else if (key == "radius_m") radius_m = as_double();
    else if (key == "coverage_radius_m") coverage_radius_m = as_double();
    else if (key == "hab_height_m") hab_height_m = as_double();
    else if (key == "bandwidth_hz") bandwidth_hz = as_double();
    else if (key == "carrier_freq_hz") carrier_freq_hz = as_double();
    else if (key == "tx_power_hab_w") tx_power_hab_w = as_double();
    else if (key == "tx_power_user_w") tx_power_user_w = as_double();
    else if (key == "noise_dbm") noise_dbm = as_double();
    else if (key == "rolloff") rolloff = as_double();
    else if (key == "user_antenna_gain") user_antenna_gain = as_double();
    else if (key == "rain_db_per_km") rain_db_per_km = as_double();
    else if (key == "ricean_gain_db") ricean_gain_db = as_double();
    else if (key == "deterministic_fading") deterministic_fading = as_bool();
    else if (key == "ricean_k") ricean_k = as_double();
    else if (key == "gain_log_natural") gain_log_natural = as_bool();
    else if (key == "attenuation_exponent_negative") attenuation_exponent_negative = as_bool();
    else if (key == "hab_cpu_hz") hab_cpu_hz = as_double();
    else if (key == "hab_cycles_per_bit") hab_cycles_per_bit = as_double();
    else if (key == "hab_chip_coeff") hab_chip_coeff = as_double();
    else if (key == "user_cpu_hz") user_cpu_hz = as_double();
    else if (key == "user_cycles_per_bit") user_cycles_per_bit = as_double();
    else if (key == "user_chip_coeff") user_chip_coeff = as_double();
    else if (key == "user_op_energy_j") user_op_energy_j = as_double();
    else if (key == "hab_hover_energy_j") hab_hover_energy_j = as_double();
    else if (key == "energy_budget_j") energy_budget_j = as_double();
    else if (key == "weight_energy") weight_energy = as_double();
    else if (key == "weight_time") weight_time = as_double();
    else if (key == "traffic_mu") traffic_mu = as_double();
    else if (key == "traffic_sigma") traffic_sigma = as_double();
    else if (key == "traffic_ar") traffic_ar = as_double();
    else if (key == "mobility") mobility = as_bool();
    else if (key == "lambda1") lambda1 = as_double();
    else if (key == "lambda2") lambda2 = as_double();
    else if (key == "eta") eta = as_double();
    else if (key == "theta_target") theta_target = as_double();
    else if (key == "sigma_prime") sigma_prime = as_double();
    else if (key == "eps_omega") eps_omega = as_double();
    else if (key == "train_iters") train_iters = as_u64();
    else if (key == "gap_target") gap_target = as_double();
    else if (key == "train_fraction") train_fraction = as_double();
    else throw ConfigError("config: unknown key '" + key + "'");
}

Settings Settings::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    Settings s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const auto is_space = [](char c) { return c == ' ' || c == '\t'; };
        std::string stripped;
        for (char c : line)
            if (!is_space(c)) stripped += c;
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == stripped.size())
            throw ParseError(strfmt("%s:%zu: expected key = value", path.c_str(), lineno));
        try {
            s.set(stripped.substr(0, eq), stripped.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ParseError(strfmt("%s:%zu: %s", path.c_str(), lineno, e.what()));
        }
    }
    return s;
}

std::string Settings::canonical() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto d = [&](const char* k, double v) { kv.emplace_back(k, fmt_g17(v)); };
    auto u = [&](const char* k, uint64_t v) { kv.emplace_back(k, strfmt("%llu", (unsigned long long)v)); };
    auto b = [&](const char* k, bool v) { kv.emplace_back(k, v ? "true" : "false"); };
    u("seed", seed);
    u("users", users);
    u("habs", habs);
    u("instants", instants);
    u("reps", reps);
    d("radius_m", radius_m);
    d("coverage_radius_m", coverage_radius_m);
    d("hab_height_m", hab_height_m);
    d("bandwidth_hz", bandwidth_hz);
    d("carrier_freq_hz", carrier_freq_hz);
    d("tx_power_hab_w", tx_power_hab_w);
    d("tx_power_user_w", tx_power_user_w);
    d("noise_dbm", noise_dbm);
    d("rolloff", rolloff);
    d("user_antenna_gain", user_antenna_gain);
    d("rain_db_per_km", rain_db_per_km);
    d("ricean_gain_db", ricean_gain_db);
    b("deterministic_fading", deterministic_fading);
    d("ricean_k", ricean_k);
    b("gain_log_natural", gain_log_natural);
    b("attenuation_exponent_negative", attenuation_exponent_negative);
    d("hab_cpu_hz", hab_cpu_hz);
    d("hab_cycles_per_bit", hab_cycles_per_bit);
    d("hab_chip_coeff", hab_chip_coeff);
    d("user_cpu_hz", user_cpu_hz);
    d("user_cycles_per_bit", user_cycles_per_bit);
    d("user_chip_coeff", user_chip_coeff);
    d("user_op_energy_j", user_op_energy_j);
    d("hab_hover_energy_j", hab_hover_energy_j);
    d("energy_budget_j", energy_budget_j);
    d("weight_energy", weight_energy);
    d("weight_time", weight_time);
    d("traffic_mu", traffic_mu);
    d("traffic_sigma", traffic_sigma);
    d("traffic_ar", traffic_ar);
    b("mobility", mobility);
    d("lambda1", lambda1);
    d("lambda2", lambda2);
    d("eta", eta);
    d("theta_target", theta_target);
    d("sigma_prime", sigma_prime);
    d("eps_omega", eps_omega);
    u("train_iters", train_iters);
    d("gap_target", gap_target);
    d("train_fraction", train_fraction);
    std::sort(kv.begin(), kv.end());
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string Settings::documented_template() {
    const Settings s;
    std::ostringstream o;
    o << "# Scenario and run configuration. Lines are `key = value`; '#' starts a comment.\n"
      << "# Flags override this file; this file overrides the built-in defaults.\n\n"
      << "seed = " << s.seed << "                # master RNG seed\n"
      << "users = " << s.users << "               # M, ground users\n"
      << "habs = " << s.habs << "                # N, balloons\n"
      << "instants = " << s.instants << "           # T, time instants per run\n"
      << "reps = " << s.reps << "             # experiment repetitions\n\n"
      << "radius_m = 2500          # placement disc radius, meters\n"
      << "coverage_radius_m = 1700 # nominal per-HAB footprint, meters\n"
      << "hab_height_m = 17000     # balloon altitude, meters\n\n"
      << "bandwidth_hz = 1e7       # channel bandwidth B\n"
      << "carrier_freq_hz = 2.8e10 # mmWave carrier f_c\n"
      << "tx_power_hab_w = 20      # downlink transmit power P_B\n"
      << "tx_power_user_w = 0.5    # uplink transmit power P_U\n"
      << "noise_dbm = -95          # noise power, converted to watts at load\n"
      << "rolloff = 65             # antenna pattern exponent rho\n"
      << "user_antenna_gain = 1    # user antenna gain, linear\n"
      << "rain_db_per_km = 1.45    # cloud/rain coefficient chi\n"
      << "ricean_gain_db = -20     # mean small-scale power gain phi\n"
      << "deterministic_fading = true  # false samples per-link Ricean gains\n"
      << "ricean_k = 10            # Ricean K-factor when sampling\n"
      << "gain_log_natural = true  # boresight normalization log base (ln vs log10)\n"
      << "attenuation_exponent_negative = false # flip the rain factor below 1\n\n"
      << "hab_cpu_hz = 1e10        # f_B\n"
      << "hab_cycles_per_bit = 1500  # omega_B\n"
      << "hab_chip_coeff = 3.44e-23  # varsigma, J*s^2\n"
      << "user_cpu_hz = 5e8        # f_U\n"
      << "user_cycles_per_bit = 1500 # omega_U\n"
      << "user_chip_coeff = 3.44e-23 # varsigma_m, J*s^2\n"
      << "user_op_energy_j = 0     # constant per-task device energy O_m\n"
      << "hab_hover_energy_j = 0   # per-served-user hover energy O_n\n"
      << "energy_budget_j = 6000   # per-HAB per-instant energy cap E_t\n"
      << "weight_energy = 0.5      # gamma_E\n"
      << "weight_time = 0.5        # gamma_T\n\n"
      << "traffic_mu = 4.605170185988092 # lognormal location (ln 100 -> ~100 KB tasks)\n"
      << "traffic_sigma = 0.5      # lognormal spread\n"
      << "traffic_ar = 0.8         # AR(1) coefficient of the driver\n"
      << "mobility = false         # random-waypoint user motion\n\n"
      << "lambda1 = 0.1            # Frobenius regularization weight\n"
      << "lambda2 = 0.1            # structure-coupling regularization weight\n"
      << "eta = 1                  # aggregation step size\n"
      << "theta_target = 0.1       # local subproblem accuracy target\n"
      << "sigma_prime = 1          # subproblem quadratic safety factor\n"
      << "eps_omega = 1e-8         # eigenvalue floor for structure-matrix inverses\n"
      << "train_iters = 500        # training iteration cap\n"
      << "gap_target = 1e-6        # duality-gap stop threshold (0 disables)\n"
      << "train_fraction = 0.7     # chronological train share\n";
    return o.str();
}

Scenario Settings::build_scenario() const {
    if (users < 1) throw DomainError("scenario: need at least one user");
    if (habs < 1) throw DomainError("scenario: need at least one HAB");
    Scenario sc;
    sc.M = users;
    sc.N = habs;
    sc.radius = radius_m;
    sc.coverage_radius = coverage_radius_m;
    sc.seed = seed;
    sc.deterministic_fading = deterministic_fading;
    sc.ricean_k = ricean_k;
    sc.mobility = mobility;

    sc.radio.speed_of_light = 3.0e8;
    sc.radio.carrier_freq = carrier_freq_hz;
    sc.radio.bandwidth = bandwidth_hz;
    sc.radio.tx_power_hab = tx_power_hab_w;
    sc.radio.tx_power_user = tx_power_user_w;
    sc.radio.noise_power = dbm_to_watt(noise_dbm);
    sc.radio.rolloff = rolloff;
    sc.radio.user_antenna_gain = user_antenna_gain;
    sc.radio.hab_height = hab_height_m;
    sc.radio.rain_attenuation = rain_db_per_km;
    sc.radio.ricean_gain_hab = db_to_linear(ricean_gain_db);
    sc.radio.ricean_gain_user = db_to_linear(ricean_gain_db);
    sc.radio.gain_log_natural = gain_log_natural;
    sc.radio.attenuation_exponent_negative = attenuation_exponent_negative;
    sc.radio.validate();

    sc.compute = netmodel::ComputeParams::uniform(users, user_cpu_hz, user_cycles_per_bit,
                                                  user_chip_coeff, user_op_energy_j);
    sc.compute.hab_cpu_freq = hab_cpu_hz;
    sc.compute.hab_cycles_per_bit = hab_cycles_per_bit;
    sc.compute.hab_chip_coeff = hab_chip_coeff;
    sc.compute.hab_hover_energy = hab_hover_energy_j;
    sc.compute.energy_budget = energy_budget_j;
    sc.compute.weight_energy = weight_energy;
    sc.compute.weight_time = weight_time;
    sc.compute.validate();

    Rng rng(Rng::mix(seed, 0x5CE9A210));
    sc.hab_positions.reserve(habs);
    for (std::size_t n = 0; n < habs; ++n)
        sc.hab_positions.push_back(sample_disc(rng, radius_m, hab_height_m));
    sc.user_positions.reserve(users);
    for (std::size_t m = 0; m < users; ++m)
        sc.user_positions.push_back(sample_disc(rng, radius_m, 0.0));

    if (mobility) {
        const std::size_t horizon = instants + 2;
        sc.user_positions_t.assign(horizon, sc.user_positions);
        for (std::size_t m = 0; m < users; ++m) {
            Rng walk(Rng::mix(seed, 0xB0B1000 + m));
            Vec3 pos = sc.user_positions[m];
            Vec3 goal = sample_disc(walk, radius_m, 0.0);
            double speed = walk.uniform(1.0, 10.0);
            for (std::size_t t = 1; t < horizon; ++t) {
                double dx = goal.x - pos.x, dy = goal.y - pos.y;
                double dist = std::sqrt(dx * dx + dy * dy);
                while (dist <= speed) {
                    goal = sample_disc(walk, radius_m, 0.0);
                    speed = walk.uniform(1.0, 10.0);
                    dx = goal.x - pos.x;
                    dy = goal.y - pos.y;
                    dist = std::sqrt(dx * dx + dy * dy);
                }
                pos.x += speed * dx / dist;
                pos.y += speed * dy / dist;
                sc.user_positions_t[t][m] = pos;
            }
        }
    }
    return sc;
}

Scenario generate_scenario(uint64_t seed, std::size_t M, std::size_t N, double radius) {
    Settings s;
    s.seed = seed;
    s.users = M;
    s.habs = N;
    s.radius_m = radius;
    return s.build_scenario();
}

Scenario generate_scenario(const Settings& s) { return s.build_scenario(); }

TaskTrace synth_traffic(uint64_t seed, std::size_t M, std::size_t T,
                        const TrafficParams& tp) {
    if (T < 1) throw DomainError("traffic: need at least one instant");
    if (M < 1) throw DomainError("traffic: need at least one user");
    if (!(tp.ar > -1.0 && tp.ar < 1.0))
        throw ConfigError("traffic: AR coefficient must lie in (-1, 1)");
    TaskTrace tr;
    tr.M = M;
    tr.T = T;
    tr.z.resize(M * T);
    for (std::size_t m = 0; m < M; ++m) {
        Rng rng(Rng::mix(seed, 0x7AFF1C00 + m));
        const double innov = std::sqrt(1.0 - tp.ar * tp.ar);
        double y = rng.normal();
        for (std::size_t t = 0; t < T; ++t) {
            if (t > 0) y = tp.ar * y + innov * rng.normal();
            const double bits = std::exp(tp.mu + tp.sigma * y) * 8.0e3;
            tr.z[m * T + t] = std::max(1.0, std::floor(bits + 0.5));
        }
    }
    tr.validate();
    return tr;
}

TaskTrace ingest_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("trace: cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("trace: empty file '" + path + "'");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "user_id,t,bits")
        throw ParseError(strfmt("%s:%zu: expected header user_id,t,bits", path.c_str(), lineno));

    std::vector<std::vector<double>> rows;  // rows[user][t]
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        unsigned long long uid = 0, t = 0;
        long long bits = 0;
        char extra = 0;
        if (sscanf(line.c_str(), "%llu,%llu,%lld%c", &uid, &t, &bits, &extra) != 3)
            throw ParseError(strfmt("%s:%zu: malformed row '%s'", path.c_str(), lineno, line.c_str()));
        if (bits <= 0)
            throw ParseError(strfmt("%s:%zu: task size must be a positive integer", path.c_str(), lineno));
        if (uid > 10000000ull)
            throw ParseError(strfmt("%s:%zu: implausible user id %llu", path.c_str(), lineno, uid));
        if (uid >= rows.size()) rows.resize(uid + 1);
        auto& r = rows[uid];
        if (t != r.size())
            throw ParseError(strfmt("%s:%zu: instants must be dense and ordered per user (got t=%llu, expected %zu)",
                                    path.c_str(), lineno, t, r.size()));
        r.push_back(double(bits));
    }
    if (rows.empty()) throw ParseError("trace: no data rows in '" + path + "'");
    const std::size_t T = rows[0].size();
    for (std::size_t m = 0; m < rows.size(); ++m)
        if (rows[m].size() != T)
            throw ParseError(strfmt("%s: user %zu has %zu instants, expected %zu", path.c_str(), m,
                                    rows[m].size(), T));
    TaskTrace tr;
    tr.M = rows.size();
    tr.T = T;
    tr.z.reserve(tr.M * T);
    for (const auto& r : rows) tr.z.insert(tr.z.end(), r.begin(), r.end());
    tr.validate();
    return tr;
}

void export_trace(const std::string& path, const TaskTrace& trace) {
    trace.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("trace: cannot write '" + path + "'");
    out << "user_id,t,bits\n";
    for (std::size_t m = 0; m < trace.M; ++m)
        for (std::size_t t = 0; t < trace.T; ++t)
            out << m << "," << t << "," << (long long)(trace.at(m, t)) << "\n";
}

std::size_t UserSamples::total() const {
    std::size_t n = 0;
    for (const auto& l : labels) n += l.size();
    return n;
}

namespace {

UserSamples select_samples(const UserSamples& s,
                           const std::vector<std::pair<std::size_t, std::size_t>>& picks) {
    UserSamples out;
    const std::size_t N = s.habs();
    out.X.resize(N);
    out.labels.resize(N);
    out.t.resize(N);
    for (const auto& [n, i] : picks) {
        out.X[n].insert(out.X[n].end(), s.X[n].begin() + 3 * i, s.X[n].begin() + 3 * (i + 1));
        out.labels[n].push_back(s.labels[n][i]);
        out.t[n].push_back(s.t[n][i]);
    }
    return out;
}

// (instant, hab, index-within-hab) for every sample, in chronological order.
std::vector<std::pair<std::size_t, std::size_t>> chronological(const UserSamples& s) {
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> keyed;
    for (std::size_t n = 0; n < s.habs(); ++n)
        for (std::size_t i = 0; i < s.t[n].size(); ++i) keyed.emplace_back(s.t[n][i], n, i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    picks.reserve(keyed.size());
    for (const auto& [t, n, i] : keyed) picks.emplace_back(n, i);
    return picks;
}

}  // namespace

std::pair<UserSamples, UserSamples> split_train_test(const UserSamples& s, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw DomainError("split: fraction must lie in (0,1)");
    const auto picks = chronological(s);
    if (picks.size() < 2) throw SizeError("split: need at least two samples");
    std::size_t n_train = std::size_t(std::floor(fraction * double(picks.size())));
    n_train = std::max<std::size_t>(1, std::min(n_train, picks.size() - 1));
    return {select_samples(s, {picks.begin(), picks.begin() + n_train}),
            select_samples(s, {picks.begin() + n_train, picks.end()})};
}

UserSamples take_range(const UserSamples& s, std::size_t t_lo, std::size_t t_hi) {
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    for (std::size_t n = 0; n < s.habs(); ++n)
        for (std::size_t i = 0; i < s.t[n].size(); ++i)
            if (s.t[n][i] >= t_lo && s.t[n][i] < t_hi) picks.emplace_back(n, i);
    return select_samples(s, picks);
}

UserSamples take_first(const UserSamples& s, std::size_t k) {
    auto picks = chronological(s);
    if (picks.size() > k) picks.resize(k);
    return select_samples(s, picks);
}

}  // namespace habmec::scenario
