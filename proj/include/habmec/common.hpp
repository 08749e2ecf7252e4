// Shared error types and small utilities used across the toolkit.
#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace habmec {

// Base class for every toolkit error. Subclasses marked "validation" map to
// CLI exit code 1, everything else to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual bool is_validation() const { return false; }
};

// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
    bool is_validation() const override { return true; }
};

// Positive traffic routed over a zero-rate link.
class InfeasibleLinkError : public Error {
public:
    using Error::Error;
};

// A decision that violates one of the problem constraints; carries a
// human-readable report listing every violated item.
class ConstraintViolation : public Error {
public:
    using Error::Error;
};

// Per-HAB energy budget cannot be met even with zero offloading.
class InfeasibleBudget : public Error {
public:
    using Error::Error;
};

// Malformed external input (trace CSV, config file); message names the line.
class ParseError : public Error {
public:
    using Error::Error;
    bool is_validation() const override { return true; }
};

// Enumeration or problem size beyond a hard guard.
class SizeError : public Error {
public:
    using Error::Error;
    bool is_validation() const override { return true; }
};

// Singular matrix encountered with regularization disabled.
class SingularityError : public Error {
public:
    using Error::Error;
};

// Training diverged; message carries the iteration and gap history summary.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Bad configuration value or unknown key.
class ConfigError : public Error {
public:
    using Error::Error;
    bool is_validation() const override { return true; }
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Per-user min-max feature scaling for the 3-dimensional learning features
// (location x, y, task size). Maps each coordinate into [0, 1/sqrt(3)] so the
// scaled vector norm never exceeds 1; degenerate ranges map to 0. Stored with
// trained models so prediction applies the training-time scaling.
struct FeatureNorm {
    double lo[3] = {0, 0, 0};
    double hi[3] = {0, 0, 0};
    void apply(const double* raw, double* out) const;
};

// printf-style formatting into std::string (no <format> on this toolchain).
inline std::string strfmt(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    char buf[512];
    vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return std::string(buf);
}

// Lossless-enough decimal rendering: 17 significant digits round-trips
// IEEE-754 doubles, and the fixed format keeps output byte-stable.
inline std::string fmt_g17(double v) { return strfmt("%.17g", v); }

// FNV-1a, used to stamp every output file with a hash of the resolved config.
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Worker cap: HABMEC_THREADS if set, else hardware concurrency, at least 1.
unsigned worker_count();

// Runs fn(i) for i in [0, n). Results must be written to caller-owned slots
// indexed by i so the outcome is independent of scheduling. Exceptions from
// workers are rethrown on the calling thread (first index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace habmec
