#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace robreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested moment does not exist (heavy-tailed marginal).
struct InfiniteMomentError : Error {
    explicit InfiniteMomentError(const std::string& msg) : Error(msg) {}
};

/// Malformed input file; carries the 1-based line number.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

/// Enumeration would exceed the configured combinatorial budget.
struct ComplexityBudgetError : Error {
    explicit ComplexityBudgetError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic counter-based RNG (splitmix64)
// ---------------------------------------------------------------------------

/// Counter-based 64-bit generator: the i-th output is a pure function of
/// (seed, i), so streams are reproducible and cheap to split.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    static constexpr const char* kName = "splitmix64";

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log/pow argument.
    double next_double_pos() { return 1.0 - next_double(); }

    double uniform(double a, double b) { return a + (b - a) * next_double(); }

    /// Box-Muller; implemented here rather than via <random> so that streams
    /// do not depend on the standard library's distribution internals.
    double gaussian() {
        double u = next_double_pos();
        double v = next_double();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
    }

    /// Student's t via Bailey's polar-free transform:
    /// T = sqrt(nu (U^{-2/nu} - 1)) cos(2 pi V).
    double student_t(double nu) {
        double u = next_double_pos();
        double v = next_double();
        return std::sqrt(nu * (std::pow(u, -2.0 / nu) - 1.0)) * std::cos(2.0 * M_PI * v);
    }

    /// Derive an independent stream; used to give each sweep row its own seed.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        Rng r(seed ^ (a * 0xD1342543DE82EF95ull) ^ (b * 0xAF251AF3B0F025B5ull));
        return r.next_u64();
    }

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

// ---------------------------------------------------------------------------
// Formatting helpers
// ---------------------------------------------------------------------------

/// Shortest decimal form that round-trips a double exactly (<= 17 significant
/// digits); used everywhere a float is serialized so reruns are byte-identical.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw Error("median of empty set");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace robreg
