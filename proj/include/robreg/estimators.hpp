#pragma once

#include "robreg/contamination.hpp"
#include "robreg/model.hpp"
#include "robreg/pseudomoments.hpp"

#include <optional>
#include <string>
#include <vector>

namespace robreg {

struct EstimatorReport {
    Vec theta_hat;
    std::string method;
    int iterations = 0;
    long long subsets_examined = 0;
    double wallclock_ms = 0.0;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double condition_number = 0.0;
    std::vector<std::string> flags;
    /// ||theta^t - theta*|| per recorded step, when ground truth is in meta.
    std::vector<double> trace;
    std::vector<Vec> iterates;
    std::vector<int> deleted;  // subset_search: the winning deletion set
    SolverStats solver;        // sos_regress

    bool has_flag(const std::string& f) const;
    std::string to_json() const;
};

// ---------------------------------------------------------------------------
// OLS
// ---------------------------------------------------------------------------

/// Normal equations on the empirical second-moment matrix; least-norm solve
/// with a `rank_deficient` flag when the matrix is singular or has condition
/// number beyond 1e12.
EstimatorReport ols(const Dataset& ds);

// ---------------------------------------------------------------------------
// Robust mean
// ---------------------------------------------------------------------------

enum class RobustMeanMethod { Filter, CoordinateTrimmedMean };

/// Filter: repeatedly drop the point with the largest squared projection on
/// the top covariance eigenvector until the top eigenvalue falls below
/// stop_multiplier times the median trimmed per-coordinate variance, with a
/// hard cap of ceil(2 eps n) removals. CoordinateTrimmedMean: per coordinate,
/// drop the ceil(eps n) largest and smallest values and average the rest.
Vec robust_mean(const Mat& points, double eps, RobustMeanMethod method,
                double stop_multiplier = 9.0);

// ---------------------------------------------------------------------------
// Robust gradient descent
// ---------------------------------------------------------------------------

struct RobustGdConfig {
    double eps = 0.0;
    double tau_l = 0.0, tau_u = 0.0;  // 0 = estimate from trimmed second moments
    double eta = 0.0;                 // 0 = 2 / (tau_l + tau_u)
    int iterations = 50;
    RobustMeanMethod method = RobustMeanMethod::Filter;
    double stop_multiplier = 9.0;
};

/// theta^{t+1} = theta^t - eta * robust_mean of the per-sample half-squared
/// loss gradients x_i (<x_i, theta> - y_i).
EstimatorReport robust_gd(const Dataset& ds, const RobustGdConfig& cfg);

// ---------------------------------------------------------------------------
// Brute-force subset search
// ---------------------------------------------------------------------------

struct SubsetSearchConfig {
    int k = 4;
    double lambda = 10.0;  // hypercontractivity budget on each subset
    double c_ncm = 10.0;   // NCM ratio budget at r = 1, 2
    long long budget = 1'000'000;
    int probes = 16;
    std::uint64_t seed = 0;
};

/// Enumerates all deletions of exactly floor(eps n) rows, fits OLS on each,
/// keeps subsets passing the empirical hypercontractivity and NCM checks, and
/// returns the feasible subset of minimum mean squared residual (ties broken
/// by lexicographically smallest deletion set).
EstimatorReport subset_search(const Dataset& ds, double eps,
                              const SubsetSearchConfig& cfg = {});

// ---------------------------------------------------------------------------
// SoS relaxation estimator
// ---------------------------------------------------------------------------

struct SosConfig {
    SosMode mode = SosMode::WithNCM;
    AssembleOptions assemble;
    SolveOptions solve;
};

/// Algorithm: solve the degree-2D moment relaxation of the weighted
/// least-squares system and round by taking theta_j = pE[Theta_j].
EstimatorReport sos_regress(const Dataset& ds, double eps, const SosConfig& cfg = {});

/// Lower-level variant exposing the assembled system and pseudo-distribution.
struct SosSolution {
    EstimatorReport report;
    ConstraintSystem system;
    PseudoDistribution pd;
};
SosSolution sos_regress_full(const Dataset& ds, double eps, const SosConfig& cfg = {});

}  // namespace robreg
