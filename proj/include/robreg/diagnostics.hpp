#pragma once

#include "robreg/lb_instances.hpp"
#include "robreg/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace robreg {

// ---------------------------------------------------------------------------
// Hypercontractivity
// ---------------------------------------------------------------------------

/// Two-sided estimate of the order-4 hypercontractivity ratio
/// sup_v E<v,z>^4 / (E<v,z>^2)^2 on centered, whitened data: `lower` is the
/// best probe ratio, `upper` the top eigenvalue of the flattened fourth-moment
/// matrix (which dominates the supremum).
struct HcEstimate {
    int k = 4;
    double lower = 1.0;
    double upper = 1.0;
    int probe_count = 0;
};

HcEstimate hc_coefficient(const Dataset& ds, int k = 4, int probes = 16, std::uint64_t seed = 0);
HcEstimate hc_coefficient(const Moments& moments, int k = 4, int probes = 16,
                          std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Negatively correlated moments
// ---------------------------------------------------------------------------

struct NcmRatio {
    double value = 1.0;
    bool degenerate = false;  // all residuals were zero
};

/// max over probe directions v of E[<v,x>^{2r} res^{2r}] /
/// (E[<v,x>^{2r}] E[res^{2r}]); near 1 certifies the negatively-correlated
/// moments condition empirically at those probes.
NcmRatio ncm_ratio(const Dataset& ds, const Vec& theta, int r, int probes = 16,
                   std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

/// || Sigma^{1/2} (a - b) ||_2 via the symmetric square root.
double param_error(const Vec& theta_a, const Vec& theta_b, const Mat& sigma);

struct ExcessError {
    double value = 0.0;     // the identity route, unless fallback_direct
    double direct = 0.0;    // err(theta) - err(theta*) by moment expansion
    double identity = 0.0;  // ||Sigma^{1/2}(theta - theta*)||^2
    bool fallback_direct = false;
};

/// err(theta) - err(theta*) computed two ways; the routes must agree to 1e-10
/// whenever the gradient condition holds.
ExcessError excess_error(const RegressionInstance& inst, const Vec& theta);

// ---------------------------------------------------------------------------
// TV between registered pairs
// ---------------------------------------------------------------------------

/// Integrates the pair's closed-form conditional-overlap integrand over the
/// covariate marginal: atoms exactly, bands by quadrature (abs tol 1e-6).
double tv_estimate(const InstancePair& pair, int grid_resolution = 64);

// ---------------------------------------------------------------------------
// Identifiability check
// ---------------------------------------------------------------------------

enum class IdentifiabilityMode { NCM, Arbitrary };

struct IdentifiabilityReport {
    double rho = 0.0;       // param_gap / (eps^expo (sqrt(err1)+sqrt(err2)))
    double exponent = 0.75; // 1-1/k (NCM) or 1-2/k (Arbitrary)
    double eps_tv = 0.0;    // from tv_estimate
    double param_gap = 0.0;
    double err1 = 0.0, err2 = 0.0;
    std::optional<double> c4_lower, c4_upper;
    std::optional<double> eta4;        // noise hypercontractivity ratio
    std::optional<double> bound_scale; // sqrt(c4 * eta4)
    bool impossibility_witness = false;  // err1 = err2 = 0 with nonzero gap
    bool trivially_satisfied = false;    // zero gap
    IdentifiabilityMode mode = IdentifiabilityMode::NCM;

    std::string to_json() const;
};

IdentifiabilityReport identifiability_check(const InstancePair& pair, int k = 4,
                                            IdentifiabilityMode mode = IdentifiabilityMode::NCM);

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// || Sigma^{-1/2} SigmaHat Sigma^{-1/2} - I ||_F for the sample second moment
/// of X.
double lowner_whitened_deviation(const Mat& sigma, const Mat& X);

/// Probe set: the d coordinate axes, the top-ceil(count/2) right singular
/// directions of X (when nonempty), then seeded random unit vectors up to
/// max(count, d) total.
std::vector<Vec> probe_directions(const Mat& X, int d, int count, std::uint64_t seed);

}  // namespace robreg
