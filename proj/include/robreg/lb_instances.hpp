#pragma once

#include "robreg/model.hpp"

#include <map>
#include <optional>
#include <string>

namespace robreg {

enum class PairKind { TrueLinear, DependentNoise, BoundedCovariance, MeanShift };

std::string to_string(PairKind k);

/// Two regression instances over the same covariate marginal that are close
/// in TV yet have well-separated optimal hyperplanes.
struct InstancePair {
    PairKind kind;
    RegressionInstance d1, d2;
    // Construction parameters (eps for TrueLinear/DependentNoise/BoundedCovariance,
    // delta for MeanShift; sigma and k only for TrueLinear).
    double eps = 0.0;
    double sigma = 0.0;
    int k = 4;
};

struct PairReport {
    PairKind kind;
    Vec theta1, theta2;
    Mat sigma_matrix;         // shared covariate second-moment matrix
    double tv_closed_form;    // construction-specific closed form
    double param_gap;         // ||Sigma^{1/2}(theta1 - theta2)||_2
    double theta_gap;         // plain ||theta1 - theta2||_2
    double excess_gap;        // |err_{D1}(theta2) - err_{D1}(theta1)|, anchored at D1
    std::optional<double> hc_lower, hc_upper;  // C4 of the shared marginal
    /// Constants exactly as printed in the source analysis, for side-by-side
    /// display where they disagree with the evaluated formulas.
    std::map<std::string, double> paper_claim;
    // Monte-Carlo cross-checks (filled by pair_report).
    double tv_mc = 0.0, tv_mc_abs_diff = 0.0;
    Vec theta1_mc, theta2_mc;
    double theta1_mc_abs_diff = 0.0, theta2_mc_abs_diff = 0.0;
    std::vector<std::string> flags;
    std::string gradient_anchor = "D1";

    std::string to_json() const;
};

/// d = 2 instance pair with identical covariate marginals, independent uniform
/// noise and hyperplanes (1, 1) vs (1, -1); the spike coordinate makes the
/// optimal hyperplanes epsilon^{1-1/k}-separated.
InstancePair true_linear_pair(double eps, double sigma, int k);

/// d = 2, k = 4 pair where the second instance's labels vanish on the spike;
/// noise depends on the covariates.
InstancePair dependent_pair(double eps);

/// d = 1 pair with heavy-tailed (Student's t, nu = 2 + eps) covariates on an
/// eps-measure support; bounded covariance but no finite fourth moment.
InstancePair bounded_cov_pair(double eps);

/// d = 1 three-atom mean-shift example with a one-sided spike.
InstancePair mean_shift_pair(double delta);

/// Closed-form report quantities plus Monte-Carlo cross-checks. mc_samples
/// must be >= 10^4.
PairReport pair_report(const InstancePair& pair, int mc_samples, std::uint64_t seed);

/// Closed-form fields only (no sampling).
PairReport pair_closed_form(const InstancePair& pair);

}  // namespace robreg
