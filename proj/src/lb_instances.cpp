#include "robreg/lb_instances.hpp"

#include "robreg/diagnostics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace robreg {

using nlohmann::json;

std::string to_string(PairKind k) {
    switch (k) {
        case PairKind::TrueLinear: return "true_linear";
        case PairKind::DependentNoise: return "dependent";
        case PairKind::BoundedCovariance: return "bounded_cov";
        case PairKind::MeanShift: return "mean_shift";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

InstancePair true_linear_pair(double eps, double sigma, int k) {
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("true_linear requires 0 < eps < 1/2");
    if (k < 4 || k % 2 != 0) throw std::invalid_argument("true_linear requires even k >= 4");
    double spike = std::pow(eps, -1.0 / k);
    if (!(sigma > 0.0 && sigma < spike))
        throw std::invalid_argument("true_linear requires 0 < sigma < eps^{-1/k}");

    CovariateSpec cov;
    cov.coords.push_back(make_uniform(-1.0, 1.0));
    cov.coords.push_back(make_spike_band(spike, eps, eps * sigma));

    Vec t1(2), t2(2);
    t1 << 1.0, 1.0;
    t2 << 1.0, -1.0;
    InstancePair p;
    p.kind = PairKind::TrueLinear;
    p.d1 = make_instance(cov, make_uniform_noise(sigma), t1);
    p.d2 = make_instance(cov, make_uniform_noise(sigma), t2);
    p.eps = eps;
    p.sigma = sigma;
    p.k = k;
    return p;
}

InstancePair dependent_pair(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("dependent requires 0 < eps < 1/2");
    double spike = std::pow(eps, -0.25);  // proof fixes k = 4

    CovariateSpec cov;
    cov.coords.push_back(make_uniform(-1.0, 1.0));
    cov.coords.push_back(make_spike_band(spike, eps, 1.0));

    // Second moment of x2 and the off-spike part of E[x2 y].
    double s22 = std::sqrt(eps) + (1.0 - eps) / 3.0;
    double exy = (1.0 - eps) / 3.0;

    Vec t1(2), t2(2);
    t1 << 0.0, 1.0;
    t2 << 0.0, exy / s22;
    InstancePair p;
    p.kind = PairKind::DependentNoise;
    p.d1 = make_instance(cov, make_zero_noise(), t1);
    p.d2 = make_instance(cov, make_dependent_noise("zero_at_spike", spike), t2);
    p.eps = eps;
    p.k = 4;
    return p;
}

InstancePair bounded_cov_pair(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("bounded_cov requires 0 < eps < 1");
    CovariateSpec cov;
    cov.coords.push_back(make_zero_inflated(make_student_t(2.0 + eps, 1.0), 1.0 - eps));
    Vec t1(1), t2(1);
    t1 << 1.0;
    t2 << -1.0;
    InstancePair p;
    p.kind = PairKind::BoundedCovariance;
    p.d1 = make_instance(cov, make_zero_noise(), t1);
    p.d2 = make_instance(cov, make_zero_noise(), t2);
    p.eps = eps;
    return p;
}

InstancePair mean_shift_pair(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("mean_shift requires 0 < delta < 1");
    double spike = std::pow(delta, -0.25);
    CovariateSpec cov;
    cov.coords.push_back(
        make_discrete({-1.0, 1.0, spike}, {0.5 * (1.0 - delta), 0.5 * (1.0 - delta), delta}));

    double ex2 = 1.0 - delta + std::sqrt(delta);
    Vec t1(1), t2(1);
    t1 << 1.0;
    t2 << (1.0 - delta) / ex2;
    InstancePair p;
    p.kind = PairKind::MeanShift;
    p.d1 = make_instance(cov, make_zero_noise(), t1);
    p.d2 = make_instance(cov, make_dependent_noise("zero_at_spike", spike), t2);
    p.eps = delta;
    return p;
}

// ---------------------------------------------------------------------------
// Closed-form report
// ---------------------------------------------------------------------------

namespace {

Mat shared_sigma(const InstancePair& p) {
    switch (p.kind) {
        case PairKind::BoundedCovariance: {
            Mat s(1, 1);
            s(0, 0) = 2.0 + p.eps;  // eps * (2+eps)/eps, exactly
            return s;
        }
        case PairKind::MeanShift: {
            Mat s(1, 1);
            s(0, 0) = 1.0 - p.eps + std::sqrt(p.eps);
            return s;
        }
        default: return p.d1.second_moment();
    }
}

double tv_closed(const InstancePair& p) {
    switch (p.kind) {
        case PairKind::TrueLinear: {
            // Pr(|x2| >= sigma) + E[|x2| 1{|x2| < sigma}]/sigma, i.e.
            // E[min(1, |x2|/sigma)] over the spike-band marginal.
            double eps = p.eps, sigma = p.sigma;
            double spike = std::pow(eps, -1.0 / p.k);
            double eta = eps * sigma;
            double atoms = eps * std::min(1.0, spike / sigma);
            double band;
            if (eta <= sigma)
                band = (1.0 - eps) * (0.5 * eta) / sigma;  // E|U[-eta,eta]| = eta/2
            else
                band = (1.0 - eps) * (sigma / (2.0 * eta) + (eta - sigma) / eta);
            return atoms + band;
        }
        // The other three constructions disagree exactly on the spike mass.
        case PairKind::DependentNoise:
        case PairKind::BoundedCovariance:
        case PairKind::MeanShift: return p.eps;
    }
    return 0.0;
}

std::map<std::string, double> paper_claims(const InstancePair& p) {
    std::map<std::string, double> c;
    double eps = p.eps;
    switch (p.kind) {
        case PairKind::TrueLinear:
            c["tv"] = 2.0 * eps;
            c["sigma22_simplified"] =
                std::pow(eps, 1.0 - 2.0 / p.k) + (eps * p.sigma) * (eps * p.sigma) / 3.0;
            break;
        case PairKind::DependentNoise:
            c["theta2"] = (1.0 - eps) / (1.0 + std::sqrt(eps));
            c["exy"] = 1.0 - eps;
            c["tv"] = eps;
            break;
        case PairKind::BoundedCovariance:
            c["tv_bound"] = eps;
            c["gap_scaled"] = 2.0 * std::sqrt(2.0 + eps);
            break;
        case PairKind::MeanShift:
            c["theta2"] = (1.0 - eps) / (1.0 + std::sqrt(eps));
            c["gap"] = (eps + std::sqrt(eps)) / (1.0 + std::sqrt(eps));
            c["variance"] = 1.0 + std::sqrt(eps);
            c["tv"] = eps;
            break;
    }
    return c;
}

}  // namespace

PairReport pair_closed_form(const InstancePair& pair) {
    PairReport r;
    r.kind = pair.kind;
    r.theta1 = pair.d1.theta_star;
    r.theta2 = pair.d2.theta_star;
    r.sigma_matrix = shared_sigma(pair);
    r.tv_closed_form = tv_closed(pair);
    r.param_gap = param_error(r.theta1, r.theta2, r.sigma_matrix);
    r.theta_gap = (r.theta1 - r.theta2).norm();
    r.excess_gap = std::abs(pair.d1.err_at(r.theta2) - pair.d1.err_at(r.theta1));
    r.paper_claim = paper_claims(pair);
    try {
        Moments mo = population_moments(pair.d1.covariates, 4);
        HcEstimate hc = hc_coefficient(mo);
        r.hc_lower = hc.lower;
        r.hc_upper = hc.upper;
    } catch (const InfiniteMomentError&) {
        r.flags.push_back("not (c,4)-hypercontractive: fourth moment infinite");
    }
    if (pair.d1.mean().lpNorm<Eigen::Infinity>() > 1e-12)
        r.flags.push_back("non_centered_covariates");
    return r;
}

// ---------------------------------------------------------------------------
// Monte-Carlo cross-checks
// ---------------------------------------------------------------------------

namespace {

/// Conditional-overlap integrand of the pair construction, evaluated at one
/// covariate draw; its population mean is the TV distance.
double tv_integrand(const InstancePair& p, const Vec& x) {
    double last = x(x.size() - 1);
    switch (p.kind) {
        case PairKind::TrueLinear: return std::min(1.0, std::abs(last) / p.sigma);
        case PairKind::DependentNoise:
        case PairKind::MeanShift: {
            double m = std::pow(p.eps, -0.25);
            return std::abs(std::abs(last) - m) <= 1e-12 * m ? 1.0 : 0.0;
        }
        case PairKind::BoundedCovariance: return last != 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

Vec normal_equations(const Mat& X, const Vec& y) {
    Mat m = X.transpose() * X;
    Vec b = X.transpose() * y;
    return m.ldlt().solve(b);
}

}  // namespace

PairReport pair_report(const InstancePair& pair, int mc_samples, std::uint64_t seed) {
    if (mc_samples < 10000) throw std::invalid_argument("pair_report requires mc_samples >= 10^4");
    PairReport r = pair_closed_form(pair);

    Dataset s1 = sample_instance(pair.d1, mc_samples, Rng::derive(seed, 1));
    Dataset s2 = sample_instance(pair.d2, mc_samples, Rng::derive(seed, 2));

    double acc = 0.0;
    for (int i = 0; i < s1.n(); ++i) acc += tv_integrand(pair, s1.X.row(i).transpose());
    r.tv_mc = acc / mc_samples;
    r.tv_mc_abs_diff = std::abs(r.tv_mc - r.tv_closed_form);

    r.theta1_mc = normal_equations(s1.X, s1.y);
    r.theta2_mc = normal_equations(s2.X, s2.y);
    r.theta1_mc_abs_diff = (r.theta1_mc - r.theta1).norm();
    r.theta2_mc_abs_diff = (r.theta2_mc - r.theta2).norm();
    return r;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string PairReport::to_json() const {
    json j;
    j["kind"] = to_string(kind);
    j["theta1"] = std::vector<double>(theta1.begin(), theta1.end());
    j["theta2"] = std::vector<double>(theta2.begin(), theta2.end());
    std::vector<std::vector<double>> sm;
    for (int r = 0; r < sigma_matrix.rows(); ++r) {
        std::vector<double> row(sigma_matrix.cols());
        for (int c = 0; c < sigma_matrix.cols(); ++c) row[c] = sigma_matrix(r, c);
        sm.push_back(std::move(row));
    }
    j["sigma"] = sm;
    j["tv_closed_form"] = tv_closed_form;
    j["param_gap"] = param_gap;
    j["theta_gap"] = theta_gap;
    j["excess_gap"] = excess_gap;
    j["gradient_anchor"] = gradient_anchor;
    if (hc_lower) j["hc_lower"] = *hc_lower;
    if (hc_upper) j["hc_upper"] = *hc_upper;
    j["paper_claim"] = paper_claim;
    if (theta1_mc.size() > 0) {
        j["cross_checks"] = {
            {"tv_mc", tv_mc},
            {"tv_mc_abs_diff", tv_mc_abs_diff},
            {"theta1_mc", std::vector<double>(theta1_mc.begin(), theta1_mc.end())},
            {"theta2_mc", std::vector<double>(theta2_mc.begin(), theta2_mc.end())},
            {"theta1_mc_abs_diff", theta1_mc_abs_diff},
            {"theta2_mc_abs_diff", theta2_mc_abs_diff},
        };
    }
    j["flags"] = flags;
    return j.dump(2);
}

}  // namespace robreg
