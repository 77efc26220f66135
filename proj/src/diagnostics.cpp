#include "robreg/diagnostics.hpp"

#include "robreg/quadrature.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace robreg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Probe directions
// ---------------------------------------------------------------------------

std::vector<Vec> probe_directions(const Mat& X, int d, int count, std::uint64_t seed) {
    std::vector<Vec> probes;
    for (int j = 0; j < d; ++j) probes.push_back(Vec::Unit(d, j));

    auto push_unique = [&](Vec v) {
        double n = v.norm();
        if (n < 1e-12) return;
        v /= n;
        for (const Vec& p : probes)
            if (std::abs(p.dot(v)) > 1.0 - 1e-9) return;
        probes.push_back(std::move(v));
    };

    std::size_t quota = static_cast<std::size_t>(std::max(count, d));
    if (X.rows() > 0 && d > 1) {
        Eigen::BDCSVD<Mat> svd(X, Eigen::ComputeThinV);
        int take = std::min<int>((count + 1) / 2, svd.matrixV().cols());
        for (int j = 0; j < take && probes.size() < quota; ++j)
            push_unique(svd.matrixV().col(j));
    }
    Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
    // In low dimension the de-duplicated sphere can run out of room; cap the
    // attempts rather than insisting on the quota.
    for (std::size_t attempts = 50 * quota + 50; probes.size() < quota && attempts > 0;
         --attempts) {
        Vec v(d);
        for (int j = 0; j < d; ++j) v(j) = rng.gaussian();
        push_unique(v);
    }
    return probes;
}

// ---------------------------------------------------------------------------
// Hypercontractivity
// ---------------------------------------------------------------------------

namespace {

HcEstimate hc_from_whitened(const Mat& Z, int probes, std::uint64_t seed) {
    int n = static_cast<int>(Z.rows());
    int d = static_cast<int>(Z.cols());

    // Flattened fourth-moment matrix M4[(a,b),(c,e)] = E[z_a z_b z_c z_e];
    // <v,z>^4 = (v (x) v)^T M4 (v (x) v) <= lambda_max since ||v (x) v|| = 1.
    Mat m4 = Mat::Zero(d * d, d * d);
    for (int i = 0; i < n; ++i) {
        Vec z = Z.row(i).transpose();
        Mat outer = z * z.transpose();
        Eigen::Map<Vec> flat(outer.data(), d * d);
        m4.noalias() += flat * flat.transpose();
    }
    m4 /= n;
    Eigen::SelfAdjointEigenSolver<Mat> es(m4);

    HcEstimate est;
    est.upper = es.eigenvalues().maxCoeff();
    auto dirs = probe_directions(Z, d, probes, seed);
    est.probe_count = static_cast<int>(dirs.size());
    double best = 1.0;
    for (const Vec& v : dirs) {
        Vec proj = Z * v;
        double m2 = proj.array().square().mean();
        double m4v = proj.array().square().square().mean();
        if (m2 > 0.0) best = std::max(best, m4v / (m2 * m2));
    }
    est.lower = best;
    return est;
}

}  // namespace

HcEstimate hc_coefficient(const Dataset& ds, int k, int probes, std::uint64_t seed) {
    if (k != 4) throw std::invalid_argument("hc_coefficient supports k = 4 only");
    int n = ds.n(), d = ds.d();
    Vec mu = ds.X.colwise().mean();
    Mat centered = ds.X.rowwise() - mu.transpose();
    Mat cov = centered.transpose() * centered / n;
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    if (es.eigenvalues().minCoeff() < 1e-10)
        throw Error("hc_coefficient: covariance singular beyond the 1e-10 floor");
    Mat whiten = es.eigenvectors() *
                 es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                 es.eigenvectors().transpose();
    Mat Z = centered * whiten;
    return hc_from_whitened(Z, probes, seed);
}

HcEstimate hc_coefficient(const Moments& moments, int k, int probes, std::uint64_t seed) {
    if (k != 4) throw std::invalid_argument("hc_coefficient supports k = 4 only");
    if (moments.max_order < 4) throw std::invalid_argument("need moments up to order 4");
    int d = moments.d();

    // Whitened central moments per coordinate: mu2 -> 1.
    Vec mu4(d), mu3(d);
    for (int j = 0; j < d; ++j) {
        double m2 = moments.central(j, 2);
        if (m2 < 1e-10) throw Error("hc_coefficient: degenerate coordinate variance");
        mu4(j) = moments.central(j, 4) / (m2 * m2);
        mu3(j) = moments.central(j, 3) / std::pow(m2, 1.5);
    }

    // Independent coordinates: E[z_a z_b z_c z_e] is nonzero only for the
    // all-equal pattern (mu4) and the three pair patterns (1 each).
    Mat m4 = Mat::Zero(d * d, d * d);
    auto idx = [d](int a, int b) { return a * d + b; };
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e) {
                    double val = 0.0;
                    if (a == b && b == c && c == e) val = mu4(a);
                    else if (a == b && c == e && a != c) val = 1.0;
                    else if (a == c && b == e && a != b) val = 1.0;
                    else if (a == e && b == c && a != b) val = 1.0;
                    else if (a == b && b == c) val = mu3(a) * 0.0;  // E[z_e] = 0
                    if (val != 0.0) m4(idx(a, b), idx(c, e)) = val;
                }
    Eigen::SelfAdjointEigenSolver<Mat> es(m4);

    HcEstimate est;
    est.upper = es.eigenvalues().maxCoeff();
    auto dirs = probe_directions(Mat(), d, probes, seed);
    est.probe_count = static_cast<int>(dirs.size());
    double best = 1.0;
    for (const Vec& v : dirs) {
        double num = 0.0;
        for (int a = 0; a < d; ++a) num += std::pow(v(a), 4) * mu4(a);
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) num += 6.0 * v(a) * v(a) * v(b) * v(b);
        double den = v.squaredNorm();
        best = std::max(best, num / (den * den));
    }
    est.lower = best;
    return est;
}

// ---------------------------------------------------------------------------
// NCM ratio
// ---------------------------------------------------------------------------

NcmRatio ncm_ratio(const Dataset& ds, const Vec& theta, int r, int probes, std::uint64_t seed) {
    if (r != 1 && r != 2) throw std::invalid_argument("ncm_ratio supports r in {1, 2}");
    Vec res = ds.y - ds.X * theta;
    Vec res_pow = res.array().pow(2 * r);
    double res_moment = res_pow.mean();
    if (res_moment == 0.0) return {1.0, true};

    auto dirs = probe_directions(ds.X, ds.d(), std::max(probes, ds.d()), seed);
    double best = 0.0;
    for (const Vec& v : dirs) {
        Vec proj_pow = (ds.X * v).array().pow(2 * r);
        double denom = proj_pow.mean() * res_moment;
        if (denom == 0.0) continue;
        double joint = (proj_pow.array() * res_pow.array()).mean();
        best = std::max(best, joint / denom);
    }
    return {best, false};
}

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

double param_error(const Vec& theta_a, const Vec& theta_b, const Mat& sigma) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw Error("param_error: sigma is not positive semidefinite");
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Mat root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return (root * (theta_a - theta_b)).norm();
}

ExcessError excess_error(const RegressionInstance& inst, const Vec& theta) {
    ExcessError out;
    out.direct = inst.err_at(theta) - inst.err_star();
    double g = param_error(theta, inst.theta_star, inst.second_moment());
    out.identity = g * g;
    if (inst.gradient_condition_residual() <= 1e-8) {
        if (std::abs(out.direct - out.identity) > 1e-10)
            throw Error("excess_error: expansion and identity disagree beyond 1e-10");
        out.value = out.identity;
    } else {
        out.fallback_direct = true;
        out.value = out.direct;
    }
    return out;
}

// ---------------------------------------------------------------------------
// TV between registered pairs
// ---------------------------------------------------------------------------

double tv_estimate(const InstancePair& pair, int grid_resolution) {
    if (pair.d1 == pair.d2) return 0.0;
    const Marginal1D& last = pair.d1.covariates.coords.back();
    MarginalComponents comp = components_of(last);

    switch (pair.kind) {
        case PairKind::TrueLinear: {
            // inner integral = min(1, |x2|/sigma)
            double sigma = pair.sigma;
            double acc = 0.0;
            for (auto a : comp.atoms) acc += a.p * std::min(1.0, std::abs(a.x) / sigma);
            QuadratureOptions opt;
            opt.rel_tol = 1e-9;
            for (auto b : comp.bands) {
                double cell = (b.b - b.a) / grid_resolution;
                double band_acc = 0.0;
                for (int i = 0; i < grid_resolution; ++i)
                    band_acc += integrate(
                        [&](double t) { return std::min(1.0, std::abs(t) / sigma); },
                        b.a + i * cell, b.a + (i + 1) * cell, opt);
                acc += b.mass * band_acc / (b.b - b.a);
            }
            return acc;
        }
        case PairKind::DependentNoise:
        case PairKind::MeanShift: {
            // conditionals are point masses differing exactly on the spike
            double m = std::pow(pair.eps, -0.25);
            double acc = 0.0;
            for (auto a : comp.atoms)
                if (std::abs(std::abs(a.x) - m) <= 1e-12 * m) acc += a.p;
            return acc;
        }
        case PairKind::BoundedCovariance: {
            // y = x vs y = -x: conditionals disjoint wherever x != 0
            double acc = 0.0;
            for (auto a : comp.atoms)
                if (a.x != 0.0) acc += a.p;
            for (auto b : comp.bands) acc += b.mass;
            for (auto d : comp.densities) acc += d.mass;
            return acc;
        }
    }
    throw Error("tv_estimate: unregistered pair kind");
}

// ---------------------------------------------------------------------------
// Identifiability check
// ---------------------------------------------------------------------------

namespace {

/// Population hypercontractivity ratio of the residual y - <x, theta*> for
/// one instance; nullopt when the residual is identically zero.
std::optional<double> residual_eta4(const RegressionInstance& inst) {
    if (inst.noise.independent()) {
        switch (inst.noise.kind) {
            case NoiseSpec::Kind::IndependentUniform: return 9.0 / 5.0;
            case NoiseSpec::Kind::IndependentGaussian: return 3.0;
            default: return std::nullopt;  // zero noise
        }
    }
    // zero_at_spike rules: the residual is a function of the last coordinate.
    double m = inst.noise.rule_param;
    double t = inst.theta_star(inst.d() - 1);
    auto res = [&](double x) {
        bool spike = std::abs(std::abs(x) - m) <= 1e-12 * m;
        double y = spike ? 0.0 : x;
        return y - t * x;
    };
    const Marginal1D& last = inst.covariates.coords.back();
    double mean = expect_marginal(last, res);
    double m2 = expect_marginal(last, [&](double x) { return std::pow(res(x) - mean, 2); });
    double m4 = expect_marginal(last, [&](double x) { return std::pow(res(x) - mean, 4); });
    if (m2 <= 0.0) return std::nullopt;
    return m4 / (m2 * m2);
}

}  // namespace

IdentifiabilityReport identifiability_check(const InstancePair& pair, int k,
                                            IdentifiabilityMode mode) {
    IdentifiabilityReport rep;
    rep.mode = mode;
    rep.exponent = mode == IdentifiabilityMode::NCM ? 1.0 - 1.0 / k : 1.0 - 2.0 / k;
    rep.eps_tv = tv_estimate(pair);
    PairReport closed = pair_closed_form(pair);
    rep.param_gap = closed.param_gap;
    rep.err1 = pair.d1.err_star();
    rep.err2 = pair.d2.err_star();
    rep.c4_lower = closed.hc_lower;
    rep.c4_upper = closed.hc_upper;

    std::optional<double> e1 = residual_eta4(pair.d1), e2 = residual_eta4(pair.d2);
    if (e1 || e2) rep.eta4 = std::max(e1.value_or(1.0), e2.value_or(1.0));
    if (rep.eta4 && rep.c4_lower) rep.bound_scale = std::sqrt(*rep.c4_lower * *rep.eta4);

    if (rep.param_gap <= 1e-14) {
        rep.trivially_satisfied = true;
        rep.rho = 0.0;
        return rep;
    }
    double denom = std::sqrt(rep.err1) + std::sqrt(rep.err2);
    if (denom == 0.0) {
        rep.impossibility_witness = true;
        rep.rho = std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.rho = rep.param_gap / (std::pow(rep.eps_tv, rep.exponent) * denom);
    return rep;
}

std::string IdentifiabilityReport::to_json() const {
    json j;
    j["rho"] = std::isinf(rho) ? json("inf") : json(rho);
    j["exponent"] = exponent;
    j["eps_tv"] = eps_tv;
    j["param_gap"] = param_gap;
    j["err1"] = err1;
    j["err2"] = err2;
    if (c4_lower) j["c4_lower"] = *c4_lower;
    if (c4_upper) j["c4_upper"] = *c4_upper;
    if (eta4) j["eta4"] = *eta4;
    if (bound_scale) j["bound_scale"] = *bound_scale;
    j["impossibility_witness"] = impossibility_witness;
    j["trivially_satisfied"] = trivially_satisfied;
    j["mode"] = mode == IdentifiabilityMode::NCM ? "ncm" : "arbitrary";
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Löwner deviation
// ---------------------------------------------------------------------------

double lowner_whitened_deviation(const Mat& sigma, const Mat& X) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    if (es.eigenvalues().minCoeff() <= 0.0) throw Error("sigma must be positive definite");
    Mat inv_root = es.eigenvectors() * es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                   es.eigenvectors().transpose();
    Mat hat = X.transpose() * X / static_cast<double>(X.rows());
    Mat dev = inv_root * hat * inv_root - Mat::Identity(sigma.rows(), sigma.cols());
    return dev.norm();  // Frobenius
}

}  // namespace robreg
