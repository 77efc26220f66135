// Acceptance suite: one check per numbered criterion, one PASS/FAIL line each.

#include "robreg/contamination.hpp"
#include "robreg/diagnostics.hpp"
#include "robreg/estimators.hpp"
#include "robreg/harness.hpp"
#include "robreg/lb_instances.hpp"
#include "robreg/quadrature.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>
#include <vector>

using namespace robreg;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double x) { return format_double(x); }

// --------------------------------------------------------------------------
// 1. Lower-bound closed forms vs independent oracles
// --------------------------------------------------------------------------

// Composite-Simpson TV oracle for the true-linear pair: E[min(1, |x2|/sigma)]
// over the spike-band marginal, coded independently of the library quadrature.
double tv_oracle_true_linear(double eps, double sigma, int k) {
    double spike = std::pow(eps, -1.0 / k);
    double eta = eps * sigma;
    double atoms = eps * std::min(1.0, spike / sigma);
    int cells = 20000;
    double h = 2.0 * eta / cells, acc = 0.0;
    for (int i = 0; i <= cells; ++i) {
        double x = -eta + i * h;
        double w = (i == 0 || i == cells) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * std::min(1.0, std::abs(x) / sigma);
    }
    acc *= h / 3.0;
    return atoms + (1.0 - eps) * acc / (2.0 * eta);
}

void criterion_1() {
    bool pass = true;
    std::ostringstream d;

    // tv_estimate vs oracles, all four kinds
    double tl_tv = tv_estimate(true_linear_pair(0.05, 1.0, 4));
    pass &= std::abs(tl_tv - tv_oracle_true_linear(0.05, 1.0, 4)) <= 1e-6;
    pass &= std::abs(tv_estimate(dependent_pair(0.07)) - 0.07) <= 1e-6;
    pass &= std::abs(tv_estimate(bounded_cov_pair(0.1)) - 0.1) <= 1e-6;
    pass &= std::abs(tv_estimate(mean_shift_pair(0.04)) - 0.04) <= 1e-6;
    d << "tv_true_linear=" << fmt(tl_tv);

    // dependent theta2 vs quadrature normal equations
    double eps = 0.04;
    InstancePair dp = dependent_pair(eps);
    double band_x2 = (1.0 - eps) * integrate([](double t) { return 0.5 * t * t; }, -1.0, 1.0);
    double oracle_theta2 = band_x2 / (band_x2 + eps * std::pow(eps, -0.5));
    double dev = std::abs(dp.d2.theta_star(1) - oracle_theta2);
    pass &= dev <= 1e-9;
    d << " dep_theta2_dev=" << fmt(dev);

    // bounded covariance second moment, exact
    PairReport bc = pair_closed_form(bounded_cov_pair(0.1));
    pass &= bc.sigma_matrix(0, 0) == 2.1;
    d << " bc_ex2=" << fmt(bc.sigma_matrix(0, 0));

    // mean-shift gap formula vs the independently evaluated printed fraction
    double delta = 0.04;
    PairReport ms = pair_closed_form(mean_shift_pair(delta));
    double gap_formula = ms.paper_claim.at("gap");
    double gap_other_route = 1.0 - (1.0 - delta) / (1.0 + std::sqrt(delta));
    pass &= std::abs(gap_formula - gap_other_route) <= 1e-12;
    pass &= std::abs(gap_formula - (delta + std::sqrt(delta)) / (1.0 + std::sqrt(delta))) <= 1e-12;
    d << " ms_gap=" << fmt(gap_formula);

    report(1, "lower-bound closed forms match oracles", pass, d.str());
}

// --------------------------------------------------------------------------
// 2. TV bound for the true-linear pair
// --------------------------------------------------------------------------

void criterion_2() {
    bool pass = true;
    std::ostringstream d;
    for (double eps : {0.01, 0.05, 0.1}) {
        InstancePair p = true_linear_pair(eps, 1.0, 4);
        PairReport r = pair_report(p, 1000000, 1234);
        pass &= r.tv_closed_form <= 2.0 * eps;
        pass &= r.tv_mc_abs_diff <= 0.005;
        d << "eps=" << eps << ":tv=" << fmt(r.tv_closed_form) << ",mc_dev=" << fmt(r.tv_mc_abs_diff)
          << " ";
    }
    report(2, "true-linear tv <= 2 eps with Monte-Carlo agreement", pass, d.str());
}

// --------------------------------------------------------------------------
// 3. Hypercontractivity constants
// --------------------------------------------------------------------------

void criterion_3() {
    bool pass = true;
    std::ostringstream d;

    CovariateSpec uni;
    uni.coords.push_back(make_uniform(-1.0, 1.0));
    HcEstimate u = hc_coefficient(population_moments(uni, 4));
    pass &= std::abs(u.lower - 1.8) <= 1e-10 && std::abs(u.upper - 1.8) <= 1e-10;
    d << "uniform=" << fmt(u.lower);

    CovariateSpec g;
    g.coords.push_back(make_gaussian(0.0, 1.0));
    Dataset gd = sample_instance(make_instance(g, make_zero_noise(), Vec::Ones(1)), 1000000, 7);
    HcEstimate ge = hc_coefficient(gd);
    pass &= std::abs(ge.lower - 3.0) <= 0.15 && std::abs(ge.upper - 3.0) <= 0.15;
    d << " gaussian=" << fmt(ge.lower);

    bool threw = false;
    try {
        CovariateSpec t;
        t.coords.push_back(make_student_t(2.1, 1.0));
        population_moments(t, 4);
    } catch (const InfiniteMomentError&) {
        threw = true;
    }
    pass &= threw;
    d << " student_t_raises=" << (threw ? "yes" : "no");

    report(3, "hypercontractivity constants", pass, d.str());
}

// --------------------------------------------------------------------------
// 4. Excess-error identity
// --------------------------------------------------------------------------

void criterion_4() {
    Rng rng(424242);
    bool pass = true;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int dim = 1 + static_cast<int>(rng.next_u64() % 4);
        CovariateSpec cov;
        for (int j = 0; j < dim; ++j) {
            if (rng.next_double() < 0.5)
                cov.coords.push_back(make_gaussian(0.0, 0.5 + rng.next_double()));
            else
                cov.coords.push_back(make_uniform(-1.0 - rng.next_double(), 1.0 + rng.next_double()));
        }
        Vec theta(dim), probe(dim);
        for (int j = 0; j < dim; ++j) {
            theta(j) = 2.0 * rng.next_double() - 1.0;
            probe(j) = theta(j) + rng.next_double() - 0.5;
        }
        NoiseSpec ns = trial % 2 == 0 ? make_uniform_noise(0.3 + rng.next_double())
                                      : make_gaussian_noise(0.3 + rng.next_double());
        ExcessError ee = excess_error(make_instance(cov, ns, theta), probe);
        worst = std::max(worst, std::abs(ee.direct - ee.identity));
        pass &= std::abs(ee.direct - ee.identity) <= 1e-10;
    }
    report(4, "excess-error identity on 100 random instances", pass, "worst_dev=" + fmt(worst));
}

// --------------------------------------------------------------------------
// 5. Robust GD contraction and plain-GD reduction
// --------------------------------------------------------------------------

void criterion_5() {
    CovariateSpec cov;
    for (int j = 0; j < 5; ++j) cov.coords.push_back(make_gaussian(0.0, 1.0));
    Dataset ds = sample_instance(make_instance(cov, make_zero_noise(), Vec::Ones(5)), 500, 90);

    RobustGdConfig cfg;
    cfg.eps = 0.0;
    cfg.tau_l = 1.0;
    cfg.tau_u = 1.0;
    cfg.iterations = 60;
    EstimatorReport rep = robust_gd(ds, cfg);

    bool pass = true;
    double kappa_emp = 0.0;
    for (std::size_t t = 1; t < rep.trace.size(); ++t) {
        if (rep.trace[t - 1] <= 1e-12) break;
        double ratio = rep.trace[t] / rep.trace[t - 1];
        kappa_emp = std::max(kappa_emp, ratio);
    }
    pass &= kappa_emp < 1.0;

    // plain gradient descent with identical arithmetic, bitwise
    Vec theta = Vec::Zero(5);
    for (int t = 0; t < cfg.iterations; ++t) {
        Vec resid = ds.X * theta - ds.y;
        Mat grads = ds.X.array().colwise() * resid.array();
        Vec acc = Vec::Zero(5);
        for (int i = 0; i < ds.n(); ++i) acc += grads.row(i).transpose();
        theta -= 1.0 * (acc / static_cast<double>(ds.n()));
    }
    bool bitwise = rep.theta_hat == theta;
    pass &= bitwise;

    report(5, "robust GD contraction and eps=0 reduction", pass,
           "kappa_emp=" + fmt(kappa_emp) + " bitwise=" + (bitwise ? std::string("yes") : "no"));
}

// --------------------------------------------------------------------------
// 6. Rate direction sweep
// --------------------------------------------------------------------------

void criterion_6() {
    ExperimentConfig cfg = parse_config(R"(
instance.kind = gaussian
instance.d = 4
instance.theta = 1,1,1,1
instance.noise = uniform
instance.noise_sigma = 1.0
adversary.strategy = leverage_plant
adversary.magnitude_coeff = 1.0
adversary.magnitude_exponent = -0.375
adversary.slope = -1
sweep.eps = 0.01,0.02,0.04,0.08
sweep.reps = 20
sweep.n = 4000
sweep.seed = 20240817
sweep.estimators = ols,rgd
rgd.iterations = 40
rgd.method = trimmed
)");
    ResultTable table = run_sweep(cfg);
    SlopeFit fit = fit_slope(table, "rgd");

    double rgd_at_08 = 0.0, ols_at_08 = 0.0;
    for (const SummaryRow& s : table.summaries()) {
        if (std::abs(s.eps - 0.08) > 1e-12) continue;
        if (s.estimator == "rgd") rgd_at_08 = s.median_param_error;
        if (s.estimator == "ols") ols_at_08 = s.median_param_error;
    }
    bool pass = fit.slope >= 0.55 && fit.slope <= 0.95 && rgd_at_08 <= ols_at_08 / 3.0;
    report(6, "rgd rate sweep: slope band and 3x improvement over ols", pass,
           "slope=" + fmt(fit.slope) + " r2=" + fmt(fit.r2) + " rgd@0.08=" + fmt(rgd_at_08) +
               " ols@0.08=" + fmt(ols_at_08));
}

// --------------------------------------------------------------------------
// 7-9. SoS feasibility, rounding quality, dominance, axioms
// --------------------------------------------------------------------------

struct SosSeedResult {
    bool clean_feasible = false;
    bool residuals_ok = false;
    double sos_err = 0.0, ols_err = 0.0, subset_err = 0.0;
    bool dominance_applicable = false;
    bool dominance_ok = true;
    bool axioms_ok = false;
};

SosSeedResult run_sos_seed(int seed) {
    const int n = 12;
    const double eps = 1.0 / 6;
    const double tol = 1e-5;
    Vec theta(2);
    theta << 1.0, 1.0;
    CovariateSpec cov;
    cov.coords.push_back(make_gaussian(0.0, 1.0));
    cov.coords.push_back(make_gaussian(0.0, 1.0));
    Dataset clean =
        sample_instance(make_instance(cov, make_uniform_noise(0.5), theta), n, 7000 + seed);
    ContaminationResult res = contaminate(clean, leverage_plant(eps, 8.0, -1.0, 8000 + seed));

    SosSeedResult out;
    SosSolution sol = sos_regress_full(res.corrupted, eps);

    // clean Boolean assignment: w = 1 off the corrupted rows, theta fit there
    std::vector<double> w(n, 1.0);
    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        if (res.mask[i])
            w[i] = 0.0;
        else
            keep.push_back(i);
    }
    Mat kx(static_cast<int>(keep.size()), 2);
    Vec ky(static_cast<int>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        kx.row(static_cast<int>(i)) = res.corrupted.X.row(keep[i]);
        ky(static_cast<int>(i)) = res.corrupted.y(keep[i]);
    }
    Vec theta_clean = (kx.transpose() * kx).ldlt().solve(kx.transpose() * ky);
    out.clean_feasible =
        assignment_slacks(sol.system, res.corrupted, w, theta_clean).feasible(1e-9);

    out.residuals_ok = sol.pd.status == SolveStatus::Converged &&
                       sol.pd.stats.primal_residual <= tol && sol.pd.stats.psd_residual <= tol;

    out.sos_err = (sol.report.theta_hat - theta).norm();
    out.ols_err = (ols(res.corrupted).theta_hat - theta).norm();
    EstimatorReport sub = subset_search(res.corrupted, eps);
    out.subset_err = (sub.theta_hat - theta).norm();

    // criterion 8: relaxation dominance against the subset assignment
    std::vector<double> w_sub(n, 1.0);
    for (int i : sub.deleted) w_sub[i] = 0.0;
    if (assignment_slacks(sol.system, res.corrupted, w_sub, sub.theta_hat).feasible(1e-9)) {
        out.dominance_applicable = true;
        double subset_loss_over_n = sub.objective * (n - 2) / static_cast<double>(n);
        out.dominance_ok = sol.report.objective <= subset_loss_over_n + 10 * tol;
    }

    // criterion 9: axioms on the converged pseudo-distribution
    if (sol.pd.status == SolveStatus::Converged) {
        bool ok = std::abs(pseudo_expectation(sol.pd, Poly{{MonomialBasis::one(), 1.0}}) - 1.0) <=
                  10 * tol;
        for (const PsdBlock& blk : sol.system.blocks) {
            Mat val = Mat::Zero(blk.dim, blk.dim);
            for (int cell = 0; cell < blk.dim * blk.dim; ++cell)
                for (const LinTerm& t : blk.cells[cell])
                    val(cell / blk.dim, cell % blk.dim) += t.c * sol.pd.y(t.idx);
            Eigen::SelfAdjointEigenSolver<Mat> es(val);
            ok &= es.eigenvalues().minCoeff() >= -10 * tol;
        }
        Rng rng(31000 + seed);
        for (int trial = 0; trial < 100 && ok; ++trial) {
            auto rand_poly = [&]() {
                Poly p{{MonomialBasis::one(), rng.gaussian()}};
                p.push_back({sol.system.basis.theta(0), rng.gaussian()});
                p.push_back({sol.system.basis.theta(1), rng.gaussian()});
                p.push_back(
                    {sol.system.basis.w(static_cast<int>(rng.next_u64() % n)), rng.gaussian()});
                return p;
            };
            Poly f = rand_poly(), g = rand_poly();
            double fg = pseudo_expectation(sol.pd, poly_mul(f, g, n));
            double ff = pseudo_expectation(sol.pd, poly_mul(f, f, n));
            double gg = pseudo_expectation(sol.pd, poly_mul(g, g, n));
            ok &= fg * fg <= ff * gg + 10 * tol;
        }
        out.axioms_ok = ok;
    }
    return out;
}

void criteria_7_8_9() {
    const int seeds = 10;
    std::vector<SosSeedResult> results(seeds);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= seeds) return;
            results[i] = run_sos_seed(i);
        }
    };
    std::thread other(worker);
    worker();
    other.join();

    bool feas = true, resid = true, axioms = true, dominance = true;
    int dominance_checked = 0;
    std::vector<double> sos_errs, ols_errs, sub_errs;
    for (const SosSeedResult& r : results) {
        feas &= r.clean_feasible;
        resid &= r.residuals_ok;
        axioms &= r.axioms_ok;
        if (r.dominance_applicable) {
            ++dominance_checked;
            dominance &= r.dominance_ok;
        }
        sos_errs.push_back(r.sos_err);
        ols_errs.push_back(r.ols_err);
        sub_errs.push_back(r.subset_err);
    }
    double med_sos = median_of(sos_errs), med_ols = median_of(ols_errs),
           med_sub = median_of(sub_errs);
    bool quality = med_sos <= 0.5 * med_ols && med_sos <= 2.0 * med_sub;

    report(7, "sos soundness, residuals and rounding quality", feas && resid && quality,
           "clean_feasible=" + std::string(feas ? "10/10" : "miss") +
               " residuals_ok=" + (resid ? "10/10" : "miss") + " med_sos=" + fmt(med_sos) +
               " med_ols=" + fmt(med_ols) + " med_subset=" + fmt(med_sub));
    report(8, "relaxation dominance over feasible subsets", dominance && dominance_checked > 0,
           "checked=" + std::to_string(dominance_checked) + "/10");
    report(9, "pseudo-distribution axioms on converged solves", axioms,
           "normalization, block eigenvalues, 100 Cauchy-Schwarz pairs per seed");
}

// --------------------------------------------------------------------------
// 10. Löwner sampling lemma
// --------------------------------------------------------------------------

void criterion_10() {
    int d = 3, n = 2000;
    double delta = 0.1, c4 = 3.0;
    double bound = c4 * d * d / (std::sqrt(static_cast<double>(n)) * std::sqrt(delta));
    CovariateSpec cov;
    cov.coords.push_back(make_gaussian(0.0, 1.0));
    cov.coords.push_back(make_gaussian(0.0, 2.0));
    cov.coords.push_back(make_gaussian(0.0, 0.5));
    RegressionInstance inst = make_instance(cov, make_zero_noise(), Vec::Ones(d));
    Mat sigma = inst.second_moment();
    int hits = 0;
    for (int t = 0; t < 200; ++t)
        if (lowner_whitened_deviation(sigma, sample_instance(inst, n, 40000 + t).X) <= bound)
            ++hits;
    report(10, "Löwner sampling bound across 200 trials", hits >= 170,
           "hits=" + std::to_string(hits) + "/200 bound=" + fmt(bound));
}

// --------------------------------------------------------------------------
// 11. Brute-force subset oracle
// --------------------------------------------------------------------------

void criterion_11() {
    int n = 16;
    Vec theta(2);
    theta << 1.0, 1.0;
    CovariateSpec cov;
    cov.coords.push_back(make_gaussian(0.0, 1.0));
    cov.coords.push_back(make_gaussian(0.0, 1.0));
    RegressionInstance inst = make_instance(cov, make_uniform_noise(0.3), theta);

    int good = 0;
    for (int seed = 0; seed < 10; ++seed) {
        Dataset ds = sample_instance(inst, n, 60000 + seed);
        ContaminationResult res =
            contaminate(ds, leverage_plant(2.0 / n + 1e-9, 10.0, -1.0, 61000 + seed));
        EstimatorReport rep = subset_search(res.corrupted, 2.0 / n + 1e-9);
        std::vector<int> planted;
        for (int i = 0; i < n; ++i)
            if (res.mask[i]) planted.push_back(i);
        double sub_err = (rep.theta_hat - theta).norm();
        double ols_err = (ols(res.corrupted).theta_hat - theta).norm();
        if (rep.deleted == planted && sub_err * 5.0 <= ols_err) ++good;
    }
    report(11, "subset search excludes plants and beats ols 5x", good >= 9,
           "good_seeds=" + std::to_string(good) + "/10");
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criteria_7_8_9();
    criterion_10();
    criterion_11();
    if (g_failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
