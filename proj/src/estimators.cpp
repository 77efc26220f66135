#include "robreg/estimators.hpp"

#include "robreg/diagnostics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace robreg {

using nlohmann::json;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

}  // namespace

bool EstimatorReport::has_flag(const std::string& f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
}

// ---------------------------------------------------------------------------
// OLS
// ---------------------------------------------------------------------------

EstimatorReport ols(const Dataset& ds) {
    Stopwatch sw;
    int n = ds.n(), d = ds.d();
    if (n < d) throw std::invalid_argument("ols requires n >= d");

    Mat m = ds.X.transpose() * ds.X / n;
    Vec b = ds.X.transpose() * ds.y / n;

    EstimatorReport rep;
    rep.method = "ols";

    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    double smax = svd.singularValues()(0);
    double smin = svd.singularValues()(d - 1);
    rep.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (smin <= 0.0 || rep.condition_number > 1e12) {
        rep.flags.push_back("rank_deficient");
        svd.setThreshold(1e-12);
        rep.theta_hat = svd.solve(b);  // least-norm solution
    } else {
        rep.theta_hat = m.ldlt().solve(b);
    }
    rep.objective = (ds.y - ds.X * rep.theta_hat).squaredNorm() / n;
    rep.wallclock_ms = sw.ms();
    return rep;
}

// ---------------------------------------------------------------------------
// Robust mean
// ---------------------------------------------------------------------------

namespace {

Vec index_order_mean(const Mat& pts, const std::vector<int>& rows) {
    Vec acc = Vec::Zero(pts.cols());
    for (int i : rows) acc += pts.row(i).transpose();
    return acc / static_cast<double>(rows.size());
}

/// Variance of one coordinate after dropping the ceil(eps n) smallest and
/// largest values; the robust scale behind the filter stop threshold.
double trimmed_variance(Vec col, double eps) {
    int n = static_cast<int>(col.size());
    int t = static_cast<int>(std::ceil(eps * n));
    std::sort(col.begin(), col.end());
    int lo = t, hi = n - t;
    if (hi - lo < 2) {
        lo = 0;
        hi = n;
    }
    double mean = 0.0;
    for (int i = lo; i < hi; ++i) mean += col(i);
    mean /= (hi - lo);
    double var = 0.0;
    for (int i = lo; i < hi; ++i) var += (col(i) - mean) * (col(i) - mean);
    return var / (hi - lo);
}

}  // namespace

Vec robust_mean(const Mat& points, double eps, RobustMeanMethod method, double stop_multiplier) {
    int n = static_cast<int>(points.rows());
    int d = static_cast<int>(points.cols());
    if (n < 2) throw std::invalid_argument("robust_mean requires at least 2 points");
    if (eps < 0.0 || eps >= 0.5) throw std::invalid_argument("robust_mean requires 0 <= eps < 1/2");

    std::vector<int> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    if (method == RobustMeanMethod::CoordinateTrimmedMean) {
        int t = static_cast<int>(std::ceil(eps * n));
        if (t == 0) return index_order_mean(points, all_rows);
        Vec out(d);
        for (int j = 0; j < d; ++j) {
            Vec col = points.col(j);
            std::sort(col.begin(), col.end());
            int lo = t, hi = n - t;
            if (hi - lo < 1) {
                lo = 0;
                hi = n;
            }
            double acc = 0.0;
            for (int i = lo; i < hi; ++i) acc += col(i);
            out(j) = acc / (hi - lo);
        }
        return out;
    }

    std::vector<int> retained = all_rows;
    int cap = std::min(static_cast<int>(std::ceil(2.0 * eps * n)), n - 1);
    if (cap == 0) return index_order_mean(points, retained);

    std::vector<double> coord_vars(d);
    for (int j = 0; j < d; ++j) coord_vars[j] = trimmed_variance(points.col(j), eps);
    double theta_stop = stop_multiplier * median_of(coord_vars);

    for (int removed = 0; removed < cap; ++removed) {
        Vec mu = index_order_mean(points, retained);
        Mat cov = Mat::Zero(d, d);
        for (int i : retained) {
            Vec c = points.row(i).transpose() - mu;
            cov.noalias() += c * c.transpose();
        }
        cov /= static_cast<double>(retained.size());
        Eigen::SelfAdjointEigenSolver<Mat> es(cov);
        double lam = es.eigenvalues()(d - 1);
        if (lam <= theta_stop) break;
        Vec u = es.eigenvectors().col(d - 1);
        int worst = retained.front();
        double worst_score = -1.0;
        for (int i : retained) {
            double s = points.row(i).transpose().dot(u) - mu.dot(u);
            if (s * s > worst_score) {
                worst_score = s * s;
                worst = i;
            }
        }
        retained.erase(std::find(retained.begin(), retained.end(), worst));
    }
    if (retained.empty()) throw Error("robust_mean filter removed all points");
    return index_order_mean(points, retained);
}

// ---------------------------------------------------------------------------
// Robust gradient descent
// ---------------------------------------------------------------------------

EstimatorReport robust_gd(const Dataset& ds, const RobustGdConfig& cfg) {
    Stopwatch sw;
    int n = ds.n(), d = ds.d();
    if (n < d + 2) throw std::invalid_argument("robust_gd requires n >= d + 2");
    if (cfg.iterations < 1) throw std::invalid_argument("robust_gd requires T >= 1");
    if (cfg.eps < 0.0 || cfg.eps >= 0.5) throw std::invalid_argument("robust_gd requires 0 <= eps < 1/2");

    double tau_l = cfg.tau_l, tau_u = cfg.tau_u;
    if (tau_l <= 0.0 || tau_u <= 0.0) {
        // The recursion assumes known covariance bounds; fall back to trimmed
        // per-coordinate second moments of x.
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        int t = static_cast<int>(std::ceil(cfg.eps * n));
        for (int j = 0; j < d; ++j) {
            Vec col = ds.X.col(j);
            std::sort(col.begin(), col.end());
            int a = t, b = n - t;
            if (b - a < 2) {
                a = 0;
                b = n;
            }
            double m2 = 0.0;
            for (int i = a; i < b; ++i) m2 += col(i) * col(i);
            m2 /= (b - a);
            lo = std::min(lo, m2);
            hi = std::max(hi, m2);
        }
        tau_l = std::max(lo, 1e-12);
        tau_u = std::max(hi, tau_l);
    }
    if (!(tau_l <= tau_u)) throw std::invalid_argument("robust_gd requires tau_l <= tau_u");
    double eta = cfg.eta > 0.0 ? cfg.eta : 2.0 / (tau_l + tau_u);

    double x_scale = std::max(ds.X.cwiseAbs().maxCoeff(), 1e-12);
    double diverge_bound = 1e6 * (1.0 + ds.y.cwiseAbs().maxCoeff() / x_scale);

    const Vec* truth = ds.meta && ds.meta->theta_star ? &*ds.meta->theta_star : nullptr;

    EstimatorReport rep;
    rep.method = "rgd";
    Vec theta = Vec::Zero(d);
    rep.iterates.push_back(theta);
    if (truth) rep.trace.push_back((theta - *truth).norm());

    Mat grads(n, d);
    for (int t = 0; t < cfg.iterations; ++t) {
        Vec resid = ds.X * theta - ds.y;
        grads = ds.X.array().colwise() * resid.array();
        Vec ghat = robust_mean(grads, cfg.eps, cfg.method, cfg.stop_multiplier);
        theta -= eta * ghat;
        rep.iterates.push_back(theta);
        if (truth) rep.trace.push_back((theta - *truth).norm());
        rep.iterations = t + 1;
        if (theta.norm() > diverge_bound) {
            rep.flags.push_back("diverged");
            break;
        }
    }
    rep.theta_hat = theta;
    rep.objective = (ds.y - ds.X * theta).squaredNorm() / n;
    rep.wallclock_ms = sw.ms();
    return rep;
}

// ---------------------------------------------------------------------------
// Brute-force subset search
// ---------------------------------------------------------------------------

namespace {

double choose(int n, int k) {
    double acc = 1.0;
    for (int i = 1; i <= k; ++i) acc = acc * (n - k + i) / i;
    return acc;
}

Dataset take_rows(const Dataset& ds, const std::vector<int>& rows) {
    Dataset out;
    out.X = Mat(static_cast<int>(rows.size()), ds.d());
    out.y = Vec(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<int>(i)) = ds.X.row(rows[i]);
        out.y(static_cast<int>(i)) = ds.y(rows[i]);
    }
    return out;
}

}  // namespace

EstimatorReport subset_search(const Dataset& ds, double eps, const SubsetSearchConfig& cfg) {
    Stopwatch sw;
    int n = ds.n();
    int del = static_cast<int>(std::floor(eps * n));
    double combos = choose(n, del);
    if (combos > static_cast<double>(cfg.budget))
        throw ComplexityBudgetError("subset_search: C(" + std::to_string(n) + "," +
                                    std::to_string(del) + ") = " +
                                    std::to_string(static_cast<long long>(combos)) +
                                    " exceeds the enumeration budget");

    EstimatorReport rep;
    rep.method = "subset";

    std::vector<int> deleted(del);
    std::iota(deleted.begin(), deleted.end(), 0);

    bool have_feasible = false;
    double best_feasible_loss = std::numeric_limits<double>::infinity();
    double best_any_loss = std::numeric_limits<double>::infinity();
    Vec best_feasible_theta, best_any_theta;
    std::vector<int> best_feasible_del, best_any_del;

    auto evaluate = [&](const std::vector<int>& del_set) {
        ++rep.subsets_examined;
        std::vector<int> keep;
        keep.reserve(n - del);
        std::size_t p = 0;
        for (int i = 0; i < n; ++i) {
            if (p < del_set.size() && del_set[p] == i) {
                ++p;
                continue;
            }
            keep.push_back(i);
        }
        Dataset sub = take_rows(ds, keep);
        EstimatorReport fit = ols(sub);
        double loss = (sub.y - sub.X * fit.theta_hat).squaredNorm() / sub.n();

        bool feasible = !fit.has_flag("rank_deficient");
        if (feasible) {
            try {
                feasible = hc_coefficient(sub, cfg.k, cfg.probes, cfg.seed).lower <= cfg.lambda;
            } catch (const Error&) {
                feasible = false;  // degenerate subset covariance
            }
        }
        if (feasible) {
            feasible = ncm_ratio(sub, fit.theta_hat, 1, cfg.probes, cfg.seed).value <= cfg.c_ncm &&
                       ncm_ratio(sub, fit.theta_hat, 2, cfg.probes, cfg.seed).value <= cfg.c_ncm;
        }
        if (loss < best_any_loss) {
            best_any_loss = loss;
            best_any_theta = fit.theta_hat;
            best_any_del = del_set;
        }
        if (feasible && loss < best_feasible_loss) {
            have_feasible = true;
            best_feasible_loss = loss;
            best_feasible_theta = fit.theta_hat;
            best_feasible_del = del_set;
        }
    };

    if (del == 0) {
        evaluate({});
    } else {
        // lexicographic combination enumeration; ties in loss keep the first
        // (lexicographically smallest) deletion set
        while (true) {
            evaluate(deleted);
            int i = del - 1;
            while (i >= 0 && deleted[i] == n - del + i) --i;
            if (i < 0) break;
            ++deleted[i];
            for (int j = i + 1; j < del; ++j) deleted[j] = deleted[j - 1] + 1;
        }
    }

    if (have_feasible) {
        rep.theta_hat = best_feasible_theta;
        rep.objective = best_feasible_loss;
        rep.deleted = best_feasible_del;
    } else {
        rep.theta_hat = best_any_theta;
        rep.objective = best_any_loss;
        rep.deleted = best_any_del;
        rep.flags.push_back("no_feasible_subset");
    }
    rep.wallclock_ms = sw.ms();
    return rep;
}

// ---------------------------------------------------------------------------
// SoS relaxation estimator
// ---------------------------------------------------------------------------

SosSolution sos_regress_full(const Dataset& ds, double eps, const SosConfig& cfg) {
    Stopwatch sw;
    SosSolution sol;
    sol.system = assemble_system(ds, eps, cfg.mode, cfg.assemble);
    sol.pd = solve_sdp(sol.system, cfg.solve);

    EstimatorReport& rep = sol.report;
    rep.method = "sos";
    rep.solver = sol.pd.stats;
    rep.iterations = sol.pd.stats.iterations;

    int d = ds.d();
    rep.theta_hat = Vec::Zero(d);
    if (sol.pd.status != SolveStatus::Infeasible) {
        for (int j = 0; j < d; ++j) {
            double scaled = pseudo_expectation(sol.pd, Poly{{sol.system.basis.theta(j), 1.0}});
            rep.theta_hat(j) = scaled * sol.system.y_scale / sol.system.col_scale(j);
        }
        rep.objective = sol.pd.stats.objective * sol.system.y_scale * sol.system.y_scale;
    }
    if (sol.pd.status == SolveStatus::Stalled) rep.flags.push_back("solver_stalled");
    if (sol.pd.status == SolveStatus::Infeasible) rep.flags.push_back("infeasible");
    rep.wallclock_ms = sw.ms();
    return sol;
}

EstimatorReport sos_regress(const Dataset& ds, double eps, const SosConfig& cfg) {
    return sos_regress_full(ds, eps, cfg).report;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string EstimatorReport::to_json() const {
    json j;
    j["method"] = method;
    j["theta_hat"] = std::vector<double>(theta_hat.begin(), theta_hat.end());
    j["iterations"] = iterations;
    j["subsets_examined"] = subsets_examined;
    j["wallclock_ms"] = wallclock_ms;
    if (std::isfinite(objective)) j["objective"] = objective;
    if (condition_number > 0.0 && std::isfinite(condition_number))
        j["condition_number"] = condition_number;
    j["flags"] = flags;
    if (!trace.empty()) j["trace"] = trace;
    if (!deleted.empty()) j["deleted"] = deleted;
    if (method == "sos") {
        j["solver"] = {{"iterations", solver.iterations},
                       {"primal_residual", solver.primal_residual},
                       {"psd_residual", solver.psd_residual},
                       {"objective_scaled", solver.objective},
                       {"rho", solver.rho}};
    }
    return j.dump(2);
}

}  // namespace robreg
