#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "robreg/harness.hpp"

#include <cmath>
#include <cstdlib>

using namespace robreg;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg = parse_config(R"(
# tiny sweep
instance.kind = gaussian
instance.d = 2
instance.theta = 1,1
instance.noise = uniform
instance.noise_sigma = 0.5
adversary.strategy = leverage_plant
adversary.magnitude_coeff = 1.0
adversary.magnitude_exponent = -0.375
adversary.slope = -1
sweep.eps = 0.02,0.05,0.1
sweep.reps = 4
sweep.n = 200
sweep.seed = 42
sweep.estimators = ols,rgd
rgd.iterations = 15
rgd.method = trimmed
)");
    return cfg;
}

}  // namespace

TEST_CASE("config parsing: values, arrays, comments, unknown keys") {
    ExperimentConfig cfg = tiny_config();
    CHECK(cfg.n == 200);
    CHECK(cfg.replications == 4);
    CHECK(cfg.eps_grid == std::vector<double>{0.02, 0.05, 0.1});
    CHECK(cfg.estimators.size() == 2);
    CHECK(cfg.estimators[1].name == "rgd");
    CHECK(cfg.estimators[1].rgd.iterations == 15);
    CHECK(cfg.magnitude_exponent == -0.375);

    CHECK_THROWS_AS(parse_config("bogus.key = 1\nsweep.eps = 0.1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("not a key value line\n"), ParseError);
    CHECK_THROWS_AS(parse_config("sweep.eps = 0.2,0.1\n"), std::invalid_argument);  // not increasing
}

TEST_CASE("run_sweep: noiseless line with eps grid {0} gives zero error") {
    ExperimentConfig cfg = parse_config(R"(
instance.kind = uniform
instance.d = 1
instance.theta = 2
instance.noise = none
sweep.eps = 0
sweep.reps = 3
sweep.n = 50
sweep.seed = 1
sweep.estimators = ols
)");
    ResultTable t = run_sweep(cfg);
    CHECK(t.rows.size() == 3);
    for (const ResultRow& r : t.rows) {
        CHECK_FALSE(r.failed);
        CHECK(r.param_error <= 1e-12);
    }
}

TEST_CASE("run_sweep: deterministic, row count, and thread-count independence") {
    ExperimentConfig cfg = tiny_config();
    ResultTable a = run_sweep(cfg);
    ResultTable b = run_sweep(cfg);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.rows.size() == 3 * 2 * 4);  // grid x estimators x reps

    setenv("ROBREG_THREADS", "1", 1);
    ResultTable c = run_sweep(cfg);
    unsetenv("ROBREG_THREADS");
    CHECK(a.to_csv() == c.to_csv());
}

TEST_CASE("run_sweep: medians nondecreasing in eps for ols under leverage") {
    ExperimentConfig cfg = tiny_config();
    ResultTable t = run_sweep(cfg);
    double prev = -1.0;
    for (const SummaryRow& s : t.summaries()) {
        if (s.estimator != "ols") continue;
        CHECK(s.median_param_error >= prev);
        prev = s.median_param_error;
    }
}

TEST_CASE("summary medians re-aggregate bit-exactly from the raw csv") {
    ExperimentConfig cfg = tiny_config();
    ResultTable t = run_sweep(cfg);
    ResultTable back = ResultTable::from_csv(t.to_csv());
    REQUIRE(back.rows.size() == t.rows.size());
    auto s1 = t.summaries();
    auto s2 = back.summaries();
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1[i].median_param_error == s2[i].median_param_error);
        CHECK(s1[i].iqr_param_error == s2[i].iqr_param_error);
        CHECK(s1[i].median_excess_error == s2[i].median_excess_error);
    }
    CHECK(t.summary_csv() == back.summary_csv());
}

TEST_CASE("run_sweep: per-row estimator failures are flagged, not fatal") {
    ExperimentConfig cfg = parse_config(R"(
instance.kind = gaussian
instance.d = 2
sweep.eps = 0.25
sweep.reps = 1
sweep.n = 60
sweep.estimators = subset
subset.budget = 10
)");
    ResultTable t = run_sweep(cfg);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].failed);
    CHECK(t.rows[0].flags.rfind("error:", 0) == 0);
    CHECK(t.summaries()[0].rows == 0);
}

TEST_CASE("fit_slope: exact power law is recovered to 1e-12") {
    ResultTable t;
    for (double eps : {0.01, 0.02, 0.04, 0.08, 0.16}) {
        for (int rep = 0; rep < 3; ++rep) {
            ResultRow r;
            r.eps = eps;
            r.estimator = "synthetic";
            r.rep = rep;
            r.param_error = std::pow(eps, 0.75);
            r.excess_error = r.param_error * r.param_error;
            t.rows.push_back(r);
        }
    }
    SlopeFit fit = fit_slope(t, "synthetic");
    CHECK(std::abs(fit.slope - 0.75) < 1e-12);
    CHECK(std::abs(fit.r2 - 1.0) < 1e-12);
    CHECK(fit.points == 5);
}

TEST_CASE("fit_slope: 5% multiplicative noise keeps the slope in [0.70, 0.80]") {
    Rng rng(2718);
    for (int seed = 0; seed < 50; ++seed) {
        ResultTable t;
        for (double eps : {0.01, 0.02, 0.04, 0.08, 0.16}) {
            ResultRow r;
            r.eps = eps;
            r.estimator = "synthetic";
            r.param_error = std::pow(eps, 0.75) * (1.0 + 0.05 * (2.0 * rng.next_double() - 1.0));
            t.rows.push_back(r);
        }
        SlopeFit fit = fit_slope(t, "synthetic");
        CHECK(fit.slope >= 0.70);
        CHECK(fit.slope <= 0.80);
    }
}

TEST_CASE("fit_slope: needs three positive-median grid points") {
    ResultTable t;
    ResultRow r;
    r.eps = 0.1;
    r.estimator = "x";
    r.param_error = 0.5;
    t.rows.push_back(r);
    ResultRow r2 = r;
    r2.eps = 0.2;
    t.rows.push_back(r2);
    CHECK_THROWS_AS(fit_slope(t, "x"), Error);
    CHECK_THROWS_AS(fit_slope(t, "missing"), Error);
}

TEST_CASE("experiment config validation") {
    ExperimentConfig cfg = tiny_config();
    cfg.eps_grid = {0.1, 0.1};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.eps_grid = {0.6};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.estimators[0].name = "wat";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.replications = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
