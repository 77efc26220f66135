#pragma once

#include "robreg/contamination.hpp"
#include "robreg/estimators.hpp"
#include "robreg/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace robreg {

struct EstimatorSetup {
    std::string name;  // ols | rgd | subset | sos
    RobustGdConfig rgd;
    SubsetSearchConfig subset;
    SosConfig sos;
};

struct ExperimentConfig {
    RegressionInstance instance;
    AdversarySpec adversary;      // epsilon/magnitude filled per grid point
    double magnitude_coeff = 0.0; // when > 0: magnitude = coeff * eps^exponent
    double magnitude_exponent = 0.0;
    std::vector<double> eps_grid;
    int replications = 1;
    int n = 100;
    std::uint64_t seed = 0;
    std::vector<EstimatorSetup> estimators;
    std::string output_dir;

    void validate() const;
};

struct ResultRow {
    double eps = 0.0;
    std::string estimator;
    int rep = 0;
    std::uint64_t seed = 0;
    double param_error = 0.0;
    double excess_error = 0.0;
    double wallclock_ms = 0.0;
    std::string flags;  // ';'-separated
    bool failed = false;
};

struct SummaryRow {
    double eps = 0.0;
    std::string estimator;
    double median_param_error = 0.0;
    double iqr_param_error = 0.0;
    double median_excess_error = 0.0;
    int rows = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    /// Medians and interquartile ranges per (eps, estimator); failed rows are
    /// excluded from the aggregates.
    std::vector<SummaryRow> summaries() const;
    std::string to_csv() const;
    std::string summary_csv() const;
    static ResultTable from_csv(const std::string& text);
};

/// Sample, contaminate and run every configured estimator for each
/// (eps, replication) cell; deterministic given cfg.seed, row failures are
/// recorded in flags rather than aborting. Parallel across cells, capped by
/// ROBREG_THREADS.
ResultTable run_sweep(const ExperimentConfig& cfg);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int points = 0;
};

/// Least-squares fit of log(median param_error) against log(eps) for one
/// estimator; grid points with non-positive medians are excluded and at
/// least 3 must remain.
SlopeFit fit_slope(const ResultTable& table, const std::string& estimator);

/// Flat `section.key = value` config file; arrays are comma lists, '#' starts
/// a comment. Unknown keys are an error.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace robreg
