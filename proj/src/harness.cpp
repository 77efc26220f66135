#include "robreg/harness.hpp"

#include "robreg/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace robreg {

// ---------------------------------------------------------------------------
// Config validation
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (eps_grid.empty()) throw std::invalid_argument("eps grid must be nonempty");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (eps_grid[i] < 0.0 || eps_grid[i] >= 0.5)
            throw std::invalid_argument("eps grid values must lie in [0, 1/2)");
        if (i > 0 && eps_grid[i] <= eps_grid[i - 1])
            throw std::invalid_argument("eps grid must be strictly increasing");
    }
    if (replications < 1) throw std::invalid_argument("replications must be >= 1");
    if (n < 2) throw std::invalid_argument("n must be >= 2");
    if (estimators.empty()) throw std::invalid_argument("at least one estimator required");
    for (const auto& e : estimators)
        if (e.name != "ols" && e.name != "rgd" && e.name != "subset" && e.name != "sos")
            throw std::invalid_argument("unknown estimator: " + e.name);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

namespace {

int thread_cap() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ROBREG_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<int>(std::min<long>(v, hw));
    }
    return static_cast<int>(hw);
}

std::string join_flags(const std::vector<std::string>& flags) {
    std::string out;
    for (const auto& f : flags) {
        if (!out.empty()) out.push_back(';');
        out += f;
    }
    return out;
}

EstimatorReport dispatch(const EstimatorSetup& setup, const Dataset& ds, double eps) {
    if (setup.name == "ols") return ols(ds);
    if (setup.name == "rgd") {
        RobustGdConfig cfg = setup.rgd;
        cfg.eps = eps;
        return robust_gd(ds, cfg);
    }
    if (setup.name == "subset") return subset_search(ds, eps, setup.subset);
    if (setup.name == "sos") return sos_regress(ds, eps, setup.sos);
    throw std::invalid_argument("unknown estimator: " + setup.name);
}

}  // namespace

ResultTable run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    struct Cell {
        int eps_idx, rep;
    };
    std::vector<Cell> cells;
    for (int e = 0; e < static_cast<int>(cfg.eps_grid.size()); ++e)
        for (int r = 0; r < cfg.replications; ++r) cells.push_back({e, r});

    ResultTable table;
    table.rows.resize(cells.size() * cfg.estimators.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t ci = next.fetch_add(1);
            if (ci >= cells.size()) return;
            const Cell cell = cells[ci];
            double eps = cfg.eps_grid[cell.eps_idx];
            std::uint64_t row_seed = Rng::derive(cfg.seed, cell.eps_idx + 1, cell.rep + 1);

            Dataset data = sample_instance(cfg.instance, cfg.n, row_seed);
            if (eps > 0.0) {
                AdversarySpec adv = cfg.adversary;
                adv.epsilon = eps;
                adv.seed = Rng::derive(row_seed, 17);
                if (cfg.magnitude_coeff > 0.0)
                    adv.magnitude = cfg.magnitude_coeff * std::pow(eps, cfg.magnitude_exponent);
                data = contaminate(data, adv).corrupted;
            }

            for (std::size_t ei = 0; ei < cfg.estimators.size(); ++ei) {
                ResultRow& row = table.rows[ci * cfg.estimators.size() + ei];
                row.eps = eps;
                row.estimator = cfg.estimators[ei].name;
                row.rep = cell.rep;
                row.seed = row_seed;
                try {
                    EstimatorReport rep = dispatch(cfg.estimators[ei], data, eps);
                    row.param_error = param_error(rep.theta_hat, *data.meta->theta_star,
                                                  *data.meta->sigma);
                    row.excess_error = row.param_error * row.param_error;
                    // Timing is deliberately not recorded per row: sweep
                    // outputs must be byte-identical across reruns. Use the
                    // estimate subcommand for wallclock measurements.
                    row.wallclock_ms = 0.0;
                    row.flags = join_flags(rep.flags);
                } catch (const std::exception& ex) {
                    row.failed = true;
                    row.flags = std::string("error:") + ex.what();
                }
            }
        }
    };

    int workers = std::min<int>(thread_cap(), static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return table;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

namespace {

double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    double idx = p * (sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = idx - lo;
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

std::vector<SummaryRow> ResultTable::summaries() const {
    std::map<std::pair<double, std::string>, std::vector<const ResultRow*>> groups;
    for (const ResultRow& r : rows) groups[{r.eps, r.estimator}].push_back(&r);
    std::vector<SummaryRow> out;
    for (auto& [key, members] : groups) {
        SummaryRow s;
        s.eps = key.first;
        s.estimator = key.second;
        std::vector<double> pe, ee;
        for (const ResultRow* r : members) {
            if (r->failed) continue;
            pe.push_back(r->param_error);
            ee.push_back(r->excess_error);
        }
        s.rows = static_cast<int>(pe.size());
        if (!pe.empty()) {
            std::sort(pe.begin(), pe.end());
            std::sort(ee.begin(), ee.end());
            s.median_param_error = percentile_sorted(pe, 0.5);
            s.iqr_param_error = percentile_sorted(pe, 0.75) - percentile_sorted(pe, 0.25);
            s.median_excess_error = percentile_sorted(ee, 0.5);
        }
        out.push_back(s);
    }
    return out;
}

std::string ResultTable::to_csv() const {
    std::ostringstream out;
    out << "eps,estimator,rep,seed,param_error,excess_error,wallclock_ms,flags\n";
    for (const ResultRow& r : rows) {
        out << format_double(r.eps) << "," << r.estimator << "," << r.rep << "," << r.seed << ","
            << format_double(r.param_error) << "," << format_double(r.excess_error) << ","
            << format_double(r.wallclock_ms) << "," << r.flags << "\n";
    }
    return out.str();
}

std::string ResultTable::summary_csv() const {
    std::ostringstream out;
    // medians (not means): per-run errors are heavy-tailed under contamination
    out << "eps,estimator,median_param_error,iqr_param_error,median_excess_error,rows\n";
    for (const SummaryRow& s : summaries()) {
        out << format_double(s.eps) << "," << s.estimator << ","
            << format_double(s.median_param_error) << "," << format_double(s.iqr_param_error)
            << "," << format_double(s.median_excess_error) << "," << s.rows << "\n";
    }
    return out.str();
}

ResultTable ResultTable::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty results csv", 1);
    ResultTable t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> tok;
        std::string cur;
        for (char c : line) {
            if (c == ',' && tok.size() < 7) {
                tok.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        tok.push_back(cur);
        if (tok.size() != 8) throw ParseError("expected 8 fields", line_no);
        ResultRow r;
        r.eps = std::stod(tok[0]);
        r.estimator = tok[1];
        r.rep = std::stoi(tok[2]);
        r.seed = std::stoull(tok[3]);
        r.param_error = std::stod(tok[4]);
        r.excess_error = std::stod(tok[5]);
        r.wallclock_ms = std::stod(tok[6]);
        r.flags = tok[7];
        r.failed = r.flags.rfind("error:", 0) == 0;
        t.rows.push_back(std::move(r));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Slope fit
// ---------------------------------------------------------------------------

SlopeFit fit_slope(const ResultTable& table, const std::string& estimator) {
    std::vector<double> xs, ys;
    for (const SummaryRow& s : table.summaries()) {
        if (s.estimator != estimator) continue;
        if (s.eps <= 0.0 || s.median_param_error <= 0.0 || s.rows == 0) continue;
        xs.push_back(std::log(s.eps));
        ys.push_back(std::log(s.median_param_error));
    }
    if (xs.size() < 3)
        throw Error("fit_slope: need >= 3 grid points with positive medians, have " +
                    std::to_string(xs.size()));
    double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    SlopeFit fit;
    fit.points = static_cast<int>(xs.size());
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0.0, ss_tot = 0.0, mean_y = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stod(trim(tok)));
    return out;
}

std::vector<std::string> parse_names(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(trim(tok));
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = line;
        std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'section.key = value'", line_no);
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }

    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_num = [&](const std::string& key, double dflt) {
        auto v = take(key);
        return v ? std::stod(*v) : dflt;
    };

    ExperimentConfig cfg;

    // Instance.
    std::string kind = take("instance.kind").value_or("gaussian");
    int d = static_cast<int>(take_num("instance.d", 1));
    CovariateSpec cov;
    if (kind == "gaussian") {
        double var = take_num("instance.variance", 1.0);
        for (int j = 0; j < d; ++j) cov.coords.push_back(make_gaussian(0.0, var));
    } else if (kind == "uniform") {
        double range = take_num("instance.range", 1.0);
        for (int j = 0; j < d; ++j) cov.coords.push_back(make_uniform(-range, range));
    } else if (kind == "spike_band") {
        double m = take_num("instance.spike_magnitude", 2.0);
        double pp = take_num("instance.spike_prob", 0.1);
        double eta = take_num("instance.band_halfwidth", 1.0);
        for (int j = 0; j < d; ++j) cov.coords.push_back(make_spike_band(m, pp, eta));
    } else if (kind == "student_t") {
        double nu = take_num("instance.nu", 5.0);
        double scale = take_num("instance.scale", 1.0);
        for (int j = 0; j < d; ++j) cov.coords.push_back(make_student_t(nu, scale));
    } else {
        throw std::invalid_argument("unknown instance.kind: " + kind);
    }

    Vec theta = Vec::Ones(d);
    if (auto t = take("instance.theta")) {
        auto vals = parse_list(*t);
        if (static_cast<int>(vals.size()) != d)
            throw std::invalid_argument("instance.theta length != d");
        theta = Eigen::Map<Vec>(vals.data(), d);
    }
    std::string noise = take("instance.noise").value_or("uniform");
    NoiseSpec ns;
    if (noise == "uniform")
        ns = make_uniform_noise(take_num("instance.noise_sigma", 1.0));
    else if (noise == "gaussian")
        ns = make_gaussian_noise(take_num("instance.noise_sigma", 1.0));
    else if (noise == "none")
        ns = make_zero_noise();
    else
        throw std::invalid_argument("unknown instance.noise: " + noise);
    cfg.instance = make_instance(std::move(cov), ns, theta);

    // Adversary.
    std::string strat = take("adversary.strategy").value_or("leverage_plant");
    if (strat == "leverage_plant")
        cfg.adversary = leverage_plant(0.0, take_num("adversary.magnitude", 1.0),
                                       take_num("adversary.slope", -1.0));
    else if (strat == "label_flip")
        cfg.adversary = label_flip(0.0, take_num("adversary.scale", 1.0));
    else if (strat == "oblivious") {
        Vec x0 = Vec::Zero(d);
        if (auto v = take("adversary.x0")) {
            auto vals = parse_list(*v);
            if (static_cast<int>(vals.size()) != d)
                throw std::invalid_argument("adversary.x0 length != d");
            x0 = Eigen::Map<Vec>(vals.data(), d);
        }
        cfg.adversary = oblivious_replace(0.0, x0, take_num("adversary.y0", 0.0));
    } else
        throw std::invalid_argument("unknown adversary.strategy: " + strat);
    cfg.magnitude_coeff = take_num("adversary.magnitude_coeff", 0.0);
    cfg.magnitude_exponent = take_num("adversary.magnitude_exponent", 0.0);

    // Sweep.
    if (auto g = take("sweep.eps")) cfg.eps_grid = parse_list(*g);
    cfg.replications = static_cast<int>(take_num("sweep.reps", 1));
    cfg.n = static_cast<int>(take_num("sweep.n", 100));
    cfg.seed = static_cast<std::uint64_t>(take_num("sweep.seed", 0));
    cfg.output_dir = take("output.dir").value_or("");

    // Estimators.
    EstimatorSetup base;
    base.rgd.iterations = static_cast<int>(take_num("rgd.iterations", 50));
    base.rgd.tau_l = take_num("rgd.tau_l", 0.0);
    base.rgd.tau_u = take_num("rgd.tau_u", 0.0);
    base.rgd.eta = take_num("rgd.eta", 0.0);
    std::string method = take("rgd.method").value_or("filter");
    base.rgd.method = method == "trimmed" ? RobustMeanMethod::CoordinateTrimmedMean
                                          : RobustMeanMethod::Filter;
    base.subset.lambda = take_num("subset.lambda", 10.0);
    base.subset.c_ncm = take_num("subset.c_ncm", 10.0);
    base.subset.budget = static_cast<long long>(take_num("subset.budget", 1e6));
    base.sos.assemble.degree = static_cast<int>(take_num("sos.degree", 2));
    base.sos.assemble.probes = static_cast<int>(take_num("sos.probes", 0));
    base.sos.assemble.lambda = take_num("sos.lambda", 0.0);
    base.sos.solve.tol = take_num("sos.tol", 1e-5);
    base.sos.solve.max_iter = static_cast<int>(take_num("sos.max_iter", 50000));
    if (take("sos.mode").value_or("ncm") == "noncm") base.sos.mode = SosMode::NoNCM;

    for (const std::string& name : parse_names(take("sweep.estimators").value_or("ols"))) {
        EstimatorSetup setup = base;
        setup.name = name;
        cfg.estimators.push_back(std::move(setup));
    }

    if (!kv.empty()) throw std::invalid_argument("unknown config key: " + kv.begin()->first);
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace robreg
