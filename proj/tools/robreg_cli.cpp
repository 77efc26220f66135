// Command-line harness: dataset generation, contamination, estimation,
// epsilon sweeps with slope fits, and lower-bound pair reports.

#include "robreg/diagnostics.hpp"
#include "robreg/harness.hpp"
#include "robreg/lb_instances.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace robreg;
using nlohmann::json;

RegressionInstance instance_from_flags(const std::string& pair_kind, int which, double eps,
                                       double sigma, int k, const std::string& kind, int d,
                                       const std::vector<double>& theta, const std::string& noise,
                                       double noise_sigma) {
    if (!pair_kind.empty()) {
        InstancePair p;
        if (pair_kind == "true_linear")
            p = true_linear_pair(eps, sigma, k);
        else if (pair_kind == "dependent")
            p = dependent_pair(eps);
        else if (pair_kind == "bounded_cov")
            p = bounded_cov_pair(eps);
        else if (pair_kind == "mean_shift")
            p = mean_shift_pair(eps);
        else
            throw CLI::ValidationError("--pair must be one of true_linear|dependent|bounded_cov|mean_shift");
        return which == 2 ? p.d2 : p.d1;
    }
    CovariateSpec cov;
    for (int j = 0; j < d; ++j) {
        if (kind == "gaussian")
            cov.coords.push_back(make_gaussian(0.0, 1.0));
        else if (kind == "uniform")
            cov.coords.push_back(make_uniform(-1.0, 1.0));
        else
            throw CLI::ValidationError("--kind must be gaussian|uniform (or use --pair)");
    }
    Vec th = Vec::Ones(d);
    if (!theta.empty()) {
        if (static_cast<int>(theta.size()) != d) throw CLI::ValidationError("--theta length != d");
        th = Eigen::Map<const Vec>(theta.data(), d);
    }
    NoiseSpec ns;
    if (noise == "uniform")
        ns = make_uniform_noise(noise_sigma);
    else if (noise == "gaussian")
        ns = make_gaussian_noise(noise_sigma);
    else if (noise == "none")
        ns = make_zero_noise();
    else
        throw CLI::ValidationError("--noise must be uniform|gaussian|none");
    return make_instance(std::move(cov), ns, th);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << text;
    if (text.empty() || text.back() != '\n') out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robreg: outlier-robust linear regression workbench"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "sample a dataset from an instance");
    std::string g_pair, g_kind = "gaussian", g_noise = "uniform", g_out = "data.csv";
    int g_which = 1, g_k = 4, g_d = 2, g_n = 100;
    double g_eps = 0.05, g_sigma = 1.0, g_noise_sigma = 1.0;
    std::uint64_t g_seed = 0;
    std::vector<double> g_theta;
    gen->add_option("--pair", g_pair, "lower-bound pair kind");
    gen->add_option("--which", g_which, "1 or 2: which instance of the pair")->check(CLI::Range(1, 2));
    gen->add_option("--eps", g_eps, "pair parameter (eps or delta)");
    gen->add_option("--sigma", g_sigma, "noise half-width (true_linear)");
    gen->add_option("--k", g_k, "moment order (true_linear)");
    gen->add_option("--kind", g_kind, "covariate kind: gaussian|uniform");
    gen->add_option("--d", g_d, "dimension");
    gen->add_option("--theta", g_theta, "hyperplane (comma list)")->delimiter(',');
    gen->add_option("--noise", g_noise, "noise kind: uniform|gaussian|none");
    gen->add_option("--noise-sigma", g_noise_sigma, "noise scale");
    gen->add_option("-n,--samples", g_n, "sample count")->required();
    gen->add_option("--seed", g_seed, "rng seed");
    gen->add_option("--out", g_out, "output csv path");

    // --- contaminate ---
    auto* con = app.add_subcommand("contaminate", "apply an adversary to a dataset file");
    std::string c_in, c_out, c_strategy = "leverage_plant";
    double c_eps = 0.1, c_magnitude = 1.0, c_slope = -1.0, c_scale = 1.0, c_y0 = 0.0;
    std::vector<double> c_x0;
    std::uint64_t c_seed = 0;
    con->add_option("--in", c_in)->required();
    con->add_option("--out", c_out)->required();
    con->add_option("--eps", c_eps)->required();
    con->add_option("--strategy", c_strategy, "leverage_plant|label_flip|oblivious");
    con->add_option("--magnitude", c_magnitude);
    con->add_option("--slope", c_slope);
    con->add_option("--scale", c_scale);
    con->add_option("--x0", c_x0)->delimiter(',');
    con->add_option("--y0", c_y0);
    con->add_option("--seed", c_seed);

    // --- estimate ---
    auto* est = app.add_subcommand("estimate", "run one estimator on a dataset file");
    std::string e_in, e_method = "ols", e_json;
    double e_eps = 0.0, e_lambda = 0.0, e_tol = 1e-5;
    int e_iters = 50, e_degree = 2, e_max_iter = 50000;
    std::string e_mode = "ncm";
    est->add_option("--in", e_in)->required();
    est->add_option("--method", e_method, "ols|rgd|subset|sos")->required();
    est->add_option("--eps", e_eps, "contamination budget the estimator assumes");
    est->add_option("--iters", e_iters, "rgd iterations");
    est->add_option("--lambda", e_lambda, "hypercontractivity budget (subset/sos)");
    est->add_option("--degree", e_degree, "sos relaxation degree D");
    est->add_option("--mode", e_mode, "sos constraint mode: ncm|noncm");
    est->add_option("--tol", e_tol, "sos solver tolerance");
    est->add_option("--max-iter", e_max_iter, "sos solver iteration cap");
    est->add_option("--json", e_json, "write the report here instead of stdout");
    bool e_dump_sdp = false;
    std::string e_dump_path = "sdp_dump.json";
    est->add_flag("--dump-sdp", e_dump_sdp, "dump the assembled system diagnostics");
    est->add_option("--dump-sdp-path", e_dump_path);

    // --- sweep ---
    auto* swp = app.add_subcommand("sweep", "run an epsilon sweep from a config file");
    std::string s_config;
    swp->add_option("--config", s_config)->required();

    // --- lb ---
    auto* lb = app.add_subcommand("lb", "lower-bound pair report");
    std::string l_kind;
    double l_eps = 0.05, l_sigma = 1.0;
    int l_k = 4, l_mc = 100000;
    std::uint64_t l_seed = 0;
    std::string l_out;
    lb->add_option("--kind", l_kind, "true_linear|dependent|bounded_cov|mean_shift")->required();
    lb->add_option("--eps", l_eps, "eps (or delta for mean_shift)");
    lb->add_option("--sigma", l_sigma, "noise half-width (true_linear)");
    lb->add_option("--k", l_k, "moment order (true_linear)");
    lb->add_option("--mc-samples", l_mc, "Monte-Carlo cross-check sample count");
    lb->add_option("--seed", l_seed);
    lb->add_option("--out", l_out, "output path (default stdout)");

    // --- slopes ---
    auto* slp = app.add_subcommand("slopes", "fit log-log slopes from a results csv");
    std::string p_in, p_estimator;
    slp->add_option("--in", p_in)->required();
    slp->add_option("--estimator", p_estimator, "restrict to one estimator");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            RegressionInstance inst = instance_from_flags(g_pair, g_which, g_eps, g_sigma, g_k,
                                                          g_kind, g_d, g_theta, g_noise,
                                                          g_noise_sigma);
            write_dataset(sample_instance(inst, g_n, g_seed), g_out);
        } else if (con->parsed()) {
            Dataset ds = read_dataset(c_in);
            AdversarySpec adv;
            if (c_strategy == "leverage_plant")
                adv = leverage_plant(c_eps, c_magnitude, c_slope, c_seed);
            else if (c_strategy == "label_flip")
                adv = label_flip(c_eps, c_scale, c_seed);
            else if (c_strategy == "oblivious") {
                Vec x0 = Vec::Zero(ds.d());
                if (!c_x0.empty()) x0 = Eigen::Map<Vec>(c_x0.data(), static_cast<int>(c_x0.size()));
                adv = oblivious_replace(c_eps, x0, c_y0, c_seed);
            } else
                throw Error("unknown strategy: " + c_strategy);
            write_dataset(contaminate(ds, adv).corrupted, c_out);
        } else if (est->parsed()) {
            Dataset ds = read_dataset(e_in);
            EstimatorReport rep;
            if (e_method == "ols")
                rep = ols(ds);
            else if (e_method == "rgd") {
                RobustGdConfig cfg;
                cfg.eps = e_eps;
                cfg.iterations = e_iters;
                rep = robust_gd(ds, cfg);
            } else if (e_method == "subset") {
                SubsetSearchConfig cfg;
                if (e_lambda > 0.0) cfg.lambda = e_lambda;
                rep = subset_search(ds, e_eps, cfg);
            } else if (e_method == "sos") {
                SosConfig cfg;
                cfg.assemble.degree = e_degree;
                cfg.assemble.lambda = e_lambda;
                cfg.solve.tol = e_tol;
                cfg.solve.max_iter = e_max_iter;
                if (e_mode == "noncm") cfg.mode = SosMode::NoNCM;
                SosSolution sol = sos_regress_full(ds, e_eps, cfg);
                if (e_dump_sdp) write_text(e_dump_path, sol.system.dump_json(&sol.pd.y));
                rep = sol.report;
            } else
                throw Error("unknown method: " + e_method);
            write_text(e_json, rep.to_json());
        } else if (swp->parsed()) {
            ExperimentConfig cfg = parse_config_file(s_config);
            ResultTable table = run_sweep(cfg);
            std::string dir = cfg.output_dir.empty() ? "." : cfg.output_dir;
            std::filesystem::create_directories(dir);
            write_text(dir + "/results.csv", table.to_csv());
            write_text(dir + "/summary.csv", table.summary_csv());
            std::cout << "wrote " << dir << "/results.csv and " << dir << "/summary.csv\n";
        } else if (lb->parsed()) {
            InstancePair p;
            if (l_kind == "true_linear")
                p = true_linear_pair(l_eps, l_sigma, l_k);
            else if (l_kind == "dependent")
                p = dependent_pair(l_eps);
            else if (l_kind == "bounded_cov")
                p = bounded_cov_pair(l_eps);
            else if (l_kind == "mean_shift")
                p = mean_shift_pair(l_eps);
            else
                throw Error("unknown pair kind: " + l_kind);
            PairReport rep = pair_report(p, l_mc, l_seed);
            json out = json::parse(rep.to_json());
            out["identifiability"] = {
                {"ncm", json::parse(identifiability_check(p, l_k, IdentifiabilityMode::NCM).to_json())},
                {"arbitrary",
                 json::parse(identifiability_check(p, l_k, IdentifiabilityMode::Arbitrary).to_json())}};
            write_text(l_out, out.dump(2));
        } else if (slp->parsed()) {
            std::ifstream in(p_in);
            if (!in) throw Error("cannot open: " + p_in);
            std::ostringstream ss;
            ss << in.rdbuf();
            ResultTable table = ResultTable::from_csv(ss.str());
            std::vector<std::string> names;
            if (!p_estimator.empty())
                names.push_back(p_estimator);
            else {
                for (const auto& r : table.rows)
                    if (std::find(names.begin(), names.end(), r.estimator) == names.end())
                        names.push_back(r.estimator);
            }
            json out;
            for (const auto& name : names) {
                SlopeFit fit = fit_slope(table, name);
                out[name] = {{"slope", fit.slope},
                             {"intercept", fit.intercept},
                             {"r2", fit.r2},
                             {"points", fit.points}};
            }
            std::cout << out.dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
