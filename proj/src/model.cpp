#include "robreg/model.hpp"

#include "robreg/quadrature.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace robreg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Marginal constructors
// ---------------------------------------------------------------------------

Marginal1D make_uniform(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("UniformInterval requires a < b");
    return Marginal1D{UniformInterval{a, b}};
}

Marginal1D make_spike_band(double m, double p, double eta) {
    if (!(m > eta) || eta < 0.0) throw std::invalid_argument("SpikeBand requires m > eta >= 0");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("SpikeBand requires 0 <= p <= 1");
    return Marginal1D{SpikeBand{m, p, eta}};
}

Marginal1D make_gaussian(double mean, double variance) {
    if (!(variance >= 0.0)) throw std::invalid_argument("Gaussian requires variance >= 0");
    return Marginal1D{Gaussian{mean, variance}};
}

Marginal1D make_student_t(double nu, double scale) {
    if (!(nu > 1.0)) throw std::invalid_argument("StudentT requires nu > 1");
    if (!(scale > 0.0)) throw std::invalid_argument("StudentT requires scale > 0");
    return Marginal1D{StudentT{nu, scale}};
}

Marginal1D make_discrete(std::vector<double> values, std::vector<double> probabilities) {
    if (values.empty() || values.size() != probabilities.size())
        throw std::invalid_argument("DiscreteAtoms requires matching nonempty values/probabilities");
    double total = 0.0;
    for (double p : probabilities) {
        if (p < 0.0) throw std::invalid_argument("DiscreteAtoms probabilities must be >= 0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteAtoms probabilities must sum to 1");
    return Marginal1D{DiscreteAtoms{std::move(values), std::move(probabilities)}};
}

Marginal1D make_zero_inflated(Marginal1D inner, double zero_prob) {
    if (zero_prob < 0.0 || zero_prob > 1.0)
        throw std::invalid_argument("ZeroInflated requires 0 <= zero_prob <= 1");
    return Marginal1D{ZeroInflated{std::make_shared<Marginal1D>(std::move(inner)), zero_prob}};
}

bool operator==(const Marginal1D& a, const Marginal1D& b) {
    if (a.v.index() != b.v.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const T& y = std::get<T>(b.v);
            if constexpr (std::is_same_v<T, UniformInterval>)
                return x.a == y.a && x.b == y.b;
            else if constexpr (std::is_same_v<T, SpikeBand>)
                return x.spike_magnitude == y.spike_magnitude && x.spike_prob == y.spike_prob &&
                       x.band_halfwidth == y.band_halfwidth;
            else if constexpr (std::is_same_v<T, Gaussian>)
                return x.mean == y.mean && x.variance == y.variance;
            else if constexpr (std::is_same_v<T, StudentT>)
                return x.nu == y.nu && x.scale == y.scale;
            else if constexpr (std::is_same_v<T, DiscreteAtoms>)
                return x.values == y.values && x.probabilities == y.probabilities;
            else
                return x.zero_prob == y.zero_prob && *x.inner == *y.inner;
        },
        a.v);
}

bool CovariateSpec::operator==(const CovariateSpec& o) const {
    if (coords.size() != o.coords.size()) return false;
    for (std::size_t i = 0; i < coords.size(); ++i)
        if (!(coords[i] == o.coords[i])) return false;
    return true;
}

MarginalComponents components_of(const Marginal1D& m) {
    MarginalComponents c;
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, UniformInterval>) {
                c.bands.push_back({x.a, x.b, 1.0});
            } else if constexpr (std::is_same_v<T, SpikeBand>) {
                c.atoms.push_back({x.spike_magnitude, 0.5 * x.spike_prob});
                c.atoms.push_back({-x.spike_magnitude, 0.5 * x.spike_prob});
                if (x.band_halfwidth > 0.0)
                    c.bands.push_back({-x.band_halfwidth, x.band_halfwidth, 1.0 - x.spike_prob});
                else
                    c.atoms.push_back({0.0, 1.0 - x.spike_prob});
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                if (x.variance == 0.0)
                    c.atoms.push_back({x.mean, 1.0});
                else
                    throw Error("Gaussian marginal has no atom/band decomposition");
            } else if constexpr (std::is_same_v<T, StudentT>) {
                c.densities.push_back({x.nu, x.scale, 1.0});
            } else if constexpr (std::is_same_v<T, DiscreteAtoms>) {
                for (std::size_t i = 0; i < x.values.size(); ++i)
                    c.atoms.push_back({x.values[i], x.probabilities[i]});
            } else {  // ZeroInflated
                MarginalComponents inner = components_of(*x.inner);
                double keep = 1.0 - x.zero_prob;
                c.atoms.push_back({0.0, x.zero_prob});
                for (auto a : inner.atoms) c.atoms.push_back({a.x, keep * a.p});
                for (auto b : inner.bands) c.bands.push_back({b.a, b.b, keep * b.mass});
                for (auto d : inner.densities) c.densities.push_back({d.nu, d.scale, keep * d.mass});
            }
        },
        m.v);
    return c;
}

// ---------------------------------------------------------------------------
// Population moments
// ---------------------------------------------------------------------------

namespace {

double double_factorial_odd(int r) {  // (r-1)!! for even r
    double acc = 1.0;
    for (int k = r - 1; k > 1; k -= 2) acc *= k;
    return acc;
}

double binom(int n, int k) {
    double acc = 1.0;
    for (int i = 1; i <= k; ++i) acc = acc * (n - k + i) / i;
    return acc;
}

double uniform_moment(double a, double b, int r) {
    // (b^{r+1} - a^{r+1}) / ((r+1)(b-a))
    return (std::pow(b, r + 1) - std::pow(a, r + 1)) / ((r + 1) * (b - a));
}

double student_t_moment(const StudentT& t, int r) {
    if (r == 0) return 1.0;
    if (static_cast<double>(r) >= t.nu)
        throw InfiniteMomentError("Student's t with nu = " + std::to_string(t.nu) +
                                  " has no finite moment of order " + std::to_string(r));
    if (r % 2 == 1) return 0.0;
    // E[T^r] = nu^{r/2} Gamma((r+1)/2) Gamma((nu-r)/2) / (sqrt(pi) Gamma(nu/2))
    double lg = 0.5 * r * std::log(t.nu) + std::lgamma(0.5 * (r + 1)) +
                std::lgamma(0.5 * (t.nu - r)) - 0.5 * std::log(M_PI) - std::lgamma(0.5 * t.nu);
    return std::pow(t.scale, r) * std::exp(lg);
}

}  // namespace

double population_moment_1d(const Marginal1D& m, int order) {
    if (order < 0) throw std::invalid_argument("moment order must be >= 0");
    return std::visit(
        [&](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, UniformInterval>) {
                return order == 0 ? 1.0 : uniform_moment(x.a, x.b, order);
            } else if constexpr (std::is_same_v<T, SpikeBand>) {
                if (order == 0) return 1.0;
                double atoms = (order % 2 == 0) ? x.spike_prob * std::pow(x.spike_magnitude, order)
                                                : 0.0;
                double band = 0.0;
                if (x.band_halfwidth > 0.0 && order % 2 == 0)
                    band = (1.0 - x.spike_prob) * std::pow(x.band_halfwidth, order) / (order + 1);
                return atoms + band;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                double acc = 0.0;
                double sd = std::sqrt(x.variance);
                for (int j = 0; j <= order; j += 2)
                    acc += binom(order, j) * std::pow(x.mean, order - j) * std::pow(sd, j) *
                           double_factorial_odd(j);
                return acc;
            } else if constexpr (std::is_same_v<T, StudentT>) {
                return student_t_moment(x, order);
            } else if constexpr (std::is_same_v<T, DiscreteAtoms>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < x.values.size(); ++i)
                    acc += x.probabilities[i] * std::pow(x.values[i], order);
                return acc;
            } else {  // ZeroInflated
                if (order == 0) return 1.0;
                return (1.0 - x.zero_prob) * population_moment_1d(*x.inner, order);
            }
        },
        m.v);
}

Moments population_moments(const CovariateSpec& spec, int max_order) {
    Moments mo;
    mo.max_order = max_order;
    mo.raw = Mat::Zero(spec.d(), max_order + 1);
    for (int j = 0; j < spec.d(); ++j)
        for (int r = 0; r <= max_order; ++r) mo.raw(j, r) = population_moment_1d(spec.coords[j], r);
    return mo;
}

double Moments::central(int coord, int order) const {
    double mu = raw(coord, 1);
    double acc = 0.0;
    for (int j = 0; j <= order; ++j)
        acc += binom(order, j) * raw(coord, j) * std::pow(-mu, order - j);
    return acc;
}

// ---------------------------------------------------------------------------
// Noise and label rules
// ---------------------------------------------------------------------------

NoiseSpec make_uniform_noise(double sigma_halfwidth) {
    if (!(sigma_halfwidth > 0.0)) throw std::invalid_argument("uniform noise requires sigma > 0");
    NoiseSpec n;
    n.kind = NoiseSpec::Kind::IndependentUniform;
    n.sigma = sigma_halfwidth;
    return n;
}

NoiseSpec make_gaussian_noise(double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("gaussian noise requires variance > 0");
    NoiseSpec n;
    n.kind = NoiseSpec::Kind::IndependentGaussian;
    n.sigma = variance;
    return n;
}

NoiseSpec make_zero_noise() { return NoiseSpec{}; }

NoiseSpec make_dependent_noise(const std::string& rule_id, double rule_param) {
    if (rule_id != "zero_at_spike")
        throw std::invalid_argument("unknown dependent noise rule: " + rule_id);
    if (!(rule_param > 0.0)) throw std::invalid_argument("zero_at_spike requires a positive spike");
    NoiseSpec n;
    n.kind = NoiseSpec::Kind::DependentRule;
    n.rule_id = rule_id;
    n.rule_param = rule_param;
    return n;
}

double NoiseSpec::error_variance() const {
    switch (kind) {
        case Kind::IndependentUniform: return sigma * sigma / 3.0;
        case Kind::IndependentGaussian: return sigma;
        case Kind::Zero: return 0.0;
        case Kind::DependentRule: throw Error("dependent rule has no standalone noise variance");
    }
    return 0.0;
}

bool NoiseSpec::operator==(const NoiseSpec& o) const {
    return kind == o.kind && sigma == o.sigma && rule_id == o.rule_id && rule_param == o.rule_param;
}

static bool at_spike(double x, double m) {
    return std::abs(std::abs(x) - m) <= 1e-12 * std::max(1.0, m);
}

double apply_label_rule(const NoiseSpec& noise, const Vec& x) {
    if (noise.kind != NoiseSpec::Kind::DependentRule)
        throw Error("apply_label_rule called for independent noise");
    // zero_at_spike: y = x_last off the spike, 0 on it.
    double last = x(x.size() - 1);
    if (at_spike(last, noise.rule_param)) return 0.0;
    return last;
}

// ---------------------------------------------------------------------------
// RegressionInstance
// ---------------------------------------------------------------------------

RegressionInstance make_instance(CovariateSpec cov, NoiseSpec noise, Vec theta_star) {
    if (cov.d() != theta_star.size())
        throw std::invalid_argument("covariate dimension does not match theta_star");
    if (cov.d() < 1) throw std::invalid_argument("dimension must be >= 1");
    RegressionInstance inst;
    inst.covariates = std::move(cov);
    inst.noise = std::move(noise);
    inst.theta_star = std::move(theta_star);
    return inst;
}

Vec RegressionInstance::mean() const {
    Vec mu(covariates.d());
    for (int j = 0; j < covariates.d(); ++j) mu(j) = population_moment_1d(covariates.coords[j], 1);
    if (transform_A) {
        Vec out = (*transform_A) * mu;
        if (transform_b) out += *transform_b;
        return out;
    }
    return mu;
}

Mat RegressionInstance::second_moment() const {
    int dd = covariates.d();
    Vec mu(dd), m2(dd);
    for (int j = 0; j < dd; ++j) {
        mu(j) = population_moment_1d(covariates.coords[j], 1);
        m2(j) = population_moment_1d(covariates.coords[j], 2);
    }
    Mat raw = mu * mu.transpose();
    for (int j = 0; j < dd; ++j) raw(j, j) = m2(j);
    if (!transform_A) return raw;
    Mat s = (*transform_A) * raw * transform_A->transpose();
    if (transform_b) {
        Vec am = (*transform_A) * mu;
        s += am * transform_b->transpose() + (*transform_b) * am.transpose() +
             (*transform_b) * transform_b->transpose();
    }
    return s;
}

/// E[g(x)] over a 1-d marginal via its atom/band/density decomposition.
double expect_marginal(const Marginal1D& m, const std::function<double(double)>& g) {
    MarginalComponents c = components_of(m);
    double acc = 0.0;
    for (auto a : c.atoms) acc += a.p * g(a.x);
    for (auto b : c.bands)
        if (b.mass > 0.0)
            acc += b.mass * integrate([&](double t) { return g(t); }, b.a, b.b) / (b.b - b.a);
    for (auto dd : c.densities) {
        // Student's t density, integrated out to a tail cutoff chosen so the
        // remainder is below the quadrature floor for the moments we use.
        double nu = dd.nu, s = dd.scale;
        auto pdf = [&](double t) {
            double z = t / s;
            double lg = std::lgamma(0.5 * (nu + 1)) - std::lgamma(0.5 * nu) -
                        0.5 * std::log(nu * M_PI);
            return std::exp(lg - 0.5 * (nu + 1) * std::log1p(z * z / nu)) / s;
        };
        double cutoff = s * std::max(50.0, 50.0 * std::sqrt(nu));
        acc += dd.mass * integrate([&](double t) { return g(t) * pdf(t); }, -cutoff, cutoff);
    }
    return acc;
}

Vec RegressionInstance::xy_moment() const {
    int dd = d();
    if (noise.independent()) {
        // E[x y] = E[x x^T] theta* for zero-mean independent noise.
        return second_moment() * theta_star;
    }
    if (transform_A) throw Error("dependent label rules require untransformed covariates");
    // zero_at_spike: y = x_last off the spike. Coordinates are independent, so
    // E[x_j y] = E[x_j] E[y] for j < d-1 and E[x_last y] = E[x_last^2 1{off}].
    double m = noise.rule_param;
    const Marginal1D& lastm = covariates.coords[dd - 1];
    double ey = expect_marginal(lastm, [&](double t) { return at_spike(t, m) ? 0.0 : t; });
    double exly = expect_marginal(lastm, [&](double t) { return at_spike(t, m) ? 0.0 : t * t; });
    Vec out(dd);
    for (int j = 0; j + 1 < dd; ++j)
        out(j) = population_moment_1d(covariates.coords[j], 1) * ey;
    out(dd - 1) = exly;
    return out;
}

double RegressionInstance::y_second_moment() const {
    if (noise.independent()) {
        double base = theta_star.dot(second_moment() * theta_star);
        return base + noise.error_variance();
    }
    double m = noise.rule_param;
    return expect_marginal(covariates.coords[d() - 1],
                     [&](double t) { return at_spike(t, m) ? 0.0 : t * t; });
}

double RegressionInstance::err_at(const Vec& theta) const {
    return y_second_moment() - 2.0 * theta.dot(xy_moment()) + theta.dot(second_moment() * theta);
}

double RegressionInstance::err_star() const { return err_at(theta_star); }

double RegressionInstance::gradient_condition_residual() const {
    return (second_moment() * theta_star - xy_moment()).lpNorm<Eigen::Infinity>();
}

bool RegressionInstance::operator==(const RegressionInstance& o) const {
    bool ta = transform_A.has_value() == o.transform_A.has_value() &&
              (!transform_A || *transform_A == *o.transform_A);
    bool tb = transform_b.has_value() == o.transform_b.has_value() &&
              (!transform_b || *transform_b == *o.transform_b);
    return covariates == o.covariates && noise == o.noise && theta_star == o.theta_star && ta && tb;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace {

double sample_marginal(const Marginal1D& m, Rng& rng) {
    return std::visit(
        [&](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, UniformInterval>) {
                return rng.uniform(x.a, x.b);
            } else if constexpr (std::is_same_v<T, SpikeBand>) {
                double u = rng.next_double();
                if (u < 0.5 * x.spike_prob) return x.spike_magnitude;
                if (u < x.spike_prob) return -x.spike_magnitude;
                return x.band_halfwidth > 0.0 ? rng.uniform(-x.band_halfwidth, x.band_halfwidth)
                                              : 0.0;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return x.mean + std::sqrt(x.variance) * rng.gaussian();
            } else if constexpr (std::is_same_v<T, StudentT>) {
                return x.scale * rng.student_t(x.nu);
            } else if constexpr (std::is_same_v<T, DiscreteAtoms>) {
                double u = rng.next_double();
                double acc = 0.0;
                for (std::size_t i = 0; i < x.values.size(); ++i) {
                    acc += x.probabilities[i];
                    if (u < acc) return x.values[i];
                }
                return x.values.back();
            } else {  // ZeroInflated
                double u = rng.next_double();
                if (u < x.zero_prob) return 0.0;
                return sample_marginal(*x.inner, rng);
            }
        },
        m.v);
}

double sample_noise(const NoiseSpec& n, Rng& rng) {
    switch (n.kind) {
        case NoiseSpec::Kind::IndependentUniform: return rng.uniform(-n.sigma, n.sigma);
        case NoiseSpec::Kind::IndependentGaussian: return std::sqrt(n.sigma) * rng.gaussian();
        case NoiseSpec::Kind::Zero: return 0.0;
        case NoiseSpec::Kind::DependentRule: return 0.0;  // handled by the label rule
    }
    return 0.0;
}

}  // namespace

Dataset sample_instance(const RegressionInstance& inst, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_instance requires n >= 1");
    int dd = inst.d();
    Rng rng(seed);
    Dataset ds;
    ds.X = Mat(n, dd);
    ds.y = Vec(n);
    Vec xraw(dd);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dd; ++j) xraw(j) = sample_marginal(inst.covariates.coords[j], rng);
        Vec x = xraw;
        if (inst.transform_A) {
            x = (*inst.transform_A) * xraw;
            if (inst.transform_b) x += *inst.transform_b;
        }
        ds.X.row(i) = x.transpose();
        if (inst.noise.kind == NoiseSpec::Kind::DependentRule)
            ds.y(i) = apply_label_rule(inst.noise, x);
        else
            ds.y(i) = inst.theta_star.dot(x) + sample_noise(inst.noise, rng);
    }
    DatasetMeta meta;
    meta.theta_star = inst.theta_star;
    meta.sigma = inst.second_moment();
    meta.seed = seed;
    ds.meta = meta;
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset equality and I/O
// ---------------------------------------------------------------------------

bool DatasetMeta::operator==(const DatasetMeta& o) const {
    auto opt_eq = [](const auto& a, const auto& b) {
        if (a.has_value() != b.has_value()) return false;
        if (!a) return true;
        if constexpr (std::is_same_v<std::decay_t<decltype(*a)>, Vec> ||
                      std::is_same_v<std::decay_t<decltype(*a)>, Mat>)
            return a->size() == b->size() && *a == *b;
        else
            return *a == *b;
    };
    return opt_eq(theta_star, o.theta_star) && opt_eq(sigma, o.sigma) && opt_eq(seed, o.seed) &&
           opt_eq(corruption_mask, o.corruption_mask) && generator == o.generator;
}

bool Dataset::operator==(const Dataset& o) const {
    if (X.rows() != o.X.rows() || X.cols() != o.X.cols()) return false;
    if (X != o.X || y != o.y) return false;
    if (meta.has_value() != o.meta.has_value()) return false;
    return !meta || *meta == *o.meta;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (int j = 0; j < ds.d(); ++j) out << "x" << (j + 1) << ",";
    out << "y\n";
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.d(); ++j) out << format_double(ds.X(i, j)) << ",";
        out << format_double(ds.y(i)) << "\n";
    }
    out.close();
    if (!out) throw Error("write failed: " + path);

    if (ds.meta) {
        json j;
        const DatasetMeta& m = *ds.meta;
        if (m.theta_star) j["theta_star"] = std::vector<double>(m.theta_star->begin(), m.theta_star->end());
        if (m.sigma) {
            std::vector<std::vector<double>> rows;
            for (int r = 0; r < m.sigma->rows(); ++r) {
                std::vector<double> row(m.sigma->cols());
                for (int cidx = 0; cidx < m.sigma->cols(); ++cidx) row[cidx] = (*m.sigma)(r, cidx);
                rows.push_back(std::move(row));
            }
            j["sigma"] = rows;
        }
        if (m.seed) j["seed"] = *m.seed;
        if (m.corruption_mask) j["corruption_mask"] = *m.corruption_mask;
        j["generator"] = m.generator;
        std::ofstream mout(path + ".meta.json");
        if (!mout) throw Error("cannot open for writing: " + path + ".meta.json");
        mout << j.dump(2) << "\n";
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field(const std::string& tok, std::size_t line_no) {
    const char* s = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    while (end && *end == ' ') ++end;
    if (end == s || (end && *end != '\0'))
        throw ParseError("non-numeric token '" + tok + "'", line_no);
    return v;
}

}  // namespace

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    auto header = split_csv(line);
    if (header.size() < 2 || header.back() != "y")
        throw ParseError("expected header x1,...,xd,y", 1);
    int dd = static_cast<int>(header.size()) - 1;

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto toks = split_csv(line);
        if (static_cast<int>(toks.size()) != dd + 1)
            throw ParseError("row has " + std::to_string(toks.size()) + " fields, expected " +
                                 std::to_string(dd + 1),
                             line_no);
        std::vector<double> row(dd + 1);
        for (int j = 0; j <= dd; ++j) row[j] = parse_field(toks[j], line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no data rows", line_no);

    Dataset ds;
    ds.X = Mat(static_cast<int>(rows.size()), dd);
    ds.y = Vec(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < dd; ++j) ds.X(static_cast<int>(i), j) = rows[i][j];
        ds.y(static_cast<int>(i)) = rows[i][dd];
    }

    std::string meta_path = path + ".meta.json";
    if (std::filesystem::exists(meta_path)) {
        std::ifstream min(meta_path);
        json j = json::parse(min);
        DatasetMeta m;
        if (j.contains("theta_star")) {
            auto v = j["theta_star"].get<std::vector<double>>();
            m.theta_star = Eigen::Map<Vec>(v.data(), static_cast<int>(v.size()));
        }
        if (j.contains("sigma")) {
            auto rows_j = j["sigma"].get<std::vector<std::vector<double>>>();
            Mat s(static_cast<int>(rows_j.size()), static_cast<int>(rows_j.at(0).size()));
            for (int r = 0; r < s.rows(); ++r)
                for (int cidx = 0; cidx < s.cols(); ++cidx) s(r, cidx) = rows_j[r][cidx];
            m.sigma = s;
        }
        if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("corruption_mask"))
            m.corruption_mask = j["corruption_mask"].get<std::vector<std::uint8_t>>();
        if (j.contains("generator")) m.generator = j["generator"].get<std::string>();
        ds.meta = m;
    }
    return ds;
}

}  // namespace robreg
