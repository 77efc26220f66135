#pragma once

#include "robreg/common.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace robreg {

// ---------------------------------------------------------------------------
// Per-coordinate marginals
// ---------------------------------------------------------------------------

struct UniformInterval {
    double a, b;
};

/// Two symmetric atoms at +-spike_magnitude plus a uniform band on
/// [-band_halfwidth, band_halfwidth]; the shape behind the hard instances.
struct SpikeBand {
    double spike_magnitude;  // m > band_halfwidth
    double spike_prob;       // total atom mass, split evenly on +-m
    double band_halfwidth;   // eta >= 0; eta == 0 is a point mass at 0
};

struct Gaussian {
    double mean, variance;
};

struct StudentT {
    double nu;     // degrees of freedom, > 1
    double scale;  // multiplies the standard variate
};

struct DiscreteAtoms {
    std::vector<double> values;
    std::vector<double> probabilities;
};

struct Marginal1D;

/// With probability zero_prob the coordinate is exactly 0, else drawn from
/// the inner marginal.
struct ZeroInflated {
    std::shared_ptr<const Marginal1D> inner;
    double zero_prob;
};

struct Marginal1D {
    std::variant<UniformInterval, SpikeBand, Gaussian, StudentT, DiscreteAtoms, ZeroInflated> v;
};

bool operator==(const Marginal1D& a, const Marginal1D& b);

/// Product distribution over independent coordinates.
struct CovariateSpec {
    std::vector<Marginal1D> coords;

    int d() const { return static_cast<int>(coords.size()); }
    bool operator==(const CovariateSpec& o) const;
};

// Checked constructors; invalid parameters throw std::invalid_argument.
Marginal1D make_uniform(double a, double b);
Marginal1D make_spike_band(double m, double p, double eta);
Marginal1D make_gaussian(double mean, double variance);
Marginal1D make_student_t(double nu, double scale = 1.0);
Marginal1D make_discrete(std::vector<double> values, std::vector<double> probabilities);
Marginal1D make_zero_inflated(Marginal1D inner, double zero_prob);

/// Atom/band/density decomposition of a marginal, used by the moment
/// integrator, the TV formulas and the samplers.
struct MarginalComponents {
    struct Atom {
        double x, p;
    };
    struct Band {  // uniform on [a, b] carrying total mass `mass`
        double a, b, mass;
    };
    std::vector<Atom> atoms;
    std::vector<Band> bands;
    // Non-null only for Student's t parts: mass-weighted density.
    struct Density {
        double nu, scale, mass;
    };
    std::vector<Density> densities;
};

MarginalComponents components_of(const Marginal1D& m);

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

struct NoiseSpec {
    enum class Kind { IndependentUniform, IndependentGaussian, Zero, DependentRule };
    Kind kind = Kind::Zero;
    /// Half-width for IndependentUniform (noise is U[-sigma, sigma], so its
    /// variance is sigma^2/3); variance for IndependentGaussian.
    double sigma = 0.0;
    /// Registered conditional label rule (see label_rules.cpp) plus its
    /// parameter, for the constructions where y is a function of x.
    std::string rule_id;
    double rule_param = 0.0;

    bool independent() const { return kind != Kind::DependentRule; }
    /// err_D(theta*) contributed by the noise; never sigma^2 for the uniform
    /// kind (U[-sigma, sigma] has variance sigma^2/3).
    double error_variance() const;
    bool operator==(const NoiseSpec& o) const;
};

NoiseSpec make_uniform_noise(double sigma_halfwidth);
NoiseSpec make_gaussian_noise(double variance);
NoiseSpec make_zero_noise();
/// rule must resolve in the registry; currently "zero_at_spike" (y equals the
/// last coordinate except on the spike, where y = 0).
NoiseSpec make_dependent_noise(const std::string& rule_id, double rule_param);

/// Evaluates a registered dependent rule. The rules are self-contained
/// functions of x: zero_at_spike yields y = x_last off the spike and 0 on it.
double apply_label_rule(const NoiseSpec& noise, const Vec& x);

// ---------------------------------------------------------------------------
// Regression instance and dataset
// ---------------------------------------------------------------------------

struct RegressionInstance {
    CovariateSpec covariates;
    NoiseSpec noise;
    Vec theta_star;
    /// Optional affine map applied to the raw product draw: x = A x_raw + b.
    /// Hypercontractivity is closed under this, so it is how non-product
    /// covariance structure is expressed.
    std::optional<Mat> transform_A;
    std::optional<Vec> transform_b;

    int d() const { return static_cast<int>(theta_star.size()); }

    /// E[x x^T] of the covariates (after the affine map when present).
    Mat second_moment() const;
    Vec mean() const;
    /// E[x y]; exact for independent noise and for the registered rules.
    Vec xy_moment() const;
    /// E[y^2].
    double y_second_moment() const;
    /// err_D(theta_star).
    double err_star() const;
    /// err_D(theta) by direct moment expansion.
    double err_at(const Vec& theta) const;
    /// || E[x(x^T theta* - y)] ||_inf; zero when theta_star is the population
    /// least-squares minimizer.
    double gradient_condition_residual() const;

    bool operator==(const RegressionInstance& o) const;
};

RegressionInstance make_instance(CovariateSpec cov, NoiseSpec noise, Vec theta_star);

struct DatasetMeta {
    std::optional<Vec> theta_star;
    std::optional<Mat> sigma;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::uint8_t>> corruption_mask;
    std::string generator = Rng::kName;

    bool operator==(const DatasetMeta& o) const;
};

struct Dataset {
    Mat X;  // n x d
    Vec y;  // n
    std::optional<DatasetMeta> meta;

    int n() const { return static_cast<int>(X.rows()); }
    int d() const { return static_cast<int>(X.cols()); }
    bool operator==(const Dataset& o) const;
};

/// Draws n i.i.d. rows; deterministic given seed, byte-identical across runs.
Dataset sample_instance(const RegressionInstance& inst, int n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

/// Raw per-coordinate moments E[x_j^r], r = 0..max_order, for a product
/// covariate spec.
struct Moments {
    int max_order = 0;
    Mat raw;  // d x (max_order+1)

    int d() const { return static_cast<int>(raw.rows()); }
    double moment(int coord, int order) const { return raw(coord, order); }
    /// Central moments mu_r = E[(x - E x)^r] via the binomial transform.
    double central(int coord, int order) const;
};

/// Closed forms where available, adaptive quadrature otherwise. Throws
/// InfiniteMomentError when the marginal's tail is too heavy (Student's t
/// with order >= nu).
Moments population_moments(const CovariateSpec& spec, int max_order);
double population_moment_1d(const Marginal1D& m, int order);

/// E[g(x)] over a 1-d marginal: atoms summed exactly, bands and densities by
/// adaptive quadrature.
double expect_marginal(const Marginal1D& m, const std::function<double(double)>& g);

// ---------------------------------------------------------------------------
// Dataset file I/O
// ---------------------------------------------------------------------------

/// CSV with header x1,...,xd,y and %.17g floats; the optional meta sidecar
/// is written to <path>.meta.json.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace robreg
