#pragma once

#include "robreg/common.hpp"
#include "robreg/model.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace robreg {

// ---------------------------------------------------------------------------
// Monomials over (w_1..w_n, theta_1..theta_d) with w idempotence
// ---------------------------------------------------------------------------

/// A reduced monomial: sorted variable ids, w-variables (ids < n) appearing at
/// most once (w^2 -> w), theta ids repeated for powers. Empty = constant 1.
struct Monomial {
    std::vector<std::uint16_t> vars;

    int degree() const { return static_cast<int>(vars.size()); }
    bool operator==(const Monomial& o) const { return vars == o.vars; }
    bool operator<(const Monomial& o) const {  // graded lexicographic
        if (vars.size() != o.vars.size()) return vars.size() < o.vars.size();
        return vars < o.vars;
    }
};

/// Sparse polynomial in reduced monomials.
using Poly = std::vector<std::pair<Monomial, double>>;

Poly poly_canonical(const Poly& p);
Poly poly_mul(const Poly& a, const Poly& b, int n_w);
Monomial mono_mul(const Monomial& a, const Monomial& b, int n_w);

/// All reduced monomials of total degree <= D over n w-variables and d
/// theta-variables, in graded lexicographic order, with index lookup.
class MonomialBasis {
  public:
    static MonomialBasis build(int n, int d, int D);

    int n() const { return n_; }
    int d() const { return d_; }
    int degree_bound() const { return D_; }
    std::size_t size() const { return elems_.size(); }
    const Monomial& at(std::size_t i) const { return elems_[i]; }
    const std::vector<Monomial>& elements() const { return elems_; }

    /// Index of a reduced monomial; throws on degree overflow.
    int index_of(const Monomial& m) const;
    bool contains(const Monomial& m) const { return lookup_.count(m) > 0; }

    Monomial w(int i) const;      // w_i, 0-based
    Monomial theta(int j) const;  // theta_j, 0-based
    static Monomial one() { return Monomial{}; }

  private:
    int n_ = 0, d_ = 0, D_ = 0;
    std::vector<Monomial> elems_;
    std::map<Monomial, int> lookup_;
};

// ---------------------------------------------------------------------------
// Constraint system on a moment vector
// ---------------------------------------------------------------------------

struct LinTerm {
    int idx;
    double c;
};

/// One linear functional of the moment vector.
using LinExpr = std::vector<LinTerm>;

/// A matrix-valued linear map of the moment vector that must be PSD; dim = 1
/// encodes a scalar inequality pE[g] >= 0.
struct PsdBlock {
    std::string name;
    int dim = 0;
    std::vector<LinExpr> cells;  // dim*dim, row-major, symmetric by construction
};

struct ConstraintSystem {
    MonomialBasis basis;                       // degree D
    std::shared_ptr<MonomialBasis> table;      // degree 2D moment index
    std::vector<std::pair<LinExpr, double>> equalities;
    std::vector<PsdBlock> blocks;              // blocks[0] is the moment matrix
    LinExpr objective;                         // minimized
    // Regression metadata (set by assemble_system).
    int n = 0, d = 0;
    double eps = 0.0, lambda = 0.0, c_ncm = 0.0;
    double m_theta = 1e4, m_residual = 1e4;
    std::vector<Vec> probes;
    Vec col_scale;        // per-coordinate x scaling applied before assembly
    double y_scale = 1.0; // y scaling; objective is in scaled units (/ y_scale^2)
    std::vector<std::string> notes;

    std::size_t moment_count() const { return table->size(); }
    /// pE[poly] as a linear functional over the moment vector.
    LinExpr expr_of(const Poly& p) const;
    /// Adds pE[h * q] = rhs * pE[q] for every table monomial q with
    /// deg(h q) <= 2D (rhs folded into h as a constant term upstream).
    void add_equality_with_multipliers(const Poly& h);
    void add_equality(const Poly& h, double rhs);
    /// Adds g >= 0 as a localizing block of degree floor((2D - deg g)/2),
    /// which collapses to a scalar row when the degree is 0.
    void add_inequality(const std::string& name, const Poly& g);

    std::string dump_json(const Vec* moments = nullptr) const;
};

/// Bare system over the given variables with the moment matrix block and
/// pE[1] = 1 preinstalled.
ConstraintSystem make_system(int n, int d, int D);

MonomialBasis build_basis(int n, int d, int D);

// ---------------------------------------------------------------------------
// Regression relaxation
// ---------------------------------------------------------------------------

enum class SosMode { WithNCM, NoNCM };

struct AssembleOptions {
    int degree = 2;           // moment-matrix basis degree D (pseudo-distribution degree 2D)
    int probes = 0;           // 0 = d + 2
    double lambda = 0.0;      // 0 = auto: 1.5 * sqrt(max raw probe ratio)
    double c_ncm = 4.0;
    double m_theta = 1e4;     // ||Theta||^2 bound, in scaled units
    double m_residual = 1e4;  // weighted residual second-moment bound, scaled
    std::uint64_t seed = 0;
    std::size_t max_moments = 2'000'000;  // memory guard on the moment table
};

/// Encodes the weighted least-squares relaxation over (w, Theta) with the
/// observed rows standing in for x', y': intersection, gradient,
/// hypercontractivity probes, optional NCM probes, and boundedness.
ConstraintSystem assemble_system(const Dataset& ds, double eps, SosMode mode,
                                 const AssembleOptions& opt = {});

/// Constraint values at a concrete Boolean/real assignment (w, theta in
/// original data units): every entry is the slack of one inequality (>= 0
/// feasible) or the absolute residual of one equality family (== 0 feasible).
struct AssignmentSlacks {
    double count_residual = 0.0;        // |sum w - (n - floor(eps n))|
    double gradient_residual = 0.0;     // max_j |(1/n) sum w_i x_ij (<x_i,0>-y_i)|
    double min_hc_slack = 0.0;          // min over probes of (d)
    double min_ncm_slack = 0.0;         // min over probes of (f); 0 when NoNCM
    double theta_bound_slack = 0.0;     // (g) first part
    double residual_bound_slack = 0.0;  // (g) second part
    bool feasible(double tol = 1e-9) const;
};
AssignmentSlacks assignment_slacks(const ConstraintSystem& sys, const Dataset& ds,
                                   const std::vector<double>& w, const Vec& theta);

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

enum class SolveStatus { Converged, Stalled, Infeasible };

struct SolverStats {
    int iterations = 0;
    double primal_residual = 0.0;  // max of equality and cone residuals
    double psd_residual = 0.0;     // max over blocks of (-lambda_min)^+
    double objective = 0.0;        // scaled units
    double rel_obj_change = 0.0;
    double rho = 0.0;
};

struct PseudoDistribution {
    Vec y;
    int degree = 0;  // 2D
    SolveStatus status = SolveStatus::Stalled;
    SolverStats stats;
    std::shared_ptr<MonomialBasis> table;
};

struct SolveOptions {
    double tol = 1e-5;
    int max_iter = 50000;
    double rho = 1.0;
    double alpha = 1.6;  // over-relaxation
    int check_every = 25;
    bool adapt_rho = true;
    bool trace = false;  // print residuals at every check (debugging)
};

PseudoDistribution solve_sdp(const ConstraintSystem& sys, const SolveOptions& opt = {});

/// Linear functional of the moment vector; throws on degree overflow.
double pseudo_expectation(const PseudoDistribution& pd, const Poly& poly);

}  // namespace robreg
