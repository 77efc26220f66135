#include "robreg/pseudomoments.hpp"

#include "robreg/diagnostics.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace robreg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Monomial arithmetic
// ---------------------------------------------------------------------------

Monomial mono_mul(const Monomial& a, const Monomial& b, int n_w) {
    Monomial out;
    out.vars.reserve(a.vars.size() + b.vars.size());
    std::merge(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(),
               std::back_inserter(out.vars));
    // w_i^2 = w_i: drop duplicate w ids (they are adjacent after the merge).
    auto last = std::unique(out.vars.begin(), out.vars.end(),
                            [n_w](std::uint16_t x, std::uint16_t y) { return x == y && x < n_w; });
    out.vars.erase(last, out.vars.end());
    return out;
}

Poly poly_canonical(const Poly& p) {
    std::map<Monomial, double> acc;
    for (const auto& [m, c] : p) acc[m] += c;
    Poly out;
    for (auto& [m, c] : acc)
        if (c != 0.0) out.push_back({m, c});
    return out;
}

Poly poly_mul(const Poly& a, const Poly& b, int n_w) {
    Poly out;
    out.reserve(a.size() * b.size());
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b) out.push_back({mono_mul(ma, mb, n_w), ca * cb});
    return poly_canonical(out);
}

// ---------------------------------------------------------------------------
// Basis
// ---------------------------------------------------------------------------

namespace {

double binom_d(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double acc = 1.0;
    for (int i = 1; i <= k; ++i) acc = acc * (n - k + i) / i;
    return acc;
}

/// #reduced monomials of degree <= D: sum over w-subset size a of
/// C(n, a) * C(d + D - a, d).
double basis_count(int n, int d, int D) {
    double total = 0.0;
    for (int a = 0; a <= std::min(n, D); ++a) total += binom_d(n, a) * binom_d(d + D - a, d);
    return total;
}

void enumerate(int n, int d, int start, int remaining, Monomial& cur,
               std::vector<Monomial>& out) {
    out.push_back(cur);
    if (remaining == 0) return;
    for (int id = start; id < n + d; ++id) {
        cur.vars.push_back(static_cast<std::uint16_t>(id));
        // w variables are squarefree: the recursion must move past them.
        enumerate(n, d, id < n ? id + 1 : id, remaining - 1, cur, out);
        cur.vars.pop_back();
    }
}

constexpr double kBasisBudget = 5e6;

}  // namespace

MonomialBasis MonomialBasis::build(int n, int d, int D) {
    if (n < 0 || d < 1 || D < 1) throw std::invalid_argument("build_basis requires n >= 0, d >= 1, D >= 1");
    double count = basis_count(n, d, D);
    if (count > kBasisBudget)
        throw Error("monomial basis would have " + std::to_string(static_cast<long long>(count)) +
                    " elements, beyond the memory budget");
    MonomialBasis b;
    b.n_ = n;
    b.d_ = d;
    b.D_ = D;
    Monomial cur;
    enumerate(n, d, 0, D, cur, b.elems_);
    std::sort(b.elems_.begin(), b.elems_.end());
    b.elems_.erase(std::unique(b.elems_.begin(), b.elems_.end()), b.elems_.end());
    for (std::size_t i = 0; i < b.elems_.size(); ++i) b.lookup_[b.elems_[i]] = static_cast<int>(i);
    return b;
}

MonomialBasis build_basis(int n, int d, int D) { return MonomialBasis::build(n, d, D); }

int MonomialBasis::index_of(const Monomial& m) const {
    auto it = lookup_.find(m);
    if (it == lookup_.end())
        throw Error("monomial of degree " + std::to_string(m.degree()) +
                    " is outside the degree-" + std::to_string(D_) + " table");
    return it->second;
}

Monomial MonomialBasis::w(int i) const {
    if (i < 0 || i >= n_) throw std::invalid_argument("w index out of range");
    return Monomial{{static_cast<std::uint16_t>(i)}};
}

Monomial MonomialBasis::theta(int j) const {
    if (j < 0 || j >= d_) throw std::invalid_argument("theta index out of range");
    return Monomial{{static_cast<std::uint16_t>(n_ + j)}};
}

// ---------------------------------------------------------------------------
// System construction
// ---------------------------------------------------------------------------

LinExpr ConstraintSystem::expr_of(const Poly& p) const {
    LinExpr e;
    for (const auto& [m, c] : poly_canonical(p)) e.push_back({table->index_of(m), c});
    return e;
}

void ConstraintSystem::add_equality(const Poly& h, double rhs) {
    equalities.push_back({expr_of(h), rhs});
}

void ConstraintSystem::add_equality_with_multipliers(const Poly& h) {
    int hd = 0;
    for (const auto& [m, c] : h) hd = std::max(hd, m.degree());
    int room = 2 * basis.degree_bound() - hd;
    for (const Monomial& q : table->elements()) {
        if (q.degree() > room) continue;
        Poly hq = poly_mul(h, Poly{{q, 1.0}}, basis.n());
        equalities.push_back({expr_of(hq), 0.0});
    }
}

void ConstraintSystem::add_inequality(const std::string& name, const Poly& g) {
    Poly cg = poly_canonical(g);
    int dg = 0;
    for (const auto& [m, c] : cg) dg = std::max(dg, m.degree());
    int two_d = 2 * basis.degree_bound();
    if (dg > two_d)
        throw Error("constraint '" + name + "' has degree " + std::to_string(dg) +
                    " > 2D = " + std::to_string(two_d));
    int t = (two_d - dg) / 2;
    PsdBlock blk;
    blk.name = name;
    if (t == 0) {
        blk.dim = 1;
        blk.cells.push_back(expr_of(cg));
    } else {
        std::vector<const Monomial*> loc;
        for (const Monomial& q : basis.elements())
            if (q.degree() <= t) loc.push_back(&q);
        blk.dim = static_cast<int>(loc.size());
        blk.cells.resize(static_cast<std::size_t>(blk.dim) * blk.dim);
        for (int i = 0; i < blk.dim; ++i)
            for (int j = 0; j < blk.dim; ++j) {
                Poly q = poly_mul(Poly{{*loc[i], 1.0}}, Poly{{*loc[j], 1.0}}, basis.n());
                blk.cells[static_cast<std::size_t>(i) * blk.dim + j] =
                    expr_of(poly_mul(q, cg, basis.n()));
            }
    }
    blocks.push_back(std::move(blk));
}

ConstraintSystem make_system(int n, int d, int D) {
    ConstraintSystem sys;
    sys.basis = MonomialBasis::build(n, d, D);
    sys.table = std::make_shared<MonomialBasis>(MonomialBasis::build(n, d, 2 * D));
    sys.n = n;
    sys.d = d;

    PsdBlock moment;
    moment.name = "moment_matrix";
    moment.dim = static_cast<int>(sys.basis.size());
    moment.cells.resize(static_cast<std::size_t>(moment.dim) * moment.dim);
    for (int i = 0; i < moment.dim; ++i)
        for (int j = 0; j < moment.dim; ++j) {
            Monomial prod = mono_mul(sys.basis.at(i), sys.basis.at(j), n);
            moment.cells[static_cast<std::size_t>(i) * moment.dim + j] =
                LinExpr{{sys.table->index_of(prod), 1.0}};
        }
    sys.blocks.push_back(std::move(moment));

    sys.add_equality(Poly{{MonomialBasis::one(), 1.0}}, 1.0);  // pE[1] = 1
    return sys;
}

// ---------------------------------------------------------------------------
// Regression relaxation
// ---------------------------------------------------------------------------

namespace {

/// Residual polynomial r_i = y_i - <x_i, Theta> in scaled units.
Poly residual_poly(const ConstraintSystem& sys, const Mat& X, const Vec& y, int i) {
    Poly r{{MonomialBasis::one(), y(i)}};
    for (int j = 0; j < sys.d; ++j) r.push_back({sys.basis.theta(j), -X(i, j)});
    return r;
}

double max_raw_probe_ratio(const Mat& X, const std::vector<Vec>& probes) {
    double best = 1.0;
    for (const Vec& v : probes) {
        Eigen::ArrayXd proj = (X * v).array();
        double m2 = proj.square().mean();
        double m4 = proj.square().square().mean();
        if (m2 > 0.0) best = std::max(best, m4 / (m2 * m2));
    }
    return best;
}

}  // namespace

ConstraintSystem assemble_system(const Dataset& ds, double eps, SosMode mode,
                                 const AssembleOptions& opt) {
    int n = ds.n(), d = ds.d();
    if (n < 1 || d < 1) throw std::invalid_argument("assemble_system requires n, d >= 1");
    if (eps < 0.0 || eps >= 0.5) throw std::invalid_argument("assemble_system requires 0 <= eps < 1/2");
    int D = opt.degree;
    if (D < 2) throw std::invalid_argument("assemble_system requires degree D >= 2");
    double tcount = basis_count(n, d, 2 * D);
    if (tcount > static_cast<double>(opt.max_moments))
        throw Error("moment table would have " + std::to_string(static_cast<long long>(tcount)) +
                    " entries, beyond the memory budget of " + std::to_string(opt.max_moments));

    ConstraintSystem sys = make_system(n, d, D);
    sys.eps = eps;

    // Column/label scaling keeps the moment entries O(1) for the solver.
    sys.col_scale = Vec(d);
    for (int j = 0; j < d; ++j) {
        double s = std::sqrt(ds.X.col(j).squaredNorm() / n);
        sys.col_scale(j) = s > 1e-12 ? s : 1.0;
    }
    double sy = std::sqrt(ds.y.squaredNorm() / n);
    sys.y_scale = sy > 1e-12 ? sy : 1.0;
    Mat X = ds.X.array().rowwise() / sys.col_scale.transpose().array();
    Vec y = ds.y / sys.y_scale;

    int probe_count = opt.probes > 0 ? opt.probes : d + 2;
    if (probe_count < d) throw std::invalid_argument("probe count must be >= d");
    sys.probes = probe_directions(X, d, probe_count, opt.seed);

    sys.lambda = opt.lambda > 0.0
                     ? opt.lambda
                     : 1.5 * std::sqrt(max_raw_probe_ratio(X, sys.probes));
    sys.c_ncm = mode == SosMode::WithNCM ? opt.c_ncm : 0.0;
    sys.m_theta = opt.m_theta;
    sys.m_residual = opt.m_residual;

    int budget = n - static_cast<int>(std::floor(eps * n));  // rows kept

    // (a) sum_i w_i = n - floor(eps n), with multipliers.
    {
        Poly h{{MonomialBasis::one(), -static_cast<double>(budget)}};
        for (int i = 0; i < n; ++i) h.push_back({sys.basis.w(i), 1.0});
        sys.add_equality_with_multipliers(h);
    }

    // (c) coordinate-wise gradient condition, with multipliers.
    for (int j = 0; j < d; ++j) {
        Poly h;
        for (int i = 0; i < n; ++i) {
            for (int l = 0; l < d; ++l)
                h.push_back({mono_mul(sys.basis.w(i), sys.basis.theta(l), n),
                             X(i, j) * X(i, l) / n});
            h.push_back({sys.basis.w(i), -X(i, j) * y(i) / n});
        }
        sys.add_equality_with_multipliers(h);
    }

    // (d) covariate hypercontractivity at r = 2, per probe:
    // lambda^2 ((1/n) sum w_i a_i)^2 - (1/n) sum w_i a_i^2 >= 0, a_i = <x_i, v>^2.
    double lam2 = sys.lambda * sys.lambda;
    for (std::size_t pi = 0; pi < sys.probes.size(); ++pi) {
        const Vec& v = sys.probes[pi];
        Vec a = (X * v).array().square();
        Poly g;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                g.push_back({mono_mul(sys.basis.w(i), sys.basis.w(j), n),
                             lam2 * a(i) * a(j) / (static_cast<double>(n) * n)});
        for (int i = 0; i < n; ++i) g.push_back({sys.basis.w(i), -a(i) * a(i) / n});
        sys.add_inequality("hc_probe_" + std::to_string(pi), g);
    }

    // (e) noise hypercontractivity at r = 2 is degree 6 (w r^4 against the
    // squared weighted second moment), so it is expressible only at D >= 3;
    // the run records whether it was encoded.
    if (2 * D >= 6) {
        Poly wr2;  // (1/n) sum w_i r_i^2
        for (int i = 0; i < n; ++i) {
            Poly r = residual_poly(sys, X, y, i);
            Poly r2 = poly_mul(r, r, n);
            for (auto& [m, c] : poly_mul(Poly{{sys.basis.w(i), 1.0}}, r2, n))
                wr2.push_back({m, c / n});
        }
        Poly g = poly_mul(wr2, wr2, n);
        for (auto& [m, c] : g) c *= lam2;
        for (int i = 0; i < n; ++i) {
            Poly r = residual_poly(sys, X, y, i);
            Poly r4 = poly_mul(poly_mul(r, r, n), poly_mul(r, r, n), n);
            for (auto& [m, c] : poly_mul(Poly{{sys.basis.w(i), 1.0}}, r4, n))
                g.push_back({m, -c / n});
        }
        sys.add_inequality("noise_hc", g);
        sys.notes.push_back("noise_hc: encoded at r=2 (2D >= 6)");
    } else {
        sys.notes.push_back("noise_hc: not encoded (degree 6 needs D >= 3); slack reported at the rounded point");
    }

    // (f) negatively correlated moments at r = 1, per probe:
    // c_ncm ((1/n) sum w_i a_i)((1/n) sum w_j r_j^2) - (1/n) sum w_i a_i r_i^2 >= 0.
    if (mode == SosMode::WithNCM) {
        Poly wr2;
        std::vector<Poly> wr2_terms(n);
        for (int i = 0; i < n; ++i) {
            Poly r = residual_poly(sys, X, y, i);
            wr2_terms[i] = poly_mul(Poly{{sys.basis.w(i), 1.0}}, poly_mul(r, r, n), n);
            for (auto& [m, c] : wr2_terms[i]) wr2.push_back({m, c / n});
        }
        wr2 = poly_canonical(wr2);
        for (std::size_t pi = 0; pi < sys.probes.size(); ++pi) {
            const Vec& v = sys.probes[pi];
            Vec a = (X * v).array().square();
            Poly wa;
            for (int i = 0; i < n; ++i) wa.push_back({sys.basis.w(i), a(i) / n});
            Poly g = poly_mul(wa, wr2, n);
            for (auto& [m, c] : g) c *= sys.c_ncm;
            for (int i = 0; i < n; ++i)
                for (auto& [m, c] : wr2_terms[i]) g.push_back({m, -c * a(i) / n});
            sys.add_inequality("ncm_probe_" + std::to_string(pi), g);
        }
        sys.notes.push_back("ncm: encoded at r=1" +
                            std::string(2 * D >= 6 ? "" : " (r=2 needs D >= 3)"));
    } else {
        sys.notes.push_back("ncm: not encoded (NoNCM mode)");
    }

    // (g) boundedness: ||Theta||^2 <= M_theta and weighted residual <= M_r.
    {
        Poly g{{MonomialBasis::one(), sys.m_theta}};
        for (int j = 0; j < d; ++j)
            g.push_back({mono_mul(sys.basis.theta(j), sys.basis.theta(j), n), -1.0});
        sys.add_inequality("theta_bound", g);

        Poly h{{MonomialBasis::one(), sys.m_residual}};
        for (int i = 0; i < n; ++i) {
            Poly r = residual_poly(sys, X, y, i);
            for (auto& [m, c] : poly_mul(Poly{{sys.basis.w(i), 1.0}}, poly_mul(r, r, n), n))
                h.push_back({m, -c / n});
        }
        sys.add_inequality("residual_bound", h);
    }

    // Objective: pE[(1/n) sum w_i r_i^2], linear in the moment vector.
    {
        Poly obj;
        for (int i = 0; i < n; ++i) {
            Poly r = residual_poly(sys, X, y, i);
            for (auto& [m, c] : poly_mul(Poly{{sys.basis.w(i), 1.0}}, poly_mul(r, r, n), n))
                obj.push_back({m, c / n});
        }
        sys.objective = sys.expr_of(obj);
    }
    return sys;
}

// ---------------------------------------------------------------------------
// Assignment slacks
// ---------------------------------------------------------------------------

bool AssignmentSlacks::feasible(double tol) const {
    return count_residual <= tol && gradient_residual <= tol && min_hc_slack >= -tol &&
           min_ncm_slack >= -tol && theta_bound_slack >= -tol && residual_bound_slack >= -tol;
}

AssignmentSlacks assignment_slacks(const ConstraintSystem& sys, const Dataset& ds,
                                   const std::vector<double>& w, const Vec& theta) {
    int n = ds.n(), d = ds.d();
    if (static_cast<int>(w.size()) != n || theta.size() != d)
        throw std::invalid_argument("assignment size mismatch");
    Mat X = ds.X.array().rowwise() / sys.col_scale.transpose().array();
    Vec y = ds.y / sys.y_scale;
    Vec th(d);
    for (int j = 0; j < d; ++j) th(j) = theta(j) * sys.col_scale(j) / sys.y_scale;

    AssignmentSlacks s;
    double wsum = 0.0;
    for (double wi : w) wsum += wi;
    int budget = n - static_cast<int>(std::floor(sys.eps * n));
    s.count_residual = std::abs(wsum - budget);

    Vec res = y - X * th;
    for (int j = 0; j < d; ++j) {
        double g = 0.0;
        for (int i = 0; i < n; ++i) g += w[i] * X(i, j) * (X.row(i).dot(th) - y(i));
        s.gradient_residual = std::max(s.gradient_residual, std::abs(g / n));
    }

    double lam2 = sys.lambda * sys.lambda;
    s.min_hc_slack = std::numeric_limits<double>::infinity();
    s.min_ncm_slack = sys.c_ncm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    double wr2 = 0.0;
    for (int i = 0; i < n; ++i) wr2 += w[i] * res(i) * res(i) / n;
    for (const Vec& v : sys.probes) {
        Vec a = (X * v).array().square();
        double m1 = 0.0, m2 = 0.0, joint = 0.0;
        for (int i = 0; i < n; ++i) {
            m1 += w[i] * a(i) / n;
            m2 += w[i] * a(i) * a(i) / n;
            joint += w[i] * a(i) * res(i) * res(i) / n;
        }
        s.min_hc_slack = std::min(s.min_hc_slack, lam2 * m1 * m1 - m2);
        if (sys.c_ncm > 0.0)
            s.min_ncm_slack = std::min(s.min_ncm_slack, sys.c_ncm * m1 * wr2 - joint);
    }
    s.theta_bound_slack = sys.m_theta - th.squaredNorm();
    s.residual_bound_slack = sys.m_residual - wr2;
    return s;
}

// ---------------------------------------------------------------------------
// Solver: operator splitting with exact affine projection and PSD clipping
// ---------------------------------------------------------------------------

namespace {

struct BlockOp {
    int dim;
    Eigen::SparseMatrix<double> S;  // dim*dim x m
};

Mat psd_project(const Mat& sym, double* min_eig = nullptr) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()));
    if (min_eig) *min_eig = es.eigenvalues().minCoeff();
    Vec clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

PseudoDistribution solve_sdp(const ConstraintSystem& sys, const SolveOptions& opt) {
    const int m = static_cast<int>(sys.moment_count());
    PseudoDistribution pd;
    pd.degree = 2 * sys.basis.degree_bound();
    pd.table = sys.table;
    pd.y = Vec::Zero(m);

    // Block operators, in original units.
    std::vector<BlockOp> raw;
    for (const PsdBlock& blk : sys.blocks) {
        BlockOp op;
        op.dim = blk.dim;
        std::vector<Eigen::Triplet<double>> trip;
        for (int cell = 0; cell < blk.dim * blk.dim; ++cell)
            for (const LinTerm& t : blk.cells[cell]) trip.emplace_back(cell, t.idx, t.c);
        op.S.resize(blk.dim * blk.dim, m);
        op.S.setFromTriplets(trip.begin(), trip.end());
        raw.push_back(std::move(op));
    }

    // Ruiz-style equilibration: diagonal scaling E of the moment vector plus
    // one positive scalar per block (uniform scaling keeps the PSD cone
    // invariant). The iteration runs on the scaled operators; convergence is
    // judged on residuals recomputed in original units.
    Vec E = Vec::Ones(m);
    std::vector<double> block_scale(raw.size(), 1.0);
    std::vector<BlockOp> ops = raw;
    for (int pass = 0; pass < 6; ++pass) {
        Vec colnorm = Vec::Zero(m);
        for (const BlockOp& op : ops)
            for (int k = 0; k < op.S.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(op.S, k); it; ++it)
                    colnorm(it.col()) += it.value() * it.value();
        for (int i = 0; i < m; ++i) {
            double cn = std::sqrt(std::sqrt(colnorm(i)));
            if (cn > 1e-8) {
                E(i) /= cn;
                colnorm(i) = cn;
            } else {
                colnorm(i) = 1.0;
            }
        }
        for (BlockOp& op : ops) {
            for (int k = 0; k < op.S.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(op.S, k); it; ++it)
                    it.valueRef() /= colnorm(it.col());
        }
        for (std::size_t j = 0; j < ops.size(); ++j) {
            double fro = ops[j].S.norm() / std::sqrt(static_cast<double>(ops[j].dim));
            if (fro > 1e-10) {
                ops[j].S /= fro;
                block_scale[j] *= fro;
            }
        }
    }

    // Equality rows: scaled copy for the KKT system (columns by E, rows
    // normalized), original copy for the residual check.
    const int q_full = static_cast<int>(sys.equalities.size());
    Mat A_orig = Mat::Zero(q_full, m);
    Vec b_orig(q_full);
    for (int r = 0; r < q_full; ++r) {
        for (const LinTerm& t : sys.equalities[r].first) A_orig(r, t.idx) += t.c;
        b_orig(r) = sys.equalities[r].second;
    }
    Mat A_full = A_orig * E.asDiagonal();
    Vec b_full = b_orig;
    for (int r = 0; r < q_full; ++r) {
        double rn = A_full.row(r).norm();
        if (rn > 1e-12) {
            A_full.row(r) /= rn;
            b_full(r) /= rn;
        }
    }

    // Rank-filter the equalities, then replace them by an orthonormal basis
    // of their row space (the affine set is unchanged and the KKT system is
    // well conditioned). A dropped row whose right-hand side is not
    // reproduced by the kept rows certifies infeasibility.
    Eigen::ColPivHouseholderQR<Mat> qr(A_full.transpose());
    qr.setThreshold(1e-8);
    const int rank = static_cast<int>(qr.rank());
    std::vector<int> kept, dropped;
    for (int i = 0; i < q_full; ++i)
        (i < rank ? kept : dropped).push_back(qr.colsPermutation().indices()(i));
    Mat A_kept(rank, m);
    Vec b_kept(rank);
    for (int i = 0; i < rank; ++i) {
        A_kept.row(i) = A_full.row(kept[i]);
        b_kept(i) = b_full(kept[i]);
    }
    if (!dropped.empty()) {
        Eigen::HouseholderQR<Mat> kqr(A_kept.transpose());
        for (int i : dropped) {
            Vec lam = kqr.solve(A_full.row(i).transpose());
            double fit = (A_kept.transpose() * lam - A_full.row(i).transpose()).norm();
            if (fit <= 1e-6 * (1.0 + A_full.row(i).norm()) &&
                std::abs(lam.dot(b_kept) - b_full(i)) > 1e-8 * (1.0 + std::abs(b_full(i)))) {
                pd.status = SolveStatus::Infeasible;
                return pd;
            }
        }
    }
    // Orthonormal rows: A = Q1^T, b = (A_kept Q1)^{-1} b_kept.
    Mat Q1 = Mat(qr.householderQ()).leftCols(rank);
    Mat A = Q1.transpose();
    Vec b = (A_kept * Q1).partialPivLu().solve(b_kept);

    // Gram matrix of the stacked block operators; every moment is hit by the
    // moment matrix, so G is positive definite and the KKT system
    // [[G, A^T], [A, 0]] is nonsingular. rho enters only the right-hand side.
    Mat G = Mat::Zero(m, m);
    for (const BlockOp& op : ops) G += Mat(op.S.transpose() * op.S);
    Mat K = Mat::Zero(m + rank, m + rank);
    K.topLeftCorner(m, m) = G;
    K.topRightCorner(m, rank) = A.transpose();
    K.bottomLeftCorner(rank, m) = A;
    Eigen::PartialPivLU<Mat> kkt(K);

    Vec c = Vec::Zero(m);
    for (const LinTerm& t : sys.objective) c(t.idx) += t.c;
    c = E.asDiagonal() * c;  // objective in scaled coordinates

    // Scaled-dual ADMM state.
    std::vector<Mat> Z(ops.size()), U(ops.size()), V(ops.size());
    double rho = opt.rho;
    Vec y = Vec::Zero(m);
    {
        // Feasible-equality start: project 0 onto {Ay = b}.
        Vec rhs = Vec::Zero(m + rank);
        rhs.tail(rank) = b;
        y = kkt.solve(rhs).head(m);
    }
    for (std::size_t j = 0; j < ops.size(); ++j) {
        Vec sv = ops[j].S * y;
        Z[j] = psd_project(Eigen::Map<Mat>(sv.data(), ops[j].dim, ops[j].dim));
        U[j] = Mat::Zero(ops[j].dim, ops[j].dim);
    }

    double prev_checked_obj = c.dot(y);
    std::vector<Mat> Z_prev = Z;
    SolverStats st;
    st.rho = rho;

    // Ergodic tail average: the ADMM iterates can circulate on flat faces of
    // the feasible set; equalities are linear, cone distance is convex and
    // lambda_min concave, so the averaged point dominates its snapshots.
    Vec y_accum = Vec::Zero(m);
    int accum_count = 0;
    Vec y_best;
    double best_score = std::numeric_limits<double>::infinity();
    SolverStats best_st;

    for (int it = 1; it <= opt.max_iter; ++it) {
        // y-step: min c^T y + (rho/2) sum || S_j y - (Z_j - U_j) ||^2, Ay = b.
        Vec rhs = Vec::Zero(m + rank);
        for (std::size_t j = 0; j < ops.size(); ++j) {
            Mat target = Z[j] - U[j];
            rhs.head(m) += ops[j].S.transpose() * Eigen::Map<Vec>(target.data(), target.size());
        }
        rhs.head(m) -= c / rho;
        rhs.tail(rank) = b;
        y = kkt.solve(rhs).head(m);
        if (!y.allFinite()) {
            pd.y = Vec::Zero(m);
            pd.status = SolveStatus::Stalled;
            pd.stats = st;
            pd.stats.iterations = it;
            return pd;
        }

        // Z-step with over-relaxation, then dual update.
        for (std::size_t j = 0; j < ops.size(); ++j) {
            Vec sv = ops[j].S * y;
            Mat Sy = Eigen::Map<Mat>(sv.data(), ops[j].dim, ops[j].dim);
            Mat hat = opt.alpha * Sy + (1.0 - opt.alpha) * Z[j];
            Z[j] = psd_project(hat + U[j]);
            U[j] += hat - Z[j];
            V[j] = std::move(Sy);
        }

        y_accum += y;
        ++accum_count;
        if (it % opt.check_every != 0 && it != opt.max_iter) continue;

        Vec y_avg = y_accum / accum_count;
        Vec y_true = E.asDiagonal() * y_avg;
        double eq_res = (A_orig * y_true - b_orig).lpNorm<Eigen::Infinity>() /
                        (1.0 + b_orig.lpNorm<Eigen::Infinity>());
        double cone_res = 0.0, psd_res = 0.0, dual_res = 0.0;
        for (std::size_t j = 0; j < ops.size(); ++j) {
            // cone and PSD residuals of the averaged point, in original units
            Vec sv = raw[j].S * y_true;
            Mat Sy = Eigen::Map<Mat>(sv.data(), raw[j].dim, raw[j].dim);
            double mineig;
            Mat proj = psd_project(Sy, &mineig);
            cone_res = std::max(cone_res, (Sy - proj).norm() / (1.0 + Sy.norm()));
            psd_res = std::max(psd_res, std::max(0.0, -mineig));
            dual_res = std::max(dual_res, rho * (Z[j] - Z_prev[j]).norm() / (1.0 + Z[j].norm()));
            Z_prev[j] = Z[j];
        }
        double obj = c.dot(y_avg);
        double obj_change = std::abs(obj - prev_checked_obj) / (1.0 + std::abs(obj));
        prev_checked_obj = obj;
        // Roll the window so stale early iterates fade (tail of ~1000 iters).
        if (accum_count >= 1000) {
            y_accum = y_avg * 500.0;
            accum_count = 500;
        }

        st.iterations = it;
        st.primal_residual = std::max(eq_res, cone_res);
        st.psd_residual = psd_res;
        st.objective = obj;
        st.rel_obj_change = obj_change;
        st.rho = rho;
        if (opt.trace)
            std::printf("it=%6d primal=%.2e psd=%.2e dual=%.2e dobj=%.2e obj=%.8f rho=%.3f\n",
                        it, st.primal_residual, psd_res, dual_res, obj_change, obj, rho);

        double score = std::max(st.primal_residual, st.psd_residual);
        if (score < best_score) {
            best_score = score;
            y_best = y_true;
            best_st = st;
        }
        if (st.primal_residual <= opt.tol && st.psd_residual <= opt.tol &&
            obj_change <= opt.tol) {
            pd.y = y_true;
            pd.status = SolveStatus::Converged;
            pd.stats = st;
            return pd;
        }

        // Residual balancing; the KKT factorization is rho-free.
        if (opt.adapt_rho && it % (opt.check_every * 8) == 0) {
            if (cone_res > 10.0 * dual_res && rho < 1e4) {
                rho *= 2.0;
                for (auto& u : U) u /= 2.0;
            } else if (dual_res > 10.0 * cone_res && rho > 1e-2) {
                rho /= 2.0;
                for (auto& u : U) u *= 2.0;
            }
        }
    }
    pd.y = y_best.size() > 0 ? y_best : Vec(E.asDiagonal() * y);
    pd.status = SolveStatus::Stalled;
    pd.stats = y_best.size() > 0 ? best_st : st;
    pd.stats.iterations = st.iterations;
    return pd;
}

double pseudo_expectation(const PseudoDistribution& pd, const Poly& poly) {
    if (!pd.table) throw Error("pseudo-distribution has no moment table");
    double acc = 0.0;
    for (const auto& [mo, co] : poly_canonical(poly)) acc += co * pd.y(pd.table->index_of(mo));
    return acc;
}

// ---------------------------------------------------------------------------
// Diagnostic dump
// ---------------------------------------------------------------------------

std::string ConstraintSystem::dump_json(const Vec* moments) const {
    json j;
    j["n"] = n;
    j["d"] = d;
    j["degree"] = basis.degree_bound();
    j["moment_count"] = moment_count();
    j["equality_rows"] = equalities.size();
    j["lambda"] = lambda;
    j["c_ncm"] = c_ncm;
    j["eps"] = eps;
    j["y_scale"] = y_scale;
    j["col_scale"] = std::vector<double>(col_scale.begin(), col_scale.end());
    j["notes"] = notes;
    std::vector<std::string> basis_names;
    for (const Monomial& mnm : basis.elements()) {
        std::string s = "1";
        if (!mnm.vars.empty()) {
            s.clear();
            for (auto v : mnm.vars)
                s += (v < n ? "w" + std::to_string(v + 1) : "t" + std::to_string(v - n + 1)) + ".";
            s.pop_back();
        }
        basis_names.push_back(s);
    }
    j["basis"] = basis_names;
    std::vector<json> blks;
    for (const PsdBlock& blk : blocks) {
        json bj;
        bj["name"] = blk.name;
        bj["dim"] = blk.dim;
        if (moments) {
            Mat val = Mat::Zero(blk.dim, blk.dim);
            for (int cell = 0; cell < blk.dim * blk.dim; ++cell)
                for (const LinTerm& t : blk.cells[cell])
                    val(cell / blk.dim, cell % blk.dim) += t.c * (*moments)(t.idx);
            Eigen::SelfAdjointEigenSolver<Mat> es(val);
            bj["min_eig"] = es.eigenvalues().minCoeff();
        }
        blks.push_back(bj);
    }
    j["blocks"] = blks;
    std::vector<std::vector<double>> pr;
    for (const Vec& v : probes) pr.push_back(std::vector<double>(v.begin(), v.end()));
    j["probes"] = pr;
    return j.dump(2);
}

}  // namespace robreg
