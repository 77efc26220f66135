#include "robreg/quadrature.hpp"

#include <cmath>
#include <cstdlib>

namespace robreg {

namespace {

double simpson(double fa, double fm, double fb, double h) {
    return h / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double b, double fa, double fm,
             double fb, double whole, double tol, double abs_floor, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(fa, flm, fm, m - a);
    double right = simpson(fm, frm, fb, b - m);
    double err = left + right - whole;
    if (depth <= 0 || std::abs(err) <= 15.0 * std::max(tol, abs_floor))
        return left + right + err / 15.0;
    return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, abs_floor, depth - 1) +
           adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, abs_floor, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opt) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    double fa = f(a), fm = f(m), fb = f(b);
    double whole = simpson(fa, fm, fb, b - a);
    double tol = opt.rel_tol * std::max(1.0, std::abs(whole));
    return adapt(f, a, b, fa, fm, fb, whole, tol, opt.abs_floor, opt.max_depth);
}

}  // namespace robreg
