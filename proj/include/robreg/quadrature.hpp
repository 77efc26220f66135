#pragma once

#include <functional>

namespace robreg {

struct QuadratureOptions {
    double rel_tol = 1e-10;
    double abs_floor = 1e-14;  // absolute floor so heavy tails terminate
    int max_depth = 60;
};

/// Adaptive Simpson integration of f over [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opt = {});

}  // namespace robreg
