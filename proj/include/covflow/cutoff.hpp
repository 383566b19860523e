#pragma once

#include <cmath>

namespace covflow {

// exp(-1/s) for s > 0, else 0.
inline double flat_exp(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }

// C-infinity step: 0 for s <= 0, 1 for s >= 1.
inline double smooth_step(double s) {
    const double a = flat_exp(s), b = flat_exp(1.0 - s);
    return a / (a + b);
}

inline double smooth_step_derivative(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double a = flat_exp(s), b = flat_exp(1.0 - s);
    const double da = a / (s * s), db = -b / ((1.0 - s) * (1.0 - s));
    return (da * b - a * db) / ((a + b) * (a + b));
}

// 1 for r <= inner, 0 for r >= outer.
inline double plateau(double r, double inner, double outer) {
    return 1.0 - smooth_step((r - inner) / (outer - inner));
}

}  // namespace covflow
