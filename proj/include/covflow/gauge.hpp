#pragma once

#include "covflow/fields.hpp"

#include <functional>

namespace covflow {

struct Quadrature {
    rvec nodes;
    rvec weights;
};

// Gauss-Legendre rule mapped to [0, 1].
inline Quadrature gauss_legendre01(int K) {
    if (K < 1) throw std::invalid_argument("gauss_legendre: K must be positive");
    Quadrature q{rvec(K), rvec(K)};
    for (int i = 0; i < K; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (K + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= K; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = K * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        q.nodes[i] = 0.5 * (1.0 - z);
        q.weights[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return q;
}

using PointField = std::function<Vec3(const double*)>;

// int_0^1 field(s x) ds by K-node Gauss-Legendre.
inline Vec3 radial_integral(const PointField& field, const double* x, int dim, const Quadrature& q) {
    Vec3 acc{0.0, 0.0, 0.0};
    double y[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        for (int d = 0; d < dim; ++d) y[d] = q.nodes[i] * x[d];
        Vec3 f = field(y);
        for (int d = 0; d < dim; ++d) {
            if (!std::isfinite(f[d])) throw std::domain_error("radial_integral: non-finite field value");
            acc[d] += q.weights[i] * f[d];
        }
    }
    return acc;
}

// Same integral split at s0 in (0, 1), where the field has a kink.
inline Vec3 radial_integral(const PointField& field, const double* x, int dim, const Quadrature& q, double s0) {
    if (!(s0 > 0.0 && s0 < 1.0)) return radial_integral(field, x, dim, q);
    Vec3 acc{0.0, 0.0, 0.0};
    double y[3] = {0.0, 0.0, 0.0};
    for (const auto [lo, hi] : {std::pair{0.0, s0}, std::pair{s0, 1.0}})
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            const double s = lo + (hi - lo) * q.nodes[i];
            for (int d = 0; d < dim; ++d) y[d] = s * x[d];
            Vec3 f = field(y);
            for (int d = 0; d < dim; ++d) {
                if (!std::isfinite(f[d])) throw std::domain_error("radial_integral: non-finite field value");
                acc[d] += (hi - lo) * q.weights[i] * f[d];
            }
        }
    return acc;
}

// Ray parameter where s x enters the regularized core (1 if it never leaves it).
inline double core_crossing(const PotentialSpec& s, const GridSpec& g, const double* x) {
    double r = 0.0;
    if (s.kind == PotentialKind::block_field_3d) r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    else if (s.kind == PotentialKind::block_matrix_3d) r = std::hypot(x[0], x[1]);
    else return 1.0;
    const double r0 = s.rho0(g);
    return r > r0 ? r0 / r : 1.0;
}

inline Vec3 radial_integral(const PointField& field, const double* x, int dim, int K) {
    if (K < 2) throw std::invalid_argument("radial_integral: K must be at least 2");
    return radial_integral(field, x, dim, gauss_legendre01(K));
}

inline Vec3 radial_integral(const RealVectorField& F, const double* x, int K) {
    PointField f = [&](const double* y) {
        Vec3 v{0.0, 0.0, 0.0};
        for (int d = 0; d < F.grid.dim; ++d) v[d] = interpolate_point(F.grid, F.components[d], y);
        return v;
    };
    return radial_integral(f, x, F.grid.dim, K);
}

// Off-grid evaluators for A and Psi: closed form for zoo kinds, trigonometric
// interpolation of samples (Psi via the spectral tensor) for custom.
inline PointField potential_evaluator(const PotentialSpec& s, const GridSpec& g) {
    if (s.has_closed_form()) return [s, g](const double* y) { return potential_at(s, g, y); };
    auto A = std::make_shared<RealVectorField>(s.samples);
    return [A](const double* y) {
        Vec3 v{0.0, 0.0, 0.0};
        for (int d = 0; d < A->grid.dim; ++d) v[d] = interpolate_point(A->grid, A->components[d], y);
        return v;
    };
}

inline PointField psi_evaluator(const PotentialSpec& s, const GridSpec& g) {
    if (s.has_closed_form()) return [s, g](const double* y) { return psi_at(s, g, y); };
    // B is periodic, x is not: interpolate B_jk for j < k and contract with y exactly.
    auto B = std::make_shared<MagneticTensor>(magnetic_tensor(s.samples));
    return [B](const double* y) {
        const int n = B->grid.dim;
        Vec3 v{0.0, 0.0, 0.0};
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                const double b = interpolate_point(B->grid, B->entries[static_cast<std::size_t>(j * n + k)], y);
                v[j] += y[k] * b;
                v[k] -= y[j] * b;
            }
        return v;
    };
}

inline double phase_at(const PointField& A, const double* x, int dim, const Quadrature& q, double s0 = 1.0) {
    Vec3 m = radial_integral(A, x, dim, q, s0);
    double chi = 0.0;
    for (int d = 0; d < dim; ++d) chi += x[d] * m[d];
    return chi;
}

inline rvec cronstrom_phase(const PotentialSpec& s, const GridSpec& g, int K = 32) {
    s.validate(g);
    if (K < 2) throw std::invalid_argument("cronstrom_phase: K must be at least 2");
    const Quadrature q = gauss_legendre01(K);
    const PointField A = potential_evaluator(s, g);
    rvec chi(g.size());
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        chi[i] = phase_at(A, x.data(), g.dim, q, core_crossing(s, g, x.data()));
    });
    return chi;
}

// Transversal potential at y: -int_0^1 Psi(s y) ds.
inline Vec3 transversal_at(const PointField& psi, const double* y, int dim, const Quadrature& q, double s0 = 1.0) {
    Vec3 m = radial_integral(psi, y, dim, q, s0);
    for (int d = 0; d < dim; ++d) m[d] = -m[d];
    return m;
}

struct GaugeTransform {
    rvec phase;
    RealVectorField transformed_potential;
    int quadrature_nodes = 32;
    double transversality_defect = 0.0;
    double dA_transversality_defect = 0.0;
};

inline GaugeTransform cronstrom_potential(const PotentialSpec& s, const GridSpec& g, int K = 32) {
    s.validate(g);
    if (K < 2) throw std::invalid_argument("cronstrom_potential: K must be at least 2");
    const Quadrature q = gauss_legendre01(K);
    const PointField psi = psi_evaluator(s, g);
    GaugeTransform out;
    out.quadrature_nodes = K;
    out.phase = cronstrom_phase(s, g, K);
    out.transformed_potential = RealVectorField(g);
    auto& At = out.transformed_potential.components;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        Vec3 a = transversal_at(psi, x.data(), g.dim, q, core_crossing(s, g, x.data()));
        double xa = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            At[d][i] = a[d];
            xa += x[d] * a[d];
        }
        out.transversality_defect = std::max(out.transversality_defect, std::abs(xa));
    });

    // x . (x^t D A~): spectral for sampled input, otherwise the radial
    // derivative d/dl A~(l x) at l = 1 by a fourth-order centered difference.
    if (!s.has_closed_form()) {
        std::vector<std::vector<rvec>> D(g.dim, std::vector<rvec>(g.dim));
        for (int k = 0; k < g.dim; ++k)
            for (int j = 0; j < g.dim; ++j) D[j][k] = spectral_partial(g, At[k], j);
        for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
            double v = 0.0;
            for (int j = 0; j < g.dim; ++j)
                for (int k = 0; k < g.dim; ++k) v += x[j] * x[k] * D[j][k][i];
            out.dA_transversality_defect = std::max(out.dA_transversality_defect, std::abs(v));
        });
    } else {
        const double h = 1e-3;
        for_each_point(g, [&](std::size_t, const std::array<double, 3>& x) {
            Vec3 f[4];
            const double lam[4] = {1.0 - 2 * h, 1.0 - h, 1.0 + h, 1.0 + 2 * h};
            for (int m = 0; m < 4; ++m) {
                double y[3] = {lam[m] * x[0], lam[m] * x[1], lam[m] * x[2]};
                f[m] = transversal_at(psi, y, g.dim, q, core_crossing(s, g, y));
            }
            double v = 0.0;
            for (int d = 0; d < g.dim; ++d)
                v += x[d] * (f[0][d] - 8.0 * f[1][d] + 8.0 * f[2][d] - f[3][d]) / (12.0 * h);
            out.dA_transversality_defect = std::max(out.dA_transversality_defect, std::abs(v));
        });
    }
    return out;
}

inline ComplexField apply_gauge(const ComplexField& u, const rvec& chi, int sign) {
    if (chi.size() != u.values.size()) throw std::invalid_argument("apply_gauge: grid mismatch");
    if (sign != 1 && sign != -1) throw std::invalid_argument("apply_gauge: sign must be +1 or -1");
    ComplexField out(u.grid);
    for (std::size_t i = 0; i < chi.size(); ++i) out.values[i] = std::polar(1.0, sign * chi[i]) * u.values[i];
    return out;
}

// Interior: |x|_inf <= 0.75 L and, for core-regularized kinds, |x| >= 2 rho0.
inline bool in_check_region(const PotentialSpec& s, const GridSpec& g, const double* x) {
    double xi = 0.0, r2 = 0.0;
    for (int d = 0; d < g.dim; ++d) {
        xi = std::max(xi, std::abs(x[d]));
        r2 += x[d] * x[d];
    }
    if (xi > 0.75 * g.half_width) return false;
    if (s.is_core_regularized()) {
        const double r0 = s.rho0(g);
        if (r2 < 4.0 * r0 * r0) return false;
    }
    return true;
}

// max |A - grad chi - A~| over the interior region. grad chi is spectral for
// sampled potentials and a fourth-order centered difference of the evaluable
// phase for closed-form kinds (chi is not periodic on the box).
inline double cross_identity_check(const PotentialSpec& s, const GridSpec& g, int K = 32) {
    const GaugeTransform gt = cronstrom_potential(s, g, K);
    const RealVectorField A = eval_potential(s, g);
    const Quadrature q = gauss_legendre01(K);
    const PointField Aeval = potential_evaluator(s, g);
    std::vector<rvec> spec_grad;
    if (!s.has_closed_form())
        for (int d = 0; d < g.dim; ++d) spec_grad.push_back(spectral_partial(g, gt.phase, d));
    double worst = 0.0;
    const double h = 1e-3;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        if (!in_check_region(s, g, x.data())) return;
        double e2 = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            double gc;
            if (!spec_grad.empty()) {
                gc = spec_grad[d][i];
            } else {
                double f[4];
                const double off[4] = {-2 * h, -h, h, 2 * h};
                for (int m = 0; m < 4; ++m) {
                    double y[3] = {x[0], x[1], x[2]};
                    y[d] += off[m];
                    f[m] = phase_at(Aeval, y, g.dim, q, core_crossing(s, g, y));
                }
                gc = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
            }
            const double e = A.components[d][i] - gc - gt.transformed_potential.components[d][i];
            e2 += e * e;
        }
        worst = std::max(worst, std::sqrt(e2));
    });
    return worst;
}

}  // namespace covflow
