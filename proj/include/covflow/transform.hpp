#pragma once

#include "covflow/evolve.hpp"
#include "covflow/gauge.hpp"

#include <string>

namespace covflow {

struct AppellParams {
    double alpha = 1.0;
    double beta = 1.0;
    double a = 0.0;
    double b = 1.0;

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("appell: alpha and beta must be positive");
        if (a == 0.0 && b == 0.0) throw std::invalid_argument("appell: a + ib must be nonzero");
    }

    double denominator(double t) const { return alpha * (1.0 - t) + beta * t; }
    // Worst-case spatial scale factor, used for the coverage condition.
    double coverage_scale() const { return std::sqrt(std::max(alpha / beta, beta / alpha)); }
};

struct AppellTimes {
    double s;
    double g;
    double prefactor;  // g^{n/2}
};

inline AppellTimes appell_map_times(double t, double alpha, double beta, int dim = 2) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("appell_map_times: t must lie in [0, 1]");
    const double D = alpha * (1.0 - t) + beta * t;
    AppellTimes r;
    r.s = beta * t / D;
    r.g = std::sqrt(alpha * beta) / D;
    r.prefactor = std::pow(r.g, 0.5 * dim);
    return r;
}

// Cubic Lagrange interpolation in time through the four snapshots nearest to s.
inline cvec sample_trajectory(const Trajectory& tr, double s) {
    const rvec& T = tr.times;
    const double tol = 1e-12 * std::max(1.0, T.back());
    if (s < T.front() - tol || s > T.back() + tol)
        throw std::out_of_range("trajectory does not cover time " + std::to_string(s));
    for (std::size_t k = 0; k < T.size(); ++k)
        if (T[k] == s) return tr.snapshots[k].values;
    if (T.size() == 1) return tr.snapshots[0].values;
    std::size_t hi = static_cast<std::size_t>(std::upper_bound(T.begin(), T.end(), s) - T.begin());
    hi = std::clamp<std::size_t>(hi, 1, T.size() - 1);
    const std::size_t m = std::min<std::size_t>(4, T.size());
    std::size_t lo = hi >= 2 ? hi - 2 : 0;
    if (lo + m > T.size()) lo = T.size() - m;
    cvec out(tr.snapshots[lo].values.size(), cplx(0.0, 0.0));
    for (std::size_t j = lo; j < lo + m; ++j) {
        double w = 1.0;
        for (std::size_t q = lo; q < lo + m; ++q)
            if (q != j) w *= (s - T[q]) / (T[j] - T[q]);
        const cvec& v = tr.snapshots[j].values;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * v[i];
    }
    return out;
}

namespace detail {

inline rvec scaled_axis(const GridSpec& target, double g) {
    rvec c(static_cast<std::size_t>(target.points));
    for (int j = 0; j < target.points; ++j) c[j] = g * target.coord(j);
    return c;
}

inline void check_coverage(const GridSpec& source, const GridSpec& target, const AppellParams& P) {
    if (source.dim != target.dim) throw std::invalid_argument("appell: source and target dimensions differ");
    const double need = P.coverage_scale() * target.half_width;
    if (source.half_width < need * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "appell: coverage violated, source half width " << source.half_width << " < " << need;
        throw std::invalid_argument(os.str());
    }
}

// Returns samples of f(g x) on the target grid.
inline cvec rescale(const GridSpec& source, const cvec& f, const GridSpec& target, double g) {
    if (source == target && g == 1.0) return f;
    std::vector<rvec> tg(static_cast<std::size_t>(target.dim), scaled_axis(target, g));
    return interpolate_tensor(source, f, tg);
}

inline cplx appell_exponent_rate(const AppellParams& P, double t) {
    return (P.alpha - P.beta) / (4.0 * cplx(P.a, P.b) * P.denominator(t));
}

}  // namespace detail

inline ComplexField appell_forward(const Trajectory& tr, const AppellParams& P, double t, const GridSpec& target) {
    P.validate();
    const GridSpec& src = tr.grid();
    detail::check_coverage(src, target, P);
    const AppellTimes m = appell_map_times(t, P.alpha, P.beta, src.dim);
    const cvec us = sample_trajectory(tr, m.s);
    cvec v = detail::rescale(src, us, target, m.g);
    if (P.alpha != P.beta || m.prefactor != 1.0) {
        const cplx rate = detail::appell_exponent_rate(P, t);
        for_each_point(target, [&](std::size_t i, const std::array<double, 3>& x) {
            double r2 = 0.0;
            for (int d = 0; d < target.dim; ++d) r2 += x[d] * x[d];
            v[i] *= m.prefactor * std::exp(rate * r2);
        });
    }
    return ComplexField(target, std::move(v));
}

inline ComplexField appell_forward(const Trajectory& tr, const AppellParams& P, double t) {
    return appell_forward(tr, P, t, tr.grid());
}

using ScalarPointField = std::function<cplx(const double*)>;

// Source-side inputs of the transform: A (static), its divergence, V = V1 + V2
// and F, all evaluable off-grid. Missing members are zero.
struct SourceFields {
    PointField A;
    std::function<double(const double*)> divA;
    ScalarPointField V;
    ScalarPointField F;
    std::function<ComplexField(double s)> F_sampled;  // time-dependent forcing on a grid; overrides F

    static SourceFields from_specs(const PotentialSpec& s, const GridSpec& g, const ScalarSpec& V1,
                                   const ScalarSpec& V2, const ScalarSpec& F) {
        SourceFields out;
        const int dim = g.dim;
        if (s.kind != PotentialKind::zero) {
            out.A = potential_evaluator(s, g);
            if (s.has_closed_form()) {
                out.divA = [s, g](const double* y) {
                    Mat3 J = jacobian_at(s, g, y);
                    double t = 0.0;
                    for (int d = 0; d < g.dim; ++d) t += J[d][d];
                    return t;
                };
            } else {
                auto div = std::make_shared<rvec>(potential_divergence(s, g));
                out.divA = [div, g](const double* y) { return interpolate_point(g, *div, y); };
            }
        }
        if (!V1.is_zero() || !V2.is_zero())
            out.V = [V1, V2, dim](const double* y) { return V1.at(y, dim) + V2.at(y, dim); };
        if (!F.is_zero()) out.F = [F, dim](const double* y) { return F.at(y, dim); };
        return out;
    }
};

// Fourth-order centered divergence of an evaluable vector field.
inline double numeric_divergence(const PointField& A, const double* y, int dim, double h = 1e-4) {
    double div = 0.0;
    for (int d = 0; d < dim; ++d) {
        double f[4];
        const double off[4] = {-2 * h, -h, h, 2 * h};
        for (int m = 0; m < 4; ++m) {
            double z[3] = {y[0], y[1], dim > 2 ? y[2] : 0.0};
            z[d] += off[m];
            f[m] = A(z)[d];
        }
        div += (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
    }
    return div;
}

struct AppellPotentials {
    RealVectorField A;   // g A(g x)
    rvec divA;           // g^2 (div A)(g x)
    cvec V;              // g^2 V(g x, s)
    cvec F;              // g^{n/2+2} F(g x, s) e^h
    cvec first_order;    // i (alpha - beta) A~.x / ((a+ib)(alpha(1-t)+beta t))
};

inline AppellPotentials appell_potentials(const SourceFields& src, const AppellParams& P, double t,
                                          const GridSpec& target) {
    P.validate();
    const AppellTimes m = appell_map_times(t, P.alpha, P.beta, target.dim);
    const cplx rate = detail::appell_exponent_rate(P, t);
    const cplx ab(P.a, P.b);
    AppellPotentials out;
    out.A = RealVectorField(target);
    out.divA.assign(target.size(), 0.0);
    out.V.assign(target.size(), 0.0);
    out.F.assign(target.size(), 0.0);
    out.first_order.assign(target.size(), 0.0);
    const double fpow = std::pow(m.g, 0.5 * target.dim + 2.0);
    for_each_point(target, [&](std::size_t i, const std::array<double, 3>& x) {
        double y[3] = {m.g * x[0], m.g * x[1], m.g * x[2]};
        double r2 = 0.0;
        for (int d = 0; d < target.dim; ++d) r2 += x[d] * x[d];
        if (src.A) {
            Vec3 a = src.A(y);
            double xa = 0.0;
            for (int d = 0; d < target.dim; ++d) {
                out.A.components[d][i] = m.g * a[d];
                xa += x[d] * m.g * a[d];
            }
            const double dv = src.divA ? src.divA(y) : numeric_divergence(src.A, y, target.dim);
            out.divA[i] = m.g * m.g * dv;
            out.first_order[i] = I * (P.alpha - P.beta) * xa / (ab * P.denominator(t));
        }
        if (src.V) out.V[i] = m.g * m.g * src.V(y);
        if (src.F && !src.F_sampled) out.F[i] = fpow * src.F(y) * std::exp(rate * r2);
    });
    if (src.F_sampled) {
        const ComplexField Fs = src.F_sampled(m.s);
        const cvec Fx = detail::rescale(Fs.grid, Fs.values, target, m.g);
        for_each_point(target, [&](std::size_t i, const std::array<double, 3>& x) {
            double r2 = 0.0;
            for (int d = 0; d < target.dim; ++d) r2 += x[d] * x[d];
            out.F[i] = fpow * Fx[i] * std::exp(rate * r2);
        });
    }
    return out;
}

// Max over times of || d_t u~ - (a+ib)(Delta_{A~} u~ + first_order u~ + V~ u~ + F~) || / ||d_t u~||,
// with d_t u~ by a centered difference of step dt_fd.
inline double appell_residual(const Trajectory& tr, const AppellParams& P, const rvec& times,
                              const SourceFields& src, const GridSpec& target, double dt_fd = 1e-4) {
    P.validate();
    double worst = 0.0;
    const cplx ab(P.a, P.b);
    for (double t : times) {
        if (!(t - dt_fd > 0.0 && t + dt_fd < 1.0)) throw std::invalid_argument("appell_residual: times must be interior");
        const ComplexField up = appell_forward(tr, P, t + dt_fd, target);
        const ComplexField um = appell_forward(tr, P, t - dt_fd, target);
        const ComplexField u = appell_forward(tr, P, t, target);
        const AppellPotentials pot = appell_potentials(src, P, t, target);
        const std::vector<rvec> A = src.A ? pot.A.components : std::vector<rvec>{};
        cvec r = magnetic_laplacian(target, u.values, A, pot.divA);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const cplx q = ab * (r[i] + pot.first_order[i] * u.values[i] + pot.V[i] * u.values[i] + pot.F[i]);
            const cplx dt = (up.values[i] - um.values[i]) / (2.0 * dt_fd);
            num += std::norm(dt - q);
            den += std::norm(dt);
        }
        worst = std::max(worst, den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
    }
    return worst;
}

struct IdentityPair {
    std::string name;
    double lhs;
    double rhs;

    double relative_gap() const {
        const double s = std::max(std::abs(lhs), std::abs(rhs));
        return s > 0.0 ? std::abs(lhs - rhs) / s : 0.0;
    }
};

namespace detail {

// Weight rate on the source side: gamma alpha beta / (alpha s + beta(1-s))^2
// + (alpha - beta) a / (4 (a^2 + b^2) (alpha s + beta (1-s))).
inline double source_rate(const AppellParams& P, double gamma, double s) {
    const double q = P.alpha * s + P.beta * (1.0 - s);
    return gamma * P.alpha * P.beta / (q * q) + (P.alpha - P.beta) * P.a / (4.0 * (P.a * P.a + P.b * P.b) * q);
}

inline double weighted_sq(const GridSpec& g, const cvec& f, double rate) {
    double s = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += x[d] * x[d];
        s += std::exp(2.0 * rate * r2) * std::norm(f[i]);
    });
    return g.cell_volume() * s;
}

inline void check_rate(const GridSpec& g, double rate) {
    const double e = 2.0 * rate * g.dim * g.half_width * g.half_width;
    if (e > 700.0) throw std::overflow_error("appell_norm_identities: weight overflows on the box, reduce gamma");
}

}  // namespace detail

// Both sides of the four change-of-variable identities. The first two are
// evaluated at time t; the space-time pair is integrated with Gauss-Legendre
// over t in [0, t] on the left and the matching s in [0, s(t)] on the right.
inline std::vector<IdentityPair> appell_norm_identities(const Trajectory& tr, const AppellParams& P, double gamma,
                                                        double t, const GridSpec& target,
                                                        const SourceFields& src, const ScalarSpec& F = {},
                                                        int time_nodes = 24) {
    P.validate();
    const GridSpec& sg = tr.grid();
    detail::check_coverage(sg, target, P);
    detail::check_rate(target, gamma);
    const AppellTimes m = appell_map_times(t, P.alpha, P.beta, sg.dim);
    const double rate_s = detail::source_rate(P, gamma, m.s);
    detail::check_rate(sg, rate_s);
    std::vector<IdentityPair> out;

    {
        const ComplexField ut = appell_forward(tr, P, t, target);
        const cvec us = sample_trajectory(tr, m.s);
        out.push_back({"u_norm", std::sqrt(detail::weighted_sq(target, ut.values, gamma)),
                       std::sqrt(detail::weighted_sq(sg, us, rate_s))});
    }
    {
        SourceFields fs;
        if (!F.is_zero()) fs.F = [F, dim = sg.dim](const double* y) { return F.at(y, dim); };
        const AppellPotentials pot = appell_potentials(fs, P, t, target);
        const cvec Fs = F.sample(sg);
        const double D = P.denominator(t);
        out.push_back({"forcing_norm", std::sqrt(detail::weighted_sq(target, pot.F, gamma)),
                       P.alpha * P.beta / (D * D) * std::sqrt(detail::weighted_sq(sg, Fs, rate_s))});
    }

    const Quadrature q = gauss_legendre01(time_nodes);
    const cplx ab(P.a, P.b);
    const double sab = std::sqrt(P.alpha * P.beta);
    double grad_l = 0.0, grad_r = 0.0, x_l = 0.0, x_r = 0.0;
    const rvec r2t = radius_squared(target), r2s = radius_squared(sg);
    std::vector<rvec> As;
    if (src.A) {
        As.assign(static_cast<std::size_t>(sg.dim), rvec(sg.size(), 0.0));
        for_each_point(sg, [&](std::size_t i, const std::array<double, 3>& y) {
            Vec3 a = src.A(y.data());
            for (int d = 0; d < sg.dim; ++d) As[d][i] = a[d];
        });
    }
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
        // left: x-side at time tau in [0, t]
        const double tau = q.nodes[k] * t, wt = q.weights[k] * t;
        const ComplexField ut = appell_forward(tr, P, tau, target);
        const AppellPotentials pot = appell_potentials(src, P, tau, target);
        const std::vector<cvec> gu =
            covariant_gradient(target, ut.values, src.A ? pot.A.components : std::vector<rvec>{});
        double gsum = 0.0, xsum = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double w = std::exp(2.0 * gamma * r2t[i]);
            double gn = 0.0;
            for (int d = 0; d < target.dim; ++d) gn += std::norm(gu[d][i]);
            gsum += w * gn;
            xsum += w * r2t[i] * std::norm(ut.values[i]);
        }
        grad_l += wt * tau * (1.0 - tau) * target.cell_volume() * gsum;
        x_l += wt * tau * (1.0 - tau) * target.cell_volume() * xsum;

        // right: y-side at time s in [0, s(t)]
        const double s = q.nodes[k] * m.s, ws = q.weights[k] * m.s;
        const double qs = P.alpha * s + P.beta * (1.0 - s);
        const double rate = detail::source_rate(P, gamma, s);
        const cvec us = sample_trajectory(tr, s);
        const std::vector<cvec> gy = covariant_gradient(sg, us, As);
        double gs = 0.0, xs = 0.0;
        for_each_point(sg, [&](std::size_t i, const std::array<double, 3>& y) {
            const double w = std::exp(2.0 * rate * r2s[i]);
            double gn = 0.0;
            for (int d = 0; d < sg.dim; ++d) {
                const cplx c = qs / sab * gy[d][i] + (P.alpha - P.beta) * y[d] / (2.0 * ab * sab) * us[i];
                gn += std::norm(c);
            }
            gs += w * gn;
            xs += w * r2s[i] * P.alpha * P.beta / (qs * qs) * std::norm(us[i]);
        });
        grad_r += ws * s * (1.0 - s) * sg.cell_volume() * gs;
        x_r += ws * s * (1.0 - s) * sg.cell_volume() * xs;
    }
    out.push_back({"gradient_spacetime", std::sqrt(grad_l), std::sqrt(grad_r)});
    out.push_back({"moment_spacetime", std::sqrt(x_l), std::sqrt(x_r)});
    return out;
}

// Same space-time pairs with the time Jacobian ds = g^2 dt and s(1-s) = g^2 t(1-t)
// accounted for on the right-hand side (diagnostic companion of the above).
inline std::vector<IdentityPair> appell_spacetime_jacobian_check(const Trajectory& tr, const AppellParams& P,
                                                                 double gamma, double t, const GridSpec& target,
                                                                 const SourceFields& src, int time_nodes = 24) {
    P.validate();
    const GridSpec& sg = tr.grid();
    const Quadrature q = gauss_legendre01(time_nodes);
    const cplx ab(P.a, P.b);
    const double sab = std::sqrt(P.alpha * P.beta);
    const rvec r2s = radius_squared(sg);
    std::vector<rvec> As;
    if (src.A) {
        As.assign(static_cast<std::size_t>(sg.dim), rvec(sg.size(), 0.0));
        for_each_point(sg, [&](std::size_t i, const std::array<double, 3>& y) {
            Vec3 a = src.A(y.data());
            for (int d = 0; d < sg.dim; ++d) As[d][i] = a[d];
        });
    }
    double grad_r = 0.0, x_r = 0.0;
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
        const double tau = q.nodes[k] * t, wt = q.weights[k] * t;
        const AppellTimes m = appell_map_times(tau, P.alpha, P.beta, sg.dim);
        const double s = m.s, qs = P.alpha * s + P.beta * (1.0 - s);
        const double rate = detail::source_rate(P, gamma, s);
        const cvec us = sample_trajectory(tr, s);
        const std::vector<cvec> gy = covariant_gradient(sg, us, As);
        double gs = 0.0, xs = 0.0;
        for_each_point(sg, [&](std::size_t i, const std::array<double, 3>& y) {
            const double w = std::exp(2.0 * rate * r2s[i]);
            double gn = 0.0;
            for (int d = 0; d < sg.dim; ++d)
                gn += std::norm(qs / sab * gy[d][i] + (P.alpha - P.beta) * y[d] / (2.0 * ab * sab) * us[i]);
            gs += w * gn;
            xs += w * r2s[i] * P.alpha * P.beta / (qs * qs) * std::norm(us[i]);
        });
        grad_r += wt * tau * (1.0 - tau) * sg.cell_volume() * gs;
        x_r += wt * tau * (1.0 - tau) * sg.cell_volume() * xs;
    }
    auto lit = appell_norm_identities(tr, P, gamma, t, target, src, {}, time_nodes);
    return {{"gradient_spacetime_dt", lit[2].lhs, std::sqrt(grad_r)}, {"moment_spacetime_dt", lit[3].lhs, std::sqrt(x_r)}};
}

}  // namespace covflow
