#pragma once

#include "covflow/evolve.hpp"

#include <ostream>
#include <string>

namespace covflow {

struct WeightSpec {
    enum class Kind { static_gaussian, interpolating, dissipation, carleman } kind = Kind::static_gaussian;
    double gamma = 0.0;
    double alpha = 1.0, beta = 1.0;
    double horizon = 1.0;  // interpolating: evaluated at t / horizon
    double a = 1.0, b = 0.0;
    double mu = 1.0, eps = 1.0, R = 1.0;
    Vec3 v{0.0, 0.0, 1.0};
    double truncation_radius = 0.0;  // 0: none
    double truncation_width = 0.0;   // flattening band in |x|; 0: 0.35 R

    static WeightSpec static_gaussian(double g) {
        WeightSpec w;
        w.gamma = g;
        return w;
    }
    static WeightSpec interpolating(double alpha, double beta, double horizon = 1.0) {
        WeightSpec w;
        w.kind = Kind::interpolating;
        w.alpha = alpha;
        w.beta = beta;
        w.horizon = horizon;
        return w;
    }
    static WeightSpec dissipation(double g, double a, double b) {
        WeightSpec w;
        w.kind = Kind::dissipation;
        w.gamma = g;
        w.a = a;
        w.b = b;
        return w;
    }
    static WeightSpec carleman(double mu, double eps, double R, const Vec3& v) {
        WeightSpec w;
        w.kind = Kind::carleman;
        w.mu = mu;
        w.eps = eps;
        w.R = R;
        w.v = v;
        return w;
    }

    void validate() const {
        switch (kind) {
            case Kind::static_gaussian:
                if (!(gamma >= 0.0)) throw std::invalid_argument("weight: gamma must be >= 0");
                break;
            case Kind::interpolating:
                if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("weight: alpha, beta must be positive");
                if (!(horizon > 0.0)) throw std::invalid_argument("weight: horizon must be positive");
                break;
            case Kind::dissipation:
                if (!(a > 0.0)) throw std::invalid_argument("weight: dissipation kind requires a > 0");
                if (!(gamma >= 0.0)) throw std::invalid_argument("weight: gamma must be >= 0");
                break;
            case Kind::carleman:
                if (!(mu > 0.0) || !(eps > 0.0) || !(R > 0.0))
                    throw std::invalid_argument("weight: mu, eps, R must be positive");
                break;
        }
        if (truncation_radius < 0.0 || truncation_width < 0.0)
            throw std::invalid_argument("weight: truncation radius and width must be >= 0");
    }

    // |x|^2 -> q(|x|^2): identity up to R^2, C^3 flattening to a constant by (R + width)^2.
    std::array<double, 3> saturate(double rho) const {
        if (truncation_radius <= 0.0) return {rho, 1.0, 0.0};
        const double r1 = truncation_radius, r2 = r1 + (truncation_width > 0.0 ? truncation_width : 0.35 * r1);
        const double p1 = r1 * r1, w = r2 * r2 - p1;
        if (rho <= p1) return {rho, 1.0, 0.0};
        if (rho >= p1 + w) return {p1 + 0.5 * w, 0.0, 0.0};
        const double s = (rho - p1) / w;
        const double Q = s * s * s * s * (s * s - 3.0 * s + 2.5);
        const double dP = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        return {rho - w * Q, (1.0 - s) * (1.0 - s) * (1.0 - s) * (1.0 + 3.0 * s + 6.0 * s * s), -dP / w};
    }

    // Rate c(t) in phi = c(t)|x|^2 and its first two time derivatives.
    std::array<double, 3> rate(double t) const {
        switch (kind) {
            case Kind::static_gaussian: return {gamma, 0.0, 0.0};
            case Kind::interpolating: {
                const double tau = t / horizon, D = alpha * tau + beta * (1.0 - tau), dD = (alpha - beta) / horizon;
                return {1.0 / (D * D), -2.0 * dD / (D * D * D), 6.0 * dD * dD / (D * D * D * D)};
            }
            case Kind::dissipation: {
                const double k = 4.0 * gamma * (a * a + b * b), q = a + k * t;
                return {gamma * a / q, -gamma * a * k / (q * q), 2.0 * gamma * a * k * k / (q * q * q)};
            }
            case Kind::carleman: return {mu, 0.0, 0.0};
        }
        return {0.0, 0.0, 0.0};
    }

    // Coefficient in front of log H in Theta, and the interpolation exponents (p, q).
    double theta_factor(double t) const {
        if (kind != Kind::interpolating) return 1.0;
        const double tau = t / horizon;
        return alpha * tau + beta * (1.0 - tau);
    }
};

inline const char* to_string(WeightSpec::Kind k) {
    switch (k) {
        case WeightSpec::Kind::static_gaussian: return "static_gaussian";
        case WeightSpec::Kind::interpolating: return "interpolating";
        case WeightSpec::Kind::dissipation: return "dissipation";
        case WeightSpec::Kind::carleman: return "carleman";
    }
    return "?";
}

// phi and its derivatives at one point. D^2 phi = hess * Identity when untruncated.
struct WeightValue {
    double phi = 0.0;
    Vec3 grad{0.0, 0.0, 0.0};
    double hess = 0.0;
    double lap = 0.0;
    double phi_t = 0.0;
    Vec3 grad_t{0.0, 0.0, 0.0};
    double phi_tt = 0.0;
};

inline WeightValue evaluate_weight(const WeightSpec& w, const double* x, int dim, double t) {
    // phi = c(t) q(|y|^2) + d(t) with y = x (+ R t(1-t) v for the carleman kind).
    WeightValue r;
    Vec3 y{0.0, 0.0, 0.0}, yt{0.0, 0.0, 0.0}, ytt{0.0, 0.0, 0.0};
    std::array<double, 3> c{0.0, 0.0, 0.0}, dd{0.0, 0.0, 0.0};
    if (w.kind == WeightSpec::Kind::carleman) {
        const double s = w.R * t * (1.0 - t), st = w.R * (1.0 - 2.0 * t), stt = -2.0 * w.R;
        const double k = (1.0 + w.eps) * w.R * w.R / (16.0 * w.mu);
        for (int d = 0; d < dim; ++d) {
            y[d] = x[d] + s * w.v[d];
            yt[d] = st * w.v[d];
            ytt[d] = stt * w.v[d];
        }
        c = {w.mu, 0.0, 0.0};
        dd = {-k * t * (1.0 - t), -k * (1.0 - 2.0 * t), 2.0 * k};
    } else {
        for (int d = 0; d < dim; ++d) y[d] = x[d];
        c = w.rate(t);
    }
    double rho = 0.0, rho_t = 0.0, rho_tt = 0.0;
    for (int d = 0; d < dim; ++d) {
        rho += y[d] * y[d];
        rho_t += 2.0 * y[d] * yt[d];
        rho_tt += 2.0 * (yt[d] * yt[d] + y[d] * ytt[d]);
    }
    const auto q = w.saturate(rho);
    r.phi = c[0] * q[0] + dd[0];
    r.phi_t = c[1] * q[0] + c[0] * q[1] * rho_t + dd[1];
    r.phi_tt = c[2] * q[0] + 2.0 * c[1] * q[1] * rho_t + c[0] * (q[2] * rho_t * rho_t + q[1] * rho_tt) + dd[2];
    for (int d = 0; d < dim; ++d) {
        r.grad[d] = 2.0 * c[0] * q[1] * y[d];
        // d/dt of 2 c q'(rho) y
        r.grad_t[d] = 2.0 * (c[1] * q[1] + c[0] * q[2] * rho_t) * y[d] + 2.0 * c[0] * q[1] * yt[d];
    }
    r.hess = 2.0 * c[0] * q[1];
    r.lap = 2.0 * c[0] * (dim * q[1] + 2.0 * q[2] * rho);
    return r;
}

inline rvec weight_exponent(const WeightSpec& w, const GridSpec& g, double t) {
    rvec phi(g.size());
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        phi[i] = evaluate_weight(w, x.data(), g.dim, t).phi;
    });
    return phi;
}

// Rejects weights that overflow on the grid or are too steep near the boundary.
inline void check_weight_admissible(const WeightSpec& w, const GridSpec& g, double t) {
    w.validate();
    const rvec phi = weight_exponent(w, g, t);
    double m = 0.0;
    for (double p : phi) m = std::max(m, 2.0 * p);
    if (m > 700.0) {
        std::ostringstream os;
        os << "weight overflows on the grid (max exponent " << m << " > 700)";
        // phi is linear in the rate for the Gaussian kinds
        if (w.kind != WeightSpec::Kind::carleman) os << "; maximal admissible gamma is " << w.rate(t)[0] * 700.0 / m;
        throw std::overflow_error(os.str());
    }
}

inline cvec weighted_values(const WeightSpec& w, const GridSpec& g, const cvec& u, double t) {
    const rvec phi = weight_exponent(w, g, t);
    cvec v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) v[i] = std::exp(phi[i]) * u[i];
    return v;
}

inline constexpr double weighted_boundary_tol = 1e-6;

struct ConvexityReport {
    rvec times;
    rvec H;
    rvec logH;
    rvec theta;
    rvec d2_logH;
    rvec d2_theta;
    rvec interpolation_gap;
    rvec boundary_mass;
    double min_d2_logH = 0.0;
    double min_second_difference = 0.0;  // of theta
};

// Centered second differences on a possibly nonuniform grid; NaN at the ends.
inline rvec second_differences(const rvec& t, const rvec& y) {
    rvec d(y.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 1; k + 1 < y.size(); ++k) {
        const double hm = t[k] - t[k - 1], hp = t[k + 1] - t[k];
        d[k] = 2.0 * ((y[k + 1] - y[k]) / hp - (y[k] - y[k - 1]) / hm) / (hp + hm);
    }
    return d;
}

inline double min_interior(const rvec& d) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < d.size(); ++k) m = std::min(m, d[k]);
    return m;
}

inline void fill_convexity(ConvexityReport& r, const WeightSpec& w) {
    const std::size_t n = r.H.size();
    r.logH.resize(n);
    r.theta.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        r.logH[k] = std::log(r.H[k]);
        r.theta[k] = w.theta_factor(r.times[k]) * r.logH[k];
    }
    r.d2_logH = second_differences(r.times, r.logH);
    r.d2_theta = second_differences(r.times, r.theta);
    r.min_d2_logH = min_interior(r.d2_logH);
    r.min_second_difference = min_interior(r.d2_theta);

    // H(t) - H(0)^p H(T)^q with the exponents of the interpolation bound.
    r.interpolation_gap.assign(n, 0.0);
    if (n >= 2) {
        const double T = r.times.back();
        for (std::size_t k = 0; k < n; ++k) {
            double p, q;
            if (w.kind == WeightSpec::Kind::interpolating) {
                const double tau = r.times[k] / w.horizon, D = w.alpha * tau + w.beta * (1.0 - tau);
                p = w.beta * (1.0 - tau) / D;
                q = w.alpha * tau / D;
            } else {
                q = T > 0.0 ? r.times[k] / T : 0.0;
                p = 1.0 - q;
            }
            r.interpolation_gap[k] = r.H[k] - std::pow(r.H.front(), p) * std::pow(r.H.back(), q);
        }
    }
}

inline ConvexityReport weighted_H(const Trajectory& tr, const WeightSpec& w) {
    const GridSpec& g = tr.grid();
    ConvexityReport r;
    r.times = tr.times;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double t = tr.times[k];
        check_weight_admissible(w, g, t);
        const cvec v = weighted_values(w, g, tr.snapshots[k].values, t);
        const double bm = boundary_mass_fraction(g, v);
        if (bm > weighted_boundary_tol) {
            std::ostringstream os;
            os << "weighted_H: weighted boundary mass " << bm << " exceeds " << weighted_boundary_tol << " at t = " << t;
            throw std::runtime_error(os.str());
        }
        r.H.push_back(l2_norm(g, v));
        r.boundary_mass.push_back(bm);
    }
    fill_convexity(r, w);
    return r;
}

struct ConvexityVerdict {
    double min_d2_logH;
    double min_d2_theta;
    bool pass;
};

inline ConvexityVerdict convexity_check(const ConvexityReport& r, double tol) {
    if (r.times.size() < 3) throw std::invalid_argument("convexity_check: need at least 3 samples");
    return {r.min_d2_logH, r.min_second_difference, r.min_second_difference >= -tol};
}

// Plain series check, used for negative controls.
inline bool series_is_convex(const rvec& t, const rvec& y, double tol) {
    if (t.size() < 3 || t.size() != y.size()) throw std::invalid_argument("series_is_convex: need >= 3 matched samples");
    return min_interior(second_differences(t, y)) >= -tol;
}

enum class Conjugated { S, A };

// S = a(D_A + |grad phi|^2) - ib(lap phi + 2 grad phi . grad_A) + phi_t
// A = ib(D_A + |grad phi|^2) - a(lap phi + 2 grad phi . grad_A)
inline cvec conjugated_apply(const GridSpec& g, const cvec& v, const WeightSpec& w, const Potentials& p, double a,
                             double b, Conjugated which, double t) {
    require_same_grid(g, p.grid, "conjugated_apply");
    std::vector<cvec> grad;
    cvec out = magnetic_laplacian(g, v, p.A, p.divA, &grad);
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        const WeightValue wv = evaluate_weight(w, x.data(), g.dim, t);
        double g2 = 0.0;
        cplx drift = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            g2 += wv.grad[d] * wv.grad[d];
            const cplx ga = grad[d][i] - (p.A.empty() ? 0.0 : I * p.A[d][i] * v[i]);
            drift += wv.grad[d] * ga;
        }
        const cplx sym = out[i] + g2 * v[i];
        const cplx first = wv.lap * v[i] + 2.0 * drift;
        if (which == Conjugated::S)
            out[i] = a * sym - I * b * first + wv.phi_t * v[i];
        else
            out[i] = I * b * sym - a * first;
    });
    return out;
}

namespace detail {

inline cvec total_potential(const Potentials& p, double t) {
    const std::size_t n = p.grid.size();
    cvec V(n, 0.0);
    if (!p.V1.empty())
        for (std::size_t i = 0; i < n; ++i) V[i] += p.V1[i];
    if (p.V2) {
        cvec v2(n);
        p.V2(t, v2);
        for (std::size_t i = 0; i < n; ++i) V[i] += v2[i];
    }
    return V;
}

inline cvec forcing(const Potentials& p, double t) {
    cvec F(p.grid.size(), 0.0);
    if (p.F) p.F(t, F);
    return F;
}

}  // namespace detail

// Max relative L2 residual of dv/dt = (S + A)v + (a+ib)(Vv + e^phi F) over
// interior snapshots, dv/dt by three-point differences.
inline double conjugation_residual(const Trajectory& tr, const WeightSpec& w, const Potentials& p, double a, double b) {
    const GridSpec& g = tr.grid();
    if (tr.times.size() < 3) throw std::invalid_argument("conjugation_residual: need at least 3 snapshots");
    const cplx ab(a, b);
    std::vector<cvec> vs;
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        vs.push_back(weighted_values(w, g, tr.snapshots[k].values, tr.times[k]));
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < tr.times.size(); ++k) {
        const double t = tr.times[k], hm = t - tr.times[k - 1], hp = tr.times[k + 1] - t;
        const double cm = -hp / (hm * (hm + hp)), c0 = (hp - hm) / (hm * hp), cp = hm / (hp * (hm + hp));
        const cvec& v = vs[k];
        const cvec S = conjugated_apply(g, v, w, p, a, b, Conjugated::S, t);
        const cvec A = conjugated_apply(g, v, w, p, a, b, Conjugated::A, t);
        const cvec V = detail::total_potential(p, t);
        const cvec F = detail::forcing(p, t);
        const rvec phi = weight_exponent(w, g, t);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const cplx dv = cm * vs[k - 1][i] + c0 * v[i] + cp * vs[k + 1][i];
            const cplx r = dv - S[i] - A[i] - ab * (V[i] * v[i] + std::exp(phi[i]) * F[i]);
            num += std::norm(r);
            den += std::norm(dv);
        }
        worst = std::max(worst, den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
    }
    return worst;
}

struct CommutatorTerms {
    double hessian_gradient = 0.0;   // 4 (a^2+b^2) int grad_A f . D^2phi grad_A f
    double bilaplacian = 0.0;        // -(a^2+b^2) int |f|^2 lap^2 phi (zero for quadratic weights)
    double hessian_phi = 0.0;        // 4 (a^2+b^2) int |f|^2 grad phi . D^2phi grad phi
    double magnetic = 0.0;           // -4 (a^2+b^2) Im int f (grad phi)^t B . conj(grad_A f)
    double time_gradient = 0.0;      // 2b Im int conj(f) grad phi_t . grad_A f
    double time_phi = 0.0;           // 2a int |f|^2 grad phi . grad phi_t
    double st_gradient = 0.0;        // S_t: 2b Im int conj(f) grad phi_t . grad_A f
    double st_phi = 0.0;             // S_t: 2a int |f|^2 grad phi . grad phi_t
    double st_tt = 0.0;              // S_t: int phi_tt |f|^2
    double norm_sq = 0.0;

    double commutator() const {
        return hessian_gradient + bilaplacian + hessian_phi + magnetic + time_gradient + time_phi;
    }
    double total() const { return commutator() + st_gradient + st_phi + st_tt; }
};

// <(S_t + [S, A]) f, f> term by term, for static A. B may be null when A = 0.
inline CommutatorTerms commutator_form(const GridSpec& g, const cvec& f, const WeightSpec& w, const Potentials& p,
                                       const MagneticTensor* B, double a, double b, double t) {
    require_same_grid(g, p.grid, "commutator_form");
    if (w.truncation_radius > 0.0) throw std::invalid_argument("commutator_form: truncated weights are not supported");
    if (p.magnetic() && !B) throw std::invalid_argument("commutator_form: magnetic tensor required when A != 0");
    const double ab2 = a * a + b * b;
    const std::vector<cvec> gA = covariant_gradient(g, f, p.A);
    CommutatorTerms c;
    double hg = 0.0, hp = 0.0, mag = 0.0, tg = 0.0, tp = 0.0, tt = 0.0, n2 = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        const WeightValue wv = evaluate_weight(w, x.data(), g.dim, t);
        const double m = std::norm(f[i]);
        double grad2 = 0.0, gphi2 = 0.0, gg = 0.0;
        cplx drift_t = 0.0, mterm = 0.0;
        for (int k = 0; k < g.dim; ++k) {
            grad2 += std::norm(gA[k][i]);
            gphi2 += wv.grad[k] * wv.grad[k];
            gg += wv.grad[k] * wv.grad_t[k];
            drift_t += wv.grad_t[k] * gA[k][i];
            if (B) {
                double pb = 0.0;
                for (int j = 0; j < g.dim; ++j) pb += wv.grad[j] * B->at(j, k, i);
                mterm += f[i] * pb * std::conj(gA[k][i]);
            }
        }
        hg += wv.hess * grad2;
        hp += wv.hess * gphi2 * m;
        mag += mterm.imag();
        tg += (std::conj(f[i]) * drift_t).imag();
        tp += m * gg;
        tt += wv.phi_tt * m;
        n2 += m;
    });
    const double h = g.cell_volume();
    c.hessian_gradient = 4.0 * ab2 * h * hg;
    c.hessian_phi = 4.0 * ab2 * h * hp;
    c.magnetic = -4.0 * ab2 * h * mag;
    c.time_gradient = 2.0 * b * h * tg;
    c.time_phi = 2.0 * a * h * tp;
    c.st_gradient = c.time_gradient;
    c.st_phi = c.time_phi;
    c.st_tt = h * tt;
    c.norm_sq = h * n2;
    return c;
}

// <[S, A] f, f> by applying the operators directly; an independent check of
// the term-by-term form (spectral, so f must be well inside the box).
inline double commutator_direct(const GridSpec& g, const cvec& f, const WeightSpec& w, const Potentials& p, double a,
                                double b, double t) {
    const cvec Af = conjugated_apply(g, f, w, p, a, b, Conjugated::A, t);
    const cvec Sf = conjugated_apply(g, f, w, p, a, b, Conjugated::S, t);
    const cvec SAf = conjugated_apply(g, Af, w, p, a, b, Conjugated::S, t);
    const cvec ASf = conjugated_apply(g, Sf, w, p, a, b, Conjugated::A, t);
    cplx s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (SAf[i] - ASf[i]) * std::conj(f[i]);
    return (g.cell_volume() * s).real();
}

struct DissipationResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double M_T = 0.0;
    double ratio() const { return rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0); }
};

namespace detail {

inline std::size_t snapshot_index(const Trajectory& tr, double T) {
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        if (std::abs(tr.times[k] - T) <= 1e-9 * std::max(1.0, T)) return k;
    throw std::invalid_argument("no snapshot stored at t = " + std::to_string(T));
}

}  // namespace detail

// Both sides of the dissipation inequality at time T (a snapshot time).
inline DissipationResult dissipation_check(const Trajectory& tr, const Potentials& p, double gamma, double T) {
    const double a = tr.params.a, b = tr.params.b;
    if (!(a > 0.0)) throw std::invalid_argument("dissipation_check: requires a > 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("dissipation_check: gamma must be >= 0");
    const GridSpec& g = tr.grid();
    const WeightSpec w = WeightSpec::dissipation(gamma, a, b);
    const std::size_t K = detail::snapshot_index(tr, T);
    check_weight_admissible(w, g, 0.0);

    // Trapezoid in time for M_T and the forcing integral.
    double M = 0.0, Fint = 0.0;
    double prevM = 0.0, prevF = 0.0;
    for (std::size_t k = 0; k <= K; ++k) {
        const double t = tr.times[k];
        const cvec V = detail::total_potential(p, t);
        double m = 0.0;
        for (const auto& z : V) m = std::max(m, std::abs(a * std::max(z.real(), 0.0) - b * z.imag()));
        double fn = 0.0;
        if (p.F) fn = l2_norm(g, weighted_values(w, g, detail::forcing(p, t), t));
        if (k > 0) {
            const double dt = t - tr.times[k - 1];
            M += 0.5 * dt * (m + prevM);
            Fint += 0.5 * dt * (fn + prevF);
        }
        prevM = m;
        prevF = fn;
    }
    DissipationResult r;
    r.M_T = M;
    r.lhs = std::exp(-M) * l2_norm(g, weighted_values(w, g, tr.snapshots[K].values, T));
    r.rhs = l2_norm(g, weighted_values(WeightSpec::static_gaussian(gamma), g, tr.snapshots[0].values, 0.0)) +
            std::sqrt(a * a + b * b) * Fint;
    return r;
}

struct GradientBound {
    double gradient_term = 0.0;  // ||sqrt(t(1-t)) e^phi grad_A u||
    double moment_term = 0.0;    // ||sqrt(t(1-t)) gamma e^phi |x| u||
    double bracket = 0.0;        // (M1 + sqrt(M_A) + 1) sup H + sup ||e^phi F||
    rvec grad_series;            // ||e^phi grad_A u(t_k)||
    double lhs() const { return gradient_term + moment_term; }
    double ratio() const { return bracket > 0.0 ? lhs() / bracket : 0.0; }
};

// Time runs over tau = t / t_end in [0, 1]. A_of_t, when set, replaces p.A.
inline GradientBound gradient_bound_check(const Trajectory& tr, const WeightSpec& w, const Potentials& p, double M1,
                                          double M_A,
                                          const std::function<std::vector<rvec>(double)>& A_of_t = {}) {
    const GridSpec& g = tr.grid();
    const double T = tr.times.back();
    GradientBound r;
    double supH = 0.0, supF = 0.0, G = 0.0, X = 0.0, prevG = 0.0, prevX = 0.0;
    const rvec r2 = radius_squared(g);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double t = tr.times[k], tau = t / T;
        check_weight_admissible(w, g, t);
        const rvec phi = weight_exponent(w, g, t);
        const cvec& u = tr.snapshots[k].values;
        const std::vector<cvec> gA = covariant_gradient(g, u, A_of_t ? A_of_t(t) : p.A);
        const double c = w.rate(t)[0];
        double gs = 0.0, xs = 0.0, hs = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double e2 = std::exp(2.0 * phi[i]);
            double gn = 0.0;
            for (int d = 0; d < g.dim; ++d) gn += std::norm(gA[d][i]);
            gs += e2 * gn;
            xs += e2 * c * c * r2[i] * std::norm(u[i]);
            hs += e2 * std::norm(u[i]);
        }
        gs *= g.cell_volume();
        xs *= g.cell_volume();
        r.grad_series.push_back(std::sqrt(gs));
        supH = std::max(supH, std::sqrt(hs * g.cell_volume()));
        if (p.F) supF = std::max(supF, l2_norm(g, weighted_values(w, g, detail::forcing(p, t), t)));
        const double wt = tau * (1.0 - tau);
        if (k > 0) {
            const double dtau = (t - tr.times[k - 1]) / T;
            G += 0.5 * dtau * (wt * gs + prevG);
            X += 0.5 * dtau * (wt * xs + prevX);
        }
        prevG = wt * gs;
        prevX = wt * xs;
    }
    r.gradient_term = std::sqrt(G);
    r.moment_term = std::sqrt(X);
    r.bracket = (M1 + std::sqrt(M_A) + 1.0) * supH + supF;
    return r;
}

inline void write_monitors_csv(std::ostream& os, const ConvexityReport& r, const rvec& grad_series) {
    os << "t,H,logH,theta,d2_logH,d2_theta,grad_lhs,boundary_mass\n";
    char buf[512];
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        const double gl = k < grad_series.size() ? grad_series[k] : std::numeric_limits<double>::quiet_NaN();
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.times[k], r.H[k],
                      r.logH[k], r.theta[k], r.d2_logH[k], r.d2_theta[k], gl, r.boundary_mass[k]);
        os << buf;
    }
}

}  // namespace covflow
