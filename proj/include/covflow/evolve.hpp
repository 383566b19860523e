#pragma once

#include "covflow/cutoff.hpp"
#include "covflow/fields.hpp"

#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>

namespace covflow {

struct FlowParams {
    double a = 0.0;
    double b = 1.0;
    double dt = 1e-3;
    double t_end = 1.0;
    int store_every = 1;
    double boundary_tol = 1e-8;

    void validate() const {
        if (!(a >= 0.0)) throw std::invalid_argument("flow: a must be >= 0");
        if (a + std::abs(b) <= 0.0) throw std::invalid_argument("flow: a + ib must be nonzero");
        if (!(dt > 0.0)) throw std::invalid_argument("flow: dt must be positive");
        if (!(t_end > 0.0 && t_end <= 1.0)) throw std::invalid_argument("flow: t_end must lie in (0, 1]");
        if (store_every < 1) throw std::invalid_argument("flow: store_every must be >= 1");
    }
};

// Writes samples of a time-dependent field into out (already sized).
using TimeSampler = std::function<void(double t, cvec& out)>;

struct Potentials {
    GridSpec grid;
    std::vector<rvec> A;  // empty: no magnetic potential
    rvec divA;            // empty: divergence free
    rvec V1;              // real, static; empty: zero
    TimeSampler V2;       // complex, optional
    TimeSampler F;        // optional

    bool magnetic() const { return !A.empty(); }

    static Potentials free(const GridSpec& g) {
        Potentials p;
        p.grid = g;
        return p;
    }

    static Potentials from_spec(const PotentialSpec& s, const GridSpec& g, const ScalarSpec& v1 = {},
                                const ScalarSpec& v2 = {}, const ScalarSpec& f = {}) {
        Potentials p;
        p.grid = g;
        if (s.kind != PotentialKind::zero) {
            p.A = eval_potential(s, g).components;
            p.divA = potential_divergence(s, g);
        }
        if (!v1.is_zero()) {
            if (v1.amplitude.imag() != 0.0) throw std::invalid_argument("V1 must be real");
            cvec c = v1.sample(g);
            p.V1.resize(c.size());
            for (std::size_t i = 0; i < c.size(); ++i) p.V1[i] = c[i].real();
        }
        if (!v2.is_zero()) {
            auto samples = std::make_shared<cvec>(v2.sample(g));
            p.V2 = [samples](double, cvec& out) { out = *samples; };
        }
        if (!f.is_zero()) {
            auto samples = std::make_shared<cvec>(f.sample(g));
            p.F = [samples](double, cvec& out) { out = *samples; };
        }
        return p;
    }
};

// Largest admissible RK4 step for the spectral operator.
inline double stability_bound(const GridSpec& g, double a, double b) {
    const double kmax = std::numbers::pi * g.points / (2.0 * g.half_width) * std::sqrt(static_cast<double>(g.dim));
    return 2.5 / (std::abs(cplx(a, b)) * kmax * kmax);
}

// nabla_A u = nabla u - i A u
inline std::vector<cvec> covariant_gradient(const GridSpec& g, const cvec& u, const std::vector<rvec>& A) {
    std::vector<cvec> grad;
    spectral_derivatives(g, u, &grad, nullptr);
    if (!A.empty())
        for (int d = 0; d < g.dim; ++d)
            for (std::size_t i = 0; i < u.size(); ++i) grad[d][i] -= I * A[d][i] * u[i];
    return grad;
}

// Delta_A u = Delta u - i (div A) u - 2i A.grad u - |A|^2 u; optionally returns grad u.
inline cvec magnetic_laplacian(const GridSpec& g, const cvec& u, const std::vector<rvec>& A, const rvec& divA,
                               std::vector<cvec>* grad_out = nullptr) {
    std::vector<cvec> grad;
    cvec lap;
    spectral_derivatives(g, u, A.empty() && !grad_out ? nullptr : &grad, &lap);
    if (!A.empty()) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            cplx adv = 0.0;
            double a2 = 0.0;
            for (int d = 0; d < g.dim; ++d) {
                adv += A[d][i] * grad[d][i];
                a2 += A[d][i] * A[d][i];
            }
            const double dv = divA.empty() ? 0.0 : divA[i];
            lap[i] += -I * dv * u[i] - 2.0 * I * adv - a2 * u[i];
        }
    }
    if (grad_out) *grad_out = std::move(grad);
    return lap;
}

inline cvec rhs(const cvec& u, const Potentials& p, double a, double b, double t) {
    const GridSpec& g = p.grid;
    cvec out = magnetic_laplacian(g, u, p.A, p.divA);
    if (!p.V1.empty())
        for (std::size_t i = 0; i < u.size(); ++i) out[i] += p.V1[i] * u[i];
    if (p.V2) {
        cvec v(u.size());
        p.V2(t, v);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] += v[i] * u[i];
    }
    if (p.F) {
        cvec f(u.size());
        p.F(t, f);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] += f[i];
    }
    const cplx c(a, b);
    for (auto& z : out) z *= c;
    return out;
}

inline ComplexField rhs(const ComplexField& u, const Potentials& p, double a, double b, double t) {
    require_same_grid(u.grid, p.grid, "rhs");
    return ComplexField(u.grid, rhs(u.values, p, a, b, t));
}

struct Trajectory {
    rvec times;
    std::vector<ComplexField> snapshots;
    FlowParams params;

    const GridSpec& grid() const { return snapshots.front().grid; }
};

// Classical RK4 on the spectral right-hand side.
inline Trajectory evolve(const ComplexField& u0, const Potentials& p, const FlowParams& fp) {
    fp.validate();
    require_same_grid(u0.grid, p.grid, "evolve");
    const GridSpec& g = u0.grid;
    const double bound = stability_bound(g, fp.a, fp.b);
    if (fp.dt > bound) {
        std::ostringstream os;
        os << "evolve: dt = " << fp.dt << " exceeds the stability bound " << bound;
        throw std::invalid_argument(os.str());
    }
    if (!all_finite(u0.values)) throw std::invalid_argument("evolve: non-finite initial data");
    const double bm0 = boundary_mass_fraction(g, u0.values);
    if (bm0 > fp.boundary_tol) {
        std::ostringstream os;
        os << "evolve: initial boundary mass fraction " << bm0 << " exceeds " << fp.boundary_tol;
        throw std::invalid_argument(os.str());
    }

    const long steps = std::max(1L, std::lround(fp.t_end / fp.dt));
    Trajectory tr;
    tr.params = fp;
    tr.times.push_back(0.0);
    tr.snapshots.push_back(u0);

    cvec u = u0.values, tmp(u.size());
    const std::size_t n = u.size();
    for (long k = 0; k < steps; ++k) {
        const double t = k * fp.dt, h = fp.dt;
        cvec k1 = rhs(u, p, fp.a, fp.b, t);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
        cvec k2 = rhs(tmp, p, fp.a, fp.b, t + 0.5 * h);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
        cvec k3 = rhs(tmp, p, fp.a, fp.b, t + 0.5 * h);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * k3[i];
        cvec k4 = rhs(tmp, p, fp.a, fp.b, t + h);
        for (std::size_t i = 0; i < n; ++i) u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        const bool last = k + 1 == steps;
        if ((k + 1) % fp.store_every == 0 || last) {
            const double tn = (k + 1) * fp.dt;
            if (!all_finite(u)) throw std::runtime_error("evolve: solution became non-finite at t = " + std::to_string(tn));
            const double bm = boundary_mass_fraction(g, u);
            if (bm > fp.boundary_tol) {
                std::ostringstream os;
                os << "evolve: boundary mass fraction " << bm << " exceeds " << fp.boundary_tol << " at t = " << tn;
                throw std::runtime_error(os.str());
            }
            tr.times.push_back(tn);
            tr.snapshots.emplace_back(g, u);
        }
    }
    return tr;
}

// x1 x2 damped by a smooth radial bump vanishing for |x| >= 0.75 L. The
// transition spans the whole radius; a narrow band leaves e^{i chi} u
// under-resolved at h = L/32.
inline rvec cutoff_phase(const GridSpec& g, double scale = 1.0) {
    rvec chi(g.size());
    const double outer = 0.75 * g.half_width, inner = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += x[d] * x[d];
        chi[i] = scale * x[0] * x[1] * plateau(std::sqrt(r2), inner, outer);
    });
    return chi;
}

// Relative L2 distance at t_end between evolve(e^{i chi} u0; A + grad chi) and
// e^{i chi} evolve(u0; A). chi must be periodic on the box.
inline double gauge_equivariance_test(const ComplexField& u0, const Potentials& p, const rvec& chi,
                                      const FlowParams& fp) {
    const GridSpec& g = u0.grid;
    if (chi.size() != g.size()) throw std::invalid_argument("gauge_equivariance_test: grid mismatch");
    Potentials q = p;
    if (q.A.empty()) q.A.assign(static_cast<std::size_t>(g.dim), rvec(g.size(), 0.0));
    if (q.divA.empty()) q.divA.assign(g.size(), 0.0);
    for (int d = 0; d < g.dim; ++d) {
        rvec gd = spectral_partial(g, chi, d);
        rvec gdd = spectral_partial(g, gd, d);
        for (std::size_t i = 0; i < g.size(); ++i) {
            q.A[d][i] += gd[i];
            q.divA[i] += gdd[i];
        }
    }
    ComplexField v0(g);
    for (std::size_t i = 0; i < g.size(); ++i) v0.values[i] = std::polar(1.0, chi[i]) * u0.values[i];
    FlowParams once = fp;
    once.store_every = std::numeric_limits<int>::max();
    const Trajectory t1 = evolve(u0, p, once);
    const Trajectory t2 = evolve(v0, q, once);
    const cvec& a = t1.snapshots.back().values;
    const cvec& b = t2.snapshots.back().values;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const cplx ref = std::polar(1.0, chi[i]) * a[i];
        num += std::norm(b[i] - ref);
        den += std::norm(ref);
    }
    return std::sqrt(num / den);
}

// exp(-|x - c|^2 / w^2) e^{i k.x}
inline ComplexField gaussian_field(const GridSpec& g, double width, const Vec3& center = {0, 0, 0},
                                   const Vec3& wavevector = {0, 0, 0}) {
    ComplexField f(g);
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0, ph = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            const double y = x[d] - center[d];
            r2 += y * y;
            ph += wavevector[d] * x[d];
        }
        f.values[i] = std::exp(-r2 / (width * width)) * std::polar(1.0, ph);
    });
    return f;
}

}  // namespace covflow
