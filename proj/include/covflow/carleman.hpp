#pragma once

#include "covflow/cutoff.hpp"
#include "covflow/evolve.hpp"

#include <atomic>
#include <cstdlib>
#include <ostream>
#include <string>
#include <thread>

namespace covflow {

struct CarlemanParams {
    double mu = 1.0;
    double eps = 1.0;
    double R = 4.0;
    Vec3 v{1.0, 0.0, 0.0};

    void validate(int dim) const {
        if (!(mu > 0.0) || !(eps > 0.0) || !(R > 0.0)) throw std::invalid_argument("carleman: mu, eps, R must be positive");
        double n = 0.0;
        for (int d = 0; d < dim; ++d) n += v[d] * v[d];
        if (std::abs(std::sqrt(n) - 1.0) > 1e-12) throw std::invalid_argument("carleman: v must be a unit vector");
    }

    // R > 8 mu eps^{-1/2} sup |x^t B|
    bool admissible(double sup_xtB) const { return R > 8.0 * mu / std::sqrt(eps) * sup_xtB; }
};

inline double carleman_log_weight(const double* x, int dim, double t, const CarlemanParams& P) {
    const double s = P.R * t * (1.0 - t);
    double q = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double y = x[d] + s * P.v[d];
        q += y * y;
    }
    return P.mu * q - (1.0 + P.eps) * P.R * P.R * t * (1.0 - t) / (16.0 * P.mu);
}

inline double carleman_weight(const double* x, int dim, double t, const CarlemanParams& P) {
    const double e = carleman_log_weight(x, dim, t, P);
    if (e > 700.0) throw std::overflow_error("carleman_weight: exponent exceeds 700");
    return std::exp(e);
}

// 0 on [0, 1/(2R)], 1 on [1/R, 1 - 1/R], mirrored at the right end.
inline double time_cutoff(double t, double R) {
    const double a = 0.5 / R;
    return smooth_step((t - a) / a) * smooth_step((1.0 - t - a) / a);
}

struct TestFunctionSpec {
    enum class Core { gaussian_bump, modulated_bump } core = Core::gaussian_bump;
    Vec3 center{0.0, 0.0, 0.0};
    double width = 1.0;
    Vec3 wavevector{0.0, 0.0, 0.0};
    double omega = 0.0;          // core time profile e^{i omega t}
    double cutoff_M = 2.0;       // theta_M: 1 for |x| <= M, 0 for |x| >= 2M
    double cutoff_R_time = 0.0;  // eta_R rate; 0 uses the Carleman R of the cell

    void validate(const GridSpec& g) const {
        if (!(width > 0.0)) throw std::invalid_argument("test function: width must be positive");
        if (!(cutoff_M > 0.0)) throw std::invalid_argument("test function: cutoff_M must be positive");
        if (2.0 * cutoff_M > 0.9 * g.half_width)
            throw std::invalid_argument("test function: support 2M exceeds 0.9 L");
        if (cutoff_R_time != 0.0 && !(cutoff_R_time >= 2.0))
            throw std::invalid_argument("test function: cutoff_R_time must be >= 2");
    }
};

inline const char* to_string(TestFunctionSpec::Core c) {
    return c == TestFunctionSpec::Core::gaussian_bump ? "gaussian_bump" : "modulated_bump";
}

// Space-time test function g = theta_M(x) eta_R(t) core(x, t), sampled lazily in t.
struct TestFamily {
    GridSpec grid;
    rvec times;
    rvec spatial;  // theta_M * |core| envelope part (real)
    cvec phase;    // spatial modulation
    double omega = 0.0;
    double R_time = 2.0;
    std::vector<std::size_t> support;  // points where theta_M > 0
    TimeSampler core;                  // optional time-dependent factor (e.g. a trajectory)

    void sample(double t, cvec& out) const {
        const cplx c = time_cutoff(t, R_time) * std::polar(1.0, omega * t);
        out.resize(spatial.size());
        if (core) {
            cvec f(spatial.size());
            core(t, f);
            for (std::size_t i = 0; i < spatial.size(); ++i) out[i] = c * spatial[i] * phase[i] * f[i];
            return;
        }
        for (std::size_t i = 0; i < spatial.size(); ++i) out[i] = c * spatial[i] * phase[i];
    }
    // Time cutoff factor alone.
    double eta(double t) const { return time_cutoff(t, R_time); }
};

inline rvec uniform_times(int samples) {
    if (samples < 3) throw std::invalid_argument("carleman: need at least 3 time samples");
    rvec t(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) t[k] = static_cast<double>(k) / (samples - 1);
    return t;
}

inline TestFamily cutoff_factory(const TestFunctionSpec& s, const GridSpec& g, const rvec& times, double R_time) {
    s.validate(g);
    if (!(R_time >= 2.0)) throw std::invalid_argument("cutoff_factory: time cutoff rate must be >= 2");
    TestFamily f;
    f.grid = g;
    f.times = times;
    f.omega = s.omega;
    f.R_time = R_time;
    f.spatial.resize(g.size());
    f.phase.resize(g.size());
    const bool mod = s.core == TestFunctionSpec::Core::modulated_bump;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0, c2 = 0.0, ph = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            r2 += x[d] * x[d];
            const double y = x[d] - s.center[d];
            c2 += y * y;
            if (mod) ph += s.wavevector[d] * x[d];
        }
        f.spatial[i] = plateau(std::sqrt(r2), s.cutoff_M, 2.0 * s.cutoff_M) * std::exp(-c2 / (s.width * s.width));
        f.phase[i] = std::polar(1.0, ph);
        if (f.spatial[i] != 0.0) f.support.push_back(i);
    });
    return f;
}

// theta_M(x) eta_R(t) f(x, t) for a time-dependent field f on [0, 1].
inline TestFamily product_family(const GridSpec& g, const rvec& times, double cutoff_M, double R_time,
                                 TimeSampler f) {
    if (!(cutoff_M > 0.0) || 2.0 * cutoff_M > 0.9 * g.half_width)
        throw std::invalid_argument("product_family: need 0 < 2M <= 0.9 L");
    if (!(R_time >= 2.0)) throw std::invalid_argument("product_family: time cutoff rate must be >= 2");
    if (!f) throw std::invalid_argument("product_family: missing field sampler");
    TestFamily fam;
    fam.grid = g;
    fam.times = times;
    fam.R_time = R_time;
    fam.spatial.resize(g.size());
    fam.phase.assign(g.size(), cplx(1.0, 0.0));
    fam.core = std::move(f);
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += x[d] * x[d];
        fam.spatial[i] = plateau(std::sqrt(r2), cutoff_M, 2.0 * cutoff_M);
        if (fam.spatial[i] != 0.0) fam.support.push_back(i);
    });
    return fam;
}

struct CarlemanResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double log_lhs = -std::numeric_limits<double>::infinity();
    double log_rhs = -std::numeric_limits<double>::infinity();
    bool admissible = false;

    double ratio() const {
        if (!std::isfinite(log_lhs)) return 0.0;
        return std::exp(log_lhs - log_rhs);
    }
};

namespace detail {

// log(exp(a) + exp(b))
inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log sum_{i in idx} exp(2 logw_i) |f_i|^2, logw indexed like idx
inline double log_weighted_sq(const std::vector<std::size_t>& idx, const rvec& logw, const cvec& f) {
    const double NEG = -std::numeric_limits<double>::infinity();
    double m = NEG;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const double a = std::norm(f[idx[j]]);
        if (a > 0.0) m = std::max(m, 2.0 * logw[j] + std::log(a));
    }
    if (m == NEG) return m;
    double s = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const double a = std::norm(f[idx[j]]);
        if (a > 0.0) s += a * std::exp(2.0 * logw[j] - m);
    }
    return m + std::log(s);
}

inline void check_support(const GridSpec& g, const cvec& f, double t) {
    const double edge = g.half_width - 2.0 * g.spacing();
    double inner = 0.0, outer = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double xi = 0.0;
        for (int d = 0; d < g.dim; ++d) xi = std::max(xi, std::abs(x[d]));
        const double m = std::abs(f[i]);
        if (xi >= edge) outer = std::max(outer, m);
        else inner = std::max(inner, m);
    });
    if (outer > 0.0 && outer > 1e-14 * inner)
        throw std::runtime_error("carleman: test function leaks to the box boundary at t = " + std::to_string(t));
}

}  // namespace detail

// Both sides of the Carleman inequality by trapezoid in t over the family's
// times, with dg/dt by centered differences and weights accumulated in log space.
inline CarlemanResult carleman_sides(const TestFamily& fam, const Potentials& p, const CarlemanParams& P,
                                     double sup_xtB) {
    const GridSpec& g = fam.grid;
    require_same_grid(g, p.grid, "carleman_sides");
    P.validate(g.dim);
    const rvec& T = fam.times;
    if (T.size() < 3) throw std::invalid_argument("carleman: need at least 3 time samples");
    if (T.front() < 0.0 || T.back() > 1.0) throw std::invalid_argument("carleman: times must lie in [0, 1]");

    CarlemanResult r;
    r.admissible = P.admissible(sup_xtB);
    const double NEG = -std::numeric_limits<double>::infinity();
    double logL = NEG, logR = NEG;

    auto vanishes = [](const cvec& f) {
        for (const auto& c : f)
            if (c != cplx(0.0, 0.0)) return false;
        return true;
    };
    cvec prev, cur, next;
    // (d_t - i Delta_A) g vanishes off supp g, so both integrals run over the
    // support only; FFT round-off elsewhere would otherwise meet huge weights.
    const std::vector<std::size_t>& sup = fam.support;
    std::vector<std::array<double, 3>> xs(sup.size());
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        const auto it = std::lower_bound(sup.begin(), sup.end(), i);
        if (it != sup.end() && *it == i) xs[static_cast<std::size_t>(it - sup.begin())] = x;
    });
    rvec logw(sup.size());
    for (std::size_t k = 0; k < T.size(); ++k) {
        const double t = T[k];
        if (k == 0) {
            fam.sample(T[0], cur);
            fam.sample(T[1], next);
            if (!vanishes(cur)) throw std::runtime_error("carleman: test function does not vanish at the initial time");
        } else {
            prev.swap(cur);
            cur.swap(next);
            if (k + 1 < T.size()) fam.sample(T[k + 1], next);
        }
        if (k + 1 == T.size() && !vanishes(cur))
            throw std::runtime_error("carleman: test function does not vanish at the final time");
        detail::check_support(g, cur, t);
        for (std::size_t j = 0; j < sup.size(); ++j) logw[j] = carleman_log_weight(xs[j].data(), g.dim, t, P);
        // (d_t - i Delta_A) g; g vanishes near both end points
        cvec Lg = magnetic_laplacian(g, cur, p.A, p.divA);
        if (k > 0 && k + 1 < T.size()) {
            const double hm = t - T[k - 1], hp = T[k + 1] - t;
            const double cm = -hp / (hm * (hm + hp)), c0 = (hp - hm) / (hm * hp), cp = hm / (hp * (hm + hp));
            for (std::size_t i = 0; i < Lg.size(); ++i) Lg[i] = cm * prev[i] + c0 * cur[i] + cp * next[i] - I * Lg[i];
        } else {
            for (auto& z : Lg) z = -I * z;
        }
        const double lo = k == 0 ? T[0] : 0.5 * (T[k - 1] + T[k]);
        const double hi = k + 1 == T.size() ? T[k] : 0.5 * (T[k] + T[k + 1]);
        const double lw = std::log((hi - lo) * g.cell_volume());
        const double a = detail::log_weighted_sq(sup, logw, cur), b = detail::log_weighted_sq(sup, logw, Lg);
        if (a != NEG) logL = detail::log_add(logL, a + lw);
        if (b != NEG) logR = detail::log_add(logR, b + lw);
    }
    const double pref = P.R / 4.0 * std::sqrt(P.eps / P.mu);
    r.log_lhs = logL == NEG ? NEG : std::log(pref) + 0.5 * logL;
    r.log_rhs = logR == NEG ? NEG : 0.5 * logR;
    r.lhs = std::exp(std::min(r.log_lhs, 700.0));
    r.rhs = std::exp(std::min(r.log_rhs, 700.0));
    return r;
}

struct CarlemanCase {
    int case_id = 0;
    double mu = 0.0, eps = 0.0, R = 0.0;
    int v_index = 0;
    double sup_xtB = 0.0;
    bool admissible = false;
    double lhs = 0.0, rhs = 0.0, ratio = 0.0;
    double log_lhs = 0.0, log_rhs = 0.0;
};

inline int sweep_threads(std::size_t cells) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* e = std::getenv("COVFLOW_THREADS")) {
        const int v = std::atoi(e);
        if (v > 0) n = v;
    }
    return std::max(1, std::min<int>(n, static_cast<int>(cells)));
}

// Index of v among the coordinate axes (0-based), -1 otherwise.
inline int axis_index(const Vec3& v) {
    for (int d = 0; d < 3; ++d)
        if (std::abs(v[d] - 1.0) < 1e-15 && std::abs(v[(d + 1) % 3]) < 1e-15 && std::abs(v[(d + 2) % 3]) < 1e-15)
            return d;
    return -1;
}

inline std::vector<CarlemanCase> carleman_sweep(const GridSpec& g, const Potentials& p, double sup_xtB,
                                                const rvec& mus, const rvec& Rs, double eps, const Vec3& v,
                                                const TestFunctionSpec& spec, int time_samples) {
    const rvec times = uniform_times(time_samples);
    std::vector<CarlemanCase> out;
    for (double mu : mus)
        for (double R : Rs) {
            CarlemanCase c;
            c.case_id = static_cast<int>(out.size());
            c.mu = mu;
            c.eps = eps;
            c.R = R;
            c.v_index = axis_index(v);
            c.sup_xtB = sup_xtB;
            out.push_back(c);
        }
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(out.size());
    auto worker = [&]() {
        for (std::size_t k; (k = next.fetch_add(1)) < out.size();) {
            CarlemanCase& c = out[k];
            try {
                const CarlemanParams P{c.mu, c.eps, c.R, v};
                const double Rt = spec.cutoff_R_time > 0.0 ? spec.cutoff_R_time : std::max(2.0, c.R);
                const TestFamily fam = cutoff_factory(spec, g, times, Rt);
                const CarlemanResult r = carleman_sides(fam, p, P, sup_xtB);
                c.admissible = r.admissible;
                c.lhs = r.lhs;
                c.rhs = r.rhs;
                c.ratio = r.ratio();
                c.log_lhs = r.log_lhs;
                c.log_rhs = r.log_rhs;
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    const int nt = sweep_threads(out.size());
    std::vector<std::thread> pool;
    for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    return out;
}

inline void write_carleman_csv(std::ostream& os, const std::vector<CarlemanCase>& cases) {
    os << "case_id,mu,eps,R,v_index,sup_xtB,admissible,lhs,rhs,ratio\n";
    char buf[512];
    for (const auto& c : cases) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%.17g,%d,%.17g,%.17g,%.17g\n", c.case_id, c.mu, c.eps,
                      c.R, c.v_index, c.sup_xtB, c.admissible ? 1 : 0, c.lhs, c.rhs, c.ratio);
        os << buf;
    }
}

}  // namespace covflow
