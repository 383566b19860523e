#pragma once

#include "covflow/carleman.hpp"
#include "covflow/config.hpp"
#include "covflow/gauge.hpp"
#include "covflow/monitors.hpp"
#include "covflow/transform.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace covflow {

inline constexpr double pair_slack = 1e-6;
inline constexpr double carleman_pair_slack = 5e-3;
inline constexpr double gauge_transversality_tol = 1e-8;
inline constexpr double gauge_fixed_point_tol = 1e-8;
inline constexpr double gauge_pure_tol = 1e-10;
inline constexpr int transformed_samples = 41;
inline const rvec eps_samples{1e-2, 1e-3, 1e-4};

struct InequalityPair {
    std::string anchor;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = pair_slack;

    double ratio() const {
        if (rhs > 0.0) return lhs / rhs;
        return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    bool pass() const { return lhs <= rhs * (1.0 + slack); }
};

using NamedValues = std::vector<std::pair<std::string, double>>;

struct StageRecord {
    std::string name;
    bool pass = true;
    NamedValues metrics;
};

struct PipelineReport {
    std::string config_hash;
    std::vector<StageRecord> stages;
    std::vector<InequalityPair> pairs;
    NamedValues defects;
    ConvexityReport convexity;
    rvec grad_series;
    std::vector<CarlemanCase> carleman;

    bool pass() const {
        for (const auto& s : stages)
            if (!s.pass) return false;
        for (const auto& p : pairs)
            if (!p.pass()) return false;
        return true;
    }
    double defect(const std::string& name) const {
        for (const auto& [k, v] : defects)
            if (k == name) return v;
        throw std::out_of_range("no defect named " + name);
    }
    const InequalityPair& pair(const std::string& anchor) const {
        for (const auto& p : pairs)
            if (p.anchor == anchor) return p;
        throw std::out_of_range("no pair with anchor " + anchor);
    }
};

struct PipelineError : std::runtime_error {
    std::string stage;
    PipelineError(const std::string& s, const std::string& msg)
        : std::runtime_error("stage '" + s + "' failed: " + msg), stage(s) {}
};

struct PipelineOptions {
    bool eps_sweep = true;
    std::function<void(const std::string&)> progress;
};

namespace detail {

// e^{tau (Delta_A + V1)} f by RK4 at half the stability bound.
inline cvec heat_flow(const Potentials& hp, cvec f, double tau) {
    if (tau <= 0.0) return f;
    const GridSpec& g = hp.grid;
    const long n = std::max(1L, static_cast<long>(std::ceil(tau / (0.5 * stability_bound(g, 1.0, 0.0)))));
    const double h = tau / n;
    cvec tmp(f.size());
    for (long k = 0; k < n; ++k) {
        const cvec k1 = rhs(f, hp, 1.0, 0.0, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) tmp[i] = f[i] + 0.5 * h * k1[i];
        const cvec k2 = rhs(tmp, hp, 1.0, 0.0, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) tmp[i] = f[i] + 0.5 * h * k2[i];
        const cvec k3 = rhs(tmp, hp, 1.0, 0.0, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) tmp[i] = f[i] + h * k3[i];
        const cvec k4 = rhs(tmp, hp, 1.0, 0.0, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return f;
}

inline WeightSpec truncated_gaussian(double c, double radius) {
    WeightSpec w = WeightSpec::static_gaussian(c);
    w.truncation_radius = radius;
    return w;
}

// || e^{c q(|x|^2)} f || with the shared truncation q.
inline double wnorm(const GridSpec& g, const cvec& f, double c, double radius) {
    return l2_norm(g, weighted_values(truncated_gaussian(c, radius), g, f, 0.0));
}

inline double wsup(const GridSpec& g, const cvec& f, double c, double radius) {
    double m = 0.0;
    for (const auto& z : weighted_values(truncated_gaussian(c, radius), g, f, 0.0)) m = std::max(m, std::abs(z));
    return m;
}

// Radius keeping the flat weight value e^{c q} below 1e6, so the ~1e-10
// aliasing floor of a non-band-limited datum stays off the boundary guard.
inline double auto_truncation(double c) { return std::sqrt(13.8 / (1.41 * c)); }

// g A~(g x) on the target grid.
inline std::vector<rvec> transformed_potential(const PointField& A, const AppellParams& P, double t,
                                               const GridSpec& target) {
    const double gt = appell_map_times(t, P.alpha, P.beta, target.dim).g;
    std::vector<rvec> out(static_cast<std::size_t>(target.dim), rvec(target.size(), 0.0));
    for_each_point(target, [&](std::size_t i, const std::array<double, 3>& x) {
        const double y[3] = {gt * x[0], gt * x[1], gt * x[2]};
        const Vec3 a = A(y);
        for (int d = 0; d < target.dim; ++d) out[d][i] = gt * a[d];
    });
    return out;
}

inline double x_dot(const GridSpec& g, const std::vector<rvec>& A) {
    double m = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double s = 0.0;
        for (int d = 0; d < g.dim; ++d) s += x[d] * A[d][i];
        m = std::max(m, std::abs(s));
    });
    return m;
}

inline std::string eps_tag(double e) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0e", e);
    return buf;
}

}  // namespace detail

inline void check_pipeline_config(const ExperimentConfig& c) {
    c.validate();
    if (c.a != 0.0 || c.b != 1.0)
        throw ConfigError("pipeline: [flow] requires a = 0 and b = 1 (the Schroedinger flow is regularized internally)");
    if (!c.F.is_zero())
        throw ConfigError("pipeline: [scalar] f_kind must be zero; the forcing of the regularized flow is V2 u");
}

inline PipelineReport run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& opt = {}) {
    check_pipeline_config(cfg);
    const GridSpec& g = cfg.grid;
    const int dim = g.dim;
    const PotentialSpec& spec = cfg.potential;
    const double T = cfg.t_end;
    auto note = [&](const std::string& s) {
        if (opt.progress) opt.progress(s);
    };

    PipelineReport rep;
    rep.config_hash = config_hash(cfg);
    auto defect = [&](const std::string& k, double v) { rep.defects.emplace_back(k, v); };
    auto add_pair = [&](StageRecord& st, const std::string& anchor, double lhs, double rhs,
                        double slack = pair_slack) {
        rep.pairs.push_back({anchor, lhs, rhs, slack});
        st.pass = st.pass && rep.pairs.back().pass();
    };
    auto stage = [&](const std::string& name, auto&& body) {
        note(name);
        StageRecord st;
        st.name = name;
        try {
            body(st);
        } catch (const PipelineError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError(name, e.what());
        }
        rep.stages.push_back(std::move(st));
    };

    const ComplexField u0 = gaussian_field(g, cfg.u0_width, {0.0, 0.0, 0.0}, {cfg.u0_kx, 0.0, 0.0});
    const double u0_norm = l2_norm(u0);
    const Quadrature quad = gauss_legendre01(cfg.quadrature_nodes);

    // Step I: transversal gauge
    PointField At_eval;
    Potentials red = Potentials::free(g);
    stage("gauge_reduction", [&](StageRecord& st) {
        const GaugeTransform gt = cronstrom_potential(spec, g, cfg.quadrature_nodes);
        defect("gauge_transversality", gt.transversality_defect);
        defect("gauge_dA_transversality", gt.dA_transversality_defect);
        const double sup_red = sup_norm(gt.transformed_potential);
        defect("gauge_reduced_sup", sup_red);
        st.pass = gt.transversality_defect <= gauge_transversality_tol;
        if (spec.kind == PotentialKind::zero) return;

        defect("gauge_cross_identity", cross_identity_check(spec, g, cfg.quadrature_nodes));
        const PointField psi = psi_evaluator(spec, g);
        At_eval = [psi, quad, dim](const double* y) { return transversal_at(psi, y, dim, quad); };
        red.A = gt.transformed_potential.components;
        red.divA.assign(g.size(), 0.0);
        for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
            red.divA[i] = numeric_divergence(At_eval, x.data(), dim);
        });
        if (spec.kind == PotentialKind::constant_field) {
            const RealVectorField A = eval_potential(spec, g);
            double m = 0.0;
            for (int d = 0; d < dim; ++d)
                for (std::size_t i = 0; i < g.size(); ++i)
                    m = std::max(m, std::abs(A.components[d][i] - red.A[d][i]));
            defect("gauge_fixed_point", m);
            st.pass = st.pass && m <= gauge_fixed_point_tol;
        }
        if (spec.kind == PotentialKind::pure_gauge) st.pass = st.pass && sup_red <= gauge_pure_tol;
        st.metrics.emplace_back("quadrature_nodes", cfg.quadrature_nodes);
    });

    // Reduced problem: datum given in the transversal gauge.
    if (!cfg.V1.is_zero()) {
        const cvec v = cfg.V1.sample(g);
        red.V1.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) red.V1[i] = v[i].real();
    }
    Potentials heat = red;  // Delta_A + V1
    if (!cfg.V2.is_zero()) {
        auto s = std::make_shared<cvec>(cfg.V2.sample(g));
        red.V2 = [s](double, cvec& out) { out = *s; };
    }
    const cvec V2s = cfg.V2.sample(g);
    const double V1sup = cfg.V1.sup_abs(g), V2sup = cfg.V2.sup_abs(g);
    const double N1 = std::exp(cfg.V2.sup_imag(g));

    Trajectory base;
    stage("schroedinger_flow", [&](StageRecord& st) {
        base = evolve(u0, red, FlowParams{0.0, 1.0, cfg.dt, T, 1});
        double drift = 0.0;
        for (const auto& s : base.snapshots) drift = std::max(drift, std::abs(l2_norm(s) - u0_norm) / u0_norm);
        st.metrics.emplace_back("snapshots", static_cast<double>(base.times.size()));
        st.metrics.emplace_back("norm_drift", drift);
        if (spec.kind != PotentialKind::zero && !spec.is_core_regularized()) {
            // the same flow in the original gauge, pulled back by the phase
            const GaugeTransform gt = cronstrom_potential(spec, g, cfg.quadrature_nodes);
            Potentials orig = Potentials::from_spec(spec, g, cfg.V1, cfg.V2);
            const Trajectory to = evolve(apply_gauge(u0, gt.phase, 1), orig, FlowParams{0.0, 1.0, cfg.dt, T, std::numeric_limits<int>::max()});
            const ComplexField back = apply_gauge(to.snapshots.back(), gt.phase, -1);
            cvec diff(back.values.size());
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = back.values[i] - base.snapshots.back().values[i];
            defect("gauge_flow_equivalence", l2_norm(g, diff) / l2_norm(base.snapshots.back()));
        }
    });

    // F_eps(t) = i/(eps+i) e^{eps t (Delta_A + V1)} (V2 u(t)), u at real time t.
    auto forcing_at = [&](double eps, double t) {
        cvec f = sample_trajectory(base, std::clamp(t, 0.0, T));
        for (std::size_t i = 0; i < f.size(); ++i) f[i] *= V2s[i];
        f = detail::heat_flow(heat, std::move(f), eps * t);
        const cplx c = I / (eps + I);
        for (auto& z : f) z *= c;
        return f;
    };
    auto regularized = [&](double eps) {
        Potentials p = heat;
        if (!cfg.V2.is_zero()) p.F = [&forcing_at, eps](double t, cvec& out) { out = forcing_at(eps, t); };
        return evolve(u0, p, FlowParams{eps, 1.0, cfg.dt, T, 1});
    };
    auto in_tau = [T](Trajectory tr) {
        for (auto& t : tr.times) t /= T;
        return tr;
    };
    auto appell_params = [&](double eps) {
        const double et = eps * T;
        return AppellParams{std::sqrt(cfg.alpha * cfg.alpha + 4.0 * et), std::sqrt(cfg.beta * cfg.beta + 4.0 * et),
                            et, T};
    };

    const double eps = cfg.eps_reg, et = eps * T;
    const AppellParams P = appell_params(eps);
    const double ae = P.alpha, be = P.beta, gam = 1.0 / (ae * be);
    const double trunc = cfg.truncation_radius > 0.0 ? cfg.truncation_radius : detail::auto_truncation(
                                                                                     std::max({gam, 1.0 / (cfg.alpha * cfg.alpha), 1.0 / (cfg.beta * cfg.beta)}));
    const double growth = std::exp(et * V1sup);
    defect("alpha_eps", ae);
    defect("beta_eps", be);
    defect("gamma_eps", gam);
    defect("eps_effective", et);
    defect("weight_truncation_radius", trunc);

    // Step II: heat regularization
    Trajectory reg;
    stage("regularization", [&](StageRecord& st) {
        reg = regularized(eps);
        double sg = 0.0;
        for (std::size_t k = 0; k < base.times.size(); ++k) {
            const cvec s = detail::heat_flow(heat, base.snapshots[k].values, eps * base.times[k]);
            cvec d(s.size());
            for (std::size_t i = 0; i < s.size(); ++i) d[i] = reg.snapshots[k].values[i] - s[i];
            sg = std::max(sg, l2_norm(g, d) / l2_norm(g, s));
        }
        defect("reg_semigroup_consistency", sg);
        const std::size_t K = base.times.size() - 1;
        add_pair(st, "reg_initial_weight", detail::wnorm(g, reg.snapshots[0].values, 1.0 / (be * be), trunc),
                 detail::wnorm(g, base.snapshots[0].values, 1.0 / (cfg.beta * cfg.beta), trunc));
        add_pair(st, "reg_final_weight", detail::wnorm(g, reg.snapshots[K].values, 1.0 / (ae * ae), trunc),
                 growth * detail::wnorm(g, base.snapshots[K].values, 1.0 / (cfg.alpha * cfg.alpha), trunc));

        InequalityPair mass{"reg_mass"}, force{"reg_forcing"}, wforce{"reg_forcing_weighted"};
        InequalityPair up{"mass_upper"}, lo{"mass_lower"};
        auto worst = [](InequalityPair& w, double l, double r) {
            const InequalityPair c{w.anchor, l, r, w.slack};
            if (w.lhs == 0.0 && w.rhs == 0.0) w = c;
            else if (c.ratio() > w.ratio()) w = c;
        };
        for (std::size_t k = 0; k <= K; ++k) {
            const double t = base.times[k], tau = t / T;
            const double un = l2_norm(base.snapshots[k]);
            if (k > 0) worst(mass, l2_norm(reg.snapshots[k]), growth * un);  // equality at t = 0
            worst(up, un, N1 * u0_norm);
            worst(lo, u0_norm / N1, un);
            if (!cfg.V2.is_zero()) {
                const cvec F = forcing_at(eps, t);
                const double D = ae * tau + be * (1.0 - tau), c = 1.0 / (D * D);
                worst(force, l2_norm(g, F), growth * V2sup * un);
                worst(wforce, detail::wnorm(g, F, c, trunc), growth * detail::wsup(g, V2s, c, trunc) * un);
            }
        }
        for (const auto* p : {&mass, &force, &wforce, &up, &lo}) add_pair(st, p->anchor, p->lhs, p->rhs);
        st.metrics.emplace_back("eps", eps);
    });

    // Step III: Appell transformation in tau = t / t_end
    const Trajectory reg_tau = in_tau(reg);
    const GridSpec target{dim, g.half_width / P.coverage_scale(), g.points};
    SourceFields src;
    if (At_eval) src.A = At_eval;
    if (!cfg.V1.is_zero()) src.V = [V1 = cfg.V1, dim](const double* y) { return V1.at(y, dim); };
    if (!cfg.V2.is_zero()) src.F_sampled = [&](double s) { return ComplexField(g, forcing_at(eps, s * T)); };
    const rvec taus = uniform_times(transformed_samples);
    auto transformed = [&](const Trajectory& tr, const AppellParams& Q) {
        Trajectory out;
        out.params = FlowParams{Q.a, Q.b, cfg.dt / T, 1.0, 1};
        out.times = taus;
        for (double t : taus) out.snapshots.push_back(appell_forward(tr, Q, t, target));
        return out;
    };
    Trajectory tt;
    stage("appell", [&](StageRecord& st) {
        const double res = appell_residual(reg_tau, P, {0.25, 0.5, 0.75}, src, target, 1e-4);
        defect("appell_residual", res);
        st.pass = res <= cfg.appell_tol;
        tt = transformed(reg_tau, P);
        if (At_eval) {
            double xa = 0.0, xat = 0.0;
            for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                xa = std::max(xa, detail::x_dot(target, detail::transformed_potential(At_eval, P, t, target)));
                if (t == 0.0 || t == 1.0) continue;
                const double h = 1e-4;
                auto Ap = detail::transformed_potential(At_eval, P, t + h, target);
                const auto Am = detail::transformed_potential(At_eval, P, t - h, target);
                for (int d = 0; d < dim; ++d)
                    for (std::size_t i = 0; i < target.size(); ++i) Ap[d][i] = (Ap[d][i] - Am[d][i]) / (2.0 * h);
                xat = std::max(xat, detail::x_dot(target, Ap));
            }
            defect("appell_transversality", xa);
            defect("appell_dt_transversality", xat);
        } else {
            defect("appell_transversality", 0.0);
            defect("appell_dt_transversality", 0.0);
        }
        const std::size_t K = reg.times.size() - 1;
        add_pair(st, "appell_initial_weight", detail::wnorm(target, tt.snapshots.front().values, gam, trunc),
                 detail::wnorm(g, reg.snapshots[0].values, 1.0 / (be * be), trunc));
        add_pair(st, "appell_final_weight", detail::wnorm(target, tt.snapshots.back().values, gam, trunc),
                 detail::wnorm(g, reg.snapshots[K].values, 1.0 / (ae * ae), trunc));
        if (!cfg.V2.is_zero()) {
            double lhs = 0.0, vs = 0.0;
            for (double t : taus) {
                lhs = std::max(lhs, detail::wnorm(target, appell_potentials(src, P, t, target).F, gam, trunc));
                const double s = appell_map_times(t, P.alpha, P.beta, dim).s;
                const double D = cfg.alpha * s + cfg.beta * (1.0 - s);
                vs = std::max(vs, detail::wsup(g, V2s, 1.0 / (D * D), trunc));
            }
            add_pair(st, "appell_forcing_weighted", lhs, cfg.beta / cfg.alpha * growth * vs * N1 * u0_norm);
        }
        st.metrics.emplace_back("target_half_width", target.half_width);
        st.metrics.emplace_back("samples", transformed_samples);
    });

    // Step IV: monitors on the transformed trajectory
    const HypothesisReport hyp = hypothesis_report(spec, g, cfg.carleman_v, cfg.V1, cfg.V2, cfg.alpha, cfg.beta);
    stage("conclusion", [&](StageRecord& st) {
        const WeightSpec w = detail::truncated_gaussian(gam, trunc);
        rep.convexity = weighted_H(tt, w);
        const ConvexityVerdict v = convexity_check(rep.convexity, cfg.convexity_tol);
        defect("convexity_min_d2_theta", v.min_d2_theta);
        defect("convexity_min_d2_logH", v.min_d2_logH);
        st.pass = v.pass;

        const double gmax2 = std::max(ae / be, be / ae);
        Potentials pt = Potentials::free(target);
        if (!cfg.V2.is_zero())
            pt.F = [&](double t, cvec& out) { out = appell_potentials(src, P, t, target).F; };
        std::function<std::vector<rvec>(double)> A_of_t;
        if (At_eval) A_of_t = [&](double t) { return detail::transformed_potential(At_eval, P, t, target); };
        const GradientBound gb = gradient_bound_check(tt, w, pt, gmax2 * V1sup,
                                                      4.0 * std::pow(gmax2 * hyp.sup_xtB, 2), A_of_t);
        rep.grad_series = gb.grad_series;
        defect("gradient_bound_ratio", gb.ratio());

        double min_norm = std::numeric_limits<double>::infinity();
        for (const auto& s : tt.snapshots) min_norm = std::min(min_norm, l2_norm(s));
        add_pair(st, "lower_bound", u0_norm / (2.0 * N1), min_norm);

        if (opt.eps_sweep) {
            double eps0 = 0.0;
            for (double e : eps_samples) {
                double m = std::numeric_limits<double>::infinity();
                if (e == eps) {
                    m = min_norm;
                } else {
                    const Trajectory tr = transformed(in_tau(regularized(e)), appell_params(e));
                    for (const auto& s : tr.snapshots) m = std::min(m, l2_norm(s));
                }
                defect("lower_bound_min_norm_eps_" + detail::eps_tag(e), m);
                if (m >= u0_norm / (2.0 * N1)) eps0 = std::max(eps0, e);
            }
            defect("eps0", eps0);
        }
    });

    if (cfg.carleman_enabled) {
        stage("carleman", [&](StageRecord& st) {
            const rvec times = uniform_times(cfg.carleman_time_samples);
            const double M = cfg.carleman_cutoff_M > 0.0 ? cfg.carleman_cutoff_M : 0.2 * g.half_width;
            Potentials pc = Potentials::free(g);
            pc.A = red.A;
            pc.divA = red.divA;
            const TimeSampler core = [&](double t, cvec& out) { out = sample_trajectory(reg_tau, t); };
            double worst = 0.0;
            for (double mu : cfg.carleman_mu)
                for (double R : cfg.carleman_R) {
                    const CarlemanParams cp{mu, cfg.carleman_eps, R, cfg.carleman_v};
                    const TestFamily fam = product_family(g, times, M, std::max(2.0, R), core);
                    const CarlemanResult r = carleman_sides(fam, pc, cp, hyp.sup_xtB);
                    CarlemanCase c;
                    c.case_id = static_cast<int>(rep.carleman.size());
                    c.mu = mu;
                    c.eps = cfg.carleman_eps;
                    c.R = R;
                    c.v_index = axis_index(cfg.carleman_v);
                    c.sup_xtB = hyp.sup_xtB;
                    c.admissible = r.admissible;
                    c.lhs = r.lhs;
                    c.rhs = r.rhs;
                    c.ratio = r.ratio();
                    c.log_lhs = r.log_lhs;
                    c.log_rhs = r.log_rhs;
                    rep.carleman.push_back(c);
                    if (!c.admissible) continue;
                    worst = std::max(worst, c.ratio);
                    if (std::max(r.log_lhs, r.log_rhs) < 700.0)
                        add_pair(st, "carleman", r.lhs, r.rhs, carleman_pair_slack);
                    else  // normalized by the lhs; the weights exceed double range
                        add_pair(st, "carleman", 1.0, std::exp(r.log_rhs - r.log_lhs), carleman_pair_slack);
                }
            defect("carleman_max_ratio", worst);
            st.metrics.emplace_back("time_samples", cfg.carleman_time_samples);
            st.metrics.emplace_back("cutoff_M", M);
        });
    }
    return rep;
}

}  // namespace covflow
