#include "covflow/monitors.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace covflow;

namespace {

const GridSpec kBox{2, 8.0, 64};

cplx ip(const GridSpec& g, const cvec& x, const cvec& y) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * std::conj(y[i]);
    return s * g.cell_volume();
}

std::vector<WeightSpec> weight_zoo() {
    return {WeightSpec::static_gaussian(0.25), WeightSpec::interpolating(1, 2), WeightSpec::dissipation(0.25, 0.1, 1),
            WeightSpec::carleman(0.5, 1, 4, {1, 0, 0})};
}

Potentials constant_field(const GridSpec& g) {
    PotentialSpec cf;
    cf.kind = PotentialKind::constant_field;
    cf.strength = 2.0;
    return Potentials::from_spec(cf, g);
}

Trajectory run(const GridSpec& g, double a, double b, double dt, double t_end, int store_every,
               const Potentials& p) {
    FlowParams fp;
    fp.a = a;
    fp.b = b;
    fp.dt = dt;
    fp.t_end = t_end;
    fp.store_every = store_every;
    return evolve(gaussian_field(g, 1.0), p, fp);
}

}  // namespace

TEST(Monitors, ConjugatedOperatorSymmetry) {
    const ComplexField f = gaussian_field(kBox, 1.0, {0.3, -0.2, 0}, {0.7, 0.4, 0});
    const ComplexField h = gaussian_field(kBox, 0.8, {-0.4, 0.1, 0}, {-0.3, 0.9, 0});
    const double scale = l2_norm(f) * l2_norm(h);
    for (const auto& w : weight_zoo())
        for (int mag = 0; mag < 2; ++mag) {
            const Potentials p = mag ? constant_field(kBox) : Potentials::free(kBox);
            const double a = 0.3, b = 1.0, t = 0.3;
            const cvec Sf = conjugated_apply(kBox, f.values, w, p, a, b, Conjugated::S, t);
            const cvec Sh = conjugated_apply(kBox, h.values, w, p, a, b, Conjugated::S, t);
            const cvec Af = conjugated_apply(kBox, f.values, w, p, a, b, Conjugated::A, t);
            const cvec Ah = conjugated_apply(kBox, h.values, w, p, a, b, Conjugated::A, t);
            EXPECT_LE(std::abs(ip(kBox, Sf, h.values) - ip(kBox, f.values, Sh)), 1e-8 * scale) << to_string(w.kind);
            EXPECT_LE(std::abs(ip(kBox, Af, h.values) + ip(kBox, f.values, Ah)), 1e-8 * scale) << to_string(w.kind);
        }
}

TEST(Monitors, CommutatorTermsMatchDirectEvaluation) {
    const ComplexField f = gaussian_field(kBox, 1.0, {0.3, -0.2, 0}, {0.7, 0.4, 0});
    PotentialSpec cf;
    cf.kind = PotentialKind::constant_field;
    cf.strength = 2.0;
    const MagneticTensor B = magnetic_tensor(cf, kBox, TensorMode::analytic);
    for (const auto& w : weight_zoo())
        for (int mag = 0; mag < 2; ++mag) {
            const Potentials p = mag ? constant_field(kBox) : Potentials::free(kBox);
            const double form = commutator_form(kBox, f.values, w, p, mag ? &B : nullptr, 0.3, 1.0, 0.3).commutator();
            const double direct = commutator_direct(kBox, f.values, w, p, 0.3, 1.0, 0.3);
            EXPECT_NEAR(form, direct, 1e-10 * std::abs(direct)) << to_string(w.kind) << " mag " << mag;
        }
}

TEST(Monitors, FreeCommutatorClosedForm) {
    const ComplexField v = gaussian_field(kBox, 0.9, {0.5, 0.2, 0}, {1.0, -0.5, 0});
    const double gamma = 0.2, a = 0.4, b = 1.0;
    const auto grad = spectral_gradient(v);
    double g2 = 0.0, x2 = 0.0;
    const rvec r2 = radius_squared(kBox);
    for (std::size_t i = 0; i < kBox.size(); ++i) {
        g2 += std::norm(grad[0].values[i]) + std::norm(grad[1].values[i]);
        x2 += r2[i] * std::norm(v.values[i]);
    }
    g2 *= kBox.cell_volume();
    x2 *= kBox.cell_volume();
    const double expect = (a * a + b * b) * (8.0 * gamma * g2 + 32.0 * gamma * gamma * gamma * x2);
    const CommutatorTerms c =
        commutator_form(kBox, v.values, WeightSpec::static_gaussian(gamma), Potentials::free(kBox), nullptr, a, b, 0);
    EXPECT_NEAR(c.total(), expect, 1e-12 * expect);
    EXPECT_GE(c.total(), 0.0);
    const CommutatorTerms z = commutator_form(kBox, cvec(kBox.size(), 0.0), WeightSpec::static_gaussian(gamma),
                                              Potentials::free(kBox), nullptr, a, b, 0);
    EXPECT_EQ(z.total(), 0.0);
}

TEST(Monitors, CommutatorRejectsTruncatedWeights) {
    WeightSpec w = WeightSpec::static_gaussian(0.2);
    w.truncation_radius = 3.0;
    EXPECT_THROW(commutator_form(kBox, cvec(kBox.size()), w, Potentials::free(kBox), nullptr, 0, 1, 0),
                 std::invalid_argument);
}

TEST(Monitors, WeightDerivativesMatchFiniteDifferences) {
    WeightSpec trunc = WeightSpec::interpolating(1, 2, 0.5);
    trunc.truncation_radius = 1.5;
    std::vector<WeightSpec> ws = weight_zoo();
    ws.push_back(trunc);
    const double x[3] = {1.1, -0.6, 0.0};
    const double t = 0.3, h = 1e-4;
    for (const auto& w : ws) {
        const WeightValue v = evaluate_weight(w, x, 2, t);
        auto phi = [&](const double* y, double s) { return evaluate_weight(w, y, 2, s).phi; };
        EXPECT_NEAR(v.phi_t, (phi(x, t + h) - phi(x, t - h)) / (2 * h), 1e-6) << to_string(w.kind);
        EXPECT_NEAR(v.phi_tt, (phi(x, t + h) - 2 * v.phi + phi(x, t - h)) / (h * h), 1e-4) << to_string(w.kind);
        double lap = 0.0;
        for (int d = 0; d < 2; ++d) {
            double p[3] = {x[0], x[1], 0}, m[3] = {x[0], x[1], 0};
            p[d] += h;
            m[d] -= h;
            EXPECT_NEAR(v.grad[d], (phi(p, t) - phi(m, t)) / (2 * h), 1e-6) << to_string(w.kind);
            lap += (phi(p, t) - 2 * v.phi + phi(m, t)) / (h * h);
        }
        EXPECT_NEAR(v.lap, lap, 1e-4) << to_string(w.kind);
    }
}

TEST(Monitors, SaturationIsConcaveWithUnitSlope) {
    WeightSpec w = WeightSpec::static_gaussian(1.0);
    w.truncation_radius = 2.0;
    double prev = -1.0;
    for (double rho = 0.0; rho < 20.0; rho += 0.01) {
        const auto q = w.saturate(rho);
        EXPECT_LE(q[1], 1.0);
        EXPECT_GE(q[1], 0.0);
        EXPECT_LE(q[2], 0.0);
        EXPECT_GE(q[0], prev);
        EXPECT_LE(q[1] * q[1] * rho, q[0] + 1e-12);
        prev = q[0];
    }
}

TEST(Monitors, ConjugationResidual) {
    const auto tr = run(kBox, 0, 1, 2e-4, 0.25, 1, Potentials::free(kBox));
    EXPECT_LE(conjugation_residual(tr, WeightSpec::static_gaussian(0.0), Potentials::free(kBox), 0, 1), 1e-5);
    WeightSpec w = WeightSpec::static_gaussian(0.25);
    w.truncation_radius = 5.0;
    EXPECT_LE(conjugation_residual(tr, w, Potentials::free(kBox), 0, 1), 1e-4);
}

TEST(Monitors, DissipationAgainstClosedForm) {
    const GridSpec g{2, 10.0, 80};
    const auto tr = run(g, 1, 0, 2e-4, 0.5, 125, Potentials::free(g));
    const double gamma = 0.25, T = 0.5;
    const DissipationResult r = dissipation_check(tr, Potentials::free(g), gamma, T);
    // ||e^{c|x|^2} q^{-1} e^{-|x|^2/q}||^2 = pi / (q^2 (2/q - 2c)) in two dimensions.
    // The weight lifts the periodic images at the box edge to ~1e-8.
    const double q = 1.0 + 4.0 * T, c = gamma / (1.0 + 4.0 * gamma * T);
    EXPECT_NEAR(r.lhs, std::sqrt(std::numbers::pi / (q * q * (2.0 / q - 2.0 * c))), 1e-6);
    EXPECT_NEAR(r.rhs, std::sqrt(std::numbers::pi / (2.0 - 2.0 * gamma)), 1e-10);
    EXPECT_LE(r.ratio(), 1.0);
}

TEST(Monitors, DissipationReducesToMassDecay) {
    const GridSpec g{2, 10.0, 80};
    const auto tr = run(g, 1, 0, 2e-4, 0.5, 125, Potentials::free(g));
    const DissipationResult r = dissipation_check(tr, Potentials::free(g), 0.0, 0.25);
    EXPECT_NEAR(r.lhs, l2_norm(tr.snapshots[10]), 1e-14);
    EXPECT_NEAR(r.rhs, l2_norm(tr.snapshots[0]), 1e-14);
    EXPECT_LE(r.ratio(), 1.0);
}

TEST(Monitors, DissipationWithAbsorbingPotential) {
    // V = -ic with b = 1: M_T = cT
    const GridSpec g{2, 10.0, 80};
    ScalarSpec v2;
    v2.kind = ScalarSpec::Kind::constant;
    v2.amplitude = {0.0, -0.8};
    const Potentials p = Potentials::from_spec(PotentialSpec{}, g, {}, v2);
    const auto tr = run(g, 1, 1, 1e-4, 0.5, 250, p);
    const DissipationResult r = dissipation_check(tr, p, 0.1, 0.5);
    EXPECT_NEAR(r.M_T, 0.4, 1e-12);
    EXPECT_LE(r.ratio(), 1.0 + 1e-8);
    EXPECT_THROW(dissipation_check(run(g, 0, 1, 1e-3, 0.01, 1, p), p, 0.1, 0.01), std::invalid_argument);
}

TEST(Monitors, ConvexityNegativeControl) {
    rvec t, convex, concave;
    for (int k = 0; k <= 30; ++k) {
        const double s = k / 30.0;
        t.push_back(s);
        convex.push_back(s * s);
        concave.push_back(-s * s);
    }
    EXPECT_TRUE(series_is_convex(t, convex, 1e-3));
    EXPECT_FALSE(series_is_convex(t, concave, 1e-3));
    const rvec d = second_differences(t, convex);
    EXPECT_TRUE(std::isnan(d.front()));
    EXPECT_NEAR(d[10], 2.0, 1e-9);
}

TEST(Monitors, RegularizedLogConvexity) {
    const GridSpec g{2, 10.0, 80};
    for (double eps : {1e-2, 1e-3}) {
        const auto tr = run(g, eps, 1, 1e-3, 0.3, 10, Potentials::free(g));
        WeightSpec w = WeightSpec::interpolating(2, 2, 0.3);
        w.truncation_radius = 7.0;
        const ConvexityReport rep = weighted_H(tr, w);
        ASSERT_GE(rep.times.size(), 23u);
        EXPECT_TRUE(convexity_check(rep, 1e-3).pass) << eps;
    }
}

TEST(Monitors, InadmissibleWeightReportsMaximalGamma) {
    try {
        check_weight_admissible(WeightSpec::static_gaussian(10.0), kBox, 0.0);
        FAIL() << "expected overflow_error";
    } catch (const std::overflow_error& e) {
        EXPECT_NE(std::string(e.what()).find("overflows"), std::string::npos);
    }
    try {
        check_weight_admissible(WeightSpec::static_gaussian(6.0), kBox, 0.0);
        FAIL() << "expected overflow_error";
    } catch (const std::overflow_error& e) {
        EXPECT_NE(std::string(e.what()).find("maximal admissible gamma"), std::string::npos);
    }
}

TEST(Monitors, GradientBoundZeroDataAndDeterminism) {
    const auto tr = run(kBox, 0, 1, 2e-4, 0.05, 25, Potentials::free(kBox));
    WeightSpec w = WeightSpec::interpolating(1, 1, 0.05);
    w.truncation_radius = 3.0;
    const GradientBound a = gradient_bound_check(tr, w, Potentials::free(kBox), 0.0, 0.0);
    const GradientBound b = gradient_bound_check(tr, w, Potentials::free(kBox), 0.0, 0.0);
    EXPECT_TRUE(std::isfinite(a.lhs()));
    EXPECT_EQ(a.ratio(), b.ratio());

    Trajectory zero = tr;
    for (auto& s : zero.snapshots) std::fill(s.values.begin(), s.values.end(), cplx(0.0, 0.0));
    EXPECT_EQ(gradient_bound_check(zero, w, Potentials::free(kBox), 0.0, 0.0).lhs(), 0.0);
}

TEST(Monitors, MonitorsCsvSchema) {
    ConvexityReport r;
    r.times = {0.0, 0.5, 1.0};
    r.H = {1.0, 1.1, 1.3};
    r.boundary_mass = {0, 0, 0};
    fill_convexity(r, WeightSpec::static_gaussian(0.0));
    std::ostringstream os;
    write_monitors_csv(os, r, {});
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "t,H,logH,theta,d2_logH,d2_theta,grad_lhs,boundary_mass");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
