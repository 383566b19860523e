#include "covflow/evolve.hpp"

#include <gtest/gtest.h>

using namespace covflow;

namespace {

const GridSpec kBox{2, 8.0, 64};

// (1 + 4 z t)^{-n/2} exp(-|x|^2 / (1 + 4 z t)), z = a + ib
cvec gaussian_solution(const GridSpec& g, cplx z, double t) {
    cvec u(g.size());
    const cplx q = 1.0 + 4.0 * z * t;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += x[d] * x[d];
        u[i] = std::pow(q, -0.5 * g.dim) * std::exp(-r2 / q);
    });
    return u;
}

double rel_err(const cvec& a, const cvec& b) {
    double n = 0.0, d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += std::norm(a[i] - b[i]);
        d += std::norm(b[i]);
    }
    return std::sqrt(n / d);
}

FlowParams flow(double a, double b, double dt, double t_end, int store_every = 1) {
    FlowParams p;
    p.a = a;
    p.b = b;
    p.dt = dt;
    p.t_end = t_end;
    p.store_every = store_every;
    return p;
}

}  // namespace

TEST(Evolve, HeatGaussianMatchesClosedForm) {
    const auto tr = evolve(gaussian_field(kBox, 1.0), Potentials::free(kBox), flow(1, 0, 2e-4, 0.5, 2500));
    EXPECT_LE(rel_err(tr.snapshots.back().values, gaussian_solution(kBox, 1.0, 0.5)), 1e-6);
}

TEST(Evolve, SchroedingerGaussianShortTime) {
    // wraparound is negligible at t = 0.1
    const auto tr = evolve(gaussian_field(kBox, 1.0), Potentials::free(kBox), flow(0, 1, 2e-4, 0.1, 500));
    EXPECT_LE(rel_err(tr.snapshots.back().values, gaussian_solution(kBox, I, 0.1)), 1e-8);
}

TEST(Evolve, FourthOrderInTime) {
    const ComplexField u0 = gaussian_field(kBox, 1.0);
    const auto p = Potentials::free(kBox);
    auto final_state = [&](double dt) {
        return evolve(u0, p, flow(0, 1, dt, 0.2, std::numeric_limits<int>::max())).snapshots.back().values;
    };
    const cvec ref = final_state(2.5e-4);
    const double e1 = rel_err(final_state(4e-3), ref), e2 = rel_err(final_state(2e-3), ref);
    EXPECT_GE(e1 / e2, 14.0) << e1 << " " << e2;
}

TEST(Evolve, UnitaryWithRealPotential) {
    PotentialSpec cf;
    cf.kind = PotentialKind::constant_field;
    ScalarSpec v1;
    v1.kind = ScalarSpec::Kind::gaussian;
    v1.amplitude = 2.0;
    v1.width = 1.5;
    const auto tr = evolve(gaussian_field(kBox, 1.0), Potentials::from_spec(cf, kBox, v1), flow(0, 1, 2e-4, 0.5, 250));
    const double n0 = l2_norm(tr.snapshots.front());
    for (const auto& s : tr.snapshots) EXPECT_LE(std::abs(l2_norm(s) - n0) / n0, 1e-8 * 0.5);
}

TEST(Evolve, MassNonincreasingForDissipativeFlow) {
    const auto tr = evolve(gaussian_field(kBox, 1.0), Potentials::free(kBox), flow(0.5, 1, 2e-4, 0.2, 1));
    for (std::size_t k = 1; k < tr.snapshots.size(); ++k)
        EXPECT_LE(l2_norm(tr.snapshots[k]), l2_norm(tr.snapshots[k - 1]) + 1e-10);
}

TEST(Evolve, Linearity) {
    const ComplexField u = gaussian_field(kBox, 1.0, {0.5, 0, 0}, {1, 0, 0});
    const ComplexField w = gaussian_field(kBox, 0.8, {-1, 0.5, 0});
    PotentialSpec cf;
    cf.kind = PotentialKind::constant_field;
    const auto p = Potentials::from_spec(cf, kBox);
    const cplx al(0.7, -0.2), be(-1.3, 0.4);
    ComplexField mix(kBox);
    for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = al * u.values[i] + be * w.values[i];
    const FlowParams fp = flow(0.1, 1, 2e-4, 0.05, 1000);
    const cvec a = evolve(u, p, fp).snapshots.back().values, b = evolve(w, p, fp).snapshots.back().values;
    const cvec m = evolve(mix, p, fp).snapshots.back().values;
    cvec lin(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) lin[i] = al * a[i] + be * b[i];
    EXPECT_LE(rel_err(m, lin), 1e-10);
}

TEST(Evolve, RegularizedFlowConvergesAsEpsShrinks) {
    const ComplexField u0 = gaussian_field(kBox, 1.0);
    const auto p = Potentials::free(kBox);
    const auto base = evolve(u0, p, flow(0, 1, 2e-4, 0.5, 1250));
    for (std::size_t k : {1u, 2u}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const auto tr = evolve(u0, p, flow(eps, 1, 2e-4, 0.5, 1250));
            const double d = rel_err(tr.snapshots[k].values, base.snapshots[k].values);
            EXPECT_LT(d, prev) << "eps " << eps << " t " << tr.times[k];
            prev = d;
        }
    }
}

TEST(Evolve, GaugeEquivariance) {
    const ComplexField u0 = gaussian_field(kBox, 1.0);
    PotentialSpec cf;
    cf.kind = PotentialKind::constant_field;
    const auto p = Potentials::from_spec(cf, kBox);
    const FlowParams fp = flow(0, 1, 2e-4, 0.25);
    EXPECT_EQ(gauge_equivariance_test(u0, p, rvec(kBox.size(), 0.0), fp), 0.0);
    EXPECT_LE(gauge_equivariance_test(u0, p, cutoff_phase(kBox), fp), 1e-6);
}

TEST(Evolve, CutoffPhaseIsLocalized) {
    const rvec chi = cutoff_phase(kBox);
    for_each_point(kBox, [&](std::size_t i, const std::array<double, 3>& x) {
        if (std::hypot(x[0], x[1]) >= 0.75 * kBox.half_width) EXPECT_EQ(chi[i], 0.0);
    });
}

TEST(Evolve, RejectsUnstableStep) {
    const double bound = stability_bound(kBox, 0, 1);
    EXPECT_THROW(evolve(gaussian_field(kBox, 1.0), Potentials::free(kBox), flow(0, 1, 1.5 * bound, 0.1)),
                 std::invalid_argument);
}

TEST(Evolve, RejectsDataAtTheBoundary) {
    EXPECT_THROW(evolve(gaussian_field(kBox, 1.0, {7.5, 0, 0}), Potentials::free(kBox), flow(0, 1, 1e-3, 0.1)),
                 std::invalid_argument);
}

TEST(Evolve, FlowParamValidation) {
    EXPECT_THROW(flow(-1, 1, 1e-3, 0.5).validate(), std::invalid_argument);
    EXPECT_THROW(flow(0, 0, 1e-3, 0.5).validate(), std::invalid_argument);
    EXPECT_THROW(flow(0, 1, 1e-3, 1.5).validate(), std::invalid_argument);
    EXPECT_THROW(flow(0, 1, 1e-3, 0.5, 0).validate(), std::invalid_argument);
}

TEST(Evolve, MagneticLaplacianMatchesCovariantForm) {
    // Delta_A u = div(grad_A u) - i A . grad_A u for a periodic A
    GridSpec g{2, std::numbers::pi, 32};
    std::vector<rvec> A(2, rvec(g.size()));
    rvec divA(g.size());
    cvec u(g.size());
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        A[0][i] = 0.4 * std::sin(x[1]);
        A[1][i] = 0.3 * std::cos(x[0]) + 0.2 * std::sin(x[1]);
        divA[i] = 0.2 * std::cos(x[1]);
        u[i] = std::exp(std::cos(x[0]) + I * std::sin(x[1]));
    });
    const cvec lap = magnetic_laplacian(g, u, A, divA);
    const auto gA = covariant_gradient(g, u, A);
    cvec ref(g.size(), 0.0);
    for (int d = 0; d < 2; ++d) {
        std::vector<cvec> gg;
        spectral_derivatives(g, gA[d], &gg, nullptr);
        for (std::size_t i = 0; i < g.size(); ++i) ref[i] += gg[d][i] - I * A[d][i] * gA[d][i];
    }
    EXPECT_LT(rel_err(lap, ref), 1e-10);
}
