#include "covflow/gauge.hpp"

#include <gtest/gtest.h>

using namespace covflow;

namespace {

PotentialSpec kind(PotentialKind k) {
    PotentialSpec s;
    s.kind = k;
    return s;
}

double max_diff(const RealVectorField& a, const RealVectorField& b) {
    double m = 0.0;
    for (std::size_t d = 0; d < a.components.size(); ++d)
        for (std::size_t i = 0; i < a.components[d].size(); ++i)
            m = std::max(m, std::abs(a.components[d][i] - b.components[d][i]));
    return m;
}

}  // namespace

TEST(Gauge, GaussLegendreExactForPolynomials) {
    const Quadrature q = gauss_legendre01(8);
    double w = 0.0;
    for (double x : q.weights) w += x;
    EXPECT_NEAR(w, 1.0, 1e-15);
    for (int p = 0; p <= 15; ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], p);
        EXPECT_NEAR(s, 1.0 / (p + 1), 1e-14) << p;
    }
    EXPECT_THROW(gauss_legendre01(0), std::invalid_argument);
}

TEST(Gauge, PureGaugePhaseAndReduction) {
    GridSpec g{2, 8.0, 32};
    const GaugeTransform gt = cronstrom_potential(kind(PotentialKind::pure_gauge), g, 32);
    double e = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        e = std::max(e, std::abs(gt.phase[i] - pure_gauge_generator(x.data())));
    });
    EXPECT_LT(e, 1e-12);
    EXPECT_LE(sup_norm(gt.transformed_potential), 1e-10);
}

TEST(Gauge, ConstantFieldIsFixedPoint) {
    GridSpec g{2, 8.0, 32};
    PotentialSpec cf = kind(PotentialKind::constant_field);
    cf.strength = 1.3;
    const GaugeTransform gt = cronstrom_potential(cf, g, 32);
    EXPECT_LE(max_diff(gt.transformed_potential, eval_potential(cf, g)), 1e-12);
    EXPECT_LT(cross_identity_check(cf, g, 32), 1e-9);
}

TEST(Gauge, TransversalityForBoundedKinds) {
    GridSpec g2{2, 8.0, 32}, g3{3, 6.0, 16};
    PotentialSpec cf = kind(PotentialKind::constant_field);
    for (const auto& [s, g] : {std::pair{kind(PotentialKind::zero), g2}, std::pair{kind(PotentialKind::pure_gauge), g2},
                               std::pair{cf, g2}, std::pair{kind(PotentialKind::aharonov_bohm_2d), g2},
                               std::pair{kind(PotentialKind::block_field_3d), g3},
                               std::pair{kind(PotentialKind::block_matrix_3d), g3}}) {
        const GaugeTransform gt = cronstrom_potential(s, g, 32);
        EXPECT_LE(gt.transversality_defect, 1e-8) << to_string(s.kind);
        EXPECT_LE(gt.dA_transversality_defect, 1e-8) << to_string(s.kind);
    }
}

TEST(Gauge, BlockFieldIsAlreadyTransversal) {
    GridSpec g{3, 6.0, 16};
    const PotentialSpec s = kind(PotentialKind::block_field_3d);
    const GaugeTransform gt = cronstrom_potential(s, g, 32);
    // A and A~ agree away from the regularized core
    const RealVectorField A = eval_potential(s, g);
    double m = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        if (!in_check_region(s, g, x.data())) return;
        for (int d = 0; d < 3; ++d)
            m = std::max(m, std::abs(A.components[d][i] - gt.transformed_potential.components[d][i]));
    });
    EXPECT_LT(m, 1e-10);
}

TEST(Gauge, AharonovBohmPathology) {
    GridSpec g{2, 8.0, 32};
    const PotentialSpec ab = kind(PotentialKind::aharonov_bohm_2d);
    const GaugeTransform gt = cronstrom_potential(ab, g, 32);
    EXPECT_EQ(sup_norm(gt.transformed_potential), 0.0);
    EXPECT_GT(sup_norm(eval_potential(ab, g)), 0.1);
    // A is not a gradient on the punctured plane, so A - grad chi cannot vanish
    EXPECT_GT(cross_identity_check(ab, g, 32), 0.1);
}

TEST(Gauge, PhaseQuadratureConverges) {
    GridSpec g{3, 6.0, 16};
    const PotentialSpec s = kind(PotentialKind::block_matrix_3d);
    const rvec a = cronstrom_phase(s, g, 24), b = cronstrom_phase(s, g, 48);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    EXPECT_LT(m, 1e-3);
}

TEST(Gauge, ApplyGaugeIsUnitaryAndInvertible) {
    GridSpec g{2, 4.0, 16};
    ComplexField u(g);
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = cplx(std::sin(0.1 * i), std::cos(0.3 * i));
    const rvec chi = cronstrom_phase(kind(PotentialKind::pure_gauge), g);
    const ComplexField v = apply_gauge(apply_gauge(u, chi, 1), chi, -1);
    double m = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) m = std::max(m, std::abs(u.values[i] - v.values[i]));
    EXPECT_LT(m, 1e-14);
    EXPECT_NEAR(l2_norm(apply_gauge(u, chi, 1)), l2_norm(u), 1e-12);
    EXPECT_THROW(apply_gauge(u, chi, 2), std::invalid_argument);
}

TEST(Gauge, CustomPeriodicSamples) {
    GridSpec g{2, std::numbers::pi, 32};
    PotentialSpec s = kind(PotentialKind::custom);
    s.samples = RealVectorField(g);
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        s.samples.components[0][i] = 0.3 * std::sin(x[1]);
        s.samples.components[1][i] = 0.2 * std::cos(x[0]);
    });
    const GaugeTransform gt = cronstrom_potential(s, g, 32);
    EXPECT_LT(gt.transversality_defect, 1e-8);
}
