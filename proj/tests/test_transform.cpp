#include "covflow/transform.hpp"

#include <gtest/gtest.h>

using namespace covflow;

namespace {

const GridSpec kSource{2, 12.0, 96};
const GridSpec kTarget{2, 8.0, 64};

const Trajectory& schroedinger() {
    static const Trajectory tr = [] {
        FlowParams fp;
        fp.a = 0;
        fp.b = 1;
        fp.dt = 1e-3;
        fp.t_end = 0.5;
        fp.store_every = 5;
        return evolve(gaussian_field(kSource, 1.0), Potentials::free(kSource), fp);
    }();
    return tr;
}

const Trajectory& heat() {
    static const Trajectory tr = [] {
        FlowParams fp;
        fp.a = 1;
        fp.b = 0;
        fp.dt = 1e-3;
        fp.t_end = 0.5;
        fp.store_every = 5;
        return evolve(gaussian_field(kSource, 1.0), Potentials::free(kSource), fp);
    }();
    return tr;
}

}  // namespace

TEST(Transform, MapTimes) {
    const AppellTimes a = appell_map_times(0.0, 1.0, 2.0), b = appell_map_times(1.0, 1.0, 2.0);
    EXPECT_EQ(a.s, 0.0);
    EXPECT_DOUBLE_EQ(b.s, 1.0);
    EXPECT_DOUBLE_EQ(a.g, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(b.g, std::sqrt(0.5));
    EXPECT_DOUBLE_EQ(a.prefactor, a.g);  // g^{n/2} with n = 2
    EXPECT_THROW(appell_map_times(1.2, 1, 1), std::invalid_argument);
    // s is increasing in t
    double prev = -1.0;
    for (double t = 0.0; t <= 1.0; t += 0.05) {
        const double s = appell_map_times(t, 3.0, 0.5).s;
        EXPECT_GT(s, prev);
        prev = s;
    }
}

TEST(Transform, EqualParametersGiveIdentity) {
    const Trajectory& tr = schroedinger();
    const AppellParams P{1.5, 1.5, 0, 1};
    for (double t : {0.1, 0.3, 0.45}) {
        const ComplexField a = appell_forward(tr, P, t);
        const cvec b = sample_trajectory(tr, t);
        double m = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a.values[i] - b[i]));
        EXPECT_LE(m, 1e-10);
    }
}

TEST(Transform, ResidualOfTransformedEquation) {
    const AppellParams P{1, 2, 0, 1};
    EXPECT_LE(appell_residual(schroedinger(), P, {0.1, 0.2, 0.3}, SourceFields{}, kTarget), 1e-4);
    const AppellParams H{1, 2, 1, 0};
    EXPECT_LE(appell_residual(heat(), H, {0.1, 0.2, 0.3}, SourceFields{}, kTarget), 1e-4);
}

TEST(Transform, PointwiseNormIdentities) {
    const AppellParams P{1, 2, 0, 1};
    ScalarSpec F;
    F.kind = ScalarSpec::Kind::gaussian;
    F.amplitude = {0.5, 0.2};
    F.width = 1.2;
    for (double gamma : {0.0, 0.1}) {
        const auto ids = appell_norm_identities(schroedinger(), P, gamma, 0.3, kTarget, SourceFields{}, F, 8);
        EXPECT_LE(ids[0].relative_gap(), 1e-8) << ids[0].name;
        EXPECT_LE(ids[1].relative_gap(), 1e-8) << ids[1].name;
    }
}

TEST(Transform, SpaceTimeIdentitiesWithEqualParameters) {
    const AppellParams P{1, 1, 0, 1};
    const auto ids = appell_norm_identities(schroedinger(), P, 0.1, 0.3, kTarget, SourceFields{});
    for (const auto& p : ids) EXPECT_LE(p.relative_gap(), 1e-8) << p.name;
}

TEST(Transform, SpaceTimeIdentitiesWithTimeJacobian) {
    const AppellParams P{1, 2, 0, 1};
    for (const auto& p : appell_spacetime_jacobian_check(schroedinger(), P, 0.1, 0.3, kTarget, SourceFields{}))
        EXPECT_LE(p.relative_gap(), 1e-8) << p.name;
}

TEST(Transform, CoverageViolationRejected) {
    FlowParams fp;
    fp.dt = 1e-3;
    fp.t_end = 0.01;
    const auto tr = evolve(gaussian_field(kTarget, 1.0), Potentials::free(kTarget), fp);
    EXPECT_THROW(appell_forward(tr, AppellParams{1, 2, 0, 1}, 0.005), std::invalid_argument);
}

TEST(Transform, TrajectorySamplingBounds) {
    const Trajectory& tr = schroedinger();
    EXPECT_THROW(sample_trajectory(tr, 0.6), std::out_of_range);
    // stored snapshots are returned exactly
    const cvec v = sample_trajectory(tr, tr.times[7]);
    EXPECT_EQ(v, tr.snapshots[7].values);
}

TEST(Transform, TransformedPotentialOfConstantField) {
    // g A(g x) for a linear A is g^2 A(x); divergence stays zero
    PotentialSpec cf;
    cf.kind = PotentialKind::constant_field;
    const SourceFields src = SourceFields::from_specs(cf, kSource, {}, {}, {});
    const AppellParams P{1, 2, 0, 1};
    const double t = 0.4;
    const double g = appell_map_times(t, 1, 2).g;
    const AppellPotentials pot = appell_potentials(src, P, t, kTarget);
    const RealVectorField A = eval_potential(cf, kTarget);
    double m = 0.0;
    for (int d = 0; d < 2; ++d)
        for (std::size_t i = 0; i < kTarget.size(); ++i) {
            m = std::max(m, std::abs(pot.A.components[d][i] - g * g * A.components[d][i]));
            m = std::max(m, std::abs(pot.divA[i]));
        }
    EXPECT_LT(m, 1e-12);
}
