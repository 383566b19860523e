#include "covflow/carleman.hpp"

#include <gtest/gtest.h>

using namespace covflow;

namespace {

const GridSpec kCube{3, 6.0, 24};

TestFunctionSpec bump() {
    TestFunctionSpec s;
    s.width = 1.0;
    s.cutoff_M = 1.35;
    return s;
}

}  // namespace

TEST(Carleman, WeightExponent) {
    const CarlemanParams P{0.5, 1.0, 8.0, {1, 0, 0}};
    const double x[3] = {0.2, -0.3, 0.4};
    // t = 0: mu |x|^2
    EXPECT_DOUBLE_EQ(carleman_log_weight(x, 3, 0.0, P), 0.5 * (0.04 + 0.09 + 0.16));
    // t = 1/2: centre shifted by R/4 along v, time term -(1+eps) R^2 / (64 mu)
    const double y0 = 0.2 + 2.0;
    EXPECT_NEAR(carleman_log_weight(x, 3, 0.5, P), 0.5 * (y0 * y0 + 0.09 + 0.16) - 2.0 * 64.0 / 32.0, 1e-12);
    const double far[3] = {40.0, 0.0, 0.0};
    EXPECT_THROW(carleman_weight(far, 3, 0.0, P), std::overflow_error);
}

TEST(Carleman, Admissibility) {
    const CarlemanParams P{1.0, 1.0, 4.0, {0, 0, 1}};
    EXPECT_TRUE(P.admissible(0.0));
    EXPECT_TRUE(P.admissible(0.49));
    EXPECT_FALSE(P.admissible(0.5));
    EXPECT_THROW((CarlemanParams{1.0, 1.0, 4.0, {1, 1, 0}}.validate(3)), std::invalid_argument);
}

TEST(Carleman, TimeCutoff) {
    for (double R : {4.0, 16.0}) {
        EXPECT_EQ(time_cutoff(0.0, R), 0.0);
        EXPECT_EQ(time_cutoff(0.5 / R, R), 0.0);
        EXPECT_EQ(time_cutoff(1.0 / R, R), 1.0);
        EXPECT_EQ(time_cutoff(0.5, R), 1.0);
        EXPECT_EQ(time_cutoff(1.0, R), 0.0);
        EXPECT_NEAR(time_cutoff(0.3 / R + 0.5 / R, R), time_cutoff(1.0 - 0.8 / R, R), 1e-12);
    }
}

TEST(Carleman, SingleAdmissibleCellHolds) {
    const auto fam = cutoff_factory(bump(), kCube, uniform_times(1001), 8.0);
    const CarlemanResult r = carleman_sides(fam, Potentials::free(kCube), CarlemanParams{0.5, 1.0, 8.0, {1, 0, 0}}, 0.0);
    EXPECT_TRUE(r.admissible);
    EXPECT_GT(r.lhs, 0.0);
    EXPECT_LE(r.ratio(), 1.0);
}

TEST(Carleman, ZeroFamilyGivesZeroSides) {
    auto fam = cutoff_factory(bump(), kCube, uniform_times(11), 4.0);
    std::fill(fam.spatial.begin(), fam.spatial.end(), 0.0);
    const CarlemanResult r = carleman_sides(fam, Potentials::free(kCube), CarlemanParams{}, 0.0);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.ratio(), 0.0);
}

TEST(Carleman, LeakingTestFunctionRejected) {
    TestFunctionSpec s = bump();
    s.cutoff_M = 2.9;  // 2M = 5.8 > 0.9 L
    EXPECT_THROW(cutoff_factory(s, kCube, uniform_times(11), 4.0), std::invalid_argument);
    TestFamily fam = cutoff_factory(bump(), kCube, uniform_times(11), 4.0);
    fam.spatial[0] = 1.0;  // corner sample
    fam.support.insert(fam.support.begin(), 0);
    EXPECT_THROW(carleman_sides(fam, Potentials::free(kCube), CarlemanParams{}, 0.0), std::runtime_error);
}

TEST(Carleman, ProductFamilyVanishesAtEndpoints) {
    const GridSpec g{2, 8.0, 32};
    TimeSampler ones = [](double, cvec& out) { std::fill(out.begin(), out.end(), cplx(1.0, 0.0)); };
    const TestFamily fam = product_family(g, uniform_times(21), 1.6, 4.0, ones);
    cvec v;
    fam.sample(0.0, v);
    for (const auto& z : v) EXPECT_EQ(z, cplx(0.0, 0.0));
    fam.sample(0.5, v);
    EXPECT_EQ(v[g.size() / 2 + 16], cplx(1.0, 0.0));  // origin
    EXPECT_THROW(product_family(g, uniform_times(21), 4.0, 4.0, ones), std::invalid_argument);
    EXPECT_THROW(product_family(g, uniform_times(21), 1.6, 1.0, ones), std::invalid_argument);
}

TEST(Carleman, SweepShapeAndCsv) {
    const GridSpec g{3, 6.0, 16};
    TestFunctionSpec s = bump();
    const auto cases = carleman_sweep(g, Potentials::free(g), 0.0, {0.5}, {4.0, 8.0}, 1.0, {0, 1, 0}, s, 401);
    ASSERT_EQ(cases.size(), 2u);
    EXPECT_EQ(cases[1].case_id, 1);
    EXPECT_EQ(cases[1].v_index, 1);
    std::ostringstream os;
    write_carleman_csv(os, cases);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "case_id,mu,eps,R,v_index,sup_xtB,admissible,lhs,rhs,ratio");
}

TEST(Carleman, SweepIsDeterministicAcrossThreadCounts) {
    const GridSpec g{3, 6.0, 16};
    auto sweep = [&] {
        return carleman_sweep(g, Potentials::free(g), 0.0, {0.25, 1.0}, {4.0, 8.0}, 1.0, {1, 0, 0}, bump(), 201);
    };
    setenv("COVFLOW_THREADS", "1", 1);
    const auto a = sweep();
    setenv("COVFLOW_THREADS", "3", 1);
    const auto b = sweep();
    unsetenv("COVFLOW_THREADS");
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].ratio, b[k].ratio);
}
