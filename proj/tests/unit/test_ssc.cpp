#include "obstacle/counterexamples.hpp"
#include "obstacle/ssc.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace obstacle;

namespace {

// Stationary bundle with p = alpha x(1-x) >= 0, eta = 0 and an untouched
// obstacle: every sign condition holds at beta = 0.
StationarityBundle benign_bundle(int n, double alpha = 1.0, double psi_level = -10.0) {
    Grid g = Grid::interval(n);
    GridFn s = GridFn::sample(g, [](const Point& p) { return p.x * (1 - p.x); });
    GridFn dens = -laplacian(alpha * s);
    Obstacle psi = Obstacle::from_field(g, [psi_level](const Point& p) { return psi_level + p.x * p.x - p.x; });
    return assemble_bundle(ObjectiveSpec::linear(dens, alpha), -1.0 * s, psi, ControlBounds::unbounded(g));
}

StationarityBundle inactive_adjoint_bundle(int n, double c = 1.0 / 16) {
    CounterexampleParams p;
    p.c = c;
    return build_counterexample(CounterexampleId::inactive_adjoint, p, n).bundle();
}

}  // namespace

TEST(Ssc, DefaultWitnessGrids) {
    auto beta = default_beta_grid(1.0, 10.0);
    ASSERT_EQ(beta.size(), 22u);
    EXPECT_EQ(beta[0], 0.0);
    EXPECT_DOUBLE_EQ(beta[1], 1e-2);
    EXPECT_DOUBLE_EQ(beta[21], 1e-2 * 1048576);
    auto gamma = logspace(1e-4, 1.0, 13);
    EXPECT_DOUBLE_EQ(gamma.front(), 1e-4);
    EXPECT_DOUBLE_EQ(gamma.back(), 1.0);
    EXPECT_NEAR(gamma[3], 1e-3, 1e-15);
    EXPECT_EQ(ssc_theorem_from_string("enhanced-global"), SscTheorem::enhanced_global);
    EXPECT_THROW(ssc_theorem_from_string("bogus"), DomainError);
}

TEST(Ssc, BenignBundleIsCertifiedEverywhere) {
    StationarityBundle b = benign_bundle(63);
    ASSERT_TRUE(check_strong_stationarity(b).stationary());
    SscOptions opt;
    opt.samples = 50;
    SscReport local = certify_compat_local(b, opt);
    EXPECT_EQ(local.verdict, Verdict::certified);
    EXPECT_EQ(local.beta, 0.0);
    EXPECT_GT(local.curvature_samples, 50);  // random plus coordinate directions
    EXPECT_NEAR(local.min_curvature, 1.0, 1e-9);  // alpha ||h||^2 for unit h
    EXPECT_EQ(certify_enhanced_local(b, opt).verdict, Verdict::certified);
    SscReport global = certify_compat_global(b, opt);
    EXPECT_EQ(global.verdict, Verdict::certified);
    EXPECT_TRUE(global.unique_global);
    SscReport eg = certify_enhanced_global(b, opt);
    EXPECT_EQ(eg.verdict, Verdict::certified);
    EXPECT_FALSE(eg.unique_global);  // mu_j = 0
}

TEST(Ssc, ScalarInequalityWindow) {
    StationarityBundle b = benign_bundle(63);
    const double omega = poincare_constant(b.grid());
    SscOptions opt;
    opt.beta_grid = {0.0};
    SscReport at0 = certify_compat_global(b, opt);
    EXPECT_EQ(at0.verdict, Verdict::certified);
    EXPECT_FALSE(at0.unique_global);  // mu + 0 = 0: not strict
    opt.beta_grid = {2 * omega};
    SscReport edge = certify_compat_global(b, opt);
    EXPECT_EQ(edge.verdict, Verdict::certified);
    EXPECT_NEAR(edge.residuals["scalar_inequality"], 0.0, 1e-9 * omega * omega);
    opt.beta_grid = {0.5 * omega, 2.5 * omega};
    SscReport mixed = certify_compat_global(b, opt);
    EXPECT_TRUE(mixed.unique_global);
    EXPECT_DOUBLE_EQ(*mixed.beta, 0.5 * omega);
    opt.beta_grid = {2.5 * omega};
    EXPECT_EQ(certify_compat_global(b, opt).verdict, Verdict::not_certified);
}

TEST(Ssc, InactiveAdjointIsRejected) {
    StationarityBundle b = inactive_adjoint_bundle(2047);
    ASSERT_TRUE(check_strong_stationarity(b).stationary());
    SscOptions opt;
    opt.samples = 20;
    SscReport cl = certify_compat_local(b, opt);
    EXPECT_EQ(cl.verdict, Verdict::not_certified);
    EXPECT_GT(cl.residuals["adjoint_sign"], 0.0);
    EXPECT_EQ(certify_enhanced_local(b, opt).verdict, Verdict::not_certified);
    EXPECT_EQ(certify_compat_global(b, opt).verdict, Verdict::not_certified);
    SscReport eg = certify_enhanced_global(b, opt);
    EXPECT_EQ(eg.verdict, Verdict::not_certified);
    EXPECT_GT(eg.residuals["interval_exclusion"], 0.0);
}

TEST(Ssc, RequiredBetaGrowsLikeInverseMeshWidth) {
    // At x = h the adjoint condition needs beta >= (1 - h) / (c h).
    SscOptions opt;
    opt.samples = 0;
    double prev = 0.0;
    for (int n : {255, 511, 1023, 2047}) {
        StationarityBundle b = inactive_adjoint_bundle(n);
        const double h = b.grid().h();
        const double need = certify_compat_local(b, opt).required_beta;
        // The discrete gap at x = h differs from c h^2 by O(h^3).
        EXPECT_NEAR(need * h * (1.0 / 16) / (1 - h), 1.0, 4 * h);
        if (prev > 0) EXPECT_NEAR(need / prev, 2.0, 0.01);
        prev = need;
    }
}

TEST(Ssc, RejectionOverParameterFamily) {
    SscOptions opt;
    opt.samples = 0;
    for (double c : {0.01, 0.03, 1.0 / 16, 0.1, 0.124}) {
        StationarityBundle b = inactive_adjoint_bundle(2047, c);
        EXPECT_EQ(certify_compat_local(b, opt).verdict, Verdict::not_certified) << c;
        EXPECT_EQ(certify_enhanced_local(b, opt).verdict, Verdict::not_certified) << c;
    }
    for (double level : {-10.0, -1.0, -0.3}) {
        StationarityBundle b = benign_bundle(255, 1.0, level);
        ASSERT_TRUE(classify_subharmonic(b.psi));
        EXPECT_EQ(certify_compat_local(b, opt).verdict, Verdict::certified) << level;
        EXPECT_EQ(certify_enhanced_local(b, opt).verdict, Verdict::certified) << level;
    }
}

TEST(Ssc, StrictActivityIsRejected) {
    StationarityBundle b = build_counterexample(CounterexampleId::strict_activity, {}, 4095).bundle();
    ASSERT_TRUE(check_strong_stationarity(b).stationary());
    SscOptions opt;
    opt.samples = 0;
    SscReport cl = certify_compat_local(b, opt);
    EXPECT_EQ(cl.verdict, Verdict::not_certified);
    EXPECT_GT(cl.residuals["state_multiplier_sign"], 0.0);
    EXPECT_EQ(cl.residuals["adjoint_sign"], 0.0);
    EXPECT_EQ(certify_enhanced_local(b, opt).verdict, Verdict::not_certified);
}

TEST(Ssc, EnhancedGateAndExclusion) {
    // u_bar <= 0, eta >= 0: the restricted set of the control condition is empty.
    StationarityBundle b = benign_bundle(63);
    SscReport r = certify_enhanced_local(b);
    EXPECT_EQ(r.verdict, Verdict::certified);

    StationarityBundle ce = inactive_adjoint_bundle(255);
    ControlBounds tight = ControlBounds::box(GridFn::constant(ce.grid(), -1.0), GridFn::constant(ce.grid(), 0.3));
    StationarityBundle gated = assemble_bundle(ce.objective, ce.u_bar, ce.psi, tight);
    EXPECT_EQ(certify_enhanced_local(gated).verdict, Verdict::inapplicable);
    EXPECT_EQ(certify_enhanced_global(gated).verdict, Verdict::inapplicable);

    // u_bar = 0 never lies in an open interval starting at 0.
    Grid g = Grid::interval(63);
    Obstacle psi = Obstacle::from_field(g, [](const Point& p) { return -1.0 - p.x * p.x; });
    StationarityBundle zero = assemble_bundle(ObjectiveSpec::linear(GridFn(g), 1.0), GridFn(g), psi, ControlBounds::unbounded(g));
    SscReport z = certify_enhanced_global(zero);
    EXPECT_EQ(z.residuals["interval_exclusion"], 0.0);
    EXPECT_EQ(z.verdict, Verdict::certified);
}

TEST(Ssc, NonStationaryBundleIsInapplicable) {
    StationarityBundle b = inactive_adjoint_bundle(255);
    GridFn u = b.u_bar;
    u[100] += 0.5;
    StationarityBundle moved = assemble_bundle(b.objective, u, b.psi, b.bounds);
    EXPECT_EQ(certify_compat_local(moved).verdict, Verdict::inapplicable);
    EXPECT_EQ(certify_compat_global(moved).verdict, Verdict::inapplicable);
}

TEST(Ssc, SubharmonicCertificate) {
    Grid g = Grid::interval(63);
    ObjectiveSpec spec = ObjectiveSpec::linear(GridFn(g), 1.0);
    ControlBounds nb = ControlBounds::unbounded(g);
    EXPECT_EQ(certify_subharmonic_convex(spec, Obstacle::from_field(g, [](const Point& p) { return p.x * p.x - p.x; }), nb).verdict,
              Verdict::certified);
    EXPECT_EQ(certify_subharmonic_convex(spec, Obstacle::from_field(g, [](const Point&) { return 0.0; }), nb).verdict,
              Verdict::certified);
    CounterexampleScenario s = build_counterexample(CounterexampleId::strict_activity, {}, 63);
    SscReport r = certify_subharmonic_convex(s.spec, s.psi, nb);
    EXPECT_EQ(r.verdict, Verdict::not_certified);
    EXPECT_GT(r.residuals["laplacian_of_obstacle"], 0.0);
}

TEST(Ssc, LocalCertificateImpliesEmpiricalGrowth) {
    StationarityBundle b = benign_bundle(127);
    ASSERT_EQ(certify_compat_local(b).verdict, Verdict::certified);
    const double radius = 1e-2 * norm_l2(b.u_bar) + 1e-3;
    GrowthSweep s = growth_sweep(b, radius, 200, 42);
    EXPECT_GE(s.min_increase, -1e-12);
    EXPECT_GT(s.min_growth_constant, 0.0);
}

TEST(Ssc, StrictGlobalCertificateSurvivesGlobalSweep) {
    StationarityBundle b = benign_bundle(127, 1.0, -0.3);
    SscReport r = certify_compat_global(b);
    ASSERT_EQ(r.verdict, Verdict::certified);
    ASSERT_TRUE(r.unique_global);
    GrowthSweep s = growth_sweep(b, 0.0, 500, 7);
    EXPECT_GE(s.min_increase, -1e-12);
}

TEST(Ssc, ReportsAreDeterministic) {
    StationarityBundle b = benign_bundle(63);
    SscOptions opt;
    opt.samples = 30;
    opt.seed = 9;
    SscReport a = certify_compat_local(b, opt);
    SscReport c = certify_compat_local(b, opt);
    EXPECT_EQ(a.curvature_samples, c.curvature_samples);
    EXPECT_EQ(a.min_curvature, c.min_curvature);
    EXPECT_EQ(a.residuals, c.residuals);
}
