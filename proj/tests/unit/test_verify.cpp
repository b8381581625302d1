#include "support.hpp"

#include <gtest/gtest.h>

using namespace qb;

namespace {

struct SeedFixture {
    QuadricSpec spec;
    CoefficientSet c;
    Point u;
};

SeedFixture make_fixture(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const QuadricSpec spec = test::random_spec(n, rng);
    CoefficientSet c = random_coefficients(spec, rng);
    return {spec, c, test::random_point(n, rng)};
}

}  // namespace

TEST(Report, OverallAndSummary) {
    VerificationReport r;
    r.add("a", 1e-13, 1e-12);
    r.add("a", 5e-13, 1e-12);
    r.add("b", 2.0, 1.0);
    r.add_flag("c", true);
    EXPECT_FALSE(r.overall());
    const auto s = r.summary();
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].residual, 5e-13);
    EXPECT_FALSE(s[1].pass);
    r.add("nan", std::nan(""), 1.0);
    EXPECT_FALSE(r.checks.back().pass);
}

TEST(PrimeIntegral, HoldsAndDetects) {
    const auto f = make_fixture(3, 60);
    const SeedState s = eval_state(f.c, f.u);
    EXPECT_LE(check_prime_integral(f.spec, s.V, s.Lambda), 1e-12);
    EXPECT_GE(check_prime_integral(f.spec, s.V, 1.01 * s.Lambda), 1e-4);
}

TEST(LinearSystem, DetectsPerturbedState) {
    const auto f = make_fixture(3, 61);
    const StateField good = peterson_state_field(f.c);
    StateField bad;
    bad.value = [&](const Point& u) {
        SeedState s = eval_state(f.c, u);
        s.Lambda(1) += 1e-3;
        return s;
    };
    const MatrixField id = constant_field(identity(3));
    EXPECT_LE(check_linear_system(f.spec, id, OmegaMode::Zero, good, f.u, 1e-5).max(), 1e-12);
    EXPECT_GE(check_linear_system(f.spec, id, OmegaMode::Zero, bad, f.u, 1e-5).max(), 1e-4);
}

TEST(FrameIdentities, HoldAndDetect) {
    const auto f = make_fixture(4, 62);
    Frame frame = eval_frame(f.c, f.u);
    const SeedState s = eval_state(f.c, f.u);
    EXPECT_LE(check_frame_identities(f.spec, frame, s).max(), 1e-10);
    frame.L(2, 3) += 1e-3;
    EXPECT_GE(check_frame_identities(f.spec, frame, s).max(), 1e-4);
}

TEST(Metric, DetectsScaledTangent) {
    const auto f = make_fixture(3, 63);
    const SurfaceJet jet = surface_jet(f.c, f.u);
    const CMatrix base = quadric_tangent(f.spec, peterson_state_field(f.c), f.u, 1e-5);
    EXPECT_LE(check_metric(jet.first, base), 1e-9);
    EXPECT_GE(check_metric(1.001 * jet.first, base), 1e-4);
}

TEST(Conjugate, HoldsAndDetects) {
    const auto f = make_fixture(3, 64);
    SurfaceJet jet = surface_jet(f.c, f.u);
    EXPECT_LE(check_conjugate(jet), 1e-8);
    // Push a mixed partial off the tangent space along a normal direction.
    const CMatrix& t = jet.first;
    CVector m = CVector::Zero(t.rows());
    m(0) = 1.0;
    const CVector normal = m - t * (invert(t.transpose() * t) * (t.transpose() * m));
    const double bump = 1e-3 * std::max(1.0, max_abs(t) * max_abs(t)) / max_abs(normal);
    jet.second[0].col(1) += bump * normal;
    jet.second[1].col(0) += bump * normal;
    EXPECT_GE(check_conjugate(jet), 1e-4);
}

TEST(Conjugate, DegenerateTangent) {
    SurfaceJet jet;
    jet.x = CVector::Zero(3);
    jet.first = CMatrix::Zero(3, 2);
    jet.second = {CMatrix::Zero(3, 2), CMatrix::Zero(3, 2)};
    try {
        check_conjugate(jet);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateTangent);
    }
}

TEST(Nondegenerate, Examples) {
    CVector a(2), b(2);
    a << 0.0, kI;
    b << 1.0, kI;
    EXPECT_TRUE(check_nondegenerate(a, 1e-6));
    EXPECT_FALSE(check_nondegenerate(b, 1e-6));
}

TEST(Compatibility, IdentityAndNonSolution) {
    const QuadricSpec spec({1.0, 2.0, 3.0});
    const Point u = Point::Constant(3, 0.1);
    const auto id = check_compatibility(constant_field(identity(3)), nullptr, u, 1e-5);
    EXPECT_EQ(id.max(), 0.0);
    std::mt19937_64 rng(65);
    const CMatrix k1 = random_skew(3, rng), k2 = random_skew(3, rng), k3 = random_skew(3, rng);
    MatrixField r;
    r.value = [=](const Point& p) { return cayley(p(0) * k1 + p(1) * k2 + p(2) * k3); };
    EXPECT_GE(check_compatibility(r, &spec, u, 1e-5).max(), 1e-4);
}

TEST(Compatibility, BacklundRotationPasses) {
    std::mt19937_64 rng(66);
    for (int n = 2; n <= 4; ++n) {
        const QuadricSpec spec = test::random_spec(n, rng);
        const BacklundParam p = make_backlund_param(spec, test::random_z(spec, rng), random_skew(n, rng, 0.5));
        const Point u = test::random_point(n, rng);
        EXPECT_LE(check_compatibility(backlund_rotation(p), &spec, u, 1e-5).max(), 1e-6);
    }
}

TEST(RelativeRiccati, DetectsPerturbedRotation) {
    std::mt19937_64 rng(67);
    const QuadricSpec spec = test::random_spec(3, rng);
    const BacklundParam p = make_backlund_param(spec, test::random_z(spec, rng), random_skew(3, rng, 0.5));
    const MatrixField r = backlund_rotation(p);
    const MatrixField id = constant_field(identity(3));
    const Point u = test::random_point(3, rng);
    EXPECT_LE(relative_riccati_residual(r, id, p.d(), u, 1e-5), 1e-6);
    MatrixField bent;
    bent.value = [=](const Point& q) {
        CMatrix k = CMatrix::Zero(3, 3);
        k(0, 1) = 1e-3 * q(0);
        k(1, 0) = -k(0, 1);
        return CMatrix(r(q) * cayley(k));
    };
    EXPECT_GE(relative_riccati_residual(bent, id, p.d(), u, 1e-5), 1e-4);
}

TEST(FdJet, MatchesAnalyticJet) {
    for (int n = 2; n <= 5; ++n) {
        const auto f = make_fixture(n, 70 + static_cast<std::uint64_t>(n));
        const SurfaceJet exact = surface_jet(f.c, f.u);
        const SurfaceJet approx = fd_jet([&](const Point& p) { return eval_surface(f.c, p); }, f.u, 1e-5);
        const double scale = std::max(1.0, max_abs(exact.first));
        EXPECT_LE(max_abs(approx.first - exact.first) / scale, 1e-5);
        for (int j = 0; j < n; ++j)
            EXPECT_LE(max_abs(approx.second[static_cast<std::size_t>(j)] - exact.second[static_cast<std::size_t>(j)]) /
                          std::max(1.0, max_abs(exact.second[static_cast<std::size_t>(j)])),
                      1e-5);
    }
}

TEST(Suites, SeedAndLatticePass) {
    std::mt19937_64 rng(68);
    const QuadricSpec spec = test::random_spec(3, rng);
    Lattice lat(spec, random_coefficients(spec, rng));
    const ZStep s1{SpectralParam(spec, Complex(0.5, 0.1)), random_skew(3, rng, 0.5), std::nullopt};
    const ZStep s2{SpectralParam(spec, Complex(-0.7, 0.2)), random_skew(3, rng, 0.5), std::nullopt};
    lat.ensure({s1, s2});
    const auto probes = probe_points(Point::Constant(3, -0.4), Point::Constant(3, 0.4), 4, 9);
    const VerificationReport rep = lattice_suite(lat, probes);
    for (const auto& c : rep.summary()) EXPECT_TRUE(c.pass) << c.name << " " << c.residual;
    bool has_path = false;
    for (const auto& c : rep.checks) has_path = has_path || c.name == "id3.path_independence";
    EXPECT_TRUE(has_path);
}

TEST(ProbePoints, Deterministic) {
    const auto a = probe_points(Point::Constant(2, -1.0), Point::Constant(2, 1.0), 5, 3);
    const auto b = probe_points(Point::Constant(2, -1.0), Point::Constant(2, 1.0), 5, 3);
    ASSERT_EQ(a.size(), 5u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i], b[i]);
        EXPECT_LE(a[i].cwiseAbs().maxCoeff(), 1.0);
    }
}
