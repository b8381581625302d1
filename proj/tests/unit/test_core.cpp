#include "support.hpp"

#include <gtest/gtest.h>

using namespace qb;

TEST(PrincipalSqrt, Examples) {
    EXPECT_EQ(principal_sqrt(4.0), Complex(2.0, 0.0));
    EXPECT_EQ(principal_sqrt(-1.0), Complex(0.0, 1.0));
    EXPECT_LT(std::abs(principal_sqrt(Complex(0.0, 2.0)) - Complex(1.0, 1.0)), 1e-15);
}

TEST(PrincipalSqrt, NegativeAxisHasPositiveImaginaryPart) {
    EXPECT_GT(principal_sqrt(Complex(-4.0, -0.0)).imag(), 0.0);
    EXPECT_GT(principal_sqrt(Complex(-4.0, 0.0)).imag(), 0.0);
    EXPECT_EQ(principal_sqrt(Complex(-9.0, -0.0)), Complex(0.0, 3.0));
}

TEST(PrincipalSqrt, SquaresBackInRightHalfPlane) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10000; ++i) {
        const Complex a = random_complex(rng, 10.0);
        const Complex r = principal_sqrt(a);
        EXPECT_LE(std::abs(r * r - a), 1e-14 * std::abs(a));
        EXPECT_GE(r.real(), 0.0);
        if (r.real() == 0.0) {
            EXPECT_GT(r.imag(), 0.0);
        }
    }
}

TEST(Invert, Examples) {
    EXPECT_EQ(invert(identity(3)), identity(3));
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 2.0;
    d(1, 1) = kI;
    const CMatrix di = invert(d);
    EXPECT_LT(std::abs(di(0, 0) - 0.5), 1e-16);
    EXPECT_LT(std::abs(di(1, 1) + kI), 1e-16);
    EXPECT_EQ(di(0, 1), Complex(0.0));

    std::mt19937_64 rng(2);
    CMatrix m(4, 4);
    for (int i = 0; i < 16; ++i) m.data()[i] = random_complex(rng);
    EXPECT_LE(max_abs(m * invert(m) - identity(4)), 1e-12);
    EXPECT_LE(max_abs(invert(m) * m - identity(4)), 1e-12);
}

TEST(Invert, SingularThrows) {
    CMatrix m = CMatrix::Ones(3, 3);
    try {
        invert(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
    }
}

TEST(RandomSkew, ShapeAndDeterminism) {
    EXPECT_EQ(random_skew(1, 5), CMatrix::Zero(1, 1));
    const CMatrix w = random_skew(2, 9);
    EXPECT_EQ(w(0, 0), Complex(0.0));
    EXPECT_EQ(w(1, 1), Complex(0.0));
    EXPECT_EQ(w(1, 0), -w(0, 1));
    EXPECT_EQ(random_skew(5, 42), random_skew(5, 42));
    const CMatrix w5 = random_skew(5, 42);
    EXPECT_EQ(CMatrix(w5 + w5.transpose()), CMatrix::Zero(5, 5));
}

TEST(RandomOrthogonal, CayleyImage) {
    EXPECT_EQ(cayley(CMatrix::Zero(3, 3)), identity(3));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const CMatrix q2 = random_complex_orthogonal(2, seed);
        EXPECT_LE(orthogonality_defect(q2), 1e-12);
        const CMatrix q = random_complex_orthogonal(6, seed);
        EXPECT_LE(orthogonality_defect(q), 1e-12);
        EXPECT_LT(std::abs(q.determinant() - 1.0), 1e-12);
    }
}

TEST(CentralDiff, LinearAndQuadratic) {
    const auto lin = [](const Point& u) { return CVector(CVector::Constant(1, Complex(3.0 * u(0) - 2.0 * u(1), u(1)))); };
    Point u(2);
    u << 0.3, -0.7;
    EXPECT_LT(std::abs(central_diff(lin, u, 0, 1e-3)(0) - 3.0), 1e-12);
    const auto sq = [](const Point& p) { return CVector(CVector::Constant(1, p(0) * p(0))); };
    Point one = Point::Constant(1, 1.0);
    EXPECT_LT(std::abs(central_diff(sq, one, 0, 1e-5)(0) - 2.0), 1e-9);
}

TEST(CentralDiff, MatchesAnalyticSurfaceJet) {
    std::mt19937_64 rng(3);
    const QuadricSpec spec = test::random_spec(3, rng);
    const CoefficientSet c = random_coefficients(spec, rng);
    const Point u = test::random_point(3, rng);
    const SurfaceJet jet = surface_jet(c, u);
    const auto x = [&](const Point& p) { return eval_surface(c, p); };
    for (int j = 0; j < 3; ++j) EXPECT_LE(max_abs(central_diff(x, u, j, 1e-5) - jet.first.col(j)), 1e-6);
}

TEST(Field, PartialFallsBackToFiniteDifferences) {
    MatrixField f;
    f.value = [](const Point& u) {
        CMatrix m(1, 1);
        m(0, 0) = std::exp(Complex(u(0), u(1)));
        return m;
    };
    EXPECT_FALSE(f.has_analytic_derivative());
    Point u(2);
    u << 0.1, 0.2;
    EXPECT_LT(std::abs(f.partial(u, 0, 1e-5)(0, 0) - std::exp(Complex(0.1, 0.2))), 1e-9);
    const MatrixField c = constant_field(identity(2));
    EXPECT_EQ(c.partial(u, 1, 1e-5), CMatrix::Zero(2, 2));
}

TEST(ParallelMap, DeterministicOrder) {
    const auto out = parallel_map<int>(100, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
}

TEST(ToleranceConfig, Validation) {
    ToleranceConfig t;
    EXPECT_NO_THROW(t.validate());
    t.fd_step = 0;
    EXPECT_THROW(t.validate(), Error);
}
