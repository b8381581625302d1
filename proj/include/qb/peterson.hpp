#pragma once

// Peterson's isometric deformations (R = I, omega = 0) in closed form.
//
// Along u^j the linear system dV = δΛ, dΛ = -δAV decouples into harmonic
// oscillators with frequency mu_j = sqrt(1/a_j), so every solution is fixed by
// coefficient pairs (c_1^j, c_2^j). The quadratic constraints on those pairs
// say that the 2n vectors (c_l for l = 1..2n-1, i*c) are orthonormal for the
// block bilinear form G = blockdiag(2/a_j [[0,1],[1,0]]); they are produced
// constructively as the columns of S Q with S^T G S = I and Q in O_2n(C).

#include "qb/quadric.hpp"

#include <random>
#include <vector>

namespace qb {

/// Coefficient vectors are ordered (c_1^1, c_2^1, ..., c_1^n, c_2^n).
struct CoefficientSet {
    int n = 0;
    CVector seed;     // 2n: the solution (V, Λ)
    CMatrix hom;      // 2n x (2n-1): column l gives (V_l, Λ_l)
    CVector offsets;  // 2n-1 integration constants c^l
    CVector mu;       // n: principal sqrt(1/a_j)

    Complex seed_c1(int j) const { return seed(2 * j); }
    Complex seed_c2(int j) const { return seed(2 * j + 1); }
    Complex hom_c1(int l, int j) const { return hom(2 * j, l); }
    Complex hom_c2(int l, int j) const { return hom(2 * j + 1, l); }
    int ambient_dim() const { return 2 * n - 1; }

    /// Some (c_1^j, c_2^j) = (0, 0): λ_j vanishes identically and the chart degenerates.
    bool degenerate() const {
        for (int j = 0; j < n; ++j)
            if (std::abs(seed_c1(j)) < 1e-14 && std::abs(seed_c2(j)) < 1e-14) return true;
        return false;
    }
};

struct SeedState {
    CVector V;
    CVector Lambda;

    friend SeedState operator+(const SeedState& x, const SeedState& y) { return {x.V + y.V, x.Lambda + y.Lambda}; }
    friend SeedState operator-(const SeedState& x, const SeedState& y) { return {x.V - y.V, x.Lambda - y.Lambda}; }
    friend SeedState operator/(const SeedState& x, double s) { return {x.V / s, x.Lambda / s}; }
    friend SeedState operator*(double s, const SeedState& x) { return {s * x.V, s * x.Lambda}; }
};

/// Homogeneous frame: columns (V_l, Λ_l), l = 1..2n-1, each n-dimensional.
struct Frame {
    CMatrix V;
    CMatrix L;
};

/// x, its first partials (column j = ∂_j x) and second partials
/// (second[j].col(k) = ∂_j ∂_k x).
struct SurfaceJet {
    CVector x;
    CMatrix first;
    std::vector<CMatrix> second;
};

using StateField = Field<SeedState>;

inline CMatrix gram_form(const QuadricSpec& spec) {
    const int n = spec.n();
    CMatrix g = CMatrix::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        g(2 * j, 2 * j + 1) = 2.0 * spec.a_inv(j);
        g(2 * j + 1, 2 * j) = 2.0 * spec.a_inv(j);
    }
    return g;
}

/// S with S^T G S = I: per block S_j = sqrt(a_j) [[1/2, -i/2], [1/2, i/2]],
/// the inverse of a_j^{-1/2} [[1, 1], [i, -i]].
inline CMatrix block_factor(const QuadricSpec& spec) {
    const int n = spec.n();
    CMatrix s = CMatrix::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        const Complex r = principal_sqrt(spec.a(j));
        s(2 * j, 2 * j) = r * 0.5;
        s(2 * j, 2 * j + 1) = -r * kI * 0.5;
        s(2 * j + 1, 2 * j) = r * 0.5;
        s(2 * j + 1, 2 * j + 1) = r * kI * 0.5;
    }
    return s;
}

inline CVector frequencies(const QuadricSpec& spec) {
    CVector mu(spec.n());
    for (int j = 0; j < spec.n(); ++j) mu(j) = principal_sqrt(spec.a_inv(j));
    return mu;
}

inline CoefficientSet solve_coefficients(const QuadricSpec& spec, const CMatrix& q, const CVector& offsets,
                                         double tol = ToleranceConfig{}.algebraic_tol) {
    const int n = spec.n();
    if (q.rows() != 2 * n || q.cols() != 2 * n)
        throw Error(ErrorCode::InvalidInput, "solve_coefficients: Q must be 2n x 2n");
    if (offsets.size() != 2 * n - 1)
        throw Error(ErrorCode::InvalidInput, "solve_coefficients: need 2n-1 offsets");
    const double scale = std::max(1.0, max_abs(q) * max_abs(q));
    if (orthogonality_defect(q) > tol * scale)
        throw Error(ErrorCode::NotOrthogonal, "solve_coefficients: Q^T Q != I");

    const CMatrix sq = block_factor(spec) * q;
    CoefficientSet c;
    c.n = n;
    c.hom = sq.leftCols(2 * n - 1);
    // i * (unit vector) has G-square -1, as the prime integral requires.
    c.seed = kI * sq.col(2 * n - 1);
    c.offsets = offsets;
    c.mu = frequencies(spec);
    return c;
}

inline CoefficientSet solve_coefficients(const QuadricSpec& spec, const CMatrix& q) {
    return solve_coefficients(spec, q, CVector::Zero(2 * spec.n() - 1));
}

/// Coefficients from a random rotation Q in SO_2n(C).
inline CoefficientSet random_coefficients(const QuadricSpec& spec, std::mt19937_64& rng) {
    return solve_coefficients(spec, random_complex_orthogonal(2 * spec.n(), rng));
}

struct PrimiResiduals {
    double hom_hom = 0;    // hom^T G hom - I
    double hom_seed = 0;   // hom^T G seed
    double seed_seed = 0;  // seed^T G seed + 1

    double max() const { return std::max({hom_hom, hom_seed, seed_seed}); }
};

inline PrimiResiduals primi_residuals(const QuadricSpec& spec, const CoefficientSet& c) {
    const CMatrix g = gram_form(spec);
    PrimiResiduals r;
    r.hom_hom = max_abs(c.hom.transpose() * g * c.hom - identity(c.hom.cols()));
    r.hom_seed = max_abs(c.hom.transpose() * g * c.seed);
    r.seed_seed = std::abs((c.seed.transpose() * g * c.seed).value() + 1.0);
    return r;
}

namespace detail {

inline void require_point(const CoefficientSet& c, const Point& u) {
    if (u.size() != c.n) throw Error(ErrorCode::InvalidInput, "parameter point has wrong dimension");
}

inline CVector phases(const CoefficientSet& c, const Point& u) {
    CVector e(c.n);
    for (int j = 0; j < c.n; ++j) e(j) = std::exp(kI * c.mu(j) * u(j));
    return e;
}

/// (v, λ) for one coefficient vector at precomputed phases.
inline SeedState oscillator(const CoefficientSet& c, const CVector& coeff, const CVector& e) {
    SeedState s{CVector(c.n), CVector(c.n)};
    for (int j = 0; j < c.n; ++j) {
        const Complex p = coeff(2 * j) * e(j);
        const Complex m = coeff(2 * j + 1) / e(j);
        s.V(j) = p + m;
        s.Lambda(j) = kI * c.mu(j) * (p - m);
    }
    return s;
}

}  // namespace detail

inline SeedState eval_state(const CoefficientSet& c, const Point& u) {
    detail::require_point(c, u);
    return detail::oscillator(c, c.seed, detail::phases(c, u));
}

/// ∂_j V = λ_j e_j and ∂_j Λ = -mu_j^2 v^j e_j.
inline SeedState eval_state_derivative(const CoefficientSet& c, const Point& u, int j) {
    const SeedState s = eval_state(c, u);
    SeedState d{CVector::Zero(c.n), CVector::Zero(c.n)};
    d.V(j) = s.Lambda(j);
    d.Lambda(j) = -c.mu(j) * c.mu(j) * s.V(j);
    return d;
}

inline Frame eval_frame(const CoefficientSet& c, const Point& u) {
    detail::require_point(c, u);
    const CVector e = detail::phases(c, u);
    const int m = c.ambient_dim();
    Frame f{CMatrix(c.n, m), CMatrix(c.n, m)};
    for (int l = 0; l < m; ++l) {
        const SeedState s = detail::oscillator(c, c.hom.col(l), e);
        f.V.col(l) = s.V;
        f.L.col(l) = s.Lambda;
    }
    return f;
}

inline CVector eval_surface(const CoefficientSet& c, const Point& u) {
    detail::require_point(c, u);
    const int m = c.ambient_dim();
    CVector x = c.offsets;
    for (int j = 0; j < c.n; ++j) {
        const Complex e2 = std::exp(2.0 * kI * c.mu(j) * u(j));
        const Complex c1 = c.seed_c1(j);
        const Complex c2 = c.seed_c2(j);
        for (int l = 0; l < m; ++l) {
            const Complex l1 = c.hom_c1(l, j);
            const Complex l2 = c.hom_c2(l, j);
            x(l) += 0.5 * (l1 * c1 * e2 + l2 * c2 / e2) + kI * c.mu(j) * (l2 * c1 - l1 * c2) * u(j);
        }
    }
    return x;
}

/// Analytic jet: ∂_j x^l = v_l^j λ_j, mixed partials vanish, and
/// ∂_j^2 x^l = λ_{jl} λ_j - mu_j^2 v_l^j v^j.
inline SurfaceJet surface_jet(const CoefficientSet& c, const Point& u) {
    const SeedState s = eval_state(c, u);
    const Frame f = eval_frame(c, u);
    const int m = c.ambient_dim();
    SurfaceJet jet;
    jet.x = eval_surface(c, u);
    jet.first = CMatrix(m, c.n);
    jet.second.assign(static_cast<std::size_t>(c.n), CMatrix::Zero(m, c.n));
    for (int j = 0; j < c.n; ++j) {
        const Complex mu2 = c.mu(j) * c.mu(j);
        for (int l = 0; l < m; ++l) {
            jet.first(l, j) = f.V(j, l) * s.Lambda(j);
            jet.second[static_cast<std::size_t>(j)](l, j) = f.L(j, l) * s.Lambda(j) - mu2 * f.V(j, l) * s.V(j);
        }
    }
    return jet;
}

/// Coefficients of the translated deformation: x_t(u) = x(u + t), same state shift.
inline CoefficientSet translate(const CoefficientSet& c, const Point& t) {
    detail::require_point(c, t);
    CoefficientSet out = c;
    for (int j = 0; j < c.n; ++j) {
        const Complex e = std::exp(kI * c.mu(j) * t(j));
        out.seed(2 * j) *= e;
        out.seed(2 * j + 1) /= e;
        out.hom.row(2 * j) *= e;
        out.hom.row(2 * j + 1) /= e;
        for (int l = 0; l < c.ambient_dim(); ++l)
            out.offsets(l) += kI * c.mu(j) * (c.hom_c2(l, j) * c.seed_c1(j) - c.hom_c1(l, j) * c.seed_c2(j)) * t(j);
    }
    return out;
}

inline StateField peterson_state_field(const CoefficientSet& c) {
    StateField f;
    f.value = [c](const Point& u) { return eval_state(c, u); };
    f.derivative = [c](const Point& u, int j) { return eval_state_derivative(c, u, j); };
    return f;
}

}  // namespace qb
