#pragma once

// Diagonal quadric without center x0 = L Z(V) in C^{n+1}, its confocal family
// R_z = I - zA and the Ivory affine map between confocal quadrics.

#include "qb/core.hpp"

#include <string>
#include <utility>
#include <vector>

namespace qb {

/// A = diag(1/a_1, ..., 1/a_n, 0); the quadric is x^T A x - 2 x^{n+1} = 0.
class QuadricSpec {
public:
    QuadricSpec() = default;

    explicit QuadricSpec(std::vector<Complex> a) : a_(std::move(a)) {
        if (a_.size() < 2) throw Error(ErrorCode::InvalidInput, "quadric needs n >= 2");
        for (const auto& aj : a_) {
            if (!std::isfinite(aj.real()) || !std::isfinite(aj.imag()))
                throw Error(ErrorCode::InvalidInput, "quadric coefficient not finite");
            if (aj == Complex(0.0, 0.0))
                throw Error(ErrorCode::InvalidInput, "quadric coefficient a_j must be nonzero");
        }
    }

    int n() const { return static_cast<int>(a_.size()); }
    const std::vector<Complex>& a() const { return a_; }
    Complex a(int j) const { return a_[static_cast<std::size_t>(j)]; }
    Complex a_inv(int j) const { return 1.0 / a(j); }

    /// n x n truncation diag(1/a_j).
    CMatrix A() const {
        CMatrix m = CMatrix::Zero(n(), n());
        for (int j = 0; j < n(); ++j) m(j, j) = a_inv(j);
        return m;
    }

    /// Full (n+1) x (n+1) quadratic part with trailing zero.
    CMatrix A_full() const {
        CMatrix m = CMatrix::Zero(n() + 1, n() + 1);
        m.topLeftCorner(n(), n()) = A();
        return m;
    }

    /// n x n diag(a_j), the truncation of L^T L.
    CMatrix metric_diag() const {
        CMatrix m = CMatrix::Zero(n(), n());
        for (int j = 0; j < n(); ++j) m(j, j) = a(j);
        return m;
    }

    bool operator==(const QuadricSpec&) const = default;

private:
    std::vector<Complex> a_;
};

/// Spectral parameter z with its square-root branch frozen at construction.
class SpectralParam {
public:
    SpectralParam() = default;

    SpectralParam(const QuadricSpec& spec, Complex z) : SpectralParam(spec, z, principal_sqrt(z)) {}

    /// Explicit root; must square to z. Used for the opposite branch -sqrt(z).
    SpectralParam(const QuadricSpec& spec, Complex z, Complex sqrt_z) : z_(z), sqrt_z_(sqrt_z) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw Error(ErrorCode::InvalidSpectralParam, "z not finite");
        if (std::abs(z) < 1e-14) throw Error(ErrorCode::InvalidSpectralParam, "z must be nonzero");
        if (std::abs(sqrt_z * sqrt_z - z) > 1e-12 * std::max(1.0, std::abs(z)))
            throw Error(ErrorCode::InvalidSpectralParam, "sqrt_z does not square to z");
        for (int j = 0; j < spec.n(); ++j) {
            const Complex r = 1.0 - z * spec.a_inv(j);
            if (std::abs(r) < 1e-12)
                throw Error(ErrorCode::InvalidSpectralParam,
                            "1 - z/a_" + std::to_string(j + 1) + " vanishes (singular confocal quadric)");
        }
    }

    Complex z() const { return z_; }
    Complex sqrt_z() const { return sqrt_z_; }
    bool principal() const {
        const Complex p = principal_sqrt(z_);
        return std::abs(sqrt_z_ - p) < std::abs(sqrt_z_ + p);
    }

    SpectralParam with_opposite_root() const {
        SpectralParam p = *this;
        p.sqrt_z_ = -sqrt_z_;
        return p;
    }

    bool operator==(const SpectralParam&) const = default;

private:
    Complex z_{1.0, 0.0};
    Complex sqrt_z_{1.0, 0.0};
};

/// L = (sqrt(A + e_{n+1} e_{n+1}^T))^{-1} = diag(sqrt a_1, ..., sqrt a_n, 1).
inline CMatrix chart_L(const QuadricSpec& spec) {
    CMatrix l = CMatrix::Zero(spec.n() + 1, spec.n() + 1);
    for (int j = 0; j < spec.n(); ++j) l(j, j) = principal_sqrt(spec.a(j));
    l(spec.n(), spec.n()) = 1.0;
    return l;
}

/// Z = V + (V^T V / 2) e_{n+1}; the square is complex bilinear.
inline CVector paraboloid_point(const CVector& v) {
    CVector z(v.size() + 1);
    z.head(v.size()) = v;
    z(v.size()) = (v.transpose() * v).value() / 2.0;
    return z;
}

inline void require_dim(const QuadricSpec& spec, const CVector& v, const char* what) {
    if (v.size() != spec.n())
        throw Error(ErrorCode::InvalidInput, std::string(what) + ": expected dimension " +
                                                 std::to_string(spec.n()));
}

inline CVector x0_point(const QuadricSpec& spec, const CVector& v) {
    require_dim(spec, v, "x0_point");
    return chart_L(spec) * paraboloid_point(v);
}

/// x^T A x - 2 x^{n+1}; zero on the base quadric.
inline Complex quadric_residual(const QuadricSpec& spec, const CVector& x) {
    Complex q = -2.0 * x(spec.n());
    for (int j = 0; j < spec.n(); ++j) q += spec.a_inv(j) * x(j) * x(j);
    return q;
}

/// diag(sqrt(1 - z/a_1), ..., sqrt(1 - z/a_n), 1).
inline CMatrix sqrt_resolvent(const QuadricSpec& spec, const SpectralParam& zp) {
    CMatrix r = CMatrix::Zero(spec.n() + 1, spec.n() + 1);
    for (int j = 0; j < spec.n(); ++j) {
        const Complex rj = 1.0 - zp.z() * spec.a_inv(j);
        if (std::abs(rj) < 1e-12) throw Error(ErrorCode::InvalidSpectralParam, "singular R_z");
        r(j, j) = principal_sqrt(rj);
    }
    r(spec.n(), spec.n()) = 1.0;
    return r;
}

/// n x n truncation of sqrt(R_z).
inline CMatrix sqrt_resolvent_n(const QuadricSpec& spec, const SpectralParam& zp) {
    return sqrt_resolvent(spec, zp).topLeftCorner(spec.n(), spec.n());
}

/// Ivory map x_z = sqrt(R_z) x0 + (z/2) e_{n+1}.
inline CVector ivory_point(const QuadricSpec& spec, const SpectralParam& zp, const CVector& v) {
    CVector x = sqrt_resolvent(spec, zp) * x0_point(spec, v);
    x(spec.n()) += zp.z() / 2.0;
    return x;
}

/// Q_z(x) = x^T A R_z^{-1} x + 2 (R_z^{-1} B)^T x + C + z B^T R_z^{-1} B with
/// B = -e_{n+1}, C = 0, i.e. sum_j x_j^2 / (a_j - z) - 2 x^{n+1} + z.
inline Complex confocal_residual(const QuadricSpec& spec, const SpectralParam& zp, const CVector& x) {
    if (x.size() != spec.n() + 1) throw Error(ErrorCode::InvalidInput, "confocal_residual: bad dimension");
    Complex q = -2.0 * x(spec.n()) + zp.z();
    for (int j = 0; j < spec.n(); ++j) {
        const Complex rj = 1.0 - zp.z() * spec.a_inv(j);
        if (std::abs(rj) < 1e-12) throw Error(ErrorCode::InvalidSpectralParam, "singular R_z");
        q += spec.a_inv(j) / rj * x(j) * x(j);
    }
    return q;
}

/// d_j = sqrt(1 - z/a_j) / sqrt(z), the diagonal of the n x n truncation of sqrt(R_z)/sqrt(z).
inline CVector d_coefficients(const QuadricSpec& spec, const SpectralParam& zp) {
    CVector d(spec.n());
    for (int j = 0; j < spec.n(); ++j) {
        const Complex rj = 1.0 - zp.z() * spec.a_inv(j);
        if (std::abs(rj) < 1e-12) throw Error(ErrorCode::InvalidSpectralParam, "singular R_z");
        d(j) = principal_sqrt(rj) / zp.sqrt_z();
    }
    return d;
}

}  // namespace qb
