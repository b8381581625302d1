#pragma once

// Bäcklund transformation of a Peterson deformation.
//
// Over the Peterson seed (R0 = I, omega0 = 0) the rotation of the transformed
// deformation solves a Riccati equation with constant coefficients,
//     dR = R δ D R - D δ,   D = diag(d_j),
// linearized by R = I + Z^{-1}. Z then separates variables and is known in
// closed form. The state map sends solutions of the R0-system to solutions
// of the R1-system and preserves the prime integral.

#include "qb/peterson.hpp"
#include "qb/quadric.hpp"

#include <optional>

namespace qb {

/// Closed-form solution Z(u) of -dZ = δDZ + ZδD + δD and its rotation
/// R = I + Z^{-1}. Shared by quadric transforms and pseudosphere solitons.
struct RiccatiClosedForm {
    CVector d;      // diagonal of D
    CMatrix W;      // off-diagonal initial data z_jl(0), skew
    CVector diag0;  // initial z_jj(0)
    double min_rcond = ToleranceConfig{}.min_rcond;

    int n() const { return static_cast<int>(d.size()); }

    /// diag0 = -1/2 and W skew: R(0) is orthogonal and stays orthogonal.
    bool orthogonal_start() const {
        for (int j = 0; j < n(); ++j)
            if (std::abs(diag0(j) + 0.5) > 1e-15) return false;
        return max_abs(W + W.transpose()) <= 1e-15;
    }

    CMatrix Z(const Point& u) const {
        const int m = n();
        CMatrix z(m, m);
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < m; ++l)
                z(j, l) = j == l ? -0.5 + (diag0(j) + 0.5) * std::exp(-2.0 * d(j) * u(j))
                                 : W(j, l) * std::exp(-d(j) * u(j) - d(l) * u(l));
        return z;
    }

    /// ∂_j Z: row and column j decay with rate d_j, z_jj with rate 2 d_j.
    CMatrix dZ(const Point& u, int j) const {
        const CMatrix z = Z(u);
        CMatrix dz = CMatrix::Zero(n(), n());
        for (int l = 0; l < n(); ++l) {
            if (l == j) continue;
            dz(j, l) = -d(j) * z(j, l);
            dz(l, j) = -d(j) * z(l, j);
        }
        dz(j, j) = -d(j) * (2.0 * z(j, j) + 1.0);
        return dz;
    }

    CMatrix Zinv(const Point& u) const {
        try {
            return invert(Z(u), min_rcond);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularMatrix) throw;
            std::string where;
            for (int j = 0; j < u.size(); ++j) where += (j ? "," : "") + std::to_string(u(j));
            throw Error(ErrorCode::SingularLocus, "Z(u) singular at u = (" + where + ")");
        }
    }

    CMatrix R(const Point& u) const { return identity(n()) + Zinv(u); }

    /// ∂_j R = -Z^{-1} (∂_j Z) Z^{-1}.
    CMatrix dR(const Point& u, int j) const {
        const CMatrix zi = Zinv(u);
        return -zi * dZ(u, j) * zi;
    }

    /// max_j |∂_j R - d_j (R e_j e_j^T R - e_j e_j^T)| over max(1, |R|^2 |d|).
    double riccati_residual(const Point& u) const {
        const CMatrix r = R(u);
        double res = 0;
        for (int j = 0; j < n(); ++j) {
            CMatrix rhs = d(j) * (r.col(j) * r.row(j));
            rhs(j, j) -= d(j);
            res = std::max(res, max_abs(dR(u, j) - rhs));
        }
        const double scale = std::max(1.0, max_abs(r) * max_abs(r) * max_abs(d));
        return res / scale;
    }

    MatrixField rotation_field() const {
        MatrixField f;
        const RiccatiClosedForm self = *this;
        f.value = [self](const Point& u) { return self.R(u); };
        f.derivative = [self](const Point& u, int j) { return self.dR(u, j); };
        return f;
    }
};

inline RiccatiClosedForm make_riccati(const CVector& d, const CMatrix& w, std::optional<CVector> diag0 = std::nullopt) {
    const int n = static_cast<int>(d.size());
    if (w.rows() != n || w.cols() != n) throw Error(ErrorCode::InvalidInput, "W must be n x n");
    const double scale = std::max(1.0, max_abs(w));
    if (max_abs(w + w.transpose()) > 1e-14 * scale) throw Error(ErrorCode::InvalidInput, "W must be skew");
    RiccatiClosedForm form;
    form.d = d;
    form.W = w;
    // The diagonal of W plays no role; z_jj(0) comes from diag0.
    for (int j = 0; j < n; ++j) form.W(j, j) = 0.0;
    form.diag0 = diag0.value_or(CVector::Constant(n, Complex(-0.5, 0.0)));
    if (form.diag0.size() != n) throw Error(ErrorCode::InvalidInput, "diag0 must have n entries");
    return form;
}

/// One Bäcklund transform B_z: spectral parameter with frozen root plus the
/// Riccati initial data.
struct BacklundParam {
    SpectralParam zp;
    RiccatiClosedForm form;

    const CVector& d() const { return form.d; }
    const CMatrix& W() const { return form.W; }
};

inline BacklundParam make_backlund_param(const QuadricSpec& spec, const SpectralParam& zp, const CMatrix& w,
                                         std::optional<CVector> diag0 = std::nullopt) {
    if (w.rows() != spec.n()) throw Error(ErrorCode::InvalidInput, "W dimension does not match quadric");
    return {zp, make_riccati(d_coefficients(spec, zp), w, std::move(diag0))};
}

inline CMatrix eval_Z(const BacklundParam& p, const Point& u) { return p.form.Z(u); }
inline CMatrix eval_R1(const BacklundParam& p, const Point& u) { return p.form.R(u); }
inline double riccati_residual(const BacklundParam& p, const Point& u) { return p.form.riccati_residual(u); }

inline MatrixField backlund_rotation(const BacklundParam& p) {
    if (!p.form.orthogonal_start())
        throw Error(ErrorCode::InvalidInput, "leaf construction needs Z(0)^T + Z(0) + I = 0");
    return p.form.rotation_field();
}

/// Root carried by the state map. The rotation closed form solves
/// dR = RδDR - Dδ with D built from sqrt_z; the state map keeps (V, Λ) on the
/// R-system only with the opposite root.
inline Complex state_root(const SpectralParam& zp) { return -zp.sqrt_z(); }

namespace detail {

inline void require_orthogonal(const CMatrix& r, double tol, const char* what) {
    const double scale = std::max(1.0, max_abs(r) * max_abs(r));
    if (orthogonality_defect(r) > tol * scale) throw Error(ErrorCode::NotOrthogonal, what);
}

}  // namespace detail

/// 2n x 2n map (V0, Λ0) -> (V1, Λ1):
///   s [[I, 0], [0, R0^T]] [[D, -I], [A, D]] [[I, 0], [0, R1]],  D = sqrt(R_z)/s.
inline CMatrix transform_matrix(const QuadricSpec& spec, const SpectralParam& zp, const CMatrix& r0,
                                const CMatrix& r1) {
    const int n = spec.n();
    const Complex s = state_root(zp);
    const CMatrix sr = sqrt_resolvent_n(spec, zp);
    CMatrix t(2 * n, 2 * n);
    t.topLeftCorner(n, n) = sr;
    t.topRightCorner(n, n) = -s * r1;
    t.bottomLeftCorner(n, n) = s * r0.transpose() * spec.A();
    t.bottomRightCorner(n, n) = r0.transpose() * sr * r1;
    return t;
}

/// |T^T diag(A, I) T - diag(A, I)|, unscaled; zero because z(D^2 + A) = I.
inline double form_preservation_residual(const QuadricSpec& spec, const SpectralParam& zp, const CMatrix& r0,
                                         const CMatrix& r1) {
    const int n = spec.n();
    CMatrix b = CMatrix::Zero(2 * n, 2 * n);
    b.topLeftCorner(n, n) = spec.A();
    b.bottomRightCorner(n, n) = identity(n);
    const CMatrix t = transform_matrix(spec, zp, r0, r1);
    return max_abs(t.transpose() * b * t - b);
}

inline SeedState transform_state(const QuadricSpec& spec, const SpectralParam& zp, const CMatrix& r0,
                                 const CMatrix& r1, const SeedState& s0,
                                 double tol = ToleranceConfig{}.algebraic_tol) {
    detail::require_orthogonal(r0, tol, "transform_state: R0 not orthogonal");
    detail::require_orthogonal(r1, tol, "transform_state: R1 not orthogonal");
    const Complex s = state_root(zp);
    const CMatrix sr = sqrt_resolvent_n(spec, zp);
    SeedState out;
    out.V = sr * s0.V - s * (r1 * s0.Lambda);
    out.Lambda = r0.transpose() * (s * (spec.A() * s0.V) + sr * (r1 * s0.Lambda));
    return out;
}

inline Frame transform_frame(const QuadricSpec& spec, const SpectralParam& zp, const CMatrix& r0,
                             const CMatrix& r1, const Frame& f, double tol = ToleranceConfig{}.algebraic_tol) {
    detail::require_orthogonal(r0, tol, "transform_frame: R0 not orthogonal");
    detail::require_orthogonal(r1, tol, "transform_frame: R1 not orthogonal");
    const int n = spec.n();
    CMatrix stacked(2 * n, f.V.cols());
    stacked << f.V, f.L;
    const CMatrix image = transform_matrix(spec, zp, r0, r1) * stacked;
    return {image.topRows(n), image.bottomRows(n)};
}

/// Inverse map through the symmetry (0, s) <-> (1, -s):
///   V0 = sqrt(R_z) V1 + s R0 Λ1,  Λ0 = R1^T (-s A V1 + sqrt(R_z) R0 Λ1).
inline SeedState roundtrip_state(const QuadricSpec& spec, const SpectralParam& zp, const CMatrix& r0,
                                 const CMatrix& r1, const SeedState& s1,
                                 double tol = ToleranceConfig{}.algebraic_tol) {
    detail::require_orthogonal(r0, tol, "roundtrip_state: R0 not orthogonal");
    detail::require_orthogonal(r1, tol, "roundtrip_state: R1 not orthogonal");
    const Complex s = state_root(zp);
    const CMatrix sr = sqrt_resolvent_n(spec, zp);
    SeedState out;
    out.V = sr * s1.V + s * (r0 * s1.Lambda);
    out.Lambda = r1.transpose() * (-s * (spec.A() * s1.V) + sr * (r0 * s1.Lambda));
    return out;
}

/// V1^T sqrt(R_z) V0 - (|V1|^2 + |V0|^2)/2 - z/2, with bilinear squares.
inline Complex tangency_residual(const QuadricSpec& spec, const SpectralParam& zp, const CVector& v0,
                                 const CVector& v1) {
    const CMatrix sr = sqrt_resolvent_n(spec, zp);
    return (v1.transpose() * sr * v0).value() - ((v1.transpose() * v1).value() + (v0.transpose() * v0).value()) / 2.0 -
           zp.z() / 2.0;
}

/// x1 = x0 + F0 (sqrt(R_z) V1 - V0) = x0 - s F0 R0 Λ1, where the columns of
/// F0 = [∂_u x0] (R0 diag Λ0)^{-1} are the partials of x0 along v^j.
inline CVector leaf_surface(const CVector& x0, const CMatrix& base_first, const CMatrix& r0, const CVector& lambda0,
                            const CVector& lambda1, const SpectralParam& zp) {
    const double scale = std::max(1.0, max_abs(lambda0));
    for (Eigen::Index j = 0; j < lambda0.size(); ++j)
        if (std::abs(lambda0(j)) < 1e-12 * scale)
            throw Error(ErrorCode::DegenerateChart, "lambda_" + std::to_string(j + 1) + " vanishes");
    const CMatrix chart = r0 * lambda0.asDiagonal();
    const CMatrix f0 = base_first * invert(chart);
    return x0 - state_root(zp) * (f0 * (r0 * lambda1));
}

}  // namespace qb
