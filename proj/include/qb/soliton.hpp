#pragma once

// 1-solitons of n-dimensional pseudospheres over the vacuum seed (R0 = I,
// omega0 = 0): the same Riccati closed form with D = diag(csc σ, cot σ, ..., cot σ).

#include "qb/backlund.hpp"

#include <vector>

namespace qb {

struct SolitonParam {
    Complex sigma;
    int n = 0;
    CMatrix W;
};

inline CVector soliton_d(Complex sigma, int n) {
    if (n < 1) throw Error(ErrorCode::InvalidInput, "soliton_d: n must be >= 1");
    const Complex s = std::sin(sigma);
    if (std::abs(s) < 1e-12) throw Error(ErrorCode::InvalidSigma, "sin(sigma) = 0");
    const Complex cot = std::cos(sigma) / s;
    CVector d = CVector::Constant(n, cot);
    d(0) = 1.0 / s;
    return d;
}

inline RiccatiClosedForm soliton_form(const SolitonParam& p) {
    if (p.W.rows() != p.n) throw Error(ErrorCode::InvalidInput, "soliton W must be n x n");
    return make_riccati(soliton_d(p.sigma, p.n), p.W);
}

inline CMatrix soliton_R1(const SolitonParam& p, const Point& u) { return soliton_form(p).R(u); }

/// Chart condition: entry (1, k) of R nonzero for every k.
inline std::vector<bool> first_row_check(const CMatrix& r, double tol = ToleranceConfig{}.algebraic_tol) {
    std::vector<bool> flags(static_cast<std::size_t>(r.cols()));
    for (Eigen::Index k = 0; k < r.cols(); ++k) flags[static_cast<std::size_t>(k)] = std::abs(r(0, k)) > tol;
    return flags;
}

inline bool first_row_valid(const CMatrix& r, double tol = ToleranceConfig{}.algebraic_tol) {
    for (bool f : first_row_check(r, tol))
        if (!f) return false;
    return true;
}

}  // namespace qb
