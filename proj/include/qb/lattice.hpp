#pragma once

// Algebraic iteration of Bäcklund transforms: Bianchi permutability closes two
// transforms of a common parent into a fourth solution, and the Möbius
// configuration closes three into an eighth, with no further integration.

#include "qb/backlund.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qb {

/// D and D^2 kept separately so that D^2 = (1 - z/a_j)/z is exact rather than squared.
struct DiagCoeffs {
    CVector d;
    CVector d2;

    static DiagCoeffs from_spec(const QuadricSpec& spec, const SpectralParam& zp) {
        DiagCoeffs c{d_coefficients(spec, zp), CVector(spec.n())};
        for (int j = 0; j < spec.n(); ++j) c.d2(j) = (1.0 - zp.z() * spec.a_inv(j)) / zp.z();
        return c;
    }

    static DiagCoeffs from_values(const CVector& d) { return {d, d.cwiseProduct(d)}; }

    CMatrix D() const { return d.asDiagonal(); }
    CMatrix D2() const { return d2.asDiagonal(); }
};

inline void require_distinct(const SpectralParam& a, const SpectralParam& b) {
    if (std::abs(a.z() - b.z()) <= 1e-14 * std::max(1.0, std::abs(a.z())))
        throw Error(ErrorCode::EqualParameters, "spectral parameters must be distinct");
}

namespace detail {

inline CMatrix invert_or(const CMatrix& m, ErrorCode code, const char* what, double min_rcond) {
    try {
        return invert(m, min_rcond);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularMatrix) throw;
        throw Error(code, what);
    }
}

}  // namespace detail

/// Fourth rotation of the permutability square over a parent with rotation r0:
///   (Db - Da Rb Ra^T)(Db Rb Ra^T - Da)^{-1} R0.
/// For a Peterson parent (R0 = I) this is R3 = (D2 - D1 R2 R1^T)(D2 R2 R1^T - D1)^{-1}.
inline CMatrix permute_rotation(const CMatrix& ra, const DiagCoeffs& ca, const CMatrix& rb, const DiagCoeffs& cb,
                                const CMatrix& r0, double min_rcond = ToleranceConfig{}.min_rcond) {
    const CMatrix da = ca.D();
    const CMatrix db = cb.D();
    const CMatrix k = rb * ra.transpose();
    const CMatrix denom = detail::invert_or(db * k - da, ErrorCode::SingularFactor,
                                            "D_b R_b R_a^T - D_a is singular", min_rcond);
    return (db - da * k) * denom * r0;
}

inline CMatrix permute_rotation(const QuadricSpec& spec, const CMatrix& r1, const SpectralParam& z1, const CMatrix& r2,
                                const SpectralParam& z2, std::optional<CMatrix> r0 = std::nullopt,
                                double min_rcond = ToleranceConfig{}.min_rcond) {
    require_distinct(z1, z2);
    return permute_rotation(r1, DiagCoeffs::from_spec(spec, z1), r2, DiagCoeffs::from_spec(spec, z2),
                            r0.value_or(identity(spec.n())), min_rcond);
}

/// Field of the permuted rotation with the analytic derivative
///   d(N M^{-1} R0) = (dN - N M^{-1} dM) M^{-1} R0 + N M^{-1} dR0.
inline MatrixField permuted_rotation_field(const MatrixField& ra, const DiagCoeffs& ca, const MatrixField& rb,
                                           const DiagCoeffs& cb, const MatrixField& r0, double fd_step,
                                           double min_rcond) {
    MatrixField f;
    f.value = [=](const Point& u) { return permute_rotation(ra(u), ca, rb(u), cb, r0(u), min_rcond); };
    f.derivative = [=](const Point& u, int j) {
        const CMatrix a = ra(u);
        const CMatrix b = rb(u);
        const CMatrix k = b * a.transpose();
        const CMatrix dk = rb.partial(u, j, fd_step) * a.transpose() + b * ra.partial(u, j, fd_step).transpose();
        const CMatrix n = cb.D() - ca.D() * k;
        const CMatrix minv = detail::invert_or(cb.D() * k - ca.D(), ErrorCode::SingularFactor,
                                               "D_b R_b R_a^T - D_a is singular", min_rcond);
        const CMatrix dn = -ca.D() * dk;
        const CMatrix dm = cb.D() * dk;
        const CMatrix nm = n * minv;
        return CMatrix((dn - nm * dm) * minv * r0(u) + nm * r0.partial(u, j, fd_step));
    };
    return f;
}

// Möbius configuration --------------------------------------------------------

/// (D2^2 - D3^2) D1 R1 + (D3^2 - D1^2) D2 R2 + (D1^2 - D2^2) D3 R4.
inline CMatrix mobius_box(const CMatrix& r1, const CMatrix& r2, const CMatrix& r4, const DiagCoeffs& c1,
                          const DiagCoeffs& c2, const DiagCoeffs& c3) {
    return (c2.D2() - c3.D2()) * c1.D() * r1 + (c3.D2() - c1.D2()) * c2.D() * r2 +
           (c1.D2() - c2.D2()) * c3.D() * r4;
}

inline CMatrix mobius_box(const QuadricSpec& spec, const CMatrix& r1, const CMatrix& r2, const CMatrix& r4,
                          const SpectralParam& z1, const SpectralParam& z2, const SpectralParam& z3) {
    require_distinct(z1, z2);
    require_distinct(z2, z3);
    require_distinct(z1, z3);
    return mobius_box(r1, r2, r4, DiagCoeffs::from_spec(spec, z1), DiagCoeffs::from_spec(spec, z2),
                      DiagCoeffs::from_spec(spec, z3));
}

/// D1 D2 D3 R7 = (D1^2 D2 R2 - D2^2 D1 R1) box^{-1} (D2^2 - D3^2)(D3 R4 - D1 R1) - D2^2 D1 R1.
inline CMatrix mobius_product(const CMatrix& r1, const CMatrix& r2, const CMatrix& r4, const DiagCoeffs& c1,
                              const DiagCoeffs& c2, const DiagCoeffs& c3,
                              double min_rcond = ToleranceConfig{}.min_rcond) {
    const CMatrix box_inv = detail::invert_or(mobius_box(r1, r2, r4, c1, c2, c3), ErrorCode::SingularBox,
                                              "Möbius box is singular", min_rcond);
    const CMatrix lead = c1.D2() * c2.D() * r2 - c2.D2() * c1.D() * r1;
    return lead * box_inv * (c2.D2() - c3.D2()) * (c3.D() * r4 - c1.D() * r1) - c2.D2() * c1.D() * r1;
}

inline CMatrix mobius_R7(const CMatrix& r1, const CMatrix& r2, const CMatrix& r4, const DiagCoeffs& c1,
                         const DiagCoeffs& c2, const DiagCoeffs& c3, double min_rcond = ToleranceConfig{}.min_rcond) {
    const CMatrix ddd = c1.D() * c2.D() * c3.D();
    return invert(ddd, min_rcond) * mobius_product(r1, r2, r4, c1, c2, c3, min_rcond);
}

inline CMatrix mobius_R7(const QuadricSpec& spec, const CMatrix& r1, const CMatrix& r2, const CMatrix& r4,
                         const SpectralParam& z1, const SpectralParam& z2, const SpectralParam& z3,
                         double min_rcond = ToleranceConfig{}.min_rcond) {
    require_distinct(z1, z2);
    require_distinct(z2, z3);
    require_distinct(z1, z3);
    return mobius_R7(r1, r2, r4, DiagCoeffs::from_spec(spec, z1), DiagCoeffs::from_spec(spec, z2),
                     DiagCoeffs::from_spec(spec, z3), min_rcond);
}

/// All displayed expressions for D1 D2 D3 R7, evaluated at one point.
struct MobiusExpressions {
    CMatrix E1, E2, E3_literal, E3_r4, E4;
    CMatrix R7;
    bool swapped_orientation = false;

    double e1_e2() const { return rel_diff(E1, E2); }
    double e1_e4() const { return rel_diff(E1, E4); }
    double e2_e4() const { return rel_diff(E2, E4); }
    double e3_literal_e2() const { return rel_diff(E3_literal, E2); }
    double e3_r4_e2() const { return rel_diff(E3_r4, E2); }
    double agreement() const { return std::max({e1_e2(), e1_e4(), e2_e4()}); }

    static double rel_diff(const CMatrix& a, const CMatrix& b) {
        return max_abs(a - b) / std::max(1.0, std::max(max_abs(a), max_abs(b)));
    }
};

inline MobiusExpressions mobius_expressions(const CMatrix& r1, const CMatrix& r2, const CMatrix& r4,
                                            const DiagCoeffs& c1, const DiagCoeffs& c2, const DiagCoeffs& c3,
                                            double min_rcond = ToleranceConfig{}.min_rcond,
                                            double agreement_tol = 1e-8) {
    const auto eval = [&](bool swapped) {
        const auto pair = [&](const CMatrix& ra, const DiagCoeffs& ca, const CMatrix& rb, const DiagCoeffs& cb) {
            const CMatrix id = identity(ra.rows());
            return swapped ? permute_rotation(rb, cb, ra, ca, id, min_rcond)
                           : permute_rotation(ra, ca, rb, cb, id, min_rcond);
        };
        const CMatrix r3 = pair(r1, c1, r2, c2);
        const CMatrix r5 = pair(r1, c1, r4, c3);
        const CMatrix r6 = pair(r2, c2, r4, c3);
        const CMatrix D1 = c1.D(), D2 = c2.D(), D3 = c3.D();
        const CMatrix S1 = c1.D2(), S2 = c2.D2(), S3 = c3.D2();
        const CMatrix box_inv = detail::invert_or(mobius_box(r1, r2, r4, c1, c2, c3), ErrorCode::SingularBox,
                                                  "Möbius box is singular", min_rcond);
        const CMatrix lead = S1 * D2 * r2 - S2 * D1 * r1;

        MobiusExpressions m;
        m.swapped_orientation = swapped;
        m.E1 = D1 * ((S2 - S3) * D2 * r3 *
                         detail::invert_or(D2 * r3 - D3 * r5, ErrorCode::SingularFactor, "D2 R3 - D3 R5 singular",
                                           min_rcond) *
                         r1 -
                     S2 * r1);
        m.E2 = lead * box_inv * (S2 - S3) * (D3 * r4 - D1 * r1) - S2 * D1 * r1;
        m.E3_literal = lead * box_inv * (S3 - S1) * (D2 * r2 - D3 * r3) - S1 * D2 * r2;
        m.E3_r4 = lead * box_inv * (S3 - S1) * (D2 * r2 - D3 * r4) - S1 * D2 * r2;
        m.E4 = D2 * ((S3 - S1) * D1 * r3 *
                         detail::invert_or(D3 * r6 - D1 * r3, ErrorCode::SingularFactor, "D3 R6 - D1 R3 singular",
                                           min_rcond) *
                         r2 -
                     S1 * r2);
        m.R7 = invert(D1 * D2 * D3, min_rcond) * m.E2;
        return m;
    };
    MobiusExpressions m = eval(false);
    if (m.agreement() > agreement_tol) {
        MobiusExpressions alt = eval(true);
        if (alt.agreement() < m.agreement()) return alt;
    }
    return m;
}

// Lattice nodes ---------------------------------------------------------------

/// One application of B_z: spectral parameter (with frozen root) and Riccati data.
struct ZStep {
    SpectralParam zp;
    CMatrix W;
    std::optional<CVector> diag0;
};

/// A solution in the Bäcklund lattice, with immutable evaluators over u.
struct LatticeNode {
    QuadricSpec spec;
    std::vector<ZStep> z_path;
    ToleranceConfig tol;
    MatrixField R;
    StateField state;
    std::function<Frame(const Point&)> frame;
    std::function<CVector(const Point&)> surface;
    /// Columns ∂_j x = 𝒱^T R e_j λ_j.
    std::function<CMatrix(const Point&)> tangent;
    std::shared_ptr<const LatticeNode> parent;

    int depth() const { return static_cast<int>(z_path.size()); }
    bool is_root() const { return z_path.empty(); }
};

using NodePtr = std::shared_ptr<const LatticeNode>;

inline NodePtr root_node(const QuadricSpec& spec, const CoefficientSet& coeffs, const ToleranceConfig& tol = {}) {
    if (coeffs.n != spec.n()) throw Error(ErrorCode::InvalidInput, "coefficients do not match quadric");
    auto node = std::make_shared<LatticeNode>();
    node->spec = spec;
    node->tol = tol;
    node->R = constant_field(identity(spec.n()));
    node->state = peterson_state_field(coeffs);
    node->frame = [coeffs](const Point& u) { return eval_frame(coeffs, u); };
    node->surface = [coeffs](const Point& u) { return eval_surface(coeffs, u); };
    node->tangent = [coeffs](const Point& u) { return surface_jet(coeffs, u).first; };
    return node;
}

namespace detail {

/// Child of `base` obtained by B_z with rotation `r_new`: state, frame and surface.
inline std::shared_ptr<LatticeNode> make_child(const NodePtr& base, const SpectralParam& zp, MatrixField r_new) {
    auto node = std::make_shared<LatticeNode>();
    node->spec = base->spec;
    node->tol = base->tol;
    node->R = std::move(r_new);
    node->parent = base;

    const QuadricSpec spec = base->spec;
    const MatrixField r0 = base->R;
    const MatrixField r1 = node->R;
    const StateField s0 = base->state;
    const double tol = base->tol.algebraic_tol;
    node->state.value = [=](const Point& u) { return transform_state(spec, zp, r0(u), r1(u), s0(u), tol); };

    const auto f0 = base->frame;
    node->frame = [=](const Point& u) { return transform_frame(spec, zp, r0(u), r1(u), f0(u), tol); };

    const auto x0 = base->surface;
    const auto t0 = base->tangent;
    const StateField s1 = node->state;
    node->surface = [=](const Point& u) {
        return leaf_surface(x0(u), t0(u), r0(u), s0(u).Lambda, s1(u).Lambda, zp);
    };
    // dx = 𝒱^T dV with dV = R δ Λ.
    const auto f1 = node->frame;
    node->tangent = [=](const Point& u) { return CMatrix(f1(u).V.transpose() * r1(u) * s1(u).Lambda.asDiagonal()); };
    return node;
}

}  // namespace detail

/// B_z applied to the Peterson root; the rotation is the Riccati closed form.
inline NodePtr backlund_node(const NodePtr& root, const ZStep& step) {
    if (!root->is_root())
        throw Error(ErrorCode::ParentMismatch,
                    "closed-form transforms start from the Peterson root; iterate with permuted_node");
    const BacklundParam param = make_backlund_param(root->spec, step.zp, step.W, step.diag0);
    RiccatiClosedForm form = param.form;
    form.min_rcond = root->tol.min_rcond;
    if (!form.orthogonal_start())
        throw Error(ErrorCode::InvalidInput, "lattice nodes need Z(0)^T + Z(0) + I = 0");
    auto node = detail::make_child(root, step.zp, form.rotation_field());
    node->z_path = {step};
    return node;
}

inline bool same_path(const std::vector<ZStep>& a, const std::vector<ZStep>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i].zp == b[i].zp) || a[i].W != b[i].W) return false;
    return true;
}

/// B_{z_b}(a) = B_{z_a}(b) for siblings a, b; built as the z_b-transform of a.
inline NodePtr permuted_node(const NodePtr& a, const NodePtr& b) {
    if (a->is_root() || b->is_root()) throw Error(ErrorCode::ParentMismatch, "root has no siblings");
    const std::vector<ZStep> pa(a->z_path.begin(), a->z_path.end() - 1);
    const std::vector<ZStep> pb(b->z_path.begin(), b->z_path.end() - 1);
    if (!same_path(pa, pb) || !a->parent || !b->parent)
        throw Error(ErrorCode::ParentMismatch, "nodes do not share a parent");
    const ZStep& sa = a->z_path.back();
    const ZStep& sb = b->z_path.back();
    require_distinct(sa.zp, sb.zp);
    for (const auto& s : pa) {
        require_distinct(s.zp, sa.zp);
        require_distinct(s.zp, sb.zp);
    }

    const QuadricSpec& spec = a->spec;
    const DiagCoeffs ca = DiagCoeffs::from_spec(spec, sa.zp);
    const DiagCoeffs cb = DiagCoeffs::from_spec(spec, sb.zp);
    MatrixField r = permuted_rotation_field(a->R, ca, b->R, cb, a->parent->R, a->tol.fd_step, a->tol.min_rcond);
    auto node = detail::make_child(a, sb.zp, std::move(r));
    node->z_path = a->z_path;
    node->z_path.push_back(sb);
    return node;
}

/// Node records with parent links; nodes are rebuilt from their z-paths.
class Lattice {
public:
    struct Record {
        int id = 0;
        std::optional<int> parent;
        std::vector<ZStep> z_path;
    };

    Lattice(QuadricSpec spec, CoefficientSet coeffs, ToleranceConfig tol = {})
        : spec_(std::move(spec)), coeffs_(std::move(coeffs)), tol_(tol) {
        nodes_.push_back(root_node(spec_, coeffs_, tol_));
        records_.push_back({0, std::nullopt, {}});
    }

    const QuadricSpec& spec() const { return spec_; }
    const CoefficientSet& coefficients() const { return coeffs_; }
    const ToleranceConfig& tolerances() const { return tol_; }
    const std::vector<Record>& records() const { return records_; }
    std::size_t size() const { return nodes_.size(); }

    const NodePtr& node(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw Error(ErrorCode::InvalidInput, "no lattice node with id " + std::to_string(id));
        return nodes_[static_cast<std::size_t>(id)];
    }

    std::optional<int> find(const std::vector<ZStep>& path) const {
        for (const auto& r : records_)
            if (same_path(r.z_path, path)) return r.id;
        return std::nullopt;
    }

    int add_backlund(int parent_id, const ZStep& step) {
        return add(backlund_node(node(parent_id), step));
    }

    int add_permuted(int a, int b) { return add(permuted_node(node(a), node(b))); }

    /// Node with the given z-path, building intermediate nodes as needed.
    int ensure(const std::vector<ZStep>& path) {
        if (auto id = find(path)) return *id;
        if (path.empty()) return 0;
        if (path.size() == 1) return add_backlund(0, path[0]);
        std::vector<ZStep> pa(path.begin(), path.end() - 1);
        std::vector<ZStep> pb(path.begin(), path.end() - 2);
        pb.push_back(path.back());
        const int a = ensure(pa);
        const int b = ensure(pb);
        return add_permuted(a, b);
    }

private:
    int add(NodePtr n) {
        if (auto existing = find(n->z_path)) return *existing;
        const int id = static_cast<int>(nodes_.size());
        std::optional<int> parent;
        if (!n->z_path.empty()) {
            std::vector<ZStep> pp(n->z_path.begin(), n->z_path.end() - 1);
            parent = find(pp);
        }
        records_.push_back({id, parent, n->z_path});
        nodes_.push_back(std::move(n));
        return id;
    }

    QuadricSpec spec_;
    CoefficientSet coeffs_;
    ToleranceConfig tol_;
    std::vector<NodePtr> nodes_;
    std::vector<Record> records_;
};

}  // namespace qb
