#pragma once

// Complex dense numerics shared by every module: scalar/matrix aliases, the
// square-root branch, guarded inversion, seeded random skew and complex
// orthogonal matrices, and central finite differences.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace qb {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
/// Real parameter point (u^1, ..., u^n).
using Point = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

enum class ErrorCode {
    InvalidInput,
    SingularMatrix,
    InvalidSpectralParam,
    NotOrthogonal,
    SingularLocus,
    DegenerateChart,
    DegenerateTangent,
    EqualParameters,
    SingularFactor,
    SingularBox,
    ParentMismatch,
    InvalidSigma,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::InvalidSpectralParam: return "InvalidSpectralParam";
        case ErrorCode::NotOrthogonal: return "NotOrthogonal";
        case ErrorCode::SingularLocus: return "SingularLocus";
        case ErrorCode::DegenerateChart: return "DegenerateChart";
        case ErrorCode::DegenerateTangent: return "DegenerateTangent";
        case ErrorCode::EqualParameters: return "EqualParameters";
        case ErrorCode::SingularFactor: return "SingularFactor";
        case ErrorCode::SingularBox: return "SingularBox";
        case ErrorCode::ParentMismatch: return "ParentMismatch";
        case ErrorCode::InvalidSigma: return "InvalidSigma";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct ToleranceConfig {
    double algebraic_tol = 1e-10;
    double fd_tol = 1e-6;
    double fd_step = 1e-5;
    /// Reciprocal condition numbers below this are treated as singular.
    double min_rcond = 1e-12;

    void validate() const {
        if (!(algebraic_tol > 0 && fd_tol > 0 && fd_step > 0 && min_rcond > 0))
            throw Error(ErrorCode::InvalidInput, "tolerances must be positive");
        if (fd_step * fd_step < std::numeric_limits<double>::epsilon())
            throw Error(ErrorCode::InvalidInput, "fd_step too small");
    }
};

/// Principal square root: for a = r e^{2iθ} with -π < 2θ <= π returns √r e^{iθ}.
/// The result has nonnegative real part; on the negative real axis it is +i√|a|.
inline Complex principal_sqrt(Complex a) {
    // std::sqrt already returns Re >= 0; only the sign of a zero imaginary
    // part on the negative axis can send it to -i√|a|.
    if (a.imag() == 0.0 && a.real() < 0.0) return {0.0, std::sqrt(-a.real())};
    return std::sqrt(a);
}

/// Max-absolute-entry norm.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().maxCoeff();
}

inline bool is_finite(const CMatrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i].real()) || !std::isfinite(m.data()[i].imag())) return false;
    return true;
}

/// Reciprocal condition estimate in the 1-norm (0 for a singular matrix).
inline double rcond(const CMatrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidInput, "rcond of non-square matrix");
    if (m.rows() == 0) return 1.0;
    Eigen::PartialPivLU<CMatrix> lu(m);
    const double rc = lu.rcond();
    return std::isfinite(rc) ? rc : 0.0;
}

inline CMatrix invert(const CMatrix& m, double min_rcond = ToleranceConfig{}.min_rcond) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidInput, "invert: matrix not square");
    if (!is_finite(m)) throw Error(ErrorCode::InvalidInput, "invert: non-finite entries");
    Eigen::PartialPivLU<CMatrix> lu(m);
    const double rc = lu.rcond();
    if (!(rc >= min_rcond))
        throw Error(ErrorCode::SingularMatrix, "reciprocal condition " + std::to_string(rc));
    return lu.inverse();
}

inline CMatrix identity(Eigen::Index n) { return CMatrix::Identity(n, n); }

inline double orthogonality_defect(const CMatrix& q) {
    return max_abs(q.transpose() * q - identity(q.cols()));
}

/// Complex entries with real and imaginary parts uniform in [-scale, scale].
inline Complex random_complex(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    const double re = dist(rng);
    const double im = dist(rng);
    return {re, im};
}

inline CMatrix random_skew(int n, std::mt19937_64& rng, double scale = 1.0) {
    if (n < 1) throw Error(ErrorCode::InvalidInput, "random_skew: n must be >= 1");
    CMatrix w = CMatrix::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int l = j + 1; l < n; ++l) {
            w(j, l) = random_complex(rng, scale);
            w(l, j) = -w(j, l);
        }
    return w;
}

inline CMatrix random_skew(int n, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    return random_skew(n, rng);
}

/// Cayley image (I - K)(I + K)^{-1} of a skew K; orthogonal with determinant +1.
inline CMatrix cayley(const CMatrix& k) {
    const CMatrix id = identity(k.rows());
    return (id - k) * invert(id + k);
}

/// Random element of SO_m(C). Skew generators are drawn with entries of size
/// `scale`; a singular I + K is retried with a fresh draw.
inline CMatrix random_complex_orthogonal(int m, std::mt19937_64& rng, double scale = 0.5) {
    if (m < 1) throw Error(ErrorCode::InvalidInput, "random_complex_orthogonal: m must be >= 1");
    for (int attempt = 0; attempt < 16; ++attempt) {
        try {
            return cayley(random_skew(m, rng, scale));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularMatrix) throw;
        }
    }
    throw Error(ErrorCode::SingularMatrix, "random_complex_orthogonal: I + K singular repeatedly");
}

inline CMatrix random_complex_orthogonal(int m, std::uint64_t rng_seed, double scale = 0.5) {
    std::mt19937_64 rng(rng_seed);
    return random_complex_orthogonal(m, rng, scale);
}

/// (f(u + h e_j) - f(u - h e_j)) / 2h for any f whose values support
/// subtraction and division by a scalar.
template <typename F>
auto central_diff(const F& f, const Point& u, int j, double h) {
    Point up = u;
    Point dn = u;
    up(j) += h;
    dn(j) -= h;
    using T = std::decay_t<decltype(f(u))>;
    return T((f(up) - f(dn)) / (2.0 * h));
}

/// Five-point stencil, fourth order in h.
template <typename F>
auto central_diff5(const F& f, const Point& u, int j, double h) {
    const auto at = [&](double t) {
        Point p = u;
        p(j) += t;
        return f(p);
    };
    using T = std::decay_t<decltype(f(u))>;
    return T((8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h));
}

/// A value field over parameter space with an optional analytic partial
/// derivative. Fields are immutable closures, safe to share across threads.
template <typename T>
struct Field {
    std::function<T(const Point&)> value;
    std::function<T(const Point&, int)> derivative;

    T operator()(const Point& u) const { return value(u); }

    bool has_analytic_derivative() const { return static_cast<bool>(derivative); }

    T partial(const Point& u, int j, double h) const {
        if (derivative) return derivative(u, j);
        return central_diff(value, u, j, h);
    }
};

using MatrixField = Field<CMatrix>;

inline MatrixField constant_field(const CMatrix& m) {
    MatrixField f;
    f.value = [m](const Point&) { return m; };
    const CMatrix zero = CMatrix::Zero(m.rows(), m.cols());
    f.derivative = [zero](const Point&, int) { return zero; };
    return f;
}

/// Deterministic parallel map: out[i] = fn(i), computed on worker threads.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t count, Fn fn) {
    std::vector<T> out(count);
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace qb
