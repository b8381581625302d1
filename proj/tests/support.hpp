#pragma once

#include "qb/qb.hpp"

#include <random>
#include <vector>

namespace qb::test {

/// |a_j| in [0.5, 2] with random phases in (-0.4, 0.4).
inline QuadricSpec random_spec(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mod(0.5, 2.0), phase(-0.4, 0.4);
    std::vector<Complex> a;
    for (int j = 0; j < n; ++j) a.push_back(std::polar(mod(rng), phase(rng)));
    return QuadricSpec(a);
}

inline Point random_point(int n, std::mt19937_64& rng, double radius = 0.5) {
    std::uniform_real_distribution<double> d(-radius, radius);
    Point u(n);
    for (int j = 0; j < n; ++j) u(j) = d(rng);
    return u;
}

inline CVector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
    CVector v(n);
    for (int j = 0; j < n; ++j) v(j) = random_complex(rng, scale);
    return v;
}

/// A spectral parameter away from every 1/a_j pole and from 0.
inline SpectralParam random_z(const QuadricSpec& spec, std::mt19937_64& rng) {
    for (;;) {
        const Complex z = random_complex(rng, 1.5);
        bool ok = std::abs(z) > 0.2;
        for (int j = 0; j < spec.n(); ++j) ok = ok && std::abs(1.0 - z / spec.a(j)) > 0.2;
        if (ok) return SpectralParam(spec, z);
    }
}

/// The n = 2 example with a = (1, 1) and Q = I.
inline CoefficientSet worked_coefficients() {
    return solve_coefficients(QuadricSpec({1.0, 1.0}), identity(4));
}

}  // namespace qb::test
