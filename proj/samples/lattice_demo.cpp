// Builds a small lattice over a random seed and prints the invariants at one point.

#include "qb/qb.hpp"

#include <cstdio>

int main() {
    qb::QuadricSpec spec({1.0, {1.5, 0.2}, {0.75, -0.1}});
    std::mt19937_64 rng(7);
    qb::Lattice lattice(spec, qb::random_coefficients(spec, rng));

    qb::ZStep s1{qb::SpectralParam(spec, {0.5, 0.1}), qb::random_skew(3, rng, 0.5), std::nullopt};
    qb::ZStep s2{qb::SpectralParam(spec, {-0.7, 0.2}), qb::random_skew(3, rng, 0.5), std::nullopt};
    const int id = lattice.ensure({s1, s2});

    const qb::Point u = qb::Point::Constant(3, 0.1);
    const auto node = lattice.node(id);
    const qb::SeedState s = node->state(u);
    const qb::CVector x = node->surface(u);
    std::printf("node %d, depth %d, x in C^%d\n", id, node->depth(), static_cast<int>(x.size()));
    std::printf("|R^T R - I|            %.3e\n", qb::orthogonality_defect(node->R(u)));
    std::printf("prime integral         %.3e\n", qb::check_prime_integral(spec, s.V, s.Lambda));

    const auto probes = qb::probe_points(qb::Point::Constant(3, -0.5), qb::Point::Constant(3, 0.5), 8, 1);
    const qb::VerificationReport report = qb::lattice_suite(lattice, probes);
    std::printf("lattice suite          %zu checks, %s\n", report.checks.size(), report.overall() ? "pass" : "FAIL");

    return report.overall() ? 0 : 1;
}
