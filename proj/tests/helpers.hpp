#pragma once

#include <random>

#include "hypolab/grid.hpp"
#include "hypolab/models.hpp"

namespace hypolab::testing {

/// Smooth positive grid function decaying like the equilibrium: mu-modulated
/// random low-frequency profile. Deterministic per seed.
inline Vector smooth_positive(const Grid& g, const ModelSpec& spec, unsigned seed,
                              double roughness = 0.5) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(0.3, 1.7);
    const int n_modes = 4;
    std::vector<std::array<double, 5>> modes;
    for (int m = 0; m < n_modes; ++m)
        modes.push_back({amp(rng), freq(rng), freq(rng), amp(rng) * 3.0, amp(rng) * 3.0});
    Vector f(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const PhasePoint p = g.point(i);
        double s = 0.0;
        for (const auto& m : modes)
            s += m[0] * std::cos(m[1] * p.v[0] + m[3]) *
                 std::cos(m[2] * (g.n_x_axes() ? 2 * M_PI * p.x[0] : p.v[1]) + m[4]);
        f[i] = spec.equilibrium_unnormalised(p) * (1.0 + roughness * s / n_modes);
    }
    return f;
}

/// Mean-zero smooth perturbation (not sign-definite).
inline Vector smooth_signed(const Grid& g, const ModelSpec& spec, unsigned seed) {
    Vector f = smooth_positive(g, spec, seed, 0.9);
    Vector mu = g.evaluate([&](const PhasePoint& p) { return spec.equilibrium_unnormalised(p); });
    return f - mu * (g.integrate(f) / g.integrate(mu));
}

inline Vector random_vector(Eigen::Index n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

} // namespace hypolab::testing
