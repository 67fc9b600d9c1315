#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"
#include "hypolab/weights.hpp"

namespace hypolab {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class ModelKind { HomogeneousFP, TorusKFP, PotentialKFP };
enum class TransportScheme { Spectral, Upwind, CentralMu };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::HomogeneousFP: return "homogeneous_fp";
        case ModelKind::TorusKFP: return "torus_kfp";
        case ModelKind::PotentialKFP: return "potential_kfp";
    }
    return "?";
}

inline std::string to_string(TransportScheme s) {
    switch (s) {
        case TransportScheme::Spectral: return "spectral";
        case TransportScheme::Upwind: return "upwind";
        case TransportScheme::CentralMu: return "central_mu";
    }
    return "?";
}

/// Friction potential Phi(v) = <v>^gamma / gamma and its gradient.
inline double friction_potential(double v2, double gamma) {
    return std::pow(bracket(v2), gamma) / gamma;
}
/// F(v) = v <v>^{gamma-2} componentwise factor.
inline double force_factor(double v2, double gamma) {
    return std::pow(bracket(v2), gamma - 2.0);
}
/// Confinement Psi(x) = <x>^beta / beta and G(x) = x <x>^{beta-2}.
inline double confinement_potential(double x2, double beta) {
    return std::pow(bracket(x2), beta) / beta;
}
inline double confinement_force_factor(double x2, double beta) {
    return std::pow(bracket(x2), beta - 2.0);
}

/// Cubic smoothstep bump: 1 on r <= 1, 0 on r >= 2.
inline double cutoff_bump(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double t = r - 1.0;
    return 1.0 - t * t * (3.0 - 2.0 * t);
}
inline double cutoff_bump_derivative(double r) {
    if (r <= 1.0 || r >= 2.0) return 0.0;
    const double t = r - 1.0;
    return -6.0 * t * (1.0 - t);
}

struct ModelSpec {
    ModelKind kind = ModelKind::HomogeneousFP;
    double gamma = 2.0; // friction exponent (Homogeneous/Torus); beta for the potential model
    int d = 1;          // dimension per variable
    int nv = 64;
    int nx = 64;
    double vmax = 8.0;
    double xmax = 8.0;
    double M = 0.0; // splitting amplitude, A = M chi_R
    double R = 1.0; // splitting radius
    TransportScheme transport = TransportScheme::Spectral;

    void validate() const {
        if (gamma < 1.0) throw ParameterError("model: gamma/beta must be >= 1");
        if (M < 0.0) throw ParameterError("model: M must be >= 0");
        if (R <= 0.0) throw ParameterError("model: R must be > 0");
        if (d < 1 || d > 2) throw ParameterError("model: d must be 1 or 2");
        if (nv < 8 || (kind != ModelKind::HomogeneousFP && nx < 8))
            throw ResolutionError("model: need at least 8 grid points per variable");
        if (kind != ModelKind::HomogeneousFP && d != 1)
            throw CapabilityError("model: torus/potential assembly supports d = 1 per variable");
        if (kind == ModelKind::HomogeneousFP && transport == TransportScheme::CentralMu)
            throw ParameterError("model: homogeneous model has no transport term");
        if (kind == ModelKind::TorusKFP && transport == TransportScheme::Spectral && nx % 2 == 0)
            throw ParameterError(
                "model: spectral torus transport needs an odd x-count (the even-grid "
                "derivative annihilates the sawtooth mode); use nx odd or upwind");
    }

    Grid make_grid() const {
        switch (kind) {
            case ModelKind::HomogeneousFP:
                return d == 1 ? Grid::velocity_1d(nv, vmax) : Grid::velocity_2d(nv, vmax);
            case ModelKind::TorusKFP:
                return Grid::torus_1d(nx, nv, vmax);
            case ModelKind::PotentialKFP:
                return Grid::plane_1d(nx, xmax, nv, vmax);
        }
        throw ParameterError("model: unknown kind");
    }

    /// Unnormalised equilibrium density at a point.
    double equilibrium_unnormalised(const PhasePoint& p) const {
        if (kind == ModelKind::PotentialKFP)
            return std::exp(-confinement_potential(p.xnorm2(), gamma) - 0.5 * p.vnorm2());
        return std::exp(-friction_potential(p.vnorm2(), gamma));
    }

    /// Cutoff chi_R at a point: chi(|v|/R) for flat models, chi(H/R) with
    /// H = 1 + Psi(x) + |v|^2/2 for the potential model.
    double cutoff(const PhasePoint& p) const {
        if (kind == ModelKind::PotentialKFP) {
            const double H = 1.0 + confinement_potential(p.xnorm2(), gamma) + 0.5 * p.vnorm2();
            return cutoff_bump(H / R);
        }
        return cutoff_bump(std::sqrt(p.vnorm2()) / R);
    }
};

/// Assembled matrix triple L = A + B on a grid, with the quadrature-normalised
/// equilibrium. Immutable after assembly.
struct DiscreteOperator {
    SparseMatrix L, A, B;
    Grid grid;
    ModelSpec spec;
    Vector equilibrium; // normalised: integrate(equilibrium) == 1
    bool adjoint_flag = false;
    std::optional<WeightSpec> conjugating_weight;
};

namespace detail {

/// 8-point Gauss-Legendre quadrature of f on [a, b].
template <typename F>
double gauss8(F&& f, double a, double b) {
    static const double xs[4] = {0.1834346424956498, 0.5255324099163290,
                                 0.7966664774136267, 0.9602898564975363};
    static const double ws[4] = {0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};
    const double c = 0.5 * (a + b), hh = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 4; ++i)
        acc += ws[i] * (f(c + hh * xs[i]) + f(c - hh * xs[i]));
    return acc * hh;
}

/// Velocity diffusion-drift C = div_v(mu grad_v (f/mu)) in flux form, with the
/// face value of mu evaluated analytically. Annihilates the sampled
/// equilibrium exactly and is self-adjoint in L^2(mu^{-1/2}).
inline void add_collision(std::vector<Triplet>& trips, const Grid& g, const ModelSpec& spec) {
    const Eigen::Index n = g.size();
    std::vector<double> mu_cell(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        mu_cell[static_cast<std::size_t>(i)] = spec.equilibrium_unnormalised(g.point(i));

    for (int k = g.n_x_axes(); k < g.n_axes(); ++k) {
        const auto& ax = g.axis(k);
        const double h = ax.h();
        for (Eigen::Index i = 0; i < n; ++i) {
            auto mi = g.unravel(i);
            if (mi[k] == ax.n - 1) continue; // faces between (j, j+1) only
            auto mj = mi;
            mj[k] += 1;
            const Eigen::Index j = g.ravel(mj);
            PhasePoint pf = g.point(i);
            if (k < g.n_x_axes()) pf.x[static_cast<std::size_t>(k)] += 0.5 * h;
            else pf.v[static_cast<std::size_t>(k - g.n_x_axes())] += 0.5 * h;
            const double mu_f = spec.equilibrium_unnormalised(pf);
            const double c = mu_f / (h * h);
            const double gi = 1.0 / mu_cell[static_cast<std::size_t>(i)];
            const double gj = 1.0 / mu_cell[static_cast<std::size_t>(j)];
            // flux J = mu_f (f_j/mu_j - f_i/mu_i)/h enters cell i with +, cell j with -
            trips.emplace_back(i, j, c * gj);
            trips.emplace_back(i, i, -c * gi);
            trips.emplace_back(j, i, c * gi);
            trips.emplace_back(j, j, -c * gj);
        }
    }
}

inline Eigen::MatrixXd spectral_derivative_matrix(int n, double length) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    const double scale = 2.0 * M_PI / length;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            const double a = M_PI * (j - k) / n;
            const double sgn = ((j - k) % 2 == 0) ? 1.0 : -1.0;
            D(j, k) = (n % 2 == 0) ? 0.5 * sgn / std::tan(a) : 0.5 * sgn / std::sin(a);
            D(j, k) *= scale;
        }
    return D;
}

inline void add_torus_transport(std::vector<Triplet>& trips, const Grid& g,
                                const ModelSpec& spec) {
    const auto& ax = g.axis(0);
    if (spec.transport == TransportScheme::Spectral) {
        const Eigen::MatrixXd D = spectral_derivative_matrix(ax.n, ax.measure());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            auto mi = g.unravel(i);
            const double v = g.axis(1).node(mi[1]);
            for (int jx = 0; jx < ax.n; ++jx) {
                if (D(mi[0], jx) == 0.0) continue;
                auto mj = mi;
                mj[0] = jx;
                trips.emplace_back(i, g.ravel(mj), -v * D(mi[0], jx));
            }
        }
    } else { // upwind, periodic
        const double h = ax.h();
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            auto mi = g.unravel(i);
            const double v = g.axis(1).node(mi[1]);
            auto up = mi, dn = mi;
            up[0] = (mi[0] + 1) % ax.n;
            dn[0] = (mi[0] - 1 + ax.n) % ax.n;
            if (v > 0) {
                trips.emplace_back(i, i, -v / h);
                trips.emplace_back(i, g.ravel(dn), v / h);
            } else if (v < 0) {
                trips.emplace_back(i, i, v / h);
                trips.emplace_back(i, g.ravel(up), -v / h);
            }
        }
    }
}

/// Transport of the confined model, T f = -div(U f) with U = (v, -G(x)),
/// written as a conservative face-flux divergence of mu U g, g = f/mu. Face
/// coefficients integrate mu U . n exactly along each face so the sampled
/// equilibrium is annihilated to quadrature precision (div(mu U) = 0).
inline void add_potential_transport(std::vector<Triplet>& trips, const Grid& g,
                                    const ModelSpec& spec) {
    const Eigen::Index n = g.size();
    const double beta = spec.gamma;
    std::vector<double> mu_cell(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        mu_cell[static_cast<std::size_t>(i)] = spec.equilibrium_unnormalised(g.point(i));

    const bool upwind = spec.transport == TransportScheme::Upwind;
    for (int k = 0; k < 2; ++k) { // k = 0: x faces (U = v); k = 1: v faces (U = -G)
        const auto& ax = g.axis(k);
        const auto& other = g.axis(1 - k);
        const double h = ax.h(), ho = other.h();
        for (Eigen::Index i = 0; i < n; ++i) {
            auto mi = g.unravel(i);
            if (mi[k] == ax.n - 1) continue;
            auto mj = mi;
            mj[k] += 1;
            const Eigen::Index j = g.ravel(mj);
            const double face = ax.node(mi[k]) + 0.5 * h;
            const double oc = other.node(mi[1 - k]);
            // 1/h_other * int over the face of mu U.n (mean flux density)
            double c;
            if (k == 0) {
                c = gauss8(
                        [&](double v) {
                            return std::exp(-confinement_potential(face * face, beta) -
                                            0.5 * v * v) *
                                   v;
                        },
                        oc - 0.5 * ho, oc + 0.5 * ho) /
                    ho;
            } else {
                // face at fixed v = face, spans x; U.n = -G(x) varies along it
                c = gauss8(
                        [&](double x) {
                            return -x * confinement_force_factor(x * x, beta) *
                                   std::exp(-confinement_potential(x * x, beta) -
                                            0.5 * face * face);
                        },
                        oc - 0.5 * ho, oc + 0.5 * ho) /
                    ho;
            }
            const double gi = 1.0 / mu_cell[static_cast<std::size_t>(i)];
            const double gj = 1.0 / mu_cell[static_cast<std::size_t>(j)];
            // divergence: row i gets -flux/h, row j gets +flux/h
            if (upwind) {
                if (c > 0) {
                    trips.emplace_back(i, i, -c * gi / h);
                    trips.emplace_back(j, i, c * gi / h);
                } else if (c < 0) {
                    trips.emplace_back(i, j, -c * gj / h);
                    trips.emplace_back(j, j, c * gj / h);
                }
            } else {
                trips.emplace_back(i, i, -0.5 * c * gi / h);
                trips.emplace_back(i, j, -0.5 * c * gj / h);
                trips.emplace_back(j, i, 0.5 * c * gi / h);
                trips.emplace_back(j, j, 0.5 * c * gj / h);
            }
        }
    }
}

} // namespace detail

/// Assemble the matrix triple (L, A, B) of a model on its grid.
inline DiscreteOperator assemble(const ModelSpec& spec) {
    spec.validate();
    Grid g = spec.make_grid();
    const Eigen::Index n = g.size();

    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(n) * 8);
    detail::add_collision(trips, g, spec);
    if (spec.kind == ModelKind::TorusKFP) detail::add_torus_transport(trips, g, spec);
    if (spec.kind == ModelKind::PotentialKFP) detail::add_potential_transport(trips, g, spec);

    SparseMatrix L(n, n);
    L.setFromTriplets(trips.begin(), trips.end());

    std::vector<Triplet> atrips;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double chi = spec.cutoff(g.point(i));
        if (chi > 0.0) atrips.emplace_back(i, i, spec.M * chi);
    }
    SparseMatrix A(n, n);
    A.setFromTriplets(atrips.begin(), atrips.end());

    DiscreteOperator op;
    op.B = L - A;
    op.L = L;
    op.A = A;
    op.grid = g;
    op.spec = spec;
    Vector mu = g.evaluate([&](const PhasePoint& p) { return spec.equilibrium_unnormalised(p); });
    op.equilibrium = mu / g.integrate(mu);
    return op;
}

/// Transpose with respect to the quadrature inner product (uniform cells, so a
/// plain matrix transpose).
inline DiscreteOperator adjoint(const DiscreteOperator& op) {
    DiscreteOperator out = op;
    out.L = SparseMatrix(op.L.transpose());
    out.A = SparseMatrix(op.A.transpose());
    out.B = SparseMatrix(op.B.transpose());
    out.adjoint_flag = !op.adjoint_flag;
    return out;
}

/// Similarity transform diag(m) op diag(m)^{-1}; spectrum preserved.
inline DiscreteOperator conjugate_by_weight(const DiscreteOperator& op, const WeightSpec& w) {
    Vector m = w.on_grid(op.grid);
    const double mmax = m.maxCoeff();
    if (!std::isfinite(mmax) || mmax > 1e140)
        throw RangeError("conjugate_by_weight: weight reaches " + std::to_string(mmax) +
                         " on the grid; reduce V_max/X_max or weaken the weight");
    auto conj = [&](const SparseMatrix& S) {
        return SparseMatrix(m.asDiagonal() * S * m.cwiseInverse().asDiagonal());
    };
    DiscreteOperator out = op;
    out.L = conj(op.L);
    out.A = conj(op.A);
    out.B = conj(op.B);
    out.conjugating_weight = w;
    return out;
}

/// mass(f) = quadrature of f over phase space.
inline double mass(const Grid& g, const Vector& f) { return g.integrate(f); }

} // namespace hypolab
