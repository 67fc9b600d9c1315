#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"
#include "hypolab/models.hpp"
#include "hypolab/norms.hpp"
#include "hypolab/semigroup.hpp"
#include "hypolab/spectral.hpp"
#include "hypolab/symbols.hpp"

namespace hypolab {

/// Coefficients of the twisted H^1(mu^{-1/2}) norm
///   A ||f||^2 + a ||grad_x f||^2 + b ||grad_v f||^2 + 2c <grad_x f, grad_v f>
/// (static) and of the time-weighted hypoelliptic energy functional.
struct TwistedNormSpec {
    double A = 1.0;
    double a = 1.0, b = 1.0, c = 0.0;
    bool time_weighted = false; // t, t^2, t^3 weights of the energy functional

    void validate() const {
        if (a <= 0 || b <= 0 || c < 0 || c * c >= a * b)
            throw ParameterError("twisted norm: need a, b > 0 and c < sqrt(ab)");
    }
};

struct InequalityReport {
    double constant = 0.0;
    Vector extremizer;
    std::vector<double> refinement_trend; // constant per refinement level
};

namespace detail {

/// Symmetrised collision/full matrix in the flat L^2(mu^{-1/2}) variables:
/// diag(mu^{-1/2}) Op diag(mu^{1/2}).
inline Eigen::MatrixXd flat_space_matrix(const DiscreteOperator& op, const SparseMatrix& which) {
    Vector r = op.equilibrium.cwiseSqrt().cwiseInverse();
    return Eigen::MatrixXd(r.asDiagonal() * which * r.cwiseInverse().asDiagonal());
}

/// <f, g>_{mu^{-1}} Gram weight vector q mu^{-1}.
inline Vector mu_inv_quad(const DiscreteOperator& op) {
    return op.grid.cell_volume() * op.equilibrium.cwiseInverse();
}

inline std::vector<double> ascending_real_eigs_sym(const Eigen::MatrixXd& S, int count) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw SolverError("symmetric eigensolver failed");
    std::vector<double> out;
    for (int i = 0; i < count && i < S.rows(); ++i) out.push_back(es.eigenvalues()[i]);
    return out;
}

} // namespace detail

/// Best constant in the Poincare inequality of the homogeneous model:
/// smallest nonzero eigenvalue of the Dirichlet form against ||f||^2_{mu^{-1}}
/// on the mass-zero subspace (= second eigenvalue of -C in the flat space).
inline double poincare_constant(double gamma, int d, int nv, double vmax) {
    ModelSpec ms;
    ms.kind = ModelKind::HomogeneousFP;
    ms.gamma = gamma;
    ms.d = d;
    ms.nv = nv;
    ms.vmax = vmax;
    DiscreteOperator op = assemble(ms);
    if (op.grid.size() <= 4000) {
        Eigen::MatrixXd S = -detail::flat_space_matrix(op, op.L);
        auto eigs = detail::ascending_real_eigs_sym(S, 2);
        return eigs[1];
    }
    // large grids: shift-invert in the flat variables around a small shift
    Vector r = op.equilibrium.cwiseSqrt().cwiseInverse();
    SparseMatrix S = SparseMatrix(r.asDiagonal() * op.L * r.cwiseInverse().asDiagonal());
    SparseMatrix Ssym = SparseMatrix(0.5 * (S + SparseMatrix(S.transpose())));
    auto pairs = shift_invert_arnoldi(Ssym, 4, 0.05, 60, 1e-7);
    double second = kNegInf;
    for (const auto& p : pairs)
        if (std::abs(p.value) > 1e-6) second = std::max(second, p.value.real());
    return -second;
}

/// Largest eps such that the strengthened Poincare quadratic form
///   Dirichlet - lambda ||.||^2 - eps (||f grad Phi||^2 + ||grad f||^2)
/// stays nonnegative on mass-zero functions. Bisection over generalized
/// eigenvalue checks.
inline double strengthened_poincare(double gamma, int d, double lambda, int nv, double vmax) {
    ModelSpec ms;
    ms.kind = ModelKind::HomogeneousFP;
    ms.gamma = gamma;
    ms.d = d;
    ms.nv = nv;
    ms.vmax = vmax;
    DiscreteOperator op = assemble(ms);
    const Grid& g = op.grid;
    const Eigen::Index n = g.size();
    if (n > 4000) throw CapabilityError("strengthened_poincare: dense path limited to 4000 unknowns");

    Eigen::MatrixXd Csym = detail::flat_space_matrix(op, op.L);
    Eigen::MatrixXd Q = -0.5 * (Csym + Csym.transpose()); // Dirichlet form, flat variables
    Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);

    // R(f) = ||f grad Phi||^2_{mu^{-1}} + ||grad f||^2_{mu^{-1}} in flat variables:
    // f = mu^{1/2} g  =>  assemble in f-coordinates then conjugate.
    Vector gradPhi2 = g.evaluate([&](const PhasePoint& p) {
        const double v2 = p.vnorm2();
        const double ff = force_factor(v2, gamma);
        return ff * ff * v2;
    });
    Vector mu_inv = op.equilibrium.cwiseInverse();
    Eigen::MatrixXd Rf = Eigen::MatrixXd::Zero(n, n);
    Rf += Eigen::MatrixXd(Vector(gradPhi2.cwiseProduct(mu_inv)).asDiagonal());
    for (int k = 0; k < g.n_axes(); ++k) {
        SparseMatrix D = derivative_matrix(g, k);
        // edge weights mu^{-1} at the left cell (first-order consistent)
        Vector edge_w(D.rows());
        Eigen::Index row = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto mi = g.unravel(i);
            if (mi[k] == g.axis(k).n - 1) continue;
            auto mj = mi;
            mj[k] += 1;
            edge_w[row++] = 0.5 * (mu_inv[i] + mu_inv[g.ravel(mj)]);
        }
        Rf += Eigen::MatrixXd(D.transpose() * edge_w.asDiagonal() * D);
    }
    Vector mu_sqrt = op.equilibrium.cwiseSqrt();
    Eigen::MatrixXd R = mu_sqrt.asDiagonal() * Rf * mu_sqrt.asDiagonal(); // flat variables
    R = 0.5 * (R + R.transpose());

    // mass-zero direction in flat variables: mass(f) = q <mu^{1/2}, g>
    Vector u = mu_sqrt;
    u.normalize();
    auto min_eig_masszero = [&](const Eigen::MatrixXd& Mat) {
        Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - u * u.transpose();
        Eigen::MatrixXd Mp = P * Mat * P + 1e6 * u * u.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Mp + Mp.transpose()));
        return es.eigenvalues()[0];
    };

    const double lambda_p = poincare_constant(gamma, d, nv, vmax);
    if (lambda >= lambda_p)
        throw InfeasibilityError("strengthened_poincare: lambda must be below lambda_P");

    double lo = 0.0, hi = 1.0;
    auto feasible = [&](double eps) {
        return min_eig_masszero(Q - lambda * N - eps * R) >= -1e-10;
    };
    if (!feasible(0.0)) return 0.0;
    while (feasible(hi) && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// Nash-quotient of one sample: ||g||_2^2 / (||g||_1^{4/(n+2)} (||grad g||_2^2)^{n/(n+2)})
/// with g = f mu^{-1/2} and n the total number of phase-space dimensions.
inline double nash_ratio(const Grid& g, const Vector& mu, const Vector& f) {
    const int n_dims = g.n_axes();
    Vector gg = f.cwiseQuotient(mu.cwiseSqrt());
    const double q = g.cell_volume();
    const double l2sq = q * gg.squaredNorm();
    const double l1 = q * gg.cwiseAbs().sum();
    double grad2 = 0.0;
    for (int k = 0; k < g.n_axes(); ++k) grad2 += q * grid_derivative(g, gg, k).squaredNorm();
    const double e1 = 4.0 / (n_dims + 2.0), e2 = double(n_dims) / (n_dims + 2.0);
    const double denom = std::pow(l1, e1) * std::pow(grad2, e2);
    if (denom == 0.0) throw DataError("nash_ratio: zero sample");
    return l2sq / denom;
}

/// Worst Nash quotient over a set of samples.
inline double nash_check(const Grid& g, const Vector& mu, const std::vector<Vector>& samples) {
    if (samples.empty()) throw UsageError("nash_check: no samples");
    double worst = 0.0;
    for (const auto& f : samples) worst = std::max(worst, nash_ratio(g, mu, f));
    return worst;
}

/// Twisted H^1(mu^{-1/2}) norm (squared) of a grid function.
inline double twisted_h1_sq(const DiscreteOperator& op, const TwistedNormSpec& spec,
                            const Vector& f) {
    spec.validate();
    const Grid& g = op.grid;
    Vector w = detail::mu_inv_quad(op);
    auto ip = [&](const Vector& u, const Vector& v) { return u.cwiseProduct(w).dot(v); };
    if (g.n_x_axes() != 1) throw UsageError("twisted norm needs an (x, v) grid");
    Vector fx = grid_derivative(g, f, 0);
    Vector fv = grid_derivative(g, f, 1);
    return spec.A * ip(f, f) + spec.a * ip(fx, fx) + spec.b * ip(fv, fv) + 2.0 * spec.c * ip(fx, fv);
}

struct TwistedDecayResult {
    TwistedNormSpec best;
    DecayFit fit;
    bool monotone = true;
    bool c0_monotone = true; // plain H^1 (c = 0) baseline along the same trajectory
};

/// Propagate e^{tL} on mass-zero data and fit the decay of the twisted norm;
/// (a, b, c) searched on a logarithmic lattice for the most negative rate.
inline TwistedDecayResult twisted_decay(const DiscreteOperator& op, const Vector& f0,
                                        double t_end = 8.0, int n_times = 60) {
    Vector f = f0;
    f -= op.grid.integrate(f0) * op.equilibrium; // mass-zero part
    auto times = time_ladder(t_end, n_times);
    Trajectory traj = propagate(op.L, f, times, Scheme::CrankNicolson, {0.02});

    std::vector<double> lattice = {0.125, 0.25, 0.5, 1.0, 2.0};
    TwistedDecayResult out;
    double best_rate = kInf;
    auto eval_spec = [&](const TwistedNormSpec& sp, bool* monotone) {
        std::vector<double> xs, ys;
        bool mono = true;
        double prev = kInf;
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const double nn = std::sqrt(std::max(0.0, twisted_h1_sq(op, sp, traj.states[i])));
            if (nn > prev * (1.0 + 1e-10)) mono = false;
            prev = nn;
            if (nn > 0) {
                xs.push_back(traj.times[i]);
                ys.push_back(std::log(nn));
            }
        }
        if (monotone) *monotone = mono;
        const auto [lo, hi] = tail_window(traj);
        std::vector<double> fx, fy;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (xs[i] >= lo && xs[i] <= hi) {
                fx.push_back(xs[i]);
                fy.push_back(ys[i]);
            }
        if (fx.size() < 8) throw DataError("twisted_decay: too few samples in the tail window");
        return detail::linear_fit(fx, fy);
    };

    TwistedNormSpec plain;
    plain.c = 0.0;
    eval_spec(plain, &out.c0_monotone);

    for (double a : lattice)
        for (double b : lattice)
            for (double c : lattice) {
                if (c * c >= a * b) continue;
                TwistedNormSpec sp;
                sp.a = a;
                sp.b = b;
                sp.c = c;
                bool mono = true;
                DecayFit fit = eval_spec(sp, &mono);
                if (fit.rate < best_rate) {
                    best_rate = fit.rate;
                    out.best = sp;
                    out.fit = fit;
                    out.monotone = mono;
                }
            }
    return out;
}

struct HypoellipticReport {
    std::vector<double> times;
    std::vector<double> energy;          // F(t, f_t)
    double sup_energy_ratio = 0.0;       // sup_t F(t, f_t) / F(0, f_0)
    double h1_gain_constant = 0.0;       // sup_t t^{3/2} ||S_B(t) f||_{H^1} / ||f0||_{L^2}
    int Z = 0;
};

/// Time-weighted hypoelliptic energy functional along the B-semigroup:
/// F(t) = A ||f||^2 + a t ||grad_v f||^2 + 2 c t^2 <grad_v f, grad_x f> + b t^3 ||grad_x f||^2.
inline HypoellipticReport hypoelliptic_energy(const DiscreteOperator& op, const Vector& f0,
                                              const TwistedNormSpec& coeffs, int Z,
                                              double t_end = 1.0, int n_times = 48) {
    coeffs.validate();
    if (!(2.0 * coeffs.c > 3.0 * coeffs.b))
        throw ParameterError("hypoelliptic energy: torus variant needs 2c > 3b");
    const Grid& g = op.grid;
    if (g.n_x_axes() != 1) throw UsageError("hypoelliptic energy needs an (x, v) grid");

    std::vector<double> times{0.0};
    for (int i = 0; i <= 40; ++i) times.push_back(1e-3 * std::pow(t_end / 1e-3, i / 40.0));
    (void)n_times;
    Trajectory traj = propagate(op.B, f0, times, Scheme::ImplicitEuler, {5e-4});

    Vector w = detail::mu_inv_quad(op);
    auto ip = [&](const Vector& u, const Vector& v) { return u.cwiseProduct(w).dot(v); };

    HypoellipticReport rep;
    rep.Z = Z;
    rep.times = traj.times;
    const double f0_l2 = std::sqrt(ip(traj.states[0], traj.states[0]));
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        const Vector& f = traj.states[i];
        Vector fx = grid_derivative(g, f, 0);
        Vector fv = grid_derivative(g, f, 1);
        const double e = coeffs.A * ip(f, f) + coeffs.a * t * ip(fv, fv) +
                         2.0 * coeffs.c * t * t * ip(fv, fx) +
                         coeffs.b * t * t * t * ip(fx, fx);
        rep.energy.push_back(e);
        if (t > 0) {
            const double h1 = std::sqrt(ip(f, f) + ip(fx, fx) + ip(fv, fv));
            rep.h1_gain_constant =
                std::max(rep.h1_gain_constant, std::pow(t, 1.5) * h1 / f0_l2);
        }
    }
    const double e0 = rep.energy.front();
    for (double e : rep.energy) rep.sup_energy_ratio = std::max(rep.sup_energy_ratio, e / e0);
    return rep;
}

/// Exact 1D Wasserstein-1 distance by the CDF formula. Requires equal masses.
inline double w1_distance(const Grid& g, const Vector& f, const Vector& gfun) {
    if (g.n_axes() != 1) throw CapabilityError("w1_distance: exact CDF route is 1D only");
    const double h = g.axis(0).h();
    const double mf = g.integrate(f), mg = g.integrate(gfun);
    const double scale = std::max({std::abs(mf), std::abs(mg), 1.0});
    if (std::abs(mf - mg) > 1e-8 * scale)
        throw UsageError("w1_distance: unequal masses (W_1 undefined)");
    double cdf = 0.0, acc = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        cdf += (f[i] - gfun[i]) * h;
        acc += std::abs(cdf) * h;
    }
    return acc;
}

/// Decay fit of W_1(f_t, mass(f_0) mu) along e^{tL} (1D homogeneous model).
inline DecayFit w1_decay(const DiscreteOperator& op, const Vector& f0, double t_end = 8.0,
                         int n_times = 60) {
    auto times = time_ladder(t_end, n_times);
    Trajectory traj = propagate(op.L, f0, times, Scheme::CrankNicolson, {0.02});
    Vector target = op.grid.integrate(f0) * op.equilibrium;
    std::vector<double> ts, ws;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        ts.push_back(traj.times[i]);
        ws.push_back(w1_distance(op.grid, traj.states[i], target));
    }
    const auto [lo, hi] = tail_window(traj);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (ts[i] >= lo && ts[i] <= hi && ws[i] > 0) {
            xs.push_back(ts[i]);
            ys.push_back(std::log(ws[i]));
        }
    if (xs.size() < 8) throw DataError("w1_decay: too few positive samples in the window");
    DecayFit fit = detail::linear_fit(xs, ys);
    fit.t_lo = lo;
    fit.t_hi = hi;
    return fit;
}

/// Moment-gain estimate: largest generalized eigenvalue of
///   <f, weight f>_{mu^{-1}}  against  ||L f||^2_{mu^{-1}} + ||f||^2_{mu^{-1}},
/// computed by power iteration on the SPD pencil.
inline double moment_gain(const DiscreteOperator& op, const Vector& weight, int iters = 400) {
    const Eigen::Index n = op.grid.size();
    Vector qmu = detail::mu_inv_quad(op);
    for (Eigen::Index i = 0; i < n; ++i)
        if (weight[i] < 0) throw ParameterError("moment_gain: weight must be nonnegative");
    SparseMatrix Qmu(n, n);
    {
        std::vector<Triplet> tr;
        for (Eigen::Index i = 0; i < n; ++i) tr.emplace_back(i, i, qmu[i]);
        Qmu.setFromTriplets(tr.begin(), tr.end());
    }
    SparseMatrix D = SparseMatrix(op.L.transpose() * Qmu * op.L) + Qmu;
    Eigen::SimplicialLLT<SparseMatrix> llt(D);
    if (llt.info() != Eigen::Success) throw SolverError("moment_gain: pencil factorisation failed");
    Vector Nw = qmu.cwiseProduct(weight);
    Vector x = Vector::Ones(n);
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vector y = llt.solve(Nw.cwiseProduct(x));
        const double nrm = y.norm();
        if (nrm == 0.0) return 0.0;
        x = y / nrm;
        const double num = x.cwiseProduct(Nw).dot(x);
        const double den = x.dot(D * x);
        const double lam_new = num / den;
        if (it > 10 && std::abs(lam_new - lam) < 1e-12 * std::max(1.0, lam_new)) {
            lam = lam_new;
            break;
        }
        lam = lam_new;
    }
    return lam;
}

} // namespace hypolab
