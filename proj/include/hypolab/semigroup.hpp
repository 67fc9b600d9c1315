#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"
#include "hypolab/norms.hpp"

namespace hypolab {

enum class Scheme { CrankNicolson, ImplicitEuler, KrylovExpm };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::CrankNicolson: return "crank_nicolson";
        case Scheme::ImplicitEuler: return "implicit_euler";
        case Scheme::KrylovExpm: return "krylov_expm";
    }
    return "?";
}

/// Time-stamped snapshots of a linear evolution, with norms in a declared set
/// of weighted spaces. Immutable once filled.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<double> masses;                 // filled by postprocess
    std::vector<std::string> norm_names;        // filled by postprocess
    Eigen::MatrixXd norms;                      // times x norm specs

    const Vector& state(std::size_t i) const { return states[i]; }
};

/// Least-squares decay fit: rate of log(quantity) against t (exponential) or
/// log t (power law), with the RMS residual of the fit.
struct DecayFit {
    double rate = 0.0;       // slope: a in e^{at}, or -Theta in t^{-Theta}
    double log_prefactor = 0.0;
    double rms_residual = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    int n_points = 0;
};

namespace detail {

class KrylovExpm {
public:
    static Vector apply(const SparseMatrix& Op, const Vector& v, double t, int m = 40,
                        double tol = 1e-10) {
        Vector w = v;
        double remaining = t;
        double step = t;
        int guard = 0;
        while (remaining > 1e-14 * std::max(1.0, t)) {
            if (++guard > 10000) throw SolverError("krylov expm: step control failed to advance");
            Vector cand, cand_half;
            if (!substep(Op, w, std::min(step, remaining), m, cand)) {
                step *= 0.5;
                continue;
            }
            substep(Op, w, std::min(step, remaining) * 0.5, m, cand_half);
            Vector cand2;
            substep(Op, cand_half, std::min(step, remaining) * 0.5, m, cand2);
            const double err = (cand - cand2).norm() / std::max(1.0, cand2.norm());
            if (err > tol && step > 1e-8 * t) {
                step *= 0.5;
                continue;
            }
            w = cand2;
            remaining -= std::min(step, remaining);
            if (err < 0.01 * tol) step *= 2.0;
        }
        return w;
    }

private:
    static bool substep(const SparseMatrix& Op, const Vector& v, double tau, int m, Vector& out) {
        const Eigen::Index n = v.size();
        m = static_cast<int>(std::min<Eigen::Index>(m, n));
        const double beta = v.norm();
        if (beta == 0.0) {
            out = v;
            return true;
        }
        Eigen::MatrixXd V(n, m + 1);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
        V.col(0) = v / beta;
        int k = m;
        for (int j = 0; j < m; ++j) {
            Vector w = Op * V.col(j);
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(w);
                w -= H(i, j) * V.col(i);
            }
            // one re-orthogonalisation pass
            for (int i = 0; i <= j; ++i) {
                const double c = V.col(i).dot(w);
                H(i, j) += c;
                w -= c * V.col(i);
            }
            H(j + 1, j) = w.norm();
            if (H(j + 1, j) < 1e-14) {
                k = j + 1;
                break;
            }
            V.col(j + 1) = w / H(j + 1, j);
        }
        Eigen::MatrixXd Hk = H.topLeftCorner(k, k);
        Eigen::MatrixXd E = (tau * Hk).exp();
        out = beta * V.leftCols(k) * E.col(0);
        return out.allFinite();
    }
};

} // namespace detail

struct PropagateOptions {
    double dt_max = 0.01; // substep cap for the implicit schemes
    int krylov_dim = 40;
};

/// Snapshots of e^{t Op} f0 on the requested time ladder. Implicit schemes are
/// unconditionally stable; dt_max caps the substep for accuracy only.
inline Trajectory propagate(const SparseMatrix& Op, const Vector& f0,
                            const std::vector<double>& times, Scheme scheme,
                            const PropagateOptions& opts = {}) {
    if (times.empty()) throw UsageError("propagate: empty time ladder");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (times[i + 1] <= times[i]) throw UsageError("propagate: times must increase");
    if (times.front() < 0.0) throw UsageError("propagate: times must be nonnegative");

    Trajectory traj;
    traj.times = times;
    traj.states.reserve(times.size());

    const Eigen::Index n = f0.size();
    SparseMatrix I(n, n);
    I.setIdentity();

    // factorisations cached per substep size
    std::map<long long, std::unique_ptr<Eigen::SparseLU<SparseMatrix>>> lu_cache;
    SparseMatrix rhs_mat; // CN explicit half, rebuilt when dt changes
    double rhs_dt = -1.0;
    auto solver_for = [&](double dt) -> Eigen::SparseLU<SparseMatrix>& {
        const long long key = static_cast<long long>(std::llround(dt * 1e12));
        auto it = lu_cache.find(key);
        if (it == lu_cache.end()) {
            SparseMatrix Mat = (scheme == Scheme::CrankNicolson) ? SparseMatrix(I - 0.5 * dt * Op)
                                                                 : SparseMatrix(I - dt * Op);
            auto lu = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
            lu->compute(Mat);
            if (lu->info() != Eigen::Success)
                throw SolverError("propagate: LU factorisation failed at dt = " + std::to_string(dt));
            it = lu_cache.emplace(key, std::move(lu)).first;
        }
        return *it->second;
    };

    Vector f = f0;
    double t = 0.0;
    for (double target : times) {
        const double gap_t = target - t;
        if (gap_t > 1e-14) {
            if (scheme == Scheme::KrylovExpm) {
                f = detail::KrylovExpm::apply(Op, f, gap_t, opts.krylov_dim);
            } else {
                const int steps = std::max(1, static_cast<int>(std::ceil(gap_t / opts.dt_max)));
                const double dt = gap_t / steps;
                auto& lu = solver_for(dt);
                if (scheme == Scheme::CrankNicolson && rhs_dt != dt) {
                    rhs_mat = SparseMatrix(I + 0.5 * dt * Op);
                    rhs_dt = dt;
                }
                for (int s = 0; s < steps; ++s) {
                    Vector rhs = (scheme == Scheme::CrankNicolson) ? Vector(rhs_mat * f) : f;
                    f = lu.solve(rhs);
                    if (lu.info() != Eigen::Success)
                        throw SolverError("propagate: linear solve breakdown at t = " +
                                          std::to_string(t + (s + 1) * dt));
                }
            }
            t = target;
        }
        if (!f.allFinite())
            throw SolverError("propagate: non-finite state at t = " + std::to_string(t));
        traj.states.push_back(f);
    }
    return traj;
}

/// Fill masses and the declared norm columns of a propagated trajectory.
inline void postprocess(Trajectory& traj, const Grid& grid, const std::vector<NormSpec>& specs) {
    traj.masses.resize(traj.states.size());
    traj.norms.resize(static_cast<Eigen::Index>(traj.states.size()),
                      static_cast<Eigen::Index>(specs.size()));
    traj.norm_names.clear();
    std::vector<NormEvaluator> evals;
    evals.reserve(specs.size());
    for (const auto& s : specs) {
        evals.emplace_back(grid, s);
        traj.norm_names.push_back(s.column_name());
    }
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        traj.masses[i] = grid.integrate(traj.states[i]);
        for (std::size_t j = 0; j < evals.size(); ++j)
            traj.norms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                evals[j](traj.states[i]);
    }
}

/// Geometric + linear time ladder: linear spacing on the bulk with a geometric
/// prefix resolving early transients.
inline std::vector<double> time_ladder(double t_end, int n_linear, double t_first = 1e-3,
                                       int n_geometric = 12) {
    std::vector<double> ts{0.0};
    for (int i = 0; i < n_geometric; ++i) {
        const double t = t_first * std::pow(t_end / (10.0 * t_first),
                                            i / std::max(1.0, double(n_geometric - 1)));
        if (t < t_end / n_linear) ts.push_back(t);
    }
    for (int i = 1; i <= n_linear; ++i) ts.push_back(t_end * i / n_linear);
    return ts;
}

namespace detail {
inline DecayFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    const int n = static_cast<int>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    DecayFit fit;
    const double det = n * sxx - sx * sx;
    fit.rate = (n * sxy - sx * sy) / det;
    fit.log_prefactor = (sy - fit.rate * sx) / n;
    double rss = 0;
    for (int i = 0; i < n; ++i) {
        const double e = ys[i] - (fit.log_prefactor + fit.rate * xs[i]);
        rss += e * e;
    }
    fit.rms_residual = std::sqrt(rss / n);
    fit.n_points = n;
    return fit;
}
} // namespace detail

/// Exponential decay fit of one norm column over a time window: slope of
/// log norm against t.
inline DecayFit fit_decay(const Trajectory& traj, int norm_col, double t_lo, double t_hi) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        if (t < t_lo || t > t_hi) continue;
        const double v = traj.norms(static_cast<Eigen::Index>(i), norm_col);
        if (v <= 0.0) throw DataError("fit_decay: nonpositive norm inside the fit window");
        xs.push_back(t);
        ys.push_back(std::log(v));
    }
    if (xs.size() < 8) throw DataError("fit_decay: need at least 8 samples in the window");
    DecayFit fit = detail::linear_fit(xs, ys);
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    return fit;
}

/// Default tail window: drop the initial 20% of the time range.
inline std::pair<double, double> tail_window(const Trajectory& traj) {
    const double t0 = traj.times.front(), t1 = traj.times.back();
    return {t0 + 0.2 * (t1 - t0), t1};
}

/// Power-law fit of a positive quantity q(t): slope of log q against log t.
/// Refuses windows spanning less than one decade in t.
inline DecayFit fit_power(const std::vector<double>& ts, const std::vector<double>& qs,
                          double t_lo, double t_hi) {
    if (t_hi < 10.0 * t_lo) throw DataError("fit_power: window shorter than one decade");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] < t_lo || ts[i] > t_hi || ts[i] <= 0.0) continue;
        if (qs[i] <= 0.0) throw DataError("fit_power: nonpositive data inside the fit window");
        xs.push_back(std::log(ts[i]));
        ys.push_back(std::log(qs[i]));
    }
    if (xs.size() < 8) throw DataError("fit_power: need at least 8 samples in the window");
    DecayFit fit = detail::linear_fit(xs, ys);
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    return fit;
}

} // namespace hypolab
