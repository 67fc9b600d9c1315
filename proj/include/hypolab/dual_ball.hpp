#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"

namespace hypolab {

/// Dual-norm evaluation sup { <a, psi> : K psi in C } where C is either a box
/// prod [-c_r, c_r] (flat-metric / (F_inf)' / W^{-1,1} balls) or the l1 ball
/// ||u||_1 <= 1 (W^{-1,inf}). Solved by a primal-dual hybrid gradient scheme;
/// both a feasible primal value (lower bound) and a dual certificate (upper
/// bound) are returned, so callers can assert inequalities rigorously.
struct DualBallResult {
    double lower = 0.0;   // certified value of a feasible test function
    double upper = 0.0;   // dual certificate
    int iterations = 0;
    Vector maximizer;     // feasible psi achieving `lower`
    double gap() const { return upper - lower; }
};

enum class BallKind { Box, L1 };

struct DualBallProblem {
    SparseMatrix K;           // constraint map (box rows scaled so bounds = c)
    Vector c;                 // box half-widths per row (Box) — unused for L1
    Vector box_bound_on_psi;  // |psi_i| <= this (used for feasibility scaling);
                              // zero entries mean "unbounded" (L1 case)
    BallKind kind = BallKind::Box;
};

namespace detail {

inline double operator_norm_estimate(const SparseMatrix& K, int iters = 30) {
    Vector x = Vector::Ones(K.cols());
    x.normalize();
    double nrm = 1.0;
    for (int i = 0; i < iters; ++i) {
        Vector y = K * x;
        x = K.transpose() * y;
        nrm = std::sqrt(x.norm());
        if (nrm == 0.0) return 1.0;
        x /= x.norm();
    }
    return nrm;
}

inline void project_l1_ball(Vector& u, double radius) {
    const double a1 = u.cwiseAbs().sum();
    if (a1 <= radius) return;
    std::vector<double> mags(static_cast<std::size_t>(u.size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(u[i]);
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < mags.size(); ++j) {
        cum += mags[j];
        const double t = (cum - radius) / static_cast<double>(j + 1);
        if (j + 1 == mags.size() || mags[j + 1] <= t) {
            theta = t;
            break;
        }
    }
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double m = std::abs(u[i]) - theta;
        u[i] = m > 0.0 ? (u[i] > 0 ? m : -m) : 0.0;
    }
}

} // namespace detail

/// Feasibility scale of psi: the largest t with psi/t feasible (t >= 1 means
/// psi already feasible). Returns +inf for psi = 0.
inline double feasibility_scale(const DualBallProblem& prob, const Vector& psi) {
    Vector u = prob.K * psi;
    if (prob.kind == BallKind::L1) {
        const double s = u.cwiseAbs().sum();
        return s > 0 ? s : 0.0;
    }
    double t = 0.0;
    for (Eigen::Index r = 0; r < u.size(); ++r)
        if (prob.c[r] > 0) t = std::max(t, std::abs(u[r]) / prob.c[r]);
    return t;
}

inline double certified_value(const DualBallProblem& prob, const Vector& a, const Vector& psi) {
    const double t = feasibility_scale(prob, psi);
    if (t <= 0.0) return 0.0;
    return a.dot(psi) / std::max(t, 1e-300);
}

/// Upper bound from a dual vector y on the constraint rows: the first
/// block of K is assumed to be the identity-like rows bounding psi itself
/// (Box case) or the mass rows (L1 case), which lets the equality K^T y = a be
/// repaired exactly through those rows.
inline double dual_certificate(const DualBallProblem& prob, const Vector& a, Vector y,
                               Eigen::Index n_psi_rows) {
    Vector resid = a - prob.K.transpose() * y;
    if (prob.kind == BallKind::Box) {
        // repair through the psi-bound rows: row i of the first block is
        // scale_i * psi_i with bound c_i
        for (Eigen::Index i = 0; i < n_psi_rows; ++i) {
            const double scale = prob.K.coeff(i, i);
            y[i] += resid[i] / scale;
        }
        resid = a - prob.K.transpose() * y;
        double val = 0.0;
        for (Eigen::Index r = 0; r < y.size(); ++r) val += prob.c[r] * std::abs(y[r]);
        // roundoff left after the exact repair is paid on the psi box
        for (Eigen::Index i = 0; i < n_psi_rows; ++i)
            val += std::abs(resid[i]) * prob.box_bound_on_psi[i];
        return val;
    }
    // L1 ball: sup <a,psi> <= ||y||_inf for K^T y = a (repair via mass rows)
    for (Eigen::Index i = 0; i < n_psi_rows; ++i) {
        const double scale = prob.K.coeff(i, i);
        y[i] += resid[i] / scale;
    }
    return y.cwiseAbs().maxCoeff();
}

inline DualBallResult dual_ball_norm(const DualBallProblem& prob, const Vector& a_in,
                                     double rel_tol = 1e-7, int max_iter = 60000,
                                     const std::vector<Vector>* candidates = nullptr) {
    DualBallResult res;
    const Eigen::Index n = prob.K.cols();
    res.maximizer = Vector::Zero(n);
    const double a_scale = a_in.cwiseAbs().maxCoeff();
    if (a_scale == 0.0) return res;
    Vector a = a_in / a_scale; // exact positive homogeneity of the result

    // diagonally preconditioned steps (box case); scalar steps for the l1 ball
    Vector tau(n), sigma(prob.K.rows());
    if (prob.kind == BallKind::Box) {
        Vector colsum = Vector::Zero(n), rowsum = Vector::Zero(prob.K.rows());
        for (int k = 0; k < prob.K.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(prob.K, k); it; ++it) {
                colsum[it.col()] += std::abs(it.value());
                rowsum[it.row()] += std::abs(it.value());
            }
        tau = colsum.cwiseMax(1e-12).cwiseInverse();
        sigma = rowsum.cwiseMax(1e-12).cwiseInverse();
    } else {
        const double Knorm = detail::operator_norm_estimate(prob.K) * 1.05;
        tau.setConstant(1.0 / Knorm);
        sigma.setConstant(1.0 / Knorm);
    }

    Vector psi = Vector::Zero(n), psi_bar = psi;
    Vector y = Vector::Zero(prob.K.rows());
    double best_lower = 0.0, best_upper = kInf;
    Vector best_psi = psi;

    if (candidates) {
        for (const auto& cand : *candidates) {
            const double v = certified_value(prob, a, cand);
            if (v > best_lower) {
                best_lower = v;
                best_psi = cand / std::max(feasibility_scale(prob, cand), 1e-300);
            }
        }
    }

    const int check_every = 100;
    for (int it = 1; it <= max_iter; ++it) {
        Vector z = y + sigma.cwiseProduct(prob.K * psi_bar);
        if (prob.kind == BallKind::Box) {
            for (Eigen::Index r = 0; r < z.size(); ++r) {
                const double pc = std::clamp(z[r] / sigma[r], -prob.c[r], prob.c[r]);
                y[r] = z[r] - sigma[r] * pc;
            }
        } else {
            Vector pc = z / sigma[0];
            detail::project_l1_ball(pc, 1.0);
            y = z - sigma[0] * pc;
        }
        Vector psi_new = psi - tau.cwiseProduct(prob.K.transpose() * y - a);
        psi_bar = 2.0 * psi_new - psi;
        psi = psi_new;

        if (it % check_every == 0 || it == max_iter) {
            const double lo = certified_value(prob, a, psi);
            if (lo > best_lower) {
                best_lower = lo;
                best_psi = psi / std::max(feasibility_scale(prob, psi), 1e-300);
            }
            const double up = dual_certificate(prob, a, y, n);
            best_upper = std::min(best_upper, up);
            res.iterations = it;
            if (best_upper - best_lower <= rel_tol * std::max(best_lower, 1e-300)) break;
        }
    }
    res.lower = best_lower * a_scale;
    res.upper = best_upper * a_scale;
    res.maximizer = best_psi;
    return res;
}

/// Assemble the flat-metric-type problem on a grid: |psi_i| <= bound_i,
/// |forward difference along axis k| <= slope_k. A nonpositive bound entry
/// marks the L1-ball variant (W^{-1,inf}), where the rows are instead
/// quadrature-scaled so the constraint reads ||(q psi, q D psi)||_1 <= 1.
inline DualBallProblem make_gradient_ball(const Grid& g, const Vector& psi_bound,
                                          const std::vector<double>& slope_bound,
                                          BallKind kind = BallKind::Box) {
    const Eigen::Index n = g.size();
    std::vector<Triplet> trips;
    std::vector<double> bounds;
    bounds.reserve(static_cast<std::size_t>(n) * 3);
    const double q = g.cell_volume();
    // psi rows first (identity block)
    for (Eigen::Index i = 0; i < n; ++i) {
        trips.emplace_back(i, i, kind == BallKind::Box ? 1.0 : q);
        bounds.push_back(kind == BallKind::Box ? psi_bound[i] : 1.0);
    }
    Eigen::Index row = n;
    for (int k = 0; k < g.n_axes(); ++k) {
        const auto& ax = g.axis(k);
        const double h = ax.h();
        const double rowscale = kind == BallKind::Box ? 1.0 / h : q / h;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto mi = g.unravel(i);
            if (!ax.periodic && mi[k] == ax.n - 1) continue;
            auto mj = mi;
            mj[k] = (mi[k] + 1) % ax.n;
            const Eigen::Index j = g.ravel(mj);
            trips.emplace_back(row, j, rowscale);
            trips.emplace_back(row, i, -rowscale);
            bounds.push_back(slope_bound[static_cast<std::size_t>(k)]);
            ++row;
        }
    }
    DualBallProblem prob;
    prob.K.resize(row, n);
    prob.K.setFromTriplets(trips.begin(), trips.end());
    prob.c = Eigen::Map<Vector>(bounds.data(), static_cast<Eigen::Index>(bounds.size()));
    prob.box_bound_on_psi = psi_bound;
    prob.kind = kind;
    return prob;
}

} // namespace hypolab
