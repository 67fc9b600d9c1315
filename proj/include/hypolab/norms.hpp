#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "hypolab/dual_ball.hpp"
#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"
#include "hypolab/weights.hpp"

namespace hypolab {

enum class Space { Lp, W1p, Wm1p, Finf, FinfDual };

inline std::string to_string(Space s) {
    switch (s) {
        case Space::Lp: return "Lp";
        case Space::W1p: return "W1p";
        case Space::Wm1p: return "Wm1p";
        case Space::Finf: return "Finf";
        case Space::FinfDual: return "FinfDual";
    }
    return "?";
}

/// A weighted norm on grid functions. p = inf is encoded by
/// std::numeric_limits<double>::infinity().
struct NormSpec {
    Space space = Space::Lp;
    double p = 2.0;
    WeightSpec weight{};
    double zeta = 1.0; // velocity-derivative tilt in W^{1,p} and F_inf

    std::string column_name() const {
        std::string ps = std::isinf(p) ? "inf" : [this] {
            std::string t = std::to_string(p);
            t.erase(t.find_last_not_of('0') + 1);
            if (!t.empty() && t.back() == '.') t.pop_back();
            return t;
        }();
        return "norm_" + to_string(space) + "_" + ps + "_" + to_string(weight.family);
    }
};

/// Forward-difference edge matrix along axis k (used in the W^{1,2} Gram).
inline SparseMatrix derivative_matrix(const Grid& g, int k) {
    const auto& ax = g.axis(k);
    const double h = ax.h();
    std::vector<Triplet> trips;
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        auto mi = g.unravel(i);
        if (!ax.periodic && mi[k] == ax.n - 1) continue;
        auto mj = mi;
        mj[k] = (mi[k] + 1) % ax.n;
        trips.emplace_back(row, g.ravel(mj), 1.0 / h);
        trips.emplace_back(row, i, -1.0 / h);
        ++row;
    }
    SparseMatrix D(row, g.size());
    D.setFromTriplets(trips.begin(), trips.end());
    return D;
}

/// Caches grid-level state (weights, Sobolev Gram factorisation, dual-ball
/// problems) so trajectory post-processing can evaluate many norms cheaply.
class NormEvaluator {
public:
    NormEvaluator(const Grid& grid, NormSpec spec) : grid_(grid), spec_(std::move(spec)) {
        // F_inf and its dual carry the <v> growth in the test-function ball,
        // not as a multiplier on the data
        if (spec_.space != Space::Finf && spec_.space != Space::FinfDual)
            m_ = spec_.weight.on_grid(grid_);
        else m_ = Vector::Ones(grid_.size());
        q_ = grid_.cell_volume();
        switch (spec_.space) {
            case Space::Lp:
            case Space::Finf:
                break;
            case Space::W1p:
                build_derivatives();
                break;
            case Space::Wm1p:
                if (spec_.p == 2.0) build_sobolev_gram();
                else if (spec_.p == 1.0 || std::isinf(spec_.p)) build_dual_ball();
                else
                    throw CapabilityError(
                        "W^{-1,p}(m) supported for p in {1, 2, inf} only");
                break;
            case Space::FinfDual: // p plays no role in the F_inf dual ball
                build_dual_ball();
                break;
        }
    }

    const NormSpec& spec() const { return spec_; }
    const Grid& grid() const { return grid_; }

    double operator()(const Vector& f) const {
        switch (spec_.space) {
            case Space::Lp: return lp(f.cwiseProduct(m_), spec_.p, 1.0);
            case Space::W1p: return w1p(f);
            case Space::Wm1p:
                if (spec_.p == 2.0) return wm12(f);
                return dual_ball(f);
            case Space::Finf: return finf(f);
            case Space::FinfDual: return dual_ball(f);
        }
        return 0.0;
    }

    /// Optimal W^{1,2} test function of the dual pairing (p = 2 only).
    Vector wm12_optimizer(const Vector& f) const {
        Vector rhs = q_ * f.cwiseProduct(m_);
        Vector phi = gram_solver_->solve(rhs);
        const double nn = std::sqrt(phi.dot(gram_ * phi));
        if (nn == 0.0) return phi;
        return phi / nn;
    }

    /// ||phi||_{W^{1,2}} (unweighted), the test-function norm of the dual pairing.
    double sobolev_test_norm(const Vector& phi) const {
        return std::sqrt(phi.dot(gram_ * phi));
    }

    /// Full certified result of the dual-ball solve (lower/upper bounds).
    DualBallResult dual_ball_result(const Vector& f) const { return solve_ball(f); }

private:
    double lp(const Vector& g, double p, double scale) const {
        if (std::isinf(p)) return g.cwiseAbs().maxCoeff() * scale;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i) acc += std::pow(std::abs(g[i]), p);
        return std::pow(q_ * acc * scale, 1.0 / p);
    }

    void build_derivatives() {
        for (int k = 0; k < grid_.n_axes(); ++k) d_.push_back(k);
    }

    double w1p(const Vector& f) const {
        const double p = spec_.p;
        Vector mf = f.cwiseProduct(m_);
        if (std::isinf(p)) {
            double v = mf.cwiseAbs().maxCoeff();
            for (int k : d_) {
                const double t = m_.cwiseProduct(grid_derivative(grid_, f, k)).cwiseAbs().maxCoeff();
                v = std::max(v, (k >= grid_.n_x_axes() ? spec_.zeta : 1.0) * t);
            }
            return v;
        }
        double acc = std::pow(lp(mf, p, 1.0), p);
        for (int k : d_) {
            Vector g = m_.cwiseProduct(grid_derivative(grid_, f, k));
            acc += (k >= grid_.n_x_axes() ? spec_.zeta : 1.0) * std::pow(lp(g, p, 1.0), p);
        }
        return std::pow(acc, 1.0 / p);
    }

    void build_sobolev_gram() {
        const Eigen::Index n = grid_.size();
        SparseMatrix K(n, n);
        SparseMatrix I(n, n);
        I.setIdentity();
        K = q_ * I;
        for (int k = 0; k < grid_.n_axes(); ++k) {
            SparseMatrix D = derivative_matrix(grid_, k);
            K = K + q_ * SparseMatrix(D.transpose() * D);
        }
        gram_ = K;
        gram_solver_ = std::make_unique<Eigen::SimplicialLLT<SparseMatrix>>(gram_);
        if (gram_solver_->info() != Eigen::Success)
            throw SolverError("W^{-1,2} Gram factorisation failed");
    }

    double wm12(const Vector& f) const {
        Vector rhs = q_ * f.cwiseProduct(m_);
        Vector phi = gram_solver_->solve(rhs);
        const double val2 = rhs.dot(phi);
        return std::sqrt(std::max(0.0, val2));
    }

    void build_dual_ball() {
        Vector bound(grid_.size());
        std::vector<double> slopes(static_cast<std::size_t>(grid_.n_axes()), 1.0);
        if (spec_.space == Space::FinfDual) {
            for (Eigen::Index i = 0; i < grid_.size(); ++i)
                bound[i] = bracket(grid_.point(i).vnorm2());
            for (int k = grid_.n_x_axes(); k < grid_.n_axes(); ++k)
                slopes[static_cast<std::size_t>(k)] = 1.0 / spec_.zeta;
            ball_ = make_gradient_ball(grid_, bound, slopes, BallKind::Box);
            candidates_.push_back(bound); // psi = <v>, feasible when zeta <= 1
        } else if (spec_.p == 1.0) { // test ball ||phi||_{W^{1,inf}} <= 1
            bound.setOnes();
            ball_ = make_gradient_ball(grid_, bound, slopes, BallKind::Box);
            candidates_.push_back(bound);
        } else { // p = inf: test ball ||phi||_{W^{1,1}} <= 1
            bound.setOnes();
            ball_ = make_gradient_ball(grid_, bound, slopes, BallKind::L1);
        }
    }

    DualBallResult solve_ball(const Vector& f) const {
        Vector a = q_ * f.cwiseProduct(m_);
        std::vector<Vector> cands = candidates_;
        cands.push_back(f); // the data itself, rescaled to feasibility
        return dual_ball_norm(ball_, a, 1e-6, 40000, &cands);
    }

    double dual_ball(const Vector& f) const { return solve_ball(f).lower; }

    double finf(const Vector& f) const {
        Vector invb(grid_.size());
        for (Eigen::Index i = 0; i < grid_.size(); ++i)
            invb[i] = 1.0 / bracket(grid_.point(i).vnorm2());
        double v = f.cwiseProduct(invb).cwiseAbs().maxCoeff();
        for (int k = 0; k < grid_.n_axes(); ++k) {
            const double t = grid_derivative(grid_, f, k).cwiseAbs().maxCoeff();
            v = std::max(v, (k >= grid_.n_x_axes() ? spec_.zeta : 1.0) * t);
        }
        return v;
    }

    Grid grid_;
    NormSpec spec_;
    Vector m_;
    double q_ = 1.0;
    std::vector<int> d_;
    SparseMatrix gram_;
    std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix>> gram_solver_;
    DualBallProblem ball_;
    std::vector<Vector> candidates_;
};

/// One-shot norm evaluation (builds the evaluator; use NormEvaluator for loops).
inline double norm(const Grid& g, const Vector& f, const NormSpec& spec) {
    if (f.size() != g.size()) throw UsageError("norm: grid function has wrong size");
    return NormEvaluator(g, spec)(f);
}

} // namespace hypolab
