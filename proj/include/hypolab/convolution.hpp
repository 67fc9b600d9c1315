#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "hypolab/errors.hpp"
#include "hypolab/models.hpp"

namespace hypolab {

using Matrix = Eigen::MatrixXd;

/// An operator-valued function of time sampled on a uniform ladder
/// t_k = k dt, k = 0..n.
struct OperatorFamily {
    double dt = 0.0;
    std::vector<Matrix> S;

    int steps() const { return static_cast<int>(S.size()) - 1; }
    double t_end() const { return dt * steps(); }
};

/// Samples of e^{t G} on a uniform ladder (dense scaling-and-squaring per step).
inline OperatorFamily sample_semigroup(const Matrix& G, double dt, int n_steps) {
    OperatorFamily fam;
    fam.dt = dt;
    fam.S.reserve(static_cast<std::size_t>(n_steps) + 1);
    const Matrix E = (dt * G).exp();
    Matrix S = Matrix::Identity(G.rows(), G.cols());
    fam.S.push_back(S);
    for (int k = 1; k <= n_steps; ++k) {
        S = E * S;
        fam.S.push_back(S);
    }
    return fam;
}

inline OperatorFamily left_multiply(const Matrix& A, const OperatorFamily& fam) {
    OperatorFamily out;
    out.dt = fam.dt;
    out.S.reserve(fam.S.size());
    for (const auto& S : fam.S) out.S.push_back(A * S);
    return out;
}

inline OperatorFamily right_multiply(const OperatorFamily& fam, const Matrix& A) {
    OperatorFamily out;
    out.dt = fam.dt;
    out.S.reserve(fam.S.size());
    for (const auto& S : fam.S) out.S.push_back(S * A);
    return out;
}

namespace detail {

/// Composite Newton-Cotes weights for k uniform intervals: Simpson throughout
/// when k is even, Simpson + 3/8 tail when k is odd (both fourth order);
/// trapezoid only at k = 1.
inline std::vector<double> quadrature_weights(int k, double dt) {
    std::vector<double> w(static_cast<std::size_t>(k) + 1, 0.0);
    if (k == 0) return w;
    if (k == 1) {
        w[0] = w[1] = 0.5 * dt;
        return w;
    }
    int simpson_end = k;      // Simpson covers [0, simpson_end]
    if (k % 2 == 1) {
        if (k == 3) simpson_end = 0;
        else simpson_end = k - 3;
    }
    for (int j = 0; j < simpson_end; j += 2) {
        w[static_cast<std::size_t>(j)] += dt / 3.0;
        w[static_cast<std::size_t>(j) + 1] += 4.0 * dt / 3.0;
        w[static_cast<std::size_t>(j) + 2] += dt / 3.0;
    }
    if (k % 2 == 1) {
        const double c = 3.0 * dt / 8.0;
        w[static_cast<std::size_t>(simpson_end)] += c;
        w[static_cast<std::size_t>(simpson_end) + 1] += 3.0 * c;
        w[static_cast<std::size_t>(simpson_end) + 2] += 3.0 * c;
        w[static_cast<std::size_t>(simpson_end) + 3] += c;
    }
    return w;
}

inline void check_common_ladder(const OperatorFamily& a, const OperatorFamily& b) {
    if (a.S.empty() || b.S.empty()) throw UsageError("convolve: empty operator family");
    if (std::abs(a.dt - b.dt) > 1e-15 * std::max(a.dt, b.dt) || a.S.size() != b.S.size())
        throw UsageError("convolve: operator families sampled on mismatched ladders");
}

} // namespace detail

/// (S2 * S1)(t_k) = int_0^{t_k} S2(s) S1(t_k - s) ds by composite quadrature.
inline Matrix convolve_at(const OperatorFamily& S2, const OperatorFamily& S1, int k) {
    detail::check_common_ladder(S2, S1);
    if (k < 0 || k > S2.steps()) throw UsageError("convolve: index outside the sampled ladder");
    const auto w = detail::quadrature_weights(k, S2.dt);
    Matrix acc = Matrix::Zero(S2.S[0].rows(), S1.S[0].cols());
    for (int j = 0; j <= k; ++j)
        if (w[static_cast<std::size_t>(j)] != 0.0)
            acc += w[static_cast<std::size_t>(j)] *
                   (S2.S[static_cast<std::size_t>(j)] * S1.S[static_cast<std::size_t>(k - j)]);
    return acc;
}

/// Convolution of two families on their whole common ladder.
inline OperatorFamily convolve(const OperatorFamily& S2, const OperatorFamily& S1) {
    detail::check_common_ladder(S2, S1);
    OperatorFamily out;
    out.dt = S2.dt;
    out.S.reserve(S2.S.size());
    for (int k = 0; k <= S2.steps(); ++k) out.S.push_back(convolve_at(S2, S1, k));
    return out;
}

/// Iterated convolution S^{(*n)}: S^{(*1)} = S, S^{(*l)} = S * S^{(*(l-1))}.
inline OperatorFamily iterated_convolution(const OperatorFamily& S, int n) {
    if (n < 1) throw UsageError("iterated convolution needs n >= 1");
    OperatorFamily out = S;
    for (int l = 2; l <= n; ++l) out = convolve(S, out);
    return out;
}

struct IteratedSplitResult {
    Matrix a_sb; // (A S_B)^{(*n)}(t)
    Matrix sb_a; // (S_B A)^{(*n)}(t)
};

/// (A S_B)^{(*n)}(t) and (S_B A)^{(*n)}(t) for the splitting of a (dense-able)
/// discrete operator. The quadrature ladder is refined until the two finest
/// levels agree to rel_tol, otherwise a resolution error is raised.
inline IteratedSplitResult iterated_AS_B(const DiscreteOperator& op, int n, double t,
                                         int nodes = 256, double rel_tol = 1e-6) {
    if (n < 1) throw UsageError("iterated_AS_B: n >= 1 required");
    if (op.grid.size() > 2000)
        throw CapabilityError("iterated_AS_B: dense families limited to 2000 unknowns");
    const Matrix A = Matrix(op.A);
    const Matrix B = Matrix(op.B);

    auto eval = [&](int nn) {
        const double dt = t / nn;
        OperatorFamily SB = sample_semigroup(B, dt, nn);
        IteratedSplitResult r;
        r.a_sb = iterated_convolution(left_multiply(A, SB), n).S.back();
        r.sb_a = iterated_convolution(right_multiply(SB, A), n).S.back();
        return r;
    };
    if (t == 0.0) { // zero-length integrals for n >= 2; pointwise value A S_B(0) = A at n = 1
        IteratedSplitResult r;
        r.a_sb = n == 1 ? A : Matrix::Zero(A.rows(), A.cols());
        r.sb_a = r.a_sb;
        return r;
    }
    IteratedSplitResult coarse = eval(nodes / 2);
    IteratedSplitResult fine = eval(nodes);
    const double scale = fine.a_sb.norm() + fine.sb_a.norm() + 1e-300;
    const double err = ((coarse.a_sb - fine.a_sb).norm() + (coarse.sb_a - fine.sb_a).norm()) / scale;
    if (err > rel_tol)
        throw ResolutionError("iterated_AS_B: quadrature ladder too coarse (estimated error " +
                              std::to_string(err) + ")");
    return fine;
}

struct DuhamelResult {
    Matrix reconstruction;
    double residual = 0.0; // operator 2-norm of reconstruction - e^{tL}
};

/// Reconstruct S_L(t) from the iterated Duhamel expansion
///   S_L = sum_{l<n} S_B * (A S_B)^{(*l)}  +  S_L * (A S_B)^{(*n)}.
/// Under the resolvent convention R(xi) = (Lambda - xi)^{-1} the alternating
/// signs of the resolvent factorisation cancel at semigroup level, so the
/// expansion is sign-free (fixed against the dense matrix-exponential oracle).
inline DuhamelResult duhamel_reconstruct(const DiscreteOperator& op, int n, double t,
                                         int nodes = 1000) {
    if (n < 1) throw UsageError("duhamel_reconstruct: n >= 1 required");
    if (op.grid.size() > 2000)
        throw CapabilityError("duhamel_reconstruct: dense families limited to 2000 unknowns");
    const Matrix A = Matrix(op.A);
    const Matrix B = Matrix(op.B);
    const Matrix L = Matrix(op.L);

    DuhamelResult out;
    const Matrix SL_t = (t * L).exp();
    if (t == 0.0) {
        out.reconstruction = Matrix::Identity(L.rows(), L.cols());
        out.residual = 0.0;
        return out;
    }
    const double dt = t / nodes;
    OperatorFamily SB = sample_semigroup(B, dt, nodes);
    OperatorFamily SL = sample_semigroup(L, dt, nodes);
    OperatorFamily ASB = left_multiply(A, SB);

    Matrix recon = SB.S.back(); // l = 0 term
    OperatorFamily power = ASB; // (A S_B)^{(*1)}
    for (int l = 1; l < n; ++l) {
        recon += convolve_at(SB, power, nodes);
        power = convolve(ASB, power); // now (A S_B)^{(*(l+1))}
    }
    recon += convolve_at(SL, power, nodes); // remainder through (A S_B)^{(*n)}

    out.reconstruction = recon;
    Matrix diff = recon - SL_t;
    out.residual = diff.jacobiSvd().singularValues()(0);
    return out;
}

} // namespace hypolab
