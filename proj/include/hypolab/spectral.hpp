#pragma once

#include <algorithm>
#include <complex>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"
#include "hypolab/models.hpp"

namespace hypolab {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

struct EigenPair {
    Complex value;
    ComplexVector vector;
    double residual = 0.0; // ||Op x - lambda x|| / ||x||
};

enum class EigMethod { Dense, ShiftInvertArnoldi };

namespace detail {

inline bool re_desc(const EigenPair& a, const EigenPair& b) {
    if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
    return a.value.imag() > b.value.imag();
}

inline std::vector<EigenPair> dense_eigenpairs(const Eigen::MatrixXd& M) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw SolverError("dense eigensolver failed to converge");
    std::vector<EigenPair> out;
    out.reserve(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        EigenPair p;
        p.value = es.eigenvalues()[i];
        p.vector = es.eigenvectors().col(i);
        p.residual = (M * p.vector - p.value * p.vector).norm() / p.vector.norm();
        out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(), re_desc);
    return out;
}

} // namespace detail

/// Rightmost `count` eigenpairs of a sparse operator by shift-invert Arnoldi
/// around `sigma` (real shift, real arithmetic; complex Ritz pairs emerge from
/// the Hessenberg eigenproblem). Residuals are checked on the original matrix.
inline std::vector<EigenPair> shift_invert_arnoldi(const SparseMatrix& Op, int count,
                                                   double sigma = 0.05, int subspace = 0,
                                                   double tol = 1e-8) {
    const Eigen::Index n = Op.rows();
    SparseMatrix I(n, n);
    I.setIdentity();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(SparseMatrix(Op - sigma * I));
    if (lu.info() != Eigen::Success)
        throw SolverError("shift_invert_arnoldi: factorisation of (Op - sigma I) failed; move sigma");

    int m = subspace > 0 ? subspace : std::max(2 * count + 20, 40);
    std::vector<double> residual_history;
    for (int attempt = 0; attempt < 3; ++attempt, m *= 2) {
        m = static_cast<int>(std::min<Eigen::Index>(m, n));
        Eigen::MatrixXd V(n, m + 1);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
        Vector v0 = Vector::Ones(n);
        for (Eigen::Index i = 0; i < n; ++i) v0[i] += 1e-3 * std::sin(7.0 * double(i + 1));
        V.col(0) = v0 / v0.norm();
        int k = m;
        for (int j = 0; j < m; ++j) {
            Vector w = lu.solve(V.col(j));
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(w);
                w -= H(i, j) * V.col(i);
            }
            for (int i = 0; i <= j; ++i) { // re-orthogonalise
                const double c = V.col(i).dot(w);
                H(i, j) += c;
                w -= c * V.col(i);
            }
            H(j + 1, j) = w.norm();
            if (H(j + 1, j) < 1e-12) {
                k = j + 1;
                break;
            }
            V.col(j + 1) = w / H(j + 1, j);
        }
        Eigen::EigenSolver<Eigen::MatrixXd> hes(H.topLeftCorner(k, k));
        if (hes.info() != Eigen::Success) continue;
        std::vector<EigenPair> cands;
        for (Eigen::Index i = 0; i < k; ++i) {
            const Complex theta = hes.eigenvalues()[i];
            if (std::abs(theta) < 1e-14) continue;
            EigenPair p;
            p.value = sigma + 1.0 / theta;
            p.vector = V.leftCols(k).cast<Complex>() * hes.eigenvectors().col(i);
            p.vector /= p.vector.norm();
            ComplexVector r = Op.cast<Complex>() * p.vector - p.value * p.vector;
            p.residual = r.norm();
            cands.push_back(std::move(p));
        }
        std::sort(cands.begin(), cands.end(), detail::re_desc);
        std::vector<EigenPair> conv;
        for (auto& c : cands) {
            if (c.residual < tol) conv.push_back(std::move(c));
            else residual_history.push_back(c.residual);
            if (static_cast<int>(conv.size()) == count) break;
        }
        if (static_cast<int>(conv.size()) == count) return conv;
    }
    std::ostringstream os;
    os << "shift_invert_arnoldi: failed to converge " << count << " pairs; residuals:";
    for (double r : residual_history) os << " " << r;
    throw SolverError(os.str());
}

/// Rightmost `count` eigenpairs. Dense path requires <= 4000 unknowns.
inline std::vector<EigenPair> spectrum(const SparseMatrix& Op, int count,
                                       EigMethod method = EigMethod::Dense, double sigma = 0.05) {
    if (count < 1 || count > Op.rows()) throw ParameterError("spectrum: bad count");
    if (method == EigMethod::Dense) {
        if (Op.rows() > 4000)
            throw CapabilityError("spectrum: dense path limited to 4000 unknowns; use shift-invert");
        auto all = detail::dense_eigenpairs(Eigen::MatrixXd(Op));
        all.resize(static_cast<std::size_t>(count));
        return all;
    }
    return shift_invert_arnoldi(Op, count, sigma);
}

/// Spectral gap convention: -max{Re lambda : |lambda| > 1e-6} among the
/// computed pairs; the conservative zero mode is recognised by its mass.
struct GapReport {
    double gap = 0.0;
    Complex zero_mode{0, 0};
    bool zero_mode_found = false;
    double zero_mode_mass = 0.0;
};

inline GapReport spectral_gap(const Grid& g, const std::vector<EigenPair>& pairs) {
    GapReport rep;
    double best = kNegInf;
    for (const auto& p : pairs) {
        if (std::abs(p.value) <= 1e-6) {
            Vector re = p.vector.real();
            const double nrm = re.lpNorm<1>() * g.cell_volume();
            const double m = std::abs(g.integrate(re));
            rep.zero_mode_found = true;
            rep.zero_mode = p.value;
            rep.zero_mode_mass = nrm > 0 ? m / nrm : 0.0;
            continue;
        }
        best = std::max(best, p.value.real());
    }
    rep.gap = -best;
    return rep;
}

/// Contour-integral spectral projector onto the cluster inside
/// |z - xi| = r', normalised so that the diagonal oracle gives the coordinate
/// projector. Idempotence is polished by Newton-Schulz when the raw residual
/// falls in (1e-8, 1e-4).
inline Eigen::MatrixXd spectral_projector(const Eigen::MatrixXd& Op, Complex xi, double rp,
                                          int nodes = 64) {
    auto eigs = detail::dense_eigenpairs(Op);
    double min_dist = kInf;
    for (const auto& e : eigs) min_dist = std::min(min_dist, std::abs(std::abs(e.value - xi) - rp));
    if (min_dist < rp / 10.0) {
        std::ostringstream os;
        os << "spectral_projector: contour |z - (" << xi.real() << "," << xi.imag() << ")| = " << rp
           << " passes within " << min_dist << " of the spectrum";
        throw ContourError(os.str());
    }

    const Eigen::Index n = Op.rows();
    ComplexMatrix acc = ComplexMatrix::Zero(n, n);
    for (int j = 0; j < nodes; ++j) {
        const double th = 2.0 * M_PI * (j + 0.5) / nodes;
        const Complex z = xi + rp * std::exp(Complex(0, th));
        ComplexMatrix R = (z * ComplexMatrix::Identity(n, n) - Op.cast<Complex>())
                              .partialPivLu()
                              .solve(ComplexMatrix::Identity(n, n));
        acc += rp * std::exp(Complex(0, th)) * R;
    }
    acc /= double(nodes);
    Eigen::MatrixXd P = acc.real();

    double res = (P * P - P).norm();
    if (res > 1e-8 && res < 1e-4) {
        for (int it = 0; it < 40; ++it) {
            Eigen::MatrixXd P2 = 3.0 * P * P - 2.0 * P * P * P;
            const double r2 = (P2 * P2 - P2).norm();
            if (r2 >= res) break;
            P = P2;
            res = r2;
        }
    }
    return P;
}

/// Residuals of the resolvent factorisation identities between the splittings
/// on the small space E (weight wE) and the large space (weight wCal):
///   R_L(z)   = sum_{l<n} (-1)^l R_B(z) (A R_B(z))^l + (-1)^n R_E(z) (A R_B(z))^n
/// and the dual composition order. The identity is algebraic; weights enter
/// the reported operator norms only.
struct FactorizationReport {
    std::vector<Complex> z_samples;
    std::vector<double> enlarge_residual; // per z, weighted norm on the large space
    std::vector<double> reduce_residual;  // per z, weighted norm on E
    double max_enlarge = 0.0;
    double max_reduce = 0.0;
};

inline FactorizationReport verify_factorization(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A,
                                                const Eigen::MatrixXd& B, const Vector& wE,
                                                const Vector& wCal,
                                                const std::vector<Complex>& zs, int n) {
    if (((L - A - B).norm()) > 1e-10 * (1.0 + L.norm()))
        throw UsageError("verify_factorization: L != A + B");
    if (n < 0) throw ParameterError("verify_factorization: n >= 0 required");
    auto eigs = detail::dense_eigenpairs(L);
    auto eigsB = detail::dense_eigenpairs(B);
    const Eigen::Index nn = L.rows();
    const ComplexMatrix Id = ComplexMatrix::Identity(nn, nn);
    const ComplexMatrix Ac = A.cast<Complex>();

    auto weighted_norm = [&](const ComplexMatrix& X, const Vector& w) {
        ComplexMatrix Y = w.cast<Complex>().asDiagonal() * X *
                          w.cwiseInverse().cast<Complex>().asDiagonal();
        return Y.jacobiSvd().singularValues()(0);
    };

    FactorizationReport rep;
    rep.z_samples = zs;
    for (const Complex& z : zs) {
        double dmin = kInf;
        for (const auto& e : eigs) dmin = std::min(dmin, std::abs(e.value - z));
        for (const auto& e : eigsB) dmin = std::min(dmin, std::abs(e.value - z));
        if (dmin < 1e-3)
            throw ConditioningError("verify_factorization: z sample within 1e-3 of the spectrum");

        ComplexMatrix RL = (L.cast<Complex>() - z * Id).partialPivLu().solve(Id);
        ComplexMatrix RB = (B.cast<Complex>() - z * Id).partialPivLu().solve(Id);
        ComplexMatrix ARB = Ac * RB;
        ComplexMatrix RBA = RB * Ac;

        // enlargement: R on the large space reconstructed from R on E
        ComplexMatrix sum = ComplexMatrix::Zero(nn, nn);
        ComplexMatrix pw = Id;
        double sgn = 1.0;
        for (int l = 0; l < n; ++l) {
            sum += sgn * RB * pw;
            pw = ARB * pw;
            sgn = -sgn;
        }
        sum += sgn * RL * pw; // (A R_B)^n with alternating sign (-1)^n
        const double r_enl = weighted_norm(RL - sum, wCal);

        // reduction: R on E reconstructed from R on the large space
        ComplexMatrix sum2 = ComplexMatrix::Zero(nn, nn);
        ComplexMatrix pw2 = Id;
        sgn = 1.0;
        for (int l = 0; l < n; ++l) {
            sum2 += sgn * pw2 * RB;
            pw2 = pw2 * RBA;
            sgn = -sgn;
        }
        sum2 += sgn * pw2 * RL;
        const double r_red = weighted_norm(RL - sum2, wE);

        rep.enlarge_residual.push_back(r_enl);
        rep.reduce_residual.push_back(r_red);
        rep.max_enlarge = std::max(rep.max_enlarge, r_enl);
        rep.max_reduce = std::max(rep.max_reduce, r_red);
    }
    return rep;
}

/// Principal angles between the rightmost eigenspaces of an operator computed
/// in two weighted representations, mapped back to the unweighted variables.
struct TransferReport {
    double max_principal_angle = 0.0;
    bool multiplicity_warning = false;
    int cluster_size = 1;
};

inline TransferReport eigenspace_transfer(const DiscreteOperator& op, const WeightSpec& w1,
                                          const WeightSpec& w2, int which = 0,
                                          double cluster_tol = 1e-6) {
    if (op.grid.size() > 4000)
        throw CapabilityError("eigenspace_transfer: dense path limited to 4000 unknowns");
    Vector m1 = w1.on_grid(op.grid), m2 = w2.on_grid(op.grid);
    auto rep1 = detail::dense_eigenpairs(
        Eigen::MatrixXd(m1.asDiagonal() * Eigen::MatrixXd(op.L) * m1.cwiseInverse().asDiagonal()));
    auto rep2 = detail::dense_eigenpairs(
        Eigen::MatrixXd(m2.asDiagonal() * Eigen::MatrixXd(op.L) * m2.cwiseInverse().asDiagonal()));

    TransferReport rep;
    // cluster of eigenvalues matching the `which`-th rightmost value
    const Complex target = rep1[static_cast<std::size_t>(which)].value;
    auto gather = [&](const std::vector<EigenPair>& pairs, const Vector& m) {
        std::vector<ComplexVector> cols;
        for (const auto& p : pairs)
            if (std::abs(p.value - target) < std::max(cluster_tol, 1e-9 * std::abs(target))) {
                ComplexVector v = m.cwiseInverse().cast<Complex>().asDiagonal() * p.vector;
                cols.push_back(v / v.norm());
            }
        ComplexMatrix Q(op.grid.size(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) Q.col(static_cast<Eigen::Index>(c)) = cols[c];
        // orthonormalise
        Eigen::HouseholderQR<ComplexMatrix> qr(Q);
        return ComplexMatrix(qr.householderQ() * ComplexMatrix::Identity(Q.rows(), Q.cols()));
    };
    ComplexMatrix Q1 = gather(rep1, m1);
    ComplexMatrix Q2 = gather(rep2, m2);
    rep.cluster_size = static_cast<int>(std::min(Q1.cols(), Q2.cols()));
    rep.multiplicity_warning = Q1.cols() != 1 || Q2.cols() != 1;
    const Eigen::Index k = std::min(Q1.cols(), Q2.cols());
    ComplexMatrix M = Q1.leftCols(k).adjoint() * Q2.leftCols(k);
    Eigen::JacobiSVD<ComplexMatrix> svd(M);
    const double smin = std::min(1.0, svd.singularValues().minCoeff());
    rep.max_principal_angle = std::acos(smin);
    return rep;
}

} // namespace hypolab
