#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hypolab/models.hpp"
#include "hypolab/spectral.hpp"

using namespace hypolab;

TEST_CASE("diagonal spectrum is recovered exactly") {
    SparseMatrix D(3, 3);
    D.insert(1, 1) = -1.0;
    D.insert(2, 2) = -2.0;
    D.makeCompressed();
    auto pairs = spectrum(D, 3, EigMethod::Dense);
    CHECK(std::abs(pairs[0].value - 0.0) < 1e-14);
    CHECK(std::abs(pairs[1].value - Complex(-1, 0)) < 1e-14);
    CHECK(std::abs(pairs[2].value - Complex(-2, 0)) < 1e-14);
}

TEST_CASE("harmonic homogeneous spectrum matches the Hermite ladder") {
    ModelSpec ms;
    ms.kind = ModelKind::HomogeneousFP;
    ms.gamma = 2.0;
    ms.nv = 512;
    ms.vmax = 8.0;
    DiscreteOperator op = assemble(ms);
    auto pairs = spectrum(op.L, 4, EigMethod::Dense);
    const double expected[4] = {0.0, -1.0, -2.0, -3.0};
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(pairs[static_cast<std::size_t>(i)].value.imag()) < 1e-8);
        if (i == 0)
            CHECK(std::abs(pairs[0].value.real()) < 1e-8);
        else
            CHECK(pairs[static_cast<std::size_t>(i)].value.real() ==
                  Catch::Approx(expected[i]).epsilon(0.02));
    }
}

TEST_CASE("shift-invert Arnoldi agrees with the dense solver on the torus") {
    ModelSpec ms;
    ms.kind = ModelKind::TorusKFP;
    ms.gamma = 2.0;
    ms.nx = 13;
    ms.nv = 24;
    ms.vmax = 6.0;
    DiscreteOperator op = assemble(ms);
    auto dense = spectrum(op.L, 4, EigMethod::Dense);
    auto arnoldi = spectrum(op.L, 4, EigMethod::ShiftInvertArnoldi, 0.05);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(arnoldi[i].residual < 1e-8);
        CHECK(std::abs(arnoldi[i].value - dense[i].value) < 1e-6);
    }

    GapReport gap = spectral_gap(op.grid, dense);
    CHECK(gap.zero_mode_found);
    CHECK(gap.zero_mode_mass > 0.99);
    CHECK(gap.gap > 0.0);
}

TEST_CASE("non-convergence is reported with residual history") {
    ModelSpec ms;
    ms.kind = ModelKind::TorusKFP;
    ms.gamma = 2.0;
    ms.nx = 13;
    ms.nv = 24;
    ms.vmax = 6.0;
    DiscreteOperator op = assemble(ms);
    CHECK_THROWS_AS(shift_invert_arnoldi(op.L, 6, 0.05, 8, 1e-15), SolverError);
}

TEST_CASE("contour projector on a diagonal matrix") {
    Eigen::MatrixXd D = Eigen::Vector3d(0.0, -1.0, -2.0).asDiagonal();
    Eigen::MatrixXd P = spectral_projector(D, Complex(0, 0), 0.5);
    Eigen::MatrixXd expected = Eigen::Vector3d(1.0, 0.0, 0.0).asDiagonal();
    CHECK((P - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projector on random nonnormal matrices with a separated cluster") {
    std::mt19937 rng(1234);
    std::normal_distribution<double> dist;
    const int n = 20;
    for (int trial = 0; trial < 4; ++trial) {
        Eigen::VectorXd d(n);
        d[0] = 0.5;
        d[1] = 0.3;
        for (int i = 2; i < n; ++i) d[i] = -1.0 - 0.45 * (i - 2);
        Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) V(i, j) += 0.25 * dist(rng) / std::sqrt(double(n));
        Eigen::MatrixXd A = V * d.asDiagonal() * V.inverse();

        Eigen::MatrixXd P = spectral_projector(A, Complex(0.4, 0), 0.45);
        CHECK((P * P - P).norm() < 1e-8);
        // oracle projector from the eigendecomposition
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
        E(0, 0) = E(1, 1) = 1.0;
        Eigen::MatrixXd Po = V * E * V.inverse();
        CHECK((P - Po).norm() < 1e-8);
        // commutation and rank
        CHECK((P * A - A * P).norm() < 1e-8 * A.norm());
        CHECK(std::abs(P.trace() - 2.0) < 1e-8);
    }
}

TEST_CASE("contour too close to the spectrum is rejected") {
    Eigen::MatrixXd D = Eigen::Vector3d(0.0, -0.5, -2.0).asDiagonal();
    CHECK_THROWS_AS(spectral_projector(D, Complex(0, 0), 0.51), ContourError);
}

TEST_CASE("zero-cluster projector of the torus model reproduces the equilibrium") {
    ModelSpec ms;
    ms.kind = ModelKind::TorusKFP;
    ms.gamma = 2.0;
    ms.nx = 13;
    ms.nv = 24;
    ms.vmax = 6.0;
    DiscreteOperator op = assemble(ms);
    Eigen::MatrixXd L(op.L);
    Eigen::MatrixXd P0 = spectral_projector(L, Complex(0, 0), 0.4);
    for (unsigned seed = 40; seed < 43; ++seed) {
        Vector f = testing::smooth_signed(op.grid, ms, seed) +
                   0.7 * testing::smooth_positive(op.grid, ms, seed + 100);
        Vector proj = P0 * f;
        Vector expect = mass(op.grid, f) * op.equilibrium;
        CHECK((proj - expect).cwiseAbs().maxCoeff() <
              1e-3 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("resolvent factorization identities") {
    std::mt19937 rng(77);
    std::normal_distribution<double> dist;
    const int n = 20;
    Vector wE(n), wCal(n);
    for (int i = 0; i < n; ++i) {
        wE[i] = 1.0 + 0.2 * i;
        wCal[i] = 1.0 + 0.05 * i;
    }
    std::vector<Complex> zs;
    for (int i = 0; i < 10; ++i)
        zs.emplace_back(3.0 + 0.3 * i, 0.7 * (i % 3 - 1));

    SECTION("random splittings, n = 1..4") {
        for (int trial = 0; trial < 3; ++trial) {
            Eigen::MatrixXd L(n, n), A(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    L(i, j) = dist(rng);
                    A(i, j) = 0.4 * dist(rng);
                }
            Eigen::MatrixXd B = L - A;
            for (int order = 1; order <= 4; ++order) {
                auto rep = verify_factorization(L, A, B, wE, wCal, zs, order);
                CHECK(rep.max_enlarge < 1e-10);
                CHECK(rep.max_reduce < 1e-10);
            }
        }
    }
    SECTION("A = 0 reduces both identities to R_L = R_B") {
        Eigen::MatrixXd L(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) L(i, j) = dist(rng);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        auto rep = verify_factorization(L, A, L, wE, wCal, zs, 2);
        CHECK(rep.max_enlarge < 1e-11);
        CHECK(rep.max_reduce < 1e-11);
    }
    SECTION("n = 0 convention is the trivial identity") {
        Eigen::MatrixXd L(n, n), A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                L(i, j) = dist(rng);
                A(i, j) = 0.4 * dist(rng);
            }
        auto rep = verify_factorization(L, A, Eigen::MatrixXd(L - A), wE, wCal, zs, 0);
        CHECK(rep.max_enlarge < 1e-12);
        CHECK(rep.max_reduce < 1e-12);
    }
    SECTION("z on top of the spectrum is a conditioning error") {
        Eigen::MatrixXd L = Eigen::Vector3d(0.0, -1.0, -2.0).asDiagonal();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
        Vector w3 = Vector::Ones(3);
        std::vector<Complex> bad{Complex(-1.0, 1e-5)};
        CHECK_THROWS_AS(verify_factorization(L, A, L, w3, w3, bad, 1), ConditioningError);
    }
}

TEST_CASE("eigenspace transfer between weighted representations") {
    ModelSpec ms;
    ms.kind = ModelKind::TorusKFP;
    ms.gamma = 2.0;
    ms.nx = 13;
    ms.nv = 24;
    ms.vmax = 6.0;
    DiscreteOperator op = assemble(ms);

    SECTION("null vector agrees across weights") {
        auto rep = eigenspace_transfer(op, WeightSpec::gaussian_inv(1.0, 1, 2.0),
                                       WeightSpec::poly_v(3.0), 0);
        CHECK(rep.max_principal_angle < 1e-6);
    }
    SECTION("identical weights give zero angle") {
        auto rep = eigenspace_transfer(op, WeightSpec::poly_v(3.0), WeightSpec::poly_v(3.0), 0);
        CHECK(rep.max_principal_angle < 1e-6);
    }
}

TEST_CASE("second eigenvector of the harmonic model matches the Hermite mode") {
    ModelSpec ms;
    ms.kind = ModelKind::HomogeneousFP;
    ms.gamma = 2.0;
    ms.nv = 384;
    ms.vmax = 8.0;
    DiscreteOperator op = assemble(ms);
    auto pairs = spectrum(op.L, 2, EigMethod::Dense);
    Vector hermite = op.grid.evaluate([](const PhasePoint& p) { return p.v[0]; });
    hermite = hermite.cwiseProduct(op.equilibrium).normalized();
    Vector v2 = pairs[1].vector.real().normalized();
    const double cosang = std::abs(hermite.dot(v2));
    CHECK(std::acos(std::min(1.0, cosang)) < 1e-2);
}
