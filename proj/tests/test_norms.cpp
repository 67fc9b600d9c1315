#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hypolab/norms.hpp"

using namespace hypolab;

namespace {

Grid fine_v_grid(int n = 4096, double vmax = 10.0) { return Grid::velocity_1d(n, vmax); }

std::vector<NormSpec> norm_battery(int d_axes_hint = 1) {
    (void)d_axes_hint;
    WeightSpec poly = WeightSpec::poly_v(3.0);
    std::vector<NormSpec> specs;
    specs.push_back({Space::Lp, 1.0, poly, 1.0});
    specs.push_back({Space::Lp, 2.0, poly, 1.0});
    specs.push_back({Space::Lp, kInf, poly, 1.0});
    specs.push_back({Space::W1p, 2.0, poly, 0.5});
    specs.push_back({Space::Wm1p, 2.0, poly, 1.0});
    specs.push_back({Space::Wm1p, 1.0, poly, 1.0});
    specs.push_back({Space::FinfDual, kInf, poly, 1.0});
    return specs;
}

} // namespace

TEST_CASE("zero function has zero norm in every space") {
    Grid g = Grid::velocity_1d(33, 6.0);
    for (const auto& spec : norm_battery())
        CHECK(norm(g, Vector::Zero(g.size()), spec) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("indicator of one cell in L^1") {
    // odd cell count puts one cell centre exactly at v = 0, where <v>^k = 1
    Grid g = Grid::velocity_1d(65, 6.5);
    const Eigen::Index mid = 32;
    REQUIRE(std::abs(g.point(mid).v[0]) < 1e-14);
    Vector f = Vector::Zero(g.size());
    f[mid] = 1.0;
    NormSpec l1{Space::Lp, 1.0, WeightSpec::poly_v(3.0), 1.0};
    CHECK(norm(g, f, l1) == Catch::Approx(g.cell_volume()));
}

TEST_CASE("Gaussian L^2(mu^{-1/2}) norm against the closed form") {
    // f the standard Gaussian density; weight (mu/mu(0))^{-1/2} = e^{v^2/4};
    // closed form: int (f m)^2 = (2 pi)^{-1} int e^{-v^2/2} = (2 pi)^{-1/2}
    Grid g = fine_v_grid();
    Vector f = g.evaluate([](const PhasePoint& p) {
        return std::exp(-0.5 * p.vnorm2()) / std::sqrt(2.0 * M_PI);
    });
    NormSpec spec{Space::Lp, 2.0, WeightSpec::gaussian_inv(1.0, 1, 2.0), 1.0};
    const double computed = norm(g, f, spec);
    const double analytic_sq = std::pow(2.0 * M_PI, -0.5);
    CHECK(std::abs(computed * computed - analytic_sq) < 1e-6);
}

TEST_CASE("norm scaling is exactly homogeneous") {
    Grid g = Grid::velocity_1d(33, 6.0);
    ModelSpec ms;
    ms.nv = 33;
    ms.vmax = 6.0;
    Vector f = testing::smooth_signed(g, ms, 99);
    for (const auto& spec : norm_battery()) {
        NormEvaluator ev(g, spec);
        const double base = ev(f);
        for (double alpha : {-2.0, 0.5, 3.0}) {
            CHECK(std::abs(ev(alpha * f) - std::abs(alpha) * base) <=
                  1e-12 * std::max(1.0, std::abs(alpha) * base));
        }
    }
}

TEST_CASE("triangle inequality on random pairs") {
    Grid g = Grid::velocity_1d(33, 6.0);
    ModelSpec ms;
    ms.nv = 33;
    ms.vmax = 6.0;
    for (const auto& spec : norm_battery()) {
        NormEvaluator ev(g, spec);
        const bool ball = spec.space == Space::FinfDual ||
                          (spec.space == Space::Wm1p && spec.p != 2.0);
        for (unsigned seed = 0; seed < 5; ++seed) {
            Vector f = testing::smooth_signed(g, ms, 2 * seed);
            Vector h = testing::smooth_signed(g, ms, 2 * seed + 1);
            if (ball) {
                // certified route: lower(f+h) <= true(f+h) <= upper(f) + upper(h)
                const auto rf = ev.dual_ball_result(f), rh = ev.dual_ball_result(h);
                CHECK(ev.dual_ball_result(f + h).lower <= rf.upper + rh.upper + 1e-12);
            } else {
                CHECK(ev(f + h) <= ev(f) + ev(h) + 1e-12);
            }
        }
    }
}

TEST_CASE("dual-norm consistency at p = 2") {
    Grid g = Grid::torus_1d(12, 24, 6.0);
    ModelSpec ms;
    ms.kind = ModelKind::TorusKFP;
    ms.nx = 12;
    ms.nv = 24;
    ms.vmax = 6.0;
    NormSpec spec{Space::Wm1p, 2.0, WeightSpec::poly_v(3.0), 1.0};
    NormEvaluator ev(g, spec);
    Vector m = spec.weight.on_grid(g);
    const double q = g.cell_volume();

    std::mt19937 rng(31);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 6; ++trial) {
        Vector f(g.size()), phi(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            f[i] = dist(rng);
            phi[i] = dist(rng);
        }
        const double nf = ev(f);
        const double pairing = q * f.cwiseProduct(m).dot(phi);
        CHECK(std::abs(pairing) <= nf * ev.sobolev_test_norm(phi) + 1e-10);

        // the optimizer achieves equality
        Vector opt = ev.wm12_optimizer(f);
        const double opt_pairing = q * f.cwiseProduct(m).dot(opt);
        CHECK(std::abs(opt_pairing - nf * ev.sobolev_test_norm(opt)) <
              1e-6 * std::max(1.0, nf));
    }
}

TEST_CASE("L^1(<v>) embeds into the F_inf dual") {
    Grid g = Grid::velocity_1d(41, 6.0);
    ModelSpec ms;
    ms.nv = 41;
    ms.vmax = 6.0;
    NormSpec dual{Space::FinfDual, kInf, WeightSpec::poly_v(1.0), 1.0};
    NormSpec l1v{Space::Lp, 1.0, WeightSpec::poly_v(1.0), 1.0};
    NormEvaluator evd(g, dual), ev1(g, l1v);
    for (unsigned seed = 10; seed < 16; ++seed) {
        Vector f = testing::smooth_positive(g, ms, seed).cwiseAbs();
        CHECK(0.5 * ev1(f) <= evd(f) * (1.0 + 1e-9));
    }
}

TEST_CASE("F_inf dual norm of a shifted bump matches the transport cost") {
    // two equal-mass narrow bumps a distance delta apart; for small delta the
    // <v> box never binds and the dual ball behaves like Lipschitz testing
    Grid g = Grid::velocity_1d(257, 4.0);
    const double h = g.axis(0).h();
    auto bump = [&](double centre) {
        return g.evaluate([&](const PhasePoint& p) {
            return std::exp(-40.0 * (p.v[0] - centre) * (p.v[0] - centre));
        });
    };
    const double delta = 8 * h;
    Vector f = bump(-0.2), gg = bump(-0.2 + delta);
    NormSpec dual{Space::FinfDual, kInf, WeightSpec::poly_v(1.0), 1.0};
    NormEvaluator ev(g, dual);
    const double expected = delta * g.integrate(bump(-0.2)); // mass times shift
    const auto res = ev.dual_ball_result(f - gg);
    CHECK(res.lower <= expected * (1.0 + 0.02));
    CHECK(res.upper >= expected * (1.0 - 0.02));
    CHECK(res.gap() < 0.05 * expected);
}

TEST_CASE("unsupported dual exponents are rejected") {
    Grid g = Grid::velocity_1d(16, 4.0);
    NormSpec bad{Space::Wm1p, 3.0, WeightSpec::poly_v(2.0), 1.0};
    CHECK_THROWS_AS(norm(g, Vector::Ones(g.size()), bad), CapabilityError);
}
