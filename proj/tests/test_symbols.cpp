#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hypolab/models.hpp"
#include "hypolab/norms.hpp"
#include "hypolab/semigroup.hpp"
#include "hypolab/symbols.hpp"

using namespace hypolab;

namespace {

SymbolSpec poly_spec(Symbol sym, double k, double gamma, double p, int d = 1, double M = 0.0,
                     double R = 1.0) {
    SymbolSpec s;
    s.symbol = sym;
    s.gamma = gamma;
    s.d = d;
    s.weight = WeightSpec::poly_v(k, d, std::max(gamma, 2.0));
    s.p = p;
    s.M = M;
    s.R = R;
    return s;
}

SymbolSpec expo_spec(Symbol sym, double kappa, double s, double gamma, double p, int d = 1,
                     double M = 0.0, double R = 1.0) {
    SymbolSpec sp;
    sp.symbol = sym;
    sp.gamma = gamma;
    sp.d = d;
    sp.weight = WeightSpec::stretched_exp_v(kappa, s, d, gamma);
    sp.p = p;
    sp.M = M;
    sp.R = R;
    return sp;
}

} // namespace

TEST_CASE("psi0 reference values") {
    // harmonic friction, <v>^3 weight, p = 2: value 1/2 at the origin
    auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0);
    CHECK(eval_psi0(s, 0.0) == Catch::Approx(0.5));

    // tabulated asymptotics at |v| = 10^3, within 1%
    CHECK(eval_psi0(s, 1e3) == Catch::Approx(-2.5).epsilon(0.01)); // (1-1/p) d - k

    auto e11 = expo_spec(Symbol::Psi0, 0.5, 1.0, 1.0, 1.7);
    CHECK(eval_psi0(e11, 1e3) == Catch::Approx(-0.25).epsilon(0.01)); // kappa^2 - kappa

    // gamma + s = 2 regime at p = 1, where the slow div F correction drops out
    auto e2 = expo_spec(Symbol::Psi0, 0.8, 0.5, 1.5, 1.0);
    CHECK(eval_psi0(e2, 1e3) == Catch::Approx(-0.4).epsilon(0.01)); // -kappa s

    // gamma + s > 2: the -theta <v>^{gamma+s-2} envelope
    auto e3 = expo_spec(Symbol::Psi0, 0.5, 1.0, 2.0, 2.0);
    const double v = 1e3;
    const double envelope = -0.25 * std::pow(1.0 + v * v, (2.0 + 1.0 - 2.0) / 2.0);
    CHECK(eval_psi0(e3, v) < 0.0);
    CHECK(eval_psi0(e3, v) / envelope == Catch::Approx(2.0).epsilon(0.05)); // theta = kappa s here
}

TEST_CASE("psi2 asymptotic coefficient") {
    auto s = poly_spec(Symbol::Psi2, 3.0, 2.0, 1.0);
    CHECK(eval_psi2(s, 1e3) == Catch::Approx(-2.0).epsilon(0.01)); // (d+gamma-2)/p - k
}

TEST_CASE("psi1 tracks psi0 for exponential weights") {
    auto s1 = expo_spec(Symbol::Psi1, 0.5, 1.0, 2.0, 2.0);
    s1.eps = 1e-3;
    auto s0 = expo_spec(Symbol::Psi0, 0.5, 1.0, 2.0, 2.0);
    const double r = 1e3;
    CHECK(std::abs(eval_psi1(s1, r) - eval_psi0(s0, r)) / std::abs(eval_psi0(s0, r)) < 0.01);
}

TEST_CASE("psi1/psi3 require a Young parameter") {
    auto s = poly_spec(Symbol::Psi1, 3.0, 2.0, 2.0);
    CHECK_THROWS_AS(eval_psi1(s, 1.0), ParameterError);
    auto s3 = poly_spec(Symbol::Psi3, 3.0, 2.0, 2.0);
    CHECK_THROWS_AS(eval_psi3(s3, 1.0), ParameterError);
}

TEST_CASE("symbol/spec mismatch is a usage error") {
    auto s = poly_spec(Symbol::Psi2, 3.0, 2.0, 2.0);
    CHECK_THROWS_AS(eval_psi0(s, 1.0), UsageError);
}

TEST_CASE("finf drift bound") {
    SymbolSpec s;
    s.symbol = Symbol::FinfDrift;
    s.d = 2;
    s.gamma = 2.0;
    s.p = kInf;
    s.eps = 1e-9;
    CHECK(eval_finf_drift(s) == Catch::Approx(-1.0)); // (d-1)(gamma-2) - 1

    s.gamma = 3.0; // = 2 + 1/(d-1): outside the admissible range
    CHECK_THROWS_AS(eval_finf_drift(s), AdmissibilityError);
}

TEST_CASE("potential weight corrector") {
    SymbolSpec s;
    s.symbol = Symbol::PotPolyDrift;
    s.gamma = 2.0; // beta
    s.d = 1;
    s.weight = WeightSpec::poly_h(6.0, 1, 2.0);
    s.p = 2.0;

    PhasePoint origin;
    CHECK(potential_w(s, origin) == Catch::Approx(1.0));

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-30.0, 30.0);
    for (double alpha : {0.1, 0.5, 1.0, 3.0}) {
        s.alpha = alpha;
        for (int t = 0; t < 300; ++t) {
            PhasePoint p;
            p.x[0] = U(rng);
            p.v[0] = U(rng);
            const double Ha = potential_h_alpha(s, p);
            CHECK(p.xv() <= Ha + 1e-12); // Young
            const double w = potential_w(s, p);
            CHECK(w >= 0.5 - 1e-12);
            CHECK(w <= 1.5 + 1e-12);
        }
    }
}

TEST_CASE("potential drift derivative formulas agree with finite differences") {
    SymbolSpec s;
    s.symbol = Symbol::PotPolyDrift;
    s.gamma = 2.0;
    s.d = 1;
    s.weight = WeightSpec::poly_h(6.0, 1, 2.0);
    s.p = 2.0;
    s.alpha = 0.25;
    // grad_v w and lap_v w enter the closed-form drift; cross-check w itself
    // by finite differences of the exact drift pieces through T w:
    // T H = 0, so m(H) is transported invariantly and the drift of the
    // conjugated operator depends on w only; sample the closed form against a
    // second-order finite difference of w along v and x.
    auto wfun = [&](double x, double v) {
        PhasePoint p;
        p.x[0] = x;
        p.v[0] = v;
        return potential_w(s, p);
    };
    const double h = 1e-5;
    for (double x : {-2.0, 0.3, 1.7})
        for (double v : {-1.5, 0.0, 2.2}) {
            PhasePoint p;
            p.x[0] = x;
            p.v[0] = v;
            const double Ha = potential_h_alpha(s, p);
            const double gw_v = x / (2 * Ha) - (x * v) * v / (2 * s.alpha * Ha * Ha);
            const double fd = (wfun(x, v + h) - wfun(x, v - h)) / (2 * h);
            CHECK(gw_v == Catch::Approx(fd).margin(1e-7));

            const double lap_w = -(x * v) * (1.0 + 2.0) / (2 * s.alpha * Ha * Ha) +
                                 (x * v) * v * v / (s.alpha * s.alpha * Ha * Ha * Ha);
            const double fd2 = (wfun(x, v + h) - 2 * wfun(x, v) + wfun(x, v - h)) / (h * h);
            CHECK(lap_w == Catch::Approx(fd2).margin(1e-5));
        }
}

TEST_CASE("certification of the harmonic polynomial symbol") {
    SECTION("admissible with M = 20, R = 4") {
        auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0, 1, 20.0, 4.0);
        SymbolReport rep = certify(s);
        CHECK(rep.admissible);
        CHECK(rep.certified_abscissa <= -1.0);
        CHECK(rep.certified_abscissa >= rep.limit);
    }
    SECTION("not admissible without the cutoff") {
        auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0);
        SymbolReport rep = certify(s);
        CHECK_FALSE(rep.admissible);
        CHECK(rep.certified_abscissa >= 0.5); // psi0(0) = 1/2
    }
    SECTION("exponential weight flags a -infinity limit") {
        auto s = expo_spec(Symbol::Psi0, 0.5, 1.0, 2.0, 2.0, 1, 8.0, 4.0);
        SymbolReport rep = certify(s);
        CHECK(rep.limit == kNegInf);
        CHECK(rep.admissible);
    }
}

TEST_CASE("certified abscissa is monotone on M and k ladders") {
    double prev = kInf;
    for (double M : {5.0, 10.0, 20.0, 40.0}) {
        auto rep = certify(poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0, 1, M, 4.0));
        CHECK(rep.certified_abscissa <= prev + 1e-12);
        prev = rep.certified_abscissa;
    }
    prev = kInf;
    for (double k : {2.0, 3.0, 4.0, 5.0}) {
        auto rep = certify(poly_spec(Symbol::Psi0, k, 2.0, 2.0, 1, 20.0, 4.0));
        CHECK(rep.certified_abscissa <= prev + 1e-12);
        prev = rep.certified_abscissa;
    }
    // and in R for fixed M
    prev = kInf;
    for (double R : {2.0, 4.0, 8.0}) {
        auto rep = certify(poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0, 1, 20.0, R));
        CHECK(rep.certified_abscissa <= prev + 1e-12);
        prev = rep.certified_abscissa;
    }
}

TEST_CASE("certify guards") {
    auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0, 1, 10.0, 200.0);
    CHECK_THROWS_AS(certify(s), ResolutionError); // cutoff outside the window

    SymbolSpec app;
    app.symbol = Symbol::AppendixTorusDrift;
    CHECK_THROWS_AS(certify(app), UsageError);
    PhasePoint p;
    p.v[0] = 2.0;
    CHECK(eval_appendix_weight(app, p) == Catch::Approx(5.0));
}

TEST_CASE("cutoff search") {
    SECTION("feasible target returns a certified pair") {
        auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0);
        auto res = search_cutoff(s, -2.0, 0.1);
        CHECK(res.report.certified_abscissa <= -2.1);
        // re-certification passes
        s.M = res.M;
        s.R = res.R;
        CHECK(certify(s).certified_abscissa <= -2.1);
    }
    SECTION("target below the abscissa is infeasible") {
        auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0);
        CHECK_THROWS_AS(search_cutoff(s, -3.0, 0.1), InfeasibilityError);
    }
    SECTION("gamma = 3 exponential weight reaches any target") {
        auto s = expo_spec(Symbol::Psi0, 0.5, 1.0, 3.0, 2.0);
        auto res = search_cutoff(s, -5.0, 0.1);
        CHECK(res.report.certified_abscissa <= -5.1);
    }
}

TEST_CASE("discrete Lyapunov identity for B") {
    ModelSpec ms;
    ms.kind = ModelKind::HomogeneousFP;
    ms.gamma = 2.0;
    ms.nv = 512;
    ms.vmax = 8.0;
    ms.M = 5.0;
    ms.R = 3.0;
    DiscreteOperator op = assemble(ms);
    WeightSpec w = WeightSpec::poly_v(3.0);

    SECTION("20 random smooth nonnegative samples at p = 2") {
        for (unsigned seed = 0; seed < 20; ++seed) {
            Vector f = testing::smooth_positive(op.grid, ms, seed);
            CHECK(lyapunov_identity_residual(op, w, 2.0, f) < 1e-3);
        }
    }
    SECTION("first-order convergence under refinement") {
        auto fixed_f = [&](const Grid& g, const ModelSpec& spec) {
            return g.evaluate([&](const PhasePoint& p) {
                return spec.equilibrium_unnormalised(p) * (1.0 + 0.5 * std::cos(1.3 * p.v[0]));
            });
        };
        std::vector<double> residuals;
        for (int nv : {128, 256, 512}) {
            ModelSpec rms = ms;
            rms.nv = nv;
            DiscreteOperator rop = assemble(rms);
            residuals.push_back(lyapunov_identity_residual(rop, w, 2.0, fixed_f(rop.grid, rms)));
        }
        CHECK(residuals[1] < residuals[0] / 1.8);
        CHECK(residuals[2] < residuals[1] / 1.8);
    }
    SECTION("p = 3 on the exponential weight") {
        WeightSpec we = WeightSpec::stretched_exp_v(0.4, 1.0, 1, 2.0);
        Vector f = testing::smooth_positive(op.grid, ms, 3);
        CHECK(lyapunov_identity_residual(op, we, 3.0, f) < 5e-3);
    }
}

TEST_CASE("certified dissipativity transfers to the B-semigroup") {
    // torus splitting searched for abscissa <= -1 in L^2(<v>^3)
    auto s = poly_spec(Symbol::Psi0, 3.0, 2.0, 2.0);
    auto found = search_cutoff(s, -1.0, 0.1);

    ModelSpec ms;
    ms.kind = ModelKind::TorusKFP;
    ms.gamma = 2.0;
    ms.nx = 25;
    ms.nv = 48;
    ms.vmax = 7.0;
    ms.M = found.M;
    ms.R = found.R;
    DiscreteOperator op = assemble(ms);

    NormSpec l2m{Space::Lp, 2.0, WeightSpec::poly_v(3.0), 1.0};
    NormEvaluator ev(op.grid, l2m);
    auto times = time_ladder(3.0, 24);
    for (unsigned seed = 0; seed < 5; ++seed) {
        Vector f0 = testing::smooth_signed(op.grid, ms, seed);
        Trajectory traj = propagate(op.B, f0, times, Scheme::CrankNicolson, {5e-3});
        double prev = kInf;
        double prev_t = 0.0;
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const double val = std::exp(1.0 * traj.times[i]) * ev(traj.states[i]); // e^{-at}, a = -1
            if (i > 0) CHECK(val <= prev * (1.0 + 1e-3 * (traj.times[i] - prev_t) + 1e-12));
            prev = val;
            prev_t = traj.times[i];
        }
    }
}

TEST_CASE("potential drift certification, beta = 2, k = 6, p = 2") {
    SymbolSpec s;
    s.symbol = Symbol::PotPolyDrift;
    s.gamma = 2.0;
    s.d = 1;
    s.weight = WeightSpec::poly_h(6.0, 1, 2.0);
    s.p = 2.0;
    s.alpha = -1.0; // search alpha too
    auto found = search_cutoff(s, -0.05, 0.01);
    CHECK(found.report.certified_abscissa < 0.0);
    CHECK(found.alpha > 0.0);
}
