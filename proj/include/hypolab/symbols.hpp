#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"
#include "hypolab/models.hpp"
#include "hypolab/weights.hpp"

namespace hypolab {

enum class Symbol {
    Psi0,         // L^p(m) Lyapunov coefficient of B
    Psi1,         // W^{1,p}(m) velocity-derivative coefficient
    Psi2,         // L^p coefficient of the weight-conjugated dual B*_m
    Psi3,         // W^{1,p} coefficient of B*_m (certifies W^{-1,p'} by duality)
    FinfDrift,    // v-independent (F_inf)' drift bound
    PotPolyDrift, // exact confined-model drift, weight H^k w
    PotExpDrift,  // exact confined-model drift, weight e^{kappa H^s} w
    AppendixTorusDrift, // moment-gain weight 1 + |v|^2 (evaluation only)
    AppendixPotDrift    // moment-gain weight a|x|^{b/3} + ... (evaluation only)
};

inline std::string to_string(Symbol s) {
    switch (s) {
        case Symbol::Psi0: return "psi0";
        case Symbol::Psi1: return "psi1";
        case Symbol::Psi2: return "psi2";
        case Symbol::Psi3: return "psi3";
        case Symbol::FinfDrift: return "finf_drift";
        case Symbol::PotPolyDrift: return "pot_poly_drift";
        case Symbol::PotExpDrift: return "pot_exp_drift";
        case Symbol::AppendixTorusDrift: return "appendix_torus_drift";
        case Symbol::AppendixPotDrift: return "appendix_pot_drift";
    }
    return "?";
}

struct SymbolSpec {
    Symbol symbol = Symbol::Psi0;
    double gamma = 2.0; // friction exponent; reads as beta for potential symbols
    int d = 1;
    WeightSpec weight{};
    double p = 2.0;
    double M = 0.0;
    double R = 1.0;
    double eps = -1.0;  // Young-splitting parameter of psi1/psi3; <= 0: choose by minimisation
    double alpha = 0.25; // H_alpha parameter of the potential drifts
    double abc[3] = {1.0, 1.0, 0.5}; // appendix weight coefficients

    bool potential() const {
        return symbol == Symbol::PotPolyDrift || symbol == Symbol::PotExpDrift ||
               symbol == Symbol::AppendixPotDrift;
    }
    void check(Symbol expect) const {
        if (symbol != expect)
            throw UsageError("symbol spec is " + to_string(symbol) + ", operation expects " +
                             to_string(expect));
    }
};

namespace detail {

struct PInv {
    double pinv, pcinv; // 1/p and 1/p' with the p = inf limit taken as 1/p = 0
};
inline PInv pinvs(double p) {
    if (p < 1.0) throw ParameterError("symbol: p must be in [1, inf]");
    const double pinv = std::isinf(p) ? 0.0 : 1.0 / p;
    return {pinv, 1.0 - pinv};
}

/// Radial calculus of the velocity weight in the unified (kappa, k, s) triple.
struct VWeightTerms {
    double kap, kk, ss;
    int d;
    double gamma;

    static VWeightTerms make(const SymbolSpec& spec) {
        const auto u = spec.weight.unified();
        return {u.kap, u.kk, u.ss, spec.d, spec.gamma};
    }
    // Delta m / m
    double lap(double r) const {
        const double b2 = 1.0 + r * r;
        return kap * kk * d * std::pow(b2, (ss - 2) / 2) +
               kap * kk * (kk - 2) * r * r * std::pow(b2, (ss - 4) / 2) +
               kap * kap * ss * ss * r * r * std::pow(b2, (2 * ss - 4) / 2);
    }
    // |grad m|^2 / m^2
    double grad2(double r) const {
        return kap * kap * kk * kk * r * r * std::pow(1.0 + r * r, (2 * ss - 4) / 2);
    }
    // F . grad m / m
    double fdotg(double r) const {
        return kap * kk * r * r * std::pow(1.0 + r * r, (gamma + ss - 4) / 2);
    }
    double divF(double r) const {
        const double b2 = 1.0 + r * r;
        return d * std::pow(b2, (gamma - 2) / 2) + (gamma - 2) * r * r * std::pow(b2, (gamma - 4) / 2);
    }
    // d/dr of lap and fdotg (the weight part of A*_m is radial)
    double lap_prime(double r) const {
        const double b2 = 1.0 + r * r;
        auto dr_pow = [&](double e) { return e * r * std::pow(b2, (e - 2) / 2); };       // d/dr <r>^e
        auto dr_r2pow = [&](double e) {                                                   // d/dr r^2 <r>^e
            return 2 * r * std::pow(b2, e / 2) + e * r * r * r * std::pow(b2, (e - 2) / 2);
        };
        return kap * kk * d * dr_pow(ss - 2) + kap * kk * (kk - 2) * dr_r2pow(ss - 4) +
               kap * kap * ss * ss * dr_r2pow(2 * ss - 4);
    }
    double fdotg_prime(double r) const {
        const double b2 = 1.0 + r * r;
        const double e = gamma + ss - 4;
        return kap * kk * (2 * r * std::pow(b2, e / 2) + e * r * r * r * std::pow(b2, (e - 2) / 2));
    }
};

inline double chi_of(double r, double R) { return cutoff_bump(r / R); }
inline double chi_grad(double r, double R) { return std::abs(cutoff_bump_derivative(r / R)) / R; }

/// Worst-direction envelope of sup_i sum_j |d_i F_j| (+ the same with the i/j
/// roles swapped; identical bound, so the 1/p + 1/p' split collapses).
inline double force_jacobian_envelope(double r, double gamma, int d) {
    return (1.0 + std::sqrt(double(d)) * std::abs(gamma - 2.0)) *
           std::pow(1.0 + r * r, (gamma - 2) / 2);
}

/// Worst-direction envelope of sum_{i,j} |d_i d_j F_j|.
inline double force_hessian_envelope(double r, double gamma, int d) {
    const double b2 = 1.0 + r * r;
    const double sd = std::sqrt(double(d));
    return std::abs(gamma - 2.0) * sd * r * std::pow(b2, (gamma - 4) / 2) *
           (d + 2.0 + std::abs(gamma - 4.0) * r * r / b2);
}

} // namespace detail

/// psi^0_{m,p}: the pointwise coefficient multiplying f^p m^p in the L^p(m)
/// Lyapunov identity of B. Radial in v.
inline double eval_psi0(const SymbolSpec& spec, double r) {
    spec.check(Symbol::Psi0);
    const auto [pinv, pcinv] = detail::pinvs(spec.p);
    const auto w = detail::VWeightTerms::make(spec);
    return (2 * pinv - 1) * w.lap(r) + 2 * pcinv * w.grad2(r) + pcinv * w.divF(r) -
           w.fdotg(r) - spec.M * detail::chi_of(r, spec.R);
}

/// psi^2_{p,m}: L^p coefficient of the conjugated dual operator B*_m.
inline double eval_psi2(const SymbolSpec& spec, double r) {
    spec.check(Symbol::Psi2);
    const auto [pinv, pcinv] = detail::pinvs(spec.p);
    const auto w = detail::VWeightTerms::make(spec);
    return (1 - 2 * pinv) * w.lap(r) + 2 * pinv * w.grad2(r) + pinv * w.divF(r) - w.fdotg(r) -
           spec.M * detail::chi_of(r, spec.R);
}

namespace detail {
inline double psi2_core(const SymbolSpec& spec, double r) {
    SymbolSpec s2 = spec;
    s2.symbol = Symbol::Psi2;
    return eval_psi2(s2, r);
}
inline double psi0_core(const SymbolSpec& spec, double r) {
    SymbolSpec s0 = spec;
    s0.symbol = Symbol::Psi0;
    return eval_psi0(s0, r);
}
} // namespace detail

/// psi^1_{m,p}: velocity-derivative coefficient in the W^{1,p}(m)
/// hypodissipativity estimate. Uses the explicit (M/R)|grad chi|(v/R) factor
/// for the cutoff-derivative contribution.
inline double eval_psi1(const SymbolSpec& spec, double r) {
    spec.check(Symbol::Psi1);
    if (spec.eps <= 0.0) throw ParameterError("psi1: Young parameter eps must be > 0");
    const auto [pinv, pcinv] = detail::pinvs(spec.p);
    const double Z = detail::force_hessian_envelope(r, spec.gamma, spec.d) +
                     (spec.M / spec.R) * std::abs(cutoff_bump_derivative(r / spec.R));
    const double jac = detail::force_jacobian_envelope(r, spec.gamma, spec.d);
    return pinv * Z + (pcinv + pinv) * jac + detail::psi0_core(spec, r) + spec.eps;
}

/// psi^3_{p,m}: W^{1,p} coefficient of B*_m; by duality, evaluating it at the
/// conjugate exponent certifies B in W^{-1,p}(m).
inline double eval_psi3(const SymbolSpec& spec, double r) {
    spec.check(Symbol::Psi3);
    if (spec.eps <= 0.0) throw ParameterError("psi3: Young parameter eps must be > 0");
    const auto [pinv, pcinv] = detail::pinvs(spec.p);
    const auto w = detail::VWeightTerms::make(spec);
    // sup_i sum_j |d_j (F - 2 grad m / m)_i|
    const double dB = detail::force_jacobian_envelope(r, spec.gamma, spec.d) +
                      2.0 * w.kap * w.kk * (1.0 + std::sqrt(double(spec.d)) * std::abs(w.ss - 2.0)) *
                          std::pow(1.0 + r * r, (w.ss - 2) / 2);
    // |d/dr A*_m| with A*_m = lap - fdotg - M chi_R (radial, so exact)
    const double gradA =
        std::abs(w.lap_prime(r) - w.fdotg_prime(r)) + spec.M * detail::chi_grad(r, spec.R);
    const double eps_term = std::isinf(spec.p) ? 0.0 : std::pow(spec.eps, spec.p) / spec.p;
    return dB + detail::psi2_core(spec, r) + eps_term + pinv * gradA;
}

/// (F_inf)' drift bound: d(gamma-1)/p + eps^p/p + (d-1)(gamma-2) - 1.
inline double eval_finf_drift(const SymbolSpec& spec) {
    spec.check(Symbol::FinfDrift);
    const double gamma = spec.gamma;
    const int d = spec.d;
    if (gamma < 2.0 || (d > 1 && gamma >= 2.0 + 1.0 / (d - 1)))
        throw AdmissibilityError("finf drift requires gamma in [2, 2 + 1/(d-1))");
    const auto [pinv, pcinv] = detail::pinvs(spec.p);
    const double eps_term =
        (std::isinf(spec.p) || spec.eps <= 0.0) ? 0.0 : std::pow(spec.eps, spec.p) / spec.p;
    return d * (gamma - 1.0) * pinv + eps_term + (d - 1.0) * (gamma - 2.0) - 1.0;
}

/// The confined-model weight corrector w = 1 + (x.v)/(2 H_alpha) and H_alpha.
inline double potential_h_alpha(const SymbolSpec& spec, const PhasePoint& pt) {
    const double beta = spec.gamma;
    return 1.0 + spec.alpha * std::pow(bracket(pt.xnorm2()), beta) / beta +
           pt.vnorm2() / (2.0 * spec.alpha);
}
inline double potential_w(const SymbolSpec& spec, const PhasePoint& pt) {
    if (spec.alpha <= 0.0) throw ParameterError("potential drift: alpha must be > 0");
    return 1.0 + 0.5 * pt.xv() / potential_h_alpha(spec, pt);
}

/// Exact pointwise drift of the confined model in the corrected weight
/// W = m(H) w: the L^p Lyapunov coefficient of B computed by closed-form
/// differentiation of w and H (no proof-side constants).
inline double eval_potential_drift(const SymbolSpec& spec, const PhasePoint& pt) {
    if (spec.symbol != Symbol::PotPolyDrift && spec.symbol != Symbol::PotExpDrift)
        throw UsageError("eval_potential_drift expects a potential drift symbol");
    if (spec.alpha <= 0.0) throw ParameterError("potential drift: alpha must be > 0");
    const auto [pinv, pcinv] = detail::pinvs(spec.p);
    const double beta = spec.gamma;
    const int d = spec.d;
    const double x2 = pt.xnorm2(), v2 = pt.vnorm2(), xv = pt.xv();
    const double H = 1.0 + confinement_potential(x2, beta) + 0.5 * v2;

    // log m derivatives in H
    double phi1, phi2; // phi = log m: phi'(H), phi''(H)
    if (spec.symbol == Symbol::PotPolyDrift) {
        const double k = spec.weight.k;
        phi1 = k / H;
        phi2 = -k / (H * H);
    } else {
        const double kap = spec.weight.kappa, s = spec.weight.s;
        phi1 = kap * s * std::pow(H, s - 1);
        phi2 = kap * s * (s - 1) * std::pow(H, s - 2);
    }
    // grad_v m / m = phi1 v ; Delta_v m / m = phi2 |v|^2 + phi1 d + phi1^2 |v|^2
    const double gm_v2 = phi1 * phi1 * v2;
    const double lap_m = phi2 * v2 + phi1 * d + gm_v2;

    const double Ha = potential_h_alpha(spec, pt);
    const double w = 1.0 + 0.5 * xv / Ha;
    // grad_v w = x/(2Ha) - (x.v) v/(2 alpha Ha^2)
    const double a = spec.alpha;
    const double gw_dot_v = xv / (2 * Ha) - xv * v2 / (2 * a * Ha * Ha);
    const double gw2 = x2 / (4 * Ha * Ha) - xv * xv / (2 * a * Ha * Ha * Ha) +
                       xv * xv * v2 / (4 * a * a * Ha * Ha * Ha * Ha);
    const double lap_w = -xv * (d + 2.0) / (2 * a * Ha * Ha) + xv * v2 / (a * a * Ha * Ha * Ha);
    const double gm_dot_gw = phi1 * gw_dot_v; // grad_v m/m . grad_v w

    // T w with T = -v.grad_x + G.grad_v, G = x <x>^{beta-2}
    const double xfac = std::pow(bracket(x2), beta - 2.0);
    const double Tw = -v2 / (2 * Ha) + a * xv * xv * xfac / (2 * Ha * Ha) +
                      x2 * xfac / (2 * Ha) - xv * xv * xfac / (2 * a * Ha * Ha);

    const double gW2 = gm_v2 + 2 * phi1 * gw_dot_v / w + gw2 / (w * w);
    const double lapW = lap_m + 2 * gm_dot_gw / w + lap_w / w;
    const double v_gW = phi1 * v2 + gw_dot_v / w;

    const double chi = cutoff_bump(H / spec.R);
    return 2 * pcinv * gW2 + (2 * pinv - 1) * lapW + d * pcinv - v_gW - Tw / w - spec.M * chi;
}

/// Appendix moment-gain weights (pointwise evaluation; consumed by the
/// moment-gain estimate, not by certify()).
inline double eval_appendix_weight(const SymbolSpec& spec, const PhasePoint& pt) {
    if (spec.symbol == Symbol::AppendixTorusDrift) return 1.0 + pt.vnorm2();
    if (spec.symbol == Symbol::AppendixPotDrift) {
        const double beta = spec.gamma;
        const double rx = std::sqrt(pt.xnorm2());
        return spec.abc[0] * std::pow(rx, beta / 3.0) + spec.abc[1] * pt.vnorm2() +
               2.0 * spec.abc[2] * std::pow(rx, beta / 6.0 - 1.0) * pt.xv();
    }
    throw UsageError("eval_appendix_weight expects an appendix weight symbol");
}

/// Pointwise values, tail suprema, asymptotic limit and the certified
/// dissipativity abscissa of one symbol.
struct SymbolReport {
    SymbolSpec spec;
    std::vector<double> radii;        // |v| ladder (or H ladder, potential case)
    std::vector<double> values;       // sup over directions at each radius
    std::vector<double> sup_outside;  // sup over radii >= radii[i], tail included
    double limit = 0.0;               // asymptotic limit (may be -inf / +inf)
    double certified_abscissa = 0.0;
    bool admissible = false;
    double eps_used = 0.0;
    double window_end = 0.0;
};

namespace detail {

inline double radial_eval(const SymbolSpec& spec, double r) {
    switch (spec.symbol) {
        case Symbol::Psi0: return eval_psi0(spec, r);
        case Symbol::Psi1: return eval_psi1(spec, r);
        case Symbol::Psi2: return eval_psi2(spec, r);
        case Symbol::Psi3: return eval_psi3(spec, r);
        default: throw UsageError("not a radial velocity symbol");
    }
}

/// Asymptotic limit of the radial symbols; +inf flags an inadmissible weight.
inline double radial_limit(const SymbolSpec& spec) {
    const auto [pinv, pcinv] = pinvs(spec.p);
    const auto w = VWeightTerms::make(spec);
    const bool first_order = spec.symbol == Symbol::Psi1 || spec.symbol == Symbol::Psi3;
    const double eps_term =
        !first_order ? 0.0
        : (spec.symbol == Symbol::Psi1
               ? spec.eps
               : (std::isinf(spec.p) ? 0.0 : std::pow(spec.eps, spec.p) / spec.p));
    if (w.ss == 0.0) { // polynomial weight
        double c;
        switch (spec.symbol) {
            case Symbol::Psi0: c = pcinv * (spec.d + spec.gamma - 2) - w.kk; break;
            case Symbol::Psi2: c = pinv * (spec.d + spec.gamma - 2) - w.kk; break;
            case Symbol::Psi1:
                c = (1 + std::sqrt(double(spec.d)) * (spec.gamma - 2)) +
                    pcinv * (spec.d + spec.gamma - 2) - w.kk;
                break;
            case Symbol::Psi3:
                c = (1 + std::sqrt(double(spec.d)) * (spec.gamma - 2)) +
                    pinv * (spec.d + spec.gamma - 2) - w.kk;
                break;
            default: throw UsageError("not a radial velocity symbol");
        }
        if (spec.gamma == 2.0) return c + eps_term;
        return c < 0 ? kNegInf : kInf;
    }
    // stretched-exponential: leading pair kap^2 kk^2 r^{2s-2} - kap kk r^{gamma+s-2}
    const double e1 = 2 * w.ss - 2, e2 = spec.gamma + w.ss - 2;
    if (e1 > e2) return kInf;
    if (e1 == e2) { // s = gamma
        const double c = w.kap * w.kk * (w.kap * w.kk - 1.0);
        if (e2 > 0) return c < 0 ? kNegInf : kInf;
        return c + eps_term;
    }
    if (e2 > 0) return kNegInf;
    return -w.kap * w.kk + eps_term; // gamma + s = 2
}

} // namespace detail

/// Certify a symbol: supremum over a radial evaluation window [0, 10^3] plus a
/// tail bound from the asymptotic behaviour (10% safety on the tail
/// correction). admissible = (certified abscissa < 0).
inline SymbolReport certify(SymbolSpec spec) {
    if (spec.symbol == Symbol::AppendixTorusDrift || spec.symbol == Symbol::AppendixPotDrift)
        throw UsageError("appendix weights are evaluation-only; certify does not apply");
    if (spec.symbol == Symbol::FinfDrift) {
        SymbolReport rep;
        if (spec.eps <= 0.0) spec.eps = 1e-3;
        rep.spec = spec;
        rep.limit = eval_finf_drift(spec);
        rep.certified_abscissa = rep.limit;
        rep.admissible = rep.limit < 0;
        rep.eps_used = spec.eps;
        return rep;
    }

    const double window_end = 1e3;
    if (!spec.potential() && 2.0 * spec.R > window_end / 10.0)
        throw ResolutionError("certify: cutoff radius too large for the evaluation window");
    if (spec.potential() && 2.0 * spec.R > window_end / 10.0)
        throw ResolutionError("certify: cutoff level set exceeds the evaluation window");

    const bool first_order = spec.symbol == Symbol::Psi1 || spec.symbol == Symbol::Psi3;
    if (first_order && spec.eps <= 0.0) {
        // choose the Young parameter on a log grid, minimising the certified sup
        double best = kInf, best_eps = 1e-3;
        for (double e = 1e-4; e <= 4.0; e *= 2.0) {
            SymbolSpec s = spec;
            s.eps = e;
            SymbolReport rep = certify(s);
            if (rep.certified_abscissa < best) {
                best = rep.certified_abscissa;
                best_eps = e;
            }
        }
        spec.eps = best_eps;
    }

    SymbolReport rep;
    rep.window_end = window_end;
    rep.eps_used = spec.eps;

    // evaluation ladder: linear covering the cutoff region, log ladder beyond
    std::vector<double> rs;
    const double lin_end = std::max(10.0, 3.0 * spec.R);
    for (int i = 0; i <= 2000; ++i) rs.push_back(lin_end * i / 2000.0);
    for (int i = 1; i <= 1500; ++i)
        rs.push_back(lin_end * std::pow(window_end / lin_end, i / 1500.0));

    auto value_at = [&](double r) -> double {
        if (!spec.potential()) return detail::radial_eval(spec, r);
        // potential drifts: sup over (|x|, |v|, direction) with H(|x|,|v|) = r
        // handled by sweeping both radii on the same ladder outside.
        throw UsageError("internal: potential symbols use the 2d sweep");
    };

    if (!spec.potential()) {
        rep.radii = rs;
        rep.values.reserve(rs.size());
        for (double r : rs) rep.values.push_back(value_at(r));
        rep.limit = detail::radial_limit(spec);
    } else {
        // 2d sweep over (|x|, |v|) with the worst x.v directions
        std::vector<double> ladder;
        for (int i = 0; i <= 220; ++i) ladder.push_back(30.0 * i / 220.0);
        for (int i = 1; i <= 120; ++i) ladder.push_back(30.0 * std::pow(window_end / 30.0, i / 120.0));
        rep.radii = ladder;
        rep.values.assign(ladder.size(), kNegInf);
        const double coss[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
        double outer_sup = kNegInf, inner_sup = kNegInf;
        for (std::size_t ix = 0; ix < ladder.size(); ++ix)
            for (std::size_t iv = 0; iv < ladder.size(); ++iv)
                for (double c : coss) {
                    PhasePoint pt;
                    pt.x[0] = ladder[ix];
                    pt.v[0] = ladder[iv] * c;
                    pt.v[1] = spec.d > 1 ? ladder[iv] * std::sqrt(1 - c * c) : 0.0;
                    if (spec.d == 1 && c != -1.0 && c != 1.0 && ladder[iv] != 0.0) continue;
                    const double val = eval_potential_drift(spec, pt);
                    const double rr = std::max(ladder[ix], ladder[iv]);
                    rep.values[std::max(ix, iv)] = std::max(rep.values[std::max(ix, iv)], val);
                    if (rr >= window_end / 10.0) outer_sup = std::max(outer_sup, val);
                    else inner_sup = std::max(inner_sup, val);
                }
        // tail estimate: the exact drift is monotone-decaying towards its
        // negative plateau at the window scale; report the outer-shell sup.
        rep.limit = outer_sup;
    }

    // suffix suprema and certified abscissa
    const std::size_t n = rep.values.size();
    rep.sup_outside.assign(n, kNegInf);
    double running = kNegInf;
    for (std::size_t i = n; i-- > 0;) {
        running = std::max(running, rep.values[i]);
        rep.sup_outside[i] = running;
    }
    double sup_window = running;

    double tail;
    if (!spec.potential()) {
        const double v_end = rep.values.back();
        if (std::isinf(rep.limit)) {
            tail = rep.limit > 0 ? kInf : v_end;
            if (rep.limit < 0) {
                // the beyond-window sup is bounded by the window-end value once
                // the last decade is verified nonincreasing
                for (std::size_t i = 1; i < n; ++i)
                    if (rep.radii[i] >= window_end / 10.0 && rep.radii[i - 1] >= window_end / 10.0 &&
                        rep.values[i] > rep.values[i - 1] + 1e-12)
                        throw ResolutionError("certify: tail not settled inside the window");
            }
        } else {
            tail = std::max(rep.limit, v_end) + 0.1 * std::abs(v_end - rep.limit);
        }
    } else {
        tail = rep.limit + 0.1 * std::abs(rep.limit); // outer-shell sup with safety
    }

    rep.certified_abscissa = std::max(sup_window, tail);
    rep.admissible = rep.certified_abscissa < 0.0;
    rep.spec = spec;
    return rep;
}

/// Smallest (R, then M) on geometric ladders so that the certified abscissa is
/// at most a - margin. For potential symbols alpha <= 0 triggers an alpha
/// ladder as well.
struct CutoffSearchResult {
    double M = 0.0, R = 0.0, alpha = 0.0;
    SymbolReport report;
};

inline CutoffSearchResult search_cutoff(SymbolSpec spec, double target_a, double margin) {
    if (margin <= 0.0) throw ParameterError("search_cutoff: margin must be > 0");
    if (target_a >= 0.0) throw ParameterError("search_cutoff: target must be < 0");

    if (!spec.potential()) {
        SymbolSpec probe = spec;
        probe.M = 0.0;
        probe.R = 1.0;
        if (probe.eps <= 0 && (probe.symbol == Symbol::Psi1 || probe.symbol == Symbol::Psi3))
            probe.eps = 1e-3;
        const double limit = detail::radial_limit(probe);
        if (std::isfinite(limit) && target_a - margin <= limit) {
            std::ostringstream os;
            os << "search_cutoff: target " << target_a << " (margin " << margin
               << ") is not above the abscissa a_sigma(p,m) = " << limit;
            throw InfeasibilityError(os.str());
        }
        if (limit > 0) throw AdmissibilityError("search_cutoff: weight not confining enough");
    }

    std::vector<double> alphas = {spec.alpha};
    if (spec.potential() && spec.alpha <= 0.0) alphas = {0.5, 0.25, 0.125, 0.0625, 0.03125};

    for (double R = 2.0; R <= 64.0; R *= 2.0)
        for (double M = 2.0; M <= 4096.0; M *= 2.0)
            for (double alpha : alphas) {
                SymbolSpec s = spec;
                s.M = M;
                s.R = R;
                s.alpha = alpha;
                SymbolReport rep = certify(s);
                if (rep.certified_abscissa <= target_a - margin)
                    return {M, R, alpha, std::move(rep)};
            }
    throw InfeasibilityError("search_cutoff: no (M, R) on the ladder certifies the target");
}

/// Residual of the discrete L^p(m) Lyapunov identity for B on the operator's
/// grid: <Bf, f^{p-1} m^p> + (p-1) <|grad_v(mf)|^2 (mf)^{p-2}> - <f^p m^p psi0>
/// relative to the magnitude of its terms.
inline double lyapunov_identity_residual(const DiscreteOperator& op, const WeightSpec& weight,
                                         double p, const Vector& f) {
    const Grid& g = op.grid;
    Vector m = weight.on_grid(g);
    Vector mf = m.cwiseProduct(f);
    const double q = g.cell_volume();

    Vector Bf = op.B * f;
    double lhs = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        lhs += Bf[i] * std::pow(f[i], p - 1.0) * std::pow(m[i], p);
    lhs *= q;

    double grad_term = 0.0;
    Vector g2 = Vector::Zero(g.size());
    for (int k = g.n_x_axes(); k < g.n_axes(); ++k) {
        Vector dk = grid_derivative(g, mf, k);
        g2 += dk.cwiseProduct(dk);
    }
    for (Eigen::Index i = 0; i < g.size(); ++i)
        grad_term += g2[i] * std::pow(std::abs(mf[i]), p - 2.0);
    grad_term *= q * (p - 1.0);

    SymbolSpec s;
    s.symbol = Symbol::Psi0;
    s.gamma = op.spec.gamma;
    s.d = g.n_v_axes();
    s.weight = weight;
    s.p = p;
    s.M = op.spec.M;
    s.R = op.spec.R;
    double rhs = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double r = std::sqrt(g.point(i).vnorm2());
        rhs += std::pow(f[i], p) * std::pow(m[i], p) * eval_psi0(s, r);
    }
    rhs *= q;

    const double scale = std::abs(lhs) + std::abs(grad_term) + std::abs(rhs) + 1e-300;
    return std::abs(lhs + grad_term - rhs) / scale;
}

} // namespace hypolab
