#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "hypolab/errors.hpp"
#include "hypolab/grid.hpp"

namespace hypolab {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Weight families. The *V families depend on the velocity only, the *H
/// families on the Hamiltonian H(x,v) = 1 + <x>^beta/beta + |v|^2/2 of the
/// confined model. GaussianInv is the inverse-equilibrium weight
/// (mu/mu(0))^{-theta/2}, normalised so m(0) = 1.
enum class WeightFamily { PolyV, StretchedExpV, GaussianInv, PolyH, StretchedExpH };

inline std::string to_string(WeightFamily f) {
    switch (f) {
        case WeightFamily::PolyV: return "poly_v";
        case WeightFamily::StretchedExpV: return "stretched_exp_v";
        case WeightFamily::GaussianInv: return "gaussian_inv";
        case WeightFamily::PolyH: return "poly_h";
        case WeightFamily::StretchedExpH: return "stretched_exp_h";
    }
    return "?";
}

/// A weight family with its parameters and the model exponent it is paired
/// with (gamma for velocity friction, beta for spatial confinement).
struct WeightSpec {
    WeightFamily family = WeightFamily::PolyV;
    double k = 0.0;     // PolyV / PolyH exponent
    double kappa = 0.0; // stretched-exponential rate
    double s = 0.0;     // stretched-exponential power
    double theta = 0.0; // GaussianInv strength
    int d = 1;          // dimension per variable
    double exponent = 2.0; // gamma (velocity families) or beta (H families)

    static WeightSpec poly_v(double k, int d = 1, double gamma = 2.0) {
        WeightSpec w;
        w.family = WeightFamily::PolyV;
        w.k = k;
        w.d = d;
        w.exponent = gamma;
        w.validate();
        return w;
    }
    static WeightSpec stretched_exp_v(double kappa, double s, int d = 1, double gamma = 2.0) {
        WeightSpec w;
        w.family = WeightFamily::StretchedExpV;
        w.kappa = kappa;
        w.s = s;
        w.d = d;
        w.exponent = gamma;
        w.validate();
        return w;
    }
    static WeightSpec gaussian_inv(double theta, int d = 1, double gamma = 2.0) {
        WeightSpec w;
        w.family = WeightFamily::GaussianInv;
        w.theta = theta;
        w.d = d;
        w.exponent = gamma;
        w.validate();
        return w;
    }
    static WeightSpec poly_h(double k, int d = 1, double beta = 2.0) {
        WeightSpec w;
        w.family = WeightFamily::PolyH;
        w.k = k;
        w.d = d;
        w.exponent = beta;
        w.validate();
        return w;
    }
    static WeightSpec stretched_exp_h(double kappa, double s, int d = 1, double beta = 2.0) {
        WeightSpec w;
        w.family = WeightFamily::StretchedExpH;
        w.kappa = kappa;
        w.s = s;
        w.d = d;
        w.exponent = beta;
        w.validate();
        return w;
    }

    bool velocity_family() const {
        return family == WeightFamily::PolyV || family == WeightFamily::StretchedExpV ||
               family == WeightFamily::GaussianInv;
    }

    void validate() const {
        if (d < 1 || d > 2) throw ParameterError("weight: d must be 1 or 2");
        if (exponent < 1.0)
            throw ParameterError("weight: paired exponent (gamma/beta) must be >= 1");
        switch (family) {
            case WeightFamily::PolyV:
            case WeightFamily::PolyH:
                if (k <= 0.0) throw ParameterError("weight: polynomial family requires k > 0");
                break;
            case WeightFamily::StretchedExpV: {
                if (kappa <= 0.0) throw ParameterError("weight: stretched exp requires kappa > 0");
                if (s <= 0.0) throw ParameterError("weight: stretched exp requires s > 0");
                const double gamma = exponent;
                const bool range_ok = (s >= 2.0 - gamma) && (s < gamma);
                const bool border_ok = (s == gamma) && (kappa < 1.0 / gamma);
                if (!range_ok && !border_ok)
                    throw ParameterError(
                        "weight: stretched exp requires s in [2-gamma, gamma) with s > 0, "
                        "or s = gamma with kappa < 1/gamma");
                break;
            }
            case WeightFamily::GaussianInv:
                if (theta <= 0.0 || theta >= 2.0)
                    throw ParameterError("weight: gaussian_inv requires theta in (0, 2)");
                break;
            case WeightFamily::StretchedExpH:
                if (kappa <= 0.0) throw ParameterError("weight: stretched exp requires kappa > 0");
                if (s <= 0.0 || s > 1.0)
                    throw ParameterError("weight: H-based stretched exp requires s in (0, 1]");
                if (s == 1.0 && kappa >= 1.0)
                    throw ParameterError("weight: H-based stretched exp with s = 1 requires kappa < 1");
                break;
        }
    }

    /// Effective (kappa, k, s) triple of the velocity families in the unified
    /// symbol calculus: polynomial weights read as (1, k, 0), stretched
    /// exponentials as (kappa, s, s), and the inverse-Gaussian weight as the
    /// stretched exponential (theta/(2 gamma), gamma, gamma).
    struct Unified {
        double kap, kk, ss;
    };
    Unified unified() const {
        switch (family) {
            case WeightFamily::PolyV: return {1.0, k, 0.0};
            case WeightFamily::StretchedExpV: return {kappa, s, s};
            case WeightFamily::GaussianInv: return {theta / (2.0 * exponent), exponent, exponent};
            default:
                throw CapabilityError("unified symbol calculus applies to velocity weights only");
        }
    }

    double hamiltonian(const PhasePoint& p) const {
        const double beta = exponent;
        return 1.0 + std::pow(bracket(p.xnorm2()), beta) / beta + 0.5 * p.vnorm2();
    }

    /// m at a phase-space point; always >= 1.
    double operator()(const PhasePoint& p) const {
        switch (family) {
            case WeightFamily::PolyV:
                return std::pow(bracket(p.vnorm2()), k);
            case WeightFamily::StretchedExpV:
                return std::exp(kappa * std::pow(bracket(p.vnorm2()), s));
            case WeightFamily::GaussianInv: {
                const double gamma = exponent;
                const double br = std::pow(bracket(p.vnorm2()), gamma);
                return std::exp(theta / (2.0 * gamma) * (br - 1.0));
            }
            case WeightFamily::PolyH:
                return std::pow(hamiltonian(p), k);
            case WeightFamily::StretchedExpH:
                return std::exp(kappa * std::pow(hamiltonian(p), s));
        }
        return 1.0; // unreachable
    }

    Vector on_grid(const Grid& g) const {
        Vector m = g.evaluate([this](const PhasePoint& p) { return (*this)(p); });
        if (!m.allFinite()) throw RangeError("weight overflows on grid; shrink V_max/X_max or the weight");
        return m;
    }

    std::string describe() const {
        std::ostringstream os;
        os << to_string(family);
        switch (family) {
            case WeightFamily::PolyV:
            case WeightFamily::PolyH: os << "(k=" << k << ")"; break;
            case WeightFamily::StretchedExpV:
            case WeightFamily::StretchedExpH: os << "(kappa=" << kappa << ",s=" << s << ")"; break;
            case WeightFamily::GaussianInv: os << "(theta=" << theta << ")"; break;
        }
        return os.str();
    }
};

/// Decay abscissa a_sigma(p, m) of the dissipative part in W^{sigma,p}(m).
/// Raises AdmissibilityError naming the violated constraint when the weight is
/// not confining enough for (sigma, p, gamma). H-based weights have no
/// tabulated abscissa; their admissible rates are obtained by certification.
inline double abscissa(int sigma, double p, const WeightSpec& w, double gamma, int d) {
    if (sigma < -1 || sigma > 1) throw ParameterError("abscissa: sigma must be in {-1,0,1}");
    if (p < 1.0) throw ParameterError("abscissa: p must be in [1, inf]");
    w.validate();
    if (!w.velocity_family())
        throw CapabilityError(
            "abscissa: no closed form for H-based weights; use drift certification");
    const double pinv = std::isinf(p) ? 0.0 : 1.0 / p;
    const double as = std::abs(sigma);

    if (w.family == WeightFamily::PolyV) {
        if (gamma < 2.0)
            throw AdmissibilityError("abscissa: polynomial weights require gamma >= 2");
        const double kmin = as + as * std::sqrt(double(d)) * (gamma - 2.0) +
                            (1.0 - pinv) * (d + gamma - 2.0);
        if (w.k <= kmin) {
            std::ostringstream os;
            os << "abscissa: polynomial weight needs k > |sigma| + |sigma| sqrt(d) (gamma-2)"
                  " + (1-1/p)(d+gamma-2) = " << kmin << ", got k = " << w.k;
            throw AdmissibilityError(os.str());
        }
        if (gamma == 2.0) return as + (1.0 - pinv) * d - w.k;
        return kNegInf;
    }

    // Stretched-exponential (and inverse-Gaussian) case: constraints already
    // hold by validate() except the pairing with gamma.
    const auto u = w.unified();
    const double s = u.ss, kappa = u.kap;
    const bool range_ok = (s >= 2.0 - gamma) && (s < gamma) && (s > 0.0);
    const bool border_ok = (s == gamma) && (kappa < 1.0 / gamma);
    if (!range_ok && !border_ok) {
        std::ostringstream os;
        os << "abscissa: stretched-exp weight needs s in [2-gamma, gamma) with s > 0 "
              "(or s = gamma, kappa < 1/gamma); got s = " << s << ", kappa = " << kappa
           << ", gamma = " << gamma;
        throw AdmissibilityError(os.str());
    }
    if (gamma == 1.0 && s == 1.0) return kappa * kappa - kappa;
    if (gamma + s == 2.0 && s < gamma) return -kappa * s;
    return kNegInf;
}

} // namespace hypolab
