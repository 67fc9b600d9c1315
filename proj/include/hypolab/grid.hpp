#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hypolab/errors.hpp"

namespace hypolab {

using Vector = Eigen::VectorXd;

/// A point in phase space. Unused components stay zero; the active
/// dimensionality is carried by the caller.
struct PhasePoint {
    std::array<double, 2> x{0.0, 0.0};
    std::array<double, 2> v{0.0, 0.0};

    double vnorm2() const { return v[0] * v[0] + v[1] * v[1]; }
    double xnorm2() const { return x[0] * x[0] + x[1] * x[1]; }
    double xv() const { return x[0] * v[0] + x[1] * v[1]; }
};

inline double bracket(double r2) { return std::sqrt(1.0 + r2); } // <v> from |v|^2

/// One coordinate axis: periodic (torus) axes carry nodes 0..n-1 at lo + i*h,
/// truncated axes are cell-centred finite-volume axes on [lo, hi].
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int n = 0;
    bool periodic = false;

    double h() const { return (hi - lo) / n; }
    double node(int i) const {
        return periodic ? lo + i * h() : lo + (i + 0.5) * h();
    }
    double measure() const { return hi - lo; }
};

/// Tensor-product phase-space grid. The x axes (if any) come first, then the
/// v axes. Flattened index is x-fastest: idx = (..((iv2)*Nv1 + iv1)*Nx + ix..),
/// i.e. the first listed axis varies fastest.
class Grid {
public:
    Grid() = default;
    Grid(std::vector<Axis> axes, int n_x_axes)
        : axes_(std::move(axes)), n_x_axes_(n_x_axes) {
        for (const auto& ax : axes_) {
            if (ax.n < 1) throw ParameterError("grid axis must have n >= 1");
        }
    }

    static Grid velocity_1d(int nv, double vmax) {
        return Grid({Axis{-vmax, vmax, nv, false}}, 0);
    }
    static Grid velocity_2d(int nv, double vmax) {
        Axis a{-vmax, vmax, nv, false};
        return Grid({a, a}, 0);
    }
    /// (x, v) grid for the torus model; x in [0, 1) periodic (unit volume).
    static Grid torus_1d(int nx, int nv, double vmax) {
        return Grid({Axis{0.0, 1.0, nx, true}, Axis{-vmax, vmax, nv, false}}, 1);
    }
    /// (x, v) grid for the confined model; both axes truncated.
    static Grid plane_1d(int nx, double xmax, int nv, double vmax) {
        return Grid({Axis{-xmax, xmax, nx, false}, Axis{-vmax, vmax, nv, false}}, 1);
    }

    const std::vector<Axis>& axes() const { return axes_; }
    const Axis& axis(int k) const { return axes_[k]; }
    int n_axes() const { return static_cast<int>(axes_.size()); }
    int n_x_axes() const { return n_x_axes_; }
    int n_v_axes() const { return n_axes() - n_x_axes_; }

    Eigen::Index size() const {
        Eigen::Index s = 1;
        for (const auto& ax : axes_) s *= ax.n;
        return s;
    }

    /// Quadrature weight of one cell (uniform: product of spacings).
    double cell_volume() const {
        double w = 1.0;
        for (const auto& ax : axes_) w *= ax.h();
        return w;
    }

    double total_measure() const {
        double m = 1.0;
        for (const auto& ax : axes_) m *= ax.measure();
        return m;
    }

    /// Multi-index of a flattened index (first axis fastest).
    std::array<int, 4> unravel(Eigen::Index idx) const {
        std::array<int, 4> mi{0, 0, 0, 0};
        for (int k = 0; k < n_axes(); ++k) {
            mi[k] = static_cast<int>(idx % axes_[k].n);
            idx /= axes_[k].n;
        }
        return mi;
    }

    Eigen::Index ravel(const std::array<int, 4>& mi) const {
        Eigen::Index idx = 0;
        for (int k = n_axes() - 1; k >= 0; --k) idx = idx * axes_[k].n + mi[k];
        return idx;
    }

    PhasePoint point(Eigen::Index idx) const {
        const auto mi = unravel(idx);
        PhasePoint p;
        for (int k = 0; k < n_axes(); ++k) {
            const double c = axes_[k].node(mi[k]);
            if (k < n_x_axes_) p.x[static_cast<std::size_t>(k)] = c;
            else p.v[static_cast<std::size_t>(k - n_x_axes_)] = c;
        }
        return p;
    }

    /// Evaluate a pointwise function of the phase point on the whole grid.
    template <typename F>
    Vector evaluate(F&& f) const {
        Vector out(size());
        for (Eigen::Index i = 0; i < size(); ++i) out[i] = f(point(i));
        return out;
    }

    /// Quadrature of a grid function (the "mass" integral when f is a density).
    double integrate(const Vector& f) const { return cell_volume() * f.sum(); }

private:
    std::vector<Axis> axes_;
    int n_x_axes_ = 0;
};

/// Centered-difference derivative of a grid function along axis k
/// (periodic wrap on torus axes, one-sided at truncated boundaries).
inline Vector grid_derivative(const Grid& g, const Vector& f, int k) {
    const auto& ax = g.axis(k);
    const double h = ax.h();
    Vector out(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        auto mi = g.unravel(i);
        const int j = mi[k];
        if (ax.periodic) {
            auto mip = mi, mim = mi;
            mip[k] = (j + 1) % ax.n;
            mim[k] = (j - 1 + ax.n) % ax.n;
            out[i] = (f[g.ravel(mip)] - f[g.ravel(mim)]) / (2 * h);
        } else if (j == 0) {
            auto mip = mi;
            mip[k] = 1;
            out[i] = (f[g.ravel(mip)] - f[i]) / h;
        } else if (j == ax.n - 1) {
            auto mim = mi;
            mim[k] = j - 1;
            out[i] = (f[i] - f[g.ravel(mim)]) / h;
        } else {
            auto mip = mi, mim = mi;
            mip[k] = j + 1;
            mim[k] = j - 1;
            out[i] = (f[g.ravel(mip)] - f[g.ravel(mim)]) / (2 * h);
        }
    }
    return out;
}

} // namespace hypolab
