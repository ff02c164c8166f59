#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

namespace fraclane {

/// Points always carry two coordinates; 1-D domains use y = 0.
using Point = std::array<double, 2>;

double dist(const Point& a, const Point& b);
double norm2(const Point& a);

/// Quadrature mesh on the ball B(0, radius): interval for dim = 1, disk for
/// dim = 2. Nodes are cell centers, weights are exact cell measures, delta is
/// the exact boundary distance radius - |x|. Immutable after construction.
struct Grid {
    int dim = 1;
    double radius = 1.0;
    std::vector<Point> nodes;
    std::vector<double> weights;
    std::vector<double> delta;
    /// dim = 2 only: polar cell bounds {r_in, r_out, theta0, theta1}.
    std::vector<std::array<double, 4>> bounds2d;

    int resolution() const { return static_cast<int>(nodes.size()); }
    double volume() const;           // sum of weights
    double cell_width() const;       // representative cell extent (max)
    int nearest_node(const Point& y) const;
};

using GridPtr = std::shared_ptr<const Grid>;

/// dim = 1: uniform cell-centered partition of (-R, R), resolution cells.
/// dim = 2: equal-area polar layout; resolution is a target node count and the
/// actual count is reported by the returned grid.
GridPtr build_grid(int dim, double radius, int resolution);

/// Nodal values over a fixed grid.
struct GridFunction {
    GridPtr grid;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(GridPtr g, double fill = 0.0);
    GridFunction(GridPtr g, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double max() const;
    double min() const;
    double max_abs() const;
    bool all_finite() const;
};

/// max_i |f_i - g_i|
double max_norm_diff(const GridFunction& f, const GridFunction& g);

/// Nodewise t -> max(t,0)^e with a count of clamped negatives.
GridFunction pow_clamped(const GridFunction& f, double e, long* clamp_count = nullptr);

/// Discrete L^kappa(Omega, delta^weight_exponent) norm:
/// (sum_i |f_i|^kappa * delta_i^weight_exponent * w_i)^(1/kappa).
double norm_weighted(const GridFunction& f, double kappa, double weight_exponent);

/// Weak-L^kappa (Marcinkiewicz) quasi-norm against the measure with nodal
/// weights lambda_i = weight_i * w_i: the maximum over the super-level sets
/// E_t = {|f| >= t}, t over the distinct values of |f|, of
/// int_E |f| dlambda / lambda(E)^(1/kappa'), kappa' = kappa/(kappa-1).
/// Super-level sets are optimal among all node subsets (see tests).
double weak_quasinorm(const GridFunction& f, double kappa, const GridFunction& weight);

/// Point mass strictly inside the ball.
struct Atom {
    Point location{0.0, 0.0};
    double mass = 0.0;
};

/// Positive measure: optional density on the grid plus finitely many atoms.
/// Atoms stay exact where possible (Green application uses the kernel column);
/// as_density() mollifies each atom onto its containing cell, mass-preserving,
/// for code paths that need a plain grid density.
struct Measure {
    std::optional<GridFunction> density;
    std::vector<Atom> atoms;

    static Measure zero();
    static Measure from_density(GridFunction f);
    static Measure dirac(Point location, double mass);

    bool is_zero() const;
    void validate(const Grid& grid) const;

    /// int delta^s dmu over the given grid.
    double delta_mass(const Grid& grid, double s) const;
    /// Total mass int dmu.
    double total_mass(const Grid& grid) const;
    /// Scaled copy with unit delta^s mass.
    Measure normalized(const Grid& grid, double s) const;
    Measure scaled(double factor) const;
    /// Density representation (atoms mollified onto their containing cells).
    GridFunction as_density(GridPtr grid) const;
};

/// Problem parameters (N, s, p, q, rho, tau) with the derived exponents.
/// make() canonicalizes to p <= q by swapping the roles of the two equations
/// (p<->q, rho<->tau) and records the swap.
struct SystemParams {
    int dim = 1;
    double s = 0.25;
    double p = 1.2;
    double q = 1.4;
    double rho = 0.0;
    double tau = 0.0;
    bool swapped = false;

    static SystemParams make(int dim, double s, double p, double q,
                             double rho = 0.0, double tau = 0.0);

    /// Subcritical exponent (N+s)/(N-s).
    double Ns() const { return (dim + s) / (dim - s); }
    /// q(p - Ns + 1).
    double ts() const { return q * (p - Ns() + 1.0); }
    /// Operator normalization 2^(2s) s Gamma(N/2+s) / (pi^(N/2) Gamma(1-s)).
    double aNs() const;

    bool subcritical_q() const { return q < Ns(); }
    bool subcritical_mixed() const { return q * (p + 1.0) / (q + 1.0) < Ns(); }
    bool superlinear() const { return p * q > 1.0; }

    /// Role swap of the two equations; involutive.
    SystemParams swapped_roles() const;
};

}  // namespace fraclane
