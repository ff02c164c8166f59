#include "fraclane/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace fraclane {

double dist(const Point& a, const Point& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double norm2(const Point& a) { return std::hypot(a[0], a[1]); }

double Grid::volume() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double Grid::cell_width() const {
    if (dim == 1) return 2.0 * radius / resolution();
    double w = 0.0;
    for (double wi : weights) w = std::max(w, std::sqrt(wi));
    return w;
}

int Grid::nearest_node(const Point& y) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < resolution(); ++i) {
        double d = dist(nodes[static_cast<std::size_t>(i)], y);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

GridPtr build_grid(int dim, double radius, int resolution) {
    if (dim < 1) throw std::invalid_argument("build_grid: dim must be >= 1");
    if (dim > 2) throw std::invalid_argument("build_grid: dim > 2 not supported");
    if (radius <= 0.0) throw std::invalid_argument("build_grid: radius must be positive");
    if (resolution < 8) throw std::invalid_argument("build_grid: resolution below 8");

    auto g = std::make_shared<Grid>();
    g->dim = dim;
    g->radius = radius;

    if (dim == 1) {
        const int n = resolution;
        const double h = 2.0 * radius / n;
        g->nodes.reserve(n);
        g->weights.assign(n, h);
        for (int i = 0; i < n; ++i) {
            double x = -radius + (i + 0.5) * h;
            g->nodes.push_back({x, 0.0});
            g->delta.push_back(radius - std::abs(x));
        }
        return g;
    }

    // dim == 2: rings of equal-area sectors. Ring k in [k,k+1]*R/m carries
    // c*(2k+1) sectors so every cell has area pi R^2 / (c m^2) and the areas
    // tile the disk exactly.
    const int sectors_per_unit = 3;
    int m = std::max(2, static_cast<int>(std::lround(
                            std::sqrt(static_cast<double>(resolution) / sectors_per_unit))));
    const double pi = std::numbers::pi;
    for (int k = 0; k < m; ++k) {
        double r_in = radius * k / m;
        double r_out = radius * (k + 1) / m;
        double ring_area = pi * (r_out * r_out - r_in * r_in);
        int nk = sectors_per_unit * (2 * k + 1);
        double cell_area = ring_area / nk;
        double rc = 0.5 * (r_in + r_out);
        for (int j = 0; j < nk; ++j) {
            double th0 = 2.0 * pi * j / nk;
            double th1 = 2.0 * pi * (j + 1) / nk;
            g->nodes.push_back({rc * std::cos(0.5 * (th0 + th1)),
                                rc * std::sin(0.5 * (th0 + th1))});
            g->weights.push_back(cell_area);
            g->delta.push_back(radius - rc);
            g->bounds2d.push_back({r_in, r_out, th0, th1});
        }
    }
    return g;
}

GridFunction::GridFunction(GridPtr g, double fill)
    : grid(std::move(g)), values(grid ? grid->nodes.size() : 0, fill) {}

GridFunction::GridFunction(GridPtr g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
    if (grid && values.size() != grid->nodes.size())
        throw std::invalid_argument("GridFunction: value count != grid resolution");
}

double GridFunction::max() const {
    return *std::max_element(values.begin(), values.end());
}

double GridFunction::min() const {
    return *std::min_element(values.begin(), values.end());
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

bool GridFunction::all_finite() const {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
}

double max_norm_diff(const GridFunction& f, const GridFunction& g) {
    if (f.size() != g.size())
        throw std::invalid_argument("max_norm_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        m = std::max(m, std::abs(f.values[i] - g.values[i]));
    return m;
}

GridFunction pow_clamped(const GridFunction& f, double e, long* clamp_count) {
    GridFunction out(f.grid);
    long clamped = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double v = f.values[i];
        if (v < 0.0) {
            v = 0.0;
            ++clamped;
        }
        out.values[i] = std::pow(v, e);
    }
    if (clamp_count) *clamp_count += clamped;
    return out;
}

double norm_weighted(const GridFunction& f, double kappa, double weight_exponent) {
    if (kappa < 1.0) throw std::invalid_argument("norm_weighted: kappa must be >= 1");
    if (!f.all_finite()) throw std::invalid_argument("norm_weighted: non-finite values");
    const Grid& g = *f.grid;
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += std::pow(std::abs(f.values[i]), kappa) *
               std::pow(g.delta[i], weight_exponent) * g.weights[i];
    return std::pow(acc, 1.0 / kappa);
}

double weak_quasinorm(const GridFunction& f, double kappa, const GridFunction& weight) {
    if (kappa <= 1.0) throw std::invalid_argument("weak_quasinorm: kappa must be > 1");
    if (f.size() != weight.size())
        throw std::invalid_argument("weak_quasinorm: weight size mismatch");
    const Grid& g = *f.grid;
    const double kprime = kappa / (kappa - 1.0);

    // Sort |f| descending and scan the super-level prefixes, grouping ties.
    std::vector<std::size_t> idx(f.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(f.values[a]) > std::abs(f.values[b]);
    });

    double best = 0.0;
    double sum_f = 0.0;   // int_E |f| dlambda
    double sum_l = 0.0;   // lambda(E)
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::size_t i = idx[k];
        double fv = std::abs(f.values[i]);
        if (fv == 0.0) break;
        double lw = weight.values[i] * g.weights[i];
        if (lw < 0.0) throw std::invalid_argument("weak_quasinorm: negative weight");
        sum_f += fv * lw;
        sum_l += lw;
        bool tie_with_next =
            k + 1 < idx.size() && std::abs(f.values[idx[k + 1]]) == fv;
        if (tie_with_next) continue;
        if (sum_l > 0.0)
            best = std::max(best, sum_f / std::pow(sum_l, 1.0 / kprime));
    }
    return best;
}

Measure Measure::zero() { return Measure{}; }

Measure Measure::from_density(GridFunction f) {
    Measure m;
    m.density = std::move(f);
    return m;
}

Measure Measure::dirac(Point location, double mass) {
    Measure m;
    m.atoms.push_back({location, mass});
    return m;
}

bool Measure::is_zero() const {
    if (!atoms.empty()) return false;
    if (!density) return true;
    return density->max_abs() == 0.0;
}

void Measure::validate(const Grid& grid) const {
    if (density) {
        if (density->size() != grid.nodes.size())
            throw std::invalid_argument("Measure: density size != grid resolution");
        if (density->min() < 0.0)
            throw std::invalid_argument("Measure: density must be nonnegative");
    }
    for (const Atom& a : atoms) {
        if (a.mass <= 0.0) throw std::invalid_argument("Measure: atom mass must be positive");
        if (norm2(a.location) >= grid.radius)
            throw std::invalid_argument("Measure: atom outside the open ball");
    }
}

double Measure::delta_mass(const Grid& grid, double s) const {
    double acc = 0.0;
    if (density)
        for (std::size_t i = 0; i < density->size(); ++i)
            acc += density->values[i] * std::pow(grid.delta[i], s) * grid.weights[i];
    for (const Atom& a : atoms)
        acc += a.mass * std::pow(grid.radius - norm2(a.location), s);
    return acc;
}

double Measure::total_mass(const Grid& grid) const {
    double acc = 0.0;
    if (density)
        for (std::size_t i = 0; i < density->size(); ++i)
            acc += density->values[i] * grid.weights[i];
    for (const Atom& a : atoms) acc += a.mass;
    return acc;
}

Measure Measure::scaled(double factor) const {
    Measure out = *this;
    if (out.density)
        for (double& v : out.density->values) v *= factor;
    for (Atom& a : out.atoms) a.mass *= factor;
    return out;
}

Measure Measure::normalized(const Grid& grid, double s) const {
    double m = delta_mass(grid, s);
    if (m <= 0.0) throw std::invalid_argument("Measure::normalized: zero measure");
    return scaled(1.0 / m);
}

GridFunction Measure::as_density(GridPtr grid) const {
    GridFunction out = density ? *density : GridFunction(grid, 0.0);
    if (!out.grid) out = GridFunction(grid, 0.0);
    for (const Atom& a : atoms) {
        int i = grid->nearest_node(a.location);
        out.values[static_cast<std::size_t>(i)] +=
            a.mass / grid->weights[static_cast<std::size_t>(i)];
    }
    return out;
}

SystemParams SystemParams::make(int dim, double s, double p, double q,
                                double rho, double tau) {
    if (s <= 0.0 || s >= 1.0) throw std::invalid_argument("SystemParams: s must be in (0,1)");
    if (dim <= 2.0 * s) throw std::invalid_argument("SystemParams: requires N > 2s");
    if (p <= 0.0 || q <= 0.0) throw std::invalid_argument("SystemParams: p, q must be positive");
    if (rho < 0.0 || tau < 0.0) throw std::invalid_argument("SystemParams: rho, tau must be >= 0");
    SystemParams sp{dim, s, p, q, rho, tau, false};
    if (p > q) sp = sp.swapped_roles();
    return sp;
}

SystemParams SystemParams::swapped_roles() const {
    SystemParams out = *this;
    std::swap(out.p, out.q);
    std::swap(out.rho, out.tau);
    out.swapped = !swapped;
    return out;
}

double SystemParams::aNs() const {
    const double pi = std::numbers::pi;
    return std::pow(2.0, 2.0 * s) * s * std::tgamma(dim / 2.0 + s) /
           (std::pow(pi, dim / 2.0) * std::tgamma(1.0 - s));
}

}  // namespace fraclane
