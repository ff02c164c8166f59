#include "fraclane/green.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace fraclane {

namespace {

std::function<void(const std::string&)> g_warning_handler;

// ---- adaptive Gauss-Kronrod 7/15 ----------------------------------------

constexpr double kGK_x[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr double kGK_wk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kGK_wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <typename F>
void gk15(const F& f, double a, double b, double& result, double& err) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double ik = kGK_wk[7] * f(c);
    double ig = kGK_wg[3] * f(c);
    for (int j = 0; j < 7; ++j) {
        double fa = f(c - h * kGK_x[j]);
        double fb = f(c + h * kGK_x[j]);
        ik += kGK_wk[j] * (fa + fb);
        if (j % 2 == 1) ig += kGK_wg[j / 2] * (fa + fb);
    }
    result = ik * h;
    err = std::abs(ik - ig) * h;
}

template <typename F>
double adaptive_gk(const F& f, double a, double b, double rel_tol, int depth = 0) {
    double result, err;
    gk15(f, a, b, result, err);
    if (depth >= 40 || err <= rel_tol * std::max(std::abs(result), 1e-300))
        return result;
    double m = 0.5 * (a + b);
    return adaptive_gk(f, a, m, rel_tol, depth + 1) +
           adaptive_gk(f, m, b, rel_tol, depth + 1);
}

// ---- kernel pieces --------------------------------------------------------

double kernel_constant(int N, double s) {
    const double pi = std::numbers::pi;
    double gs = std::tgamma(s);
    return std::tgamma(N / 2.0) / (std::pow(4.0, s) * std::pow(pi, N / 2.0) * gs * gs);
}

// r0 in the unit-ball normalization; scale-free in the radius.
double kernel_r0(const Point& x, const Point& y, double R, double d) {
    double ax = (R - norm2(x)) * (R + norm2(x));  // R^2 - |x|^2 without cancellation
    double ay = (R - norm2(y)) * (R + norm2(y));
    return ax * ay / (R * R * d * d);
}

struct KernelCache {
    int N;
    double s;
    double k;        // k(N,s)
    double Bc;       // complete integral
    double b;        // N/2 - s
};

KernelCache make_cache(const SystemParams& p) {
    KernelCache c;
    c.N = p.dim;
    c.s = p.s;
    c.k = kernel_constant(p.dim, p.s);
    c.Bc = detail::complete_kernel_integral(p.s, p.dim);
    c.b = p.dim / 2.0 - p.s;
    return c;
}

double kernel_from_cache(const KernelCache& c, const Point& x, const Point& y, double R) {
    double d = dist(x, y);
    double r0 = kernel_r0(x, y, R, d);
    return c.k * std::pow(d, 2.0 * c.s - c.N) *
           detail::incomplete_kernel_integral(c.s, c.N, r0);
}

// Finite limit of G(x,y) - k Bc |x-y|^(2s-N) as y -> x.
double remainder_limit(const KernelCache& c, const Point& x, double R) {
    double ax = (R - norm2(x)) * (R + norm2(x));
    return -c.k * std::pow(ax / R, 2.0 * c.s - c.N) / c.b;
}

double remainder_at(const KernelCache& c, const Point& x, const Point& y, double R) {
    double d = dist(x, y);
    if (d == 0.0) return remainder_limit(c, x, R);
    double r0 = kernel_r0(x, y, R, d);
    double tail = c.Bc - detail::incomplete_kernel_integral(c.s, c.N, r0);
    return -c.k * std::pow(d, 2.0 * c.s - c.N) * tail;
}

// ---- cell integrals -------------------------------------------------------

struct Cell1D {
    double lo, hi;
};

Cell1D cell1d(const Grid& g, int j) {
    double h = g.weights[static_cast<std::size_t>(j)];
    double xc = g.nodes[static_cast<std::size_t>(j)][0];
    return {xc - 0.5 * h, xc + 0.5 * h};
}

bool point_in_cell(const Grid& g, int j, const Point& x) {
    if (g.dim == 1) {
        auto c = cell1d(g, j);
        return x[0] >= c.lo && x[0] <= c.hi;
    }
    const auto& b = g.bounds2d[static_cast<std::size_t>(j)];
    double r = norm2(x);
    if (r < b[0] || r > b[1]) return false;
    double th = std::atan2(x[1], x[0]);
    if (th < 0.0) th += 2.0 * std::numbers::pi;
    return th >= b[2] && th <= b[3];
}

// Singular cell in 1D (x inside or within half a width of the cell):
// closed-form radial integral of the |x-y|^(2s-1) part plus a subdivided
// midpoint rule on the bounded remainder.
double singular_cell_1d(const KernelCache& c, const Grid& g, const Point& x, int j,
                        int subcells) {
    auto cl = cell1d(g, j);
    double R = g.radius;
    double e = 2.0 * c.s;
    double analytic;
    if (x[0] < cl.lo)
        analytic = (std::pow(cl.hi - x[0], e) - std::pow(cl.lo - x[0], e)) / e;
    else if (x[0] > cl.hi)
        analytic = (std::pow(x[0] - cl.lo, e) - std::pow(x[0] - cl.hi, e)) / e;
    else
        analytic = (std::pow(x[0] - cl.lo, e) + std::pow(cl.hi - x[0], e)) / e;
    analytic *= c.k * c.Bc;
    double h = (cl.hi - cl.lo) / subcells;
    double rem = 0.0;
    for (int m = 0; m < subcells; ++m) {
        Point y{cl.lo + (m + 0.5) * h, 0.0};
        rem += remainder_at(c, x, y, R) * h;
    }
    return analytic + rem;
}

double near_cell_1d(const KernelCache& c, const Grid& g, const Point& x, int j,
                    int subcells) {
    auto cl = cell1d(g, j);
    double h = (cl.hi - cl.lo) / subcells;
    double acc = 0.0;
    for (int m = 0; m < subcells; ++m) {
        Point y{cl.lo + (m + 0.5) * h, 0.0};
        acc += kernel_from_cache(c, x, y, g.radius) * h;
    }
    return acc;
}

// 2D cells: 8x8 polar subpatches; the subpatch containing x gets the
// equal-area-disk closed form for the singular factor.
double cell_2d(const KernelCache& c, const Grid& g, const Point& x, int j,
               bool self, int split) {
    const auto& b = g.bounds2d[static_cast<std::size_t>(j)];
    double acc = 0.0;
    for (int ir = 0; ir < split; ++ir) {
        double r0 = b[0] + (b[1] - b[0]) * ir / split;
        double r1 = b[0] + (b[1] - b[0]) * (ir + 1) / split;
        for (int it = 0; it < split; ++it) {
            double t0 = b[2] + (b[3] - b[2]) * it / split;
            double t1 = b[2] + (b[3] - b[2]) * (it + 1) / split;
            double area = 0.5 * (r1 * r1 - r0 * r0) * (t1 - t0);
            double rm = 0.5 * (r0 + r1), tm = 0.5 * (t0 + t1);
            Point y{rm * std::cos(tm), rm * std::sin(tm)};
            bool contains = self && norm2(x) >= r0 && norm2(x) <= r1;
            if (contains) {
                double th = std::atan2(x[1], x[0]);
                if (th < 0.0) th += 2.0 * std::numbers::pi;
                contains = th >= t0 && th <= t1;
            }
            if (contains) {
                double a = std::sqrt(area / std::numbers::pi);
                acc += c.k * c.Bc * std::numbers::pi * std::pow(a, 2.0 * c.s) / c.s;
                acc += remainder_limit(c, x, g.radius) * area;
            } else {
                acc += kernel_from_cache(c, x, y, g.radius) * area;
            }
        }
    }
    return acc;
}

double cell_diameter(const Grid& g, int j) {
    if (g.dim == 1) return g.weights[static_cast<std::size_t>(j)];
    const auto& b = g.bounds2d[static_cast<std::size_t>(j)];
    return std::max(b[1] - b[0], 0.5 * (b[0] + b[1]) * (b[3] - b[2]));
}

// Quadrature tiers. The middle tier extends to a fixed physical radius so the
// far-field composite-midpoint error scales O(h^2) against a fixed boundary
// instead of O(h^(2s)) against a moving one.
double cell_integral(const KernelCache& c, const Grid& g, const Point& x, int j,
                     int subcells) {
    bool inside = point_in_cell(g, j, x);
    double diam = cell_diameter(g, j);
    double d = dist(x, g.nodes[static_cast<std::size_t>(j)]);
    if (g.dim == 1) {
        auto cl = cell1d(g, j);
        double gap = std::max({cl.lo - x[0], x[0] - cl.hi, 0.0});
        if (gap <= 0.5 * diam) return singular_cell_1d(c, g, x, j, subcells);
        if (d <= 4.0 * diam) return near_cell_1d(c, g, x, j, subcells);
        if (d <= 0.08 * g.radius) return near_cell_1d(c, g, x, j, subcells / 4);
        return g.weights[static_cast<std::size_t>(j)] *
               kernel_from_cache(c, x, g.nodes[static_cast<std::size_t>(j)], g.radius);
    }
    int split = std::max(2, static_cast<int>(std::lround(std::sqrt(double(subcells)))));
    if (inside) return cell_2d(c, g, x, j, true, split);
    if (d <= 2.5 * diam) return cell_2d(c, g, x, j, false, split);
    return g.weights[static_cast<std::size_t>(j)] *
           kernel_from_cache(c, x, g.nodes[static_cast<std::size_t>(j)], g.radius);
}

}  // namespace

namespace detail {

double incomplete_kernel_integral(double s, int N, double r0, double tol) {
    if (r0 <= 0.0) return 0.0;
    const double b = N / 2.0 - s;
    if (r0 <= 1.0) {
        // t = u^(1/s) removes the t^(s-1) endpoint singularity.
        double umax = std::pow(r0, s);
        auto f = [&](double u) { return std::pow(1.0 + std::pow(u, 1.0 / s), -N / 2.0); };
        return adaptive_gk(f, 0.0, umax, tol) / s;
    }
    // Complete value minus the tail; w = 1/t, then w = sigma^(1/b).
    double smax = std::pow(r0, -b);
    auto f = [&](double sg) { return std::pow(1.0 + std::pow(sg, 1.0 / b), -N / 2.0); };
    double tail = adaptive_gk(f, 0.0, smax, tol) / b;
    return complete_kernel_integral(s, N) - tail;
}

double complete_kernel_integral(double s, int N) {
    return std::tgamma(s) * std::tgamma(N / 2.0 - s) / std::tgamma(N / 2.0);
}

}  // namespace detail

double kernel_eval(const Point& x, const Point& y, const SystemParams& params,
                   double radius) {
    if (norm2(x) >= radius || norm2(y) >= radius)
        throw std::invalid_argument("kernel_eval: point outside the open ball");
    double d = dist(x, y);
    if (d == 0.0) throw std::invalid_argument("kernel_eval: coincident points");
    KernelCache c = make_cache(params);
    return kernel_from_cache(c, x, y, radius);
}

GreenMatrix assemble_green(GridPtr grid, const SystemParams& params, Execution exec) {
    if (grid->dim != params.dim)
        throw std::invalid_argument("assemble_green: grid/params dimension mismatch");
    const Grid& g = *grid;
    const int n = g.resolution();
    KernelCache cache = make_cache(params);

    GreenMatrix G;
    G.grid = grid;
    G.s = params.s;
    G.entries.resize(n, n);

    std::vector<double> self_err(static_cast<std::size_t>(n), 0.0);
    const int sub = G.meta.singular_subcells;

    parallel_for(static_cast<std::size_t>(n), exec, [&](std::size_t i) {
        const Point& xi = g.nodes[i];
        for (int j = 0; j < n; ++j)
            G.entries(static_cast<int>(i), j) =
                cell_integral(cache, g, xi, j, sub);
        // Self-cell refinement estimate: difference against half the subcells.
        double coarse = cell_integral(cache, g, xi, static_cast<int>(i), sub / 2);
        self_err[i] = std::abs(G.entries(static_cast<int>(i), static_cast<int>(i)) - coarse);
    });

    double aerr = 0.0, sdef = 0.0;
    for (int i = 0; i < n; ++i) {
        aerr = std::max(aerr, self_err[static_cast<std::size_t>(i)]);
        for (int j = 0; j < i; ++j) {
            double kij = G.entries(i, j) / g.weights[static_cast<std::size_t>(j)];
            double kji = G.entries(j, i) / g.weights[static_cast<std::size_t>(i)];
            sdef = std::max(sdef, std::abs(kij - kji));
        }
        for (int j = 0; j < n; ++j)
            if (!(G.entries(i, j) > 0.0))
                throw numeric_error("assemble_green: nonpositive entry");
    }
    G.meta.assembly_error = aerr;
    G.meta.symmetry_defect = sdef;
    return G;
}

GridFunction apply_green(const GreenMatrix& G, const GridFunction& density) {
    const int n = G.size();
    if (static_cast<int>(density.size()) != n)
        throw std::invalid_argument("apply_green: density size mismatch");
    Eigen::Map<const Eigen::VectorXd> f(density.values.data(), n);
    Eigen::VectorXd out = G.entries * f;
    return GridFunction(G.grid, std::vector<double>(out.data(), out.data() + n));
}

GridFunction apply_green(const GreenMatrix& G, const Measure& m,
                         const SystemParams& params) {
    m.validate(*G.grid);
    GridFunction out(G.grid, 0.0);
    if (m.density) {
        GridFunction gd = apply_green(G, *m.density);
        out.values = std::move(gd.values);
    }
    const Grid& g = *G.grid;
    KernelCache cache = make_cache(params);
    for (const Atom& a : m.atoms) {
        int jn = g.nearest_node(a.location);
        double d = dist(a.location, g.nodes[static_cast<std::size_t>(jn)]);
        if (d < 1e-12 * g.cell_width()) {
            // Node collision: mass-preserving cell mollification.
            double scale = a.mass / g.weights[static_cast<std::size_t>(jn)];
            for (int i = 0; i < G.size(); ++i)
                out.values[static_cast<std::size_t>(i)] += scale * G.entries(i, jn);
        } else {
            for (int i = 0; i < G.size(); ++i)
                out.values[static_cast<std::size_t>(i)] +=
                    a.mass * kernel_from_cache(cache, g.nodes[static_cast<std::size_t>(i)],
                                               a.location, g.radius);
        }
    }
    return out;
}

std::vector<double> green_apply_at_points(const Grid& grid, const SystemParams& params,
                                          const std::vector<double>& xs,
                                          const std::vector<double>& density) {
    if (grid.dim != 1)
        throw std::invalid_argument("green_apply_at_points: dim 1 only");
    if (density.size() != grid.nodes.size())
        throw std::invalid_argument("green_apply_at_points: density size mismatch");
    KernelCache cache = make_cache(params);
    std::vector<double> out(xs.size(), 0.0);
    parallel_for(xs.size(), Execution::parallel, [&](std::size_t k) {
        Point x{xs[k], 0.0};
        double acc = 0.0;
        for (int j = 0; j < grid.resolution(); ++j)
            acc += cell_integral(cache, grid, x, j, 64) *
                   density[static_cast<std::size_t>(j)];
        out[k] = acc;
    });
    return out;
}

GridFunction SpectralData::eigenfunction(int k) const {
    std::vector<double> v(phi.rows());
    for (int i = 0; i < phi.rows(); ++i) v[static_cast<std::size_t>(i)] = phi(i, k);
    return GridFunction(grid, std::move(v));
}

SpectralData spectral_decompose(const GreenMatrix& G, int count) {
    const int n = G.size();
    if (count <= 0) count = std::min(n, 200);
    if (count > n) throw std::invalid_argument("spectral_decompose: count > resolution");
    const Grid& g = *G.grid;

    // Symmetrized kernel matrix K_ij ~ G(x_i, x_j), then the similarity
    // transform W^(1/2) K W^(1/2) turns the weighted eigenproblem symmetric.
    Eigen::VectorXd w(n), sqw(n);
    for (int i = 0; i < n; ++i) {
        w(i) = g.weights[static_cast<std::size_t>(i)];
        sqw(i) = std::sqrt(w(i));
    }
    Eigen::MatrixXd K = G.entries * w.cwiseInverse().asDiagonal();
    K = 0.5 * (K + K.transpose()).eval();
    Eigen::MatrixXd S = sqw.asDiagonal() * K * sqw.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success)
        throw numeric_error("spectral_decompose: eigensolver failed");

    SpectralData sd;
    sd.grid = G.grid;
    sd.count = count;
    sd.phi.resize(n, count);
    // Eigen sorts ascending; Green-operator eigenvalues descend as the
    // operator eigenvalues ascend.
    for (int k = 0; k < count; ++k) {
        double green_ev = es.eigenvalues()(n - 1 - k);
        if (!(green_ev > 0.0))
            throw numeric_error("spectral_decompose: weighted Green matrix not SPD");
        sd.eigenvalues.push_back(1.0 / green_ev);
        Eigen::VectorXd phik = es.eigenvectors().col(n - 1 - k).cwiseQuotient(sqw);
        sd.phi.col(k) = phik;
    }
    if (!(sd.eigenvalues.front() > 0.0))
        throw numeric_error("spectral_decompose: lambda_1 <= 0");

    // Sign conventions: phi_1 positive, later modes fixed by the first
    // above-noise nodal value. Makes runs reproducible bit-for-bit.
    {
        double mass = (sd.phi.col(0).array() * w.array()).sum();
        if (mass < 0.0) sd.phi.col(0) = -sd.phi.col(0);
    }
    for (int k = 1; k < count; ++k) {
        double scale = sd.phi.col(k).cwiseAbs().maxCoeff();
        for (int i = 0; i < n; ++i) {
            if (std::abs(sd.phi(i, k)) > 1e-10 * scale) {
                if (sd.phi(i, k) < 0.0) sd.phi.col(k) = -sd.phi.col(k);
                break;
            }
        }
    }
    return sd;
}

Eigen::VectorXd spectral_coeffs(const GridFunction& f, const SpectralData& spec) {
    const int n = static_cast<int>(f.size());
    Eigen::VectorXd wf(n);
    for (int i = 0; i < n; ++i)
        wf(i) = f.values[static_cast<std::size_t>(i)] *
                spec.grid->weights[static_cast<std::size_t>(i)];
    return spec.phi.transpose() * wf;
}

GridFunction spectral_reconstruct(const Eigen::VectorXd& coeffs, const SpectralData& spec) {
    Eigen::VectorXd v = spec.phi * coeffs;
    return GridFunction(spec.grid, std::vector<double>(v.data(), v.data() + v.size()));
}

double l2_inner(const GridFunction& f, const GridFunction& g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += f.values[i] * g.values[i] * f.grid->weights[i];
    return acc;
}

double l2_norm(const GridFunction& f) { return std::sqrt(l2_inner(f, f)); }

double parseval_defect(const GridFunction& f, const SpectralData& spec) {
    double l2 = l2_inner(f, f);
    if (l2 == 0.0) return 0.0;
    Eigen::VectorXd c = spectral_coeffs(f, spec);
    return (l2 - c.squaredNorm()) / l2;
}

double xnorm(const GridFunction& f, const SpectralData& spec) {
    Eigen::VectorXd c = spectral_coeffs(f, spec);
    double l2 = l2_inner(f, f);
    if (l2 > 0.0 && (l2 - c.squaredNorm()) / l2 > 0.01)
        warn("xnorm: Parseval defect above 1% (spectral truncation too aggressive)");
    double acc = 0.0;
    for (int k = 0; k < spec.count; ++k)
        acc += spec.eigenvalues[static_cast<std::size_t>(k)] * c(k) * c(k);
    return std::sqrt(acc);
}

double xinner(const GridFunction& f, const GridFunction& g, const SpectralData& spec) {
    Eigen::VectorXd cf = spectral_coeffs(f, spec);
    Eigen::VectorXd cg = spectral_coeffs(g, spec);
    double acc = 0.0;
    for (int k = 0; k < spec.count; ++k)
        acc += spec.eigenvalues[static_cast<std::size_t>(k)] * cf(k) * cg(k);
    return acc;
}

void set_warning_handler(std::function<void(const std::string&)> handler) {
    g_warning_handler = std::move(handler);
}

void warn(const std::string& message) {
    if (g_warning_handler) {
        g_warning_handler(message);
        return;
    }
    static std::atomic<int> printed{0};
    if (printed.fetch_add(1) < 8) std::fprintf(stderr, "[fraclane] %s\n", message.c_str());
}

void green_save(const GreenMatrix& G, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("green_save: cannot open " + path);
    const char magic[8] = {'F', 'L', 'G', 'M', '1', 0, 0, 0};
    out.write(magic, 8);
    std::int32_t dim = G.grid->dim;
    std::int64_t n = G.size();
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&G.s), sizeof G.s);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&G.meta.assembly_error),
              sizeof G.meta.assembly_error);
    for (int i = 0; i < n; ++i)
        out.write(reinterpret_cast<const char*>(G.entries.row(i).eval().data()),
                  static_cast<std::streamsize>(sizeof(double) * n));
    if (!out) throw std::runtime_error("green_save: write failed");

    nlohmann::json side;
    side["dim"] = G.grid->dim;
    side["radius"] = G.grid->radius;
    side["resolution"] = G.grid->resolution();
    side["s"] = G.s;
    side["assembly_error"] = G.meta.assembly_error;
    side["symmetry_defect"] = G.meta.symmetry_defect;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& p : G.grid->nodes) nodes.push_back({p[0], p[1]});
    side["nodes"] = nodes;
    side["weights"] = G.grid->weights;
    side["delta"] = G.grid->delta;
    nlohmann::json b2 = nlohmann::json::array();
    for (const auto& b : G.grid->bounds2d) b2.push_back({b[0], b[1], b[2], b[3]});
    side["bounds2d"] = b2;
    std::ofstream sj(path + ".json");
    if (!sj) throw std::runtime_error("green_save: cannot open sidecar");
    sj << side.dump(2) << "\n";
}

GreenMatrix green_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("green_load: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 5) != "FLGM1")
        throw std::runtime_error("green_load: bad magic");
    std::int32_t dim;
    std::int64_t n;
    GreenMatrix G;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&G.s), sizeof G.s);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&G.meta.assembly_error),
            sizeof G.meta.assembly_error);
    G.entries.resize(n, n);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double) * n));
        for (int j = 0; j < n; ++j) G.entries(i, j) = row[static_cast<std::size_t>(j)];
    }
    if (!in) throw std::runtime_error("green_load: truncated file");

    std::ifstream sj(path + ".json");
    if (!sj) throw std::runtime_error("green_load: missing sidecar");
    nlohmann::json side = nlohmann::json::parse(sj);
    auto g = std::make_shared<Grid>();
    g->dim = side["dim"].get<int>();
    g->radius = side["radius"].get<double>();
    for (const auto& p : side["nodes"]) g->nodes.push_back({p[0], p[1]});
    g->weights = side["weights"].get<std::vector<double>>();
    g->delta = side["delta"].get<std::vector<double>>();
    for (const auto& b : side["bounds2d"]) g->bounds2d.push_back({b[0], b[1], b[2], b[3]});
    G.meta.symmetry_defect = side["symmetry_defect"].get<double>();
    G.grid = g;
    return G;
}

}  // namespace fraclane
