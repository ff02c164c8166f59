#include "fraclane/linking.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fraclane {

double H_eval(double r, double t, double e) {
    if (t <= 0.0) return 0.0;
    return (std::pow(r + t, e + 1.0) - std::pow(r, e + 1.0) -
            (e + 1.0) * std::pow(r, e) * t) /
           (e + 1.0);
}

double h_eval(double r, double t, double e) {
    if (t <= 0.0) return 0.0;
    return std::pow(r + t, e) - std::pow(r, e);
}

double h_slope(double r, double t, double e) {
    if (t <= 0.0) return 0.0;
    return e * std::pow(r + t, e - 1.0);
}

NonlinearTerms make_nonlinear_terms(const SolveReport& minimal, const SystemParams& params) {
    if (!minimal.converged)
        throw std::invalid_argument("make_nonlinear_terms: needs a converged pair");
    NonlinearTerms t;
    t.p = params.p;
    t.q = params.q;
    t.M = std::max(minimal.u.max(), minimal.v.max()) * (1.0 + 1e-6) + 1e-30;
    double emin = std::min(params.p, params.q);
    if (emin <= 1.0)
        throw std::invalid_argument("make_nonlinear_terms: requires p, q > 1");
    t.theta = 0.5 * (2.0 + emin + 1.0);

    // Smallest ladder T with h(r,t) t - theta H(r,t) > 0 sampled over
    // r in [0, M], t in [T, 1000 T].
    auto superquadratic_from = [&](double T) {
        for (int ir = 0; ir <= 200; ++ir) {
            double r = t.M * ir / 200.0;
            for (int it = 0; it <= 120; ++it) {
                double tt = T * std::pow(1000.0, it / 120.0);
                if (h_eval(r, tt, t.p) * tt - t.theta * H_eval(r, tt, t.p) <= 0.0)
                    return false;
                if (h_eval(r, tt, t.q) * tt - t.theta * H_eval(r, tt, t.q) <= 0.0)
                    return false;
            }
        }
        return true;
    };
    double T = 1e-3;
    while (T < 1e9 && !superquadratic_from(T)) T *= 2.0;
    if (T >= 1e9)
        throw numeric_error("make_nonlinear_terms: no superquadraticity threshold found");
    t.T = T;
    return t;
}

Coordinates Coordinates::zero(int n) {
    Coordinates z;
    z.a = Eigen::VectorXd::Zero(n);
    z.b = Eigen::VectorXd::Zero(n);
    return z;
}

Eigen::VectorXd Coordinates::packed() const {
    Eigen::VectorXd x(1 + 2 * a.size());
    x(0) = r;
    x.segment(1, a.size()) = a;
    x.segment(1 + a.size(), b.size()) = b;
    return x;
}

Coordinates Coordinates::unpack(const Eigen::VectorXd& x, int n) {
    Coordinates z;
    z.r = x(0);
    z.a = x.segment(1, n);
    z.b = x.segment(1 + n, n);
    return z;
}

LinkingProblem LinkingProblem::make(const SpectralData& spec, const SolveReport& minimal,
                                    const SystemParams& params, int n,
                                    const GridFunction* psi0_in) {
    if (n < 1 || n > spec.count)
        throw std::invalid_argument("LinkingProblem: n must lie in [1, spec.count]");
    if (!minimal.converged)
        throw std::invalid_argument("LinkingProblem: needs a converged minimal pair");
    LinkingProblem prob;
    prob.grid = spec.grid;
    prob.spec = &spec;
    prob.n = n;
    prob.p = params.p;
    prob.q = params.q;
    prob.frozen_u = minimal.u;
    prob.frozen_v = minimal.v;
    if (psi0_in) {
        prob.psi0 = *psi0_in;
        if (prob.psi0.min() < 0.0)
            throw std::invalid_argument("LinkingProblem: psi0 must be nonnegative");
    } else {
        prob.psi0 = spec.eigenfunction(0);
    }
    double xn = xnorm(prob.psi0, spec);
    for (auto& v : prob.psi0.values) v /= xn;
    prob.psi0_l2 = spectral_coeffs(prob.psi0, spec).head(n);
    return prob;
}

namespace {

struct Reconstruction {
    GridFunction u, v;
};

Reconstruction reconstruct(const Coordinates& z, const LinkingProblem& prob) {
    const auto& phi = prob.spec->phi;
    Eigen::VectorXd cu = z.a + z.b, cv = z.a - z.b;
    Eigen::VectorXd uv = phi.leftCols(prob.n) * cu;
    Eigen::VectorXd vv = phi.leftCols(prob.n) * cv;
    Reconstruction rec{GridFunction(prob.grid), GridFunction(prob.grid)};
    for (std::size_t i = 0; i < rec.u.size(); ++i) {
        rec.u.values[i] = z.r * prob.psi0.values[i] + uv(static_cast<int>(i));
        rec.v.values[i] = z.r * prob.psi0.values[i] + vv(static_cast<int>(i));
    }
    return rec;
}

double lam(const LinkingProblem& prob, int k) {
    return prob.spec->eigenvalues[static_cast<std::size_t>(k)];
}

// I on a grid pair (u,v) without coordinates (geometry sampling).
double energy_grid(const GridFunction& u, const GridFunction& v,
                   const LinkingProblem& prob) {
    double Q = xinner(u, v, *prob.spec);
    double N = 0.0;
    const Grid& g = *prob.grid;
    for (std::size_t i = 0; i < u.size(); ++i)
        N += g.weights[i] * (H_eval(prob.frozen_v.values[i], v.values[i], prob.p) +
                             H_eval(prob.frozen_u.values[i], u.values[i], prob.q));
    return Q - N;
}

}  // namespace

GridFunction LinkingProblem::reconstruct_u(const Coordinates& z) const {
    return reconstruct(z, *this).u;
}

GridFunction LinkingProblem::reconstruct_v(const Coordinates& z) const {
    return reconstruct(z, *this).v;
}

double energy(const Coordinates& z, const LinkingProblem& prob) {
    double Q = z.r * z.r;
    for (int k = 0; k < prob.n; ++k)
        Q += lam(prob, k) * (2.0 * z.r * prob.psi0_l2(k) * z.a(k) + z.a(k) * z.a(k) -
                             z.b(k) * z.b(k));
    auto rec = reconstruct(z, prob);
    double N = 0.0;
    const Grid& g = *prob.grid;
    for (std::size_t i = 0; i < rec.u.size(); ++i)
        N += g.weights[i] *
             (H_eval(prob.frozen_v.values[i], rec.v.values[i], prob.p) +
              H_eval(prob.frozen_u.values[i], rec.u.values[i], prob.q));
    return Q - N;
}

Eigen::VectorXd grad_energy_raw(const Coordinates& z, const LinkingProblem& prob) {
    const Grid& g = *prob.grid;
    auto rec = reconstruct(z, prob);
    const int n = prob.n;
    Eigen::VectorXd hv(g.resolution()), hu(g.resolution());
    for (int i = 0; i < g.resolution(); ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        hv(i) = g.weights[si] * h_eval(prob.frozen_v.values[si], rec.v.values[si], prob.p);
        hu(i) = g.weights[si] * h_eval(prob.frozen_u.values[si], rec.u.values[si], prob.q);
    }
    const auto& phi = prob.spec->phi;
    Eigen::VectorXd Pv = phi.leftCols(n).transpose() * hv;
    Eigen::VectorXd Pu = phi.leftCols(n).transpose() * hu;
    double psi_v = 0.0, psi_u = 0.0;
    for (int i = 0; i < g.resolution(); ++i) {
        psi_v += prob.psi0.values[static_cast<std::size_t>(i)] * hv(i);
        psi_u += prob.psi0.values[static_cast<std::size_t>(i)] * hu(i);
    }

    Eigen::VectorXd gr(1 + 2 * n);
    double cross = 0.0;
    for (int k = 0; k < n; ++k) cross += lam(prob, k) * prob.psi0_l2(k) * z.a(k);
    gr(0) = 2.0 * z.r + 2.0 * cross - psi_v - psi_u;
    for (int k = 0; k < n; ++k) {
        gr(1 + k) = 2.0 * z.r * lam(prob, k) * prob.psi0_l2(k) +
                    2.0 * lam(prob, k) * z.a(k) - Pv(k) - Pu(k);
        gr(1 + n + k) = -2.0 * lam(prob, k) * z.b(k) + Pv(k) - Pu(k);
    }
    return gr;
}

Eigen::VectorXd grad_energy(const Coordinates& z, const LinkingProblem& prob) {
    Eigen::VectorXd gr = grad_energy_raw(z, prob);
    for (int k = 0; k < prob.n; ++k) {
        gr(1 + k) /= lam(prob, k);
        gr(1 + prob.n + k) /= lam(prob, k);
    }
    return gr;
}

Eigen::MatrixXd hess_energy(const Coordinates& z, const LinkingProblem& prob) {
    const Grid& g = *prob.grid;
    const int n = prob.n, ng = g.resolution();
    auto rec = reconstruct(z, prob);
    Eigen::VectorXd dv(ng), du(ng);
    for (int i = 0; i < ng; ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        dv(i) = g.weights[si] * h_slope(prob.frozen_v.values[si], rec.v.values[si], prob.p);
        du(i) = g.weights[si] * h_slope(prob.frozen_u.values[si], rec.u.values[si], prob.q);
    }
    // Basis of symmetric directions: column 0 = psi0, then the n modes.
    Eigen::MatrixXd B(ng, n + 1);
    for (int i = 0; i < ng; ++i) B(i, 0) = prob.psi0.values[static_cast<std::size_t>(i)];
    B.rightCols(n) = prob.spec->phi.leftCols(n);

    Eigen::MatrixXd Mplus = B.transpose() * (dv + du).asDiagonal() * B;
    Eigen::MatrixXd Mminus = B.transpose() * (du - dv).asDiagonal() * B;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(1 + 2 * n, 1 + 2 * n);
    H(0, 0) = 2.0 - Mplus(0, 0);
    for (int k = 0; k < n; ++k) {
        H(0, 1 + k) = H(1 + k, 0) = 2.0 * lam(prob, k) * prob.psi0_l2(k) - Mplus(0, 1 + k);
        H(0, 1 + n + k) = H(1 + n + k, 0) = -Mminus(0, 1 + k);
        for (int j = 0; j < n; ++j) {
            H(1 + j, 1 + k) = (j == k ? 2.0 * lam(prob, k) : 0.0) - Mplus(1 + j, 1 + k);
            H(1 + n + j, 1 + n + k) =
                (j == k ? -2.0 * lam(prob, k) : 0.0) - Mplus(1 + j, 1 + k);
            H(1 + j, 1 + n + k) = -Mminus(1 + j, 1 + k);
            H(1 + n + k, 1 + j) = H(1 + j, 1 + n + k);
        }
    }
    return H;
}

namespace {

// Random element of the symmetric span with prescribed energy norm.
GridFunction random_span_function(const LinkingProblem& prob, std::mt19937_64& gen,
                                  double target_xnorm) {
    std::normal_distribution<double> Z(0.0, 1.0);
    Eigen::VectorXd c(prob.n);
    double q = 0.0;
    for (int k = 0; k < prob.n; ++k) {
        c(k) = Z(gen);
        q += lam(prob, k) * c(k) * c(k);
    }
    double scale = target_xnorm / std::sqrt(q);
    GridFunction f(prob.grid);
    Eigen::VectorXd vals = prob.spec->phi.leftCols(prob.n) * (scale * c);
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = vals(static_cast<int>(i));
    return f;
}

// Structured sphere directions: the psi0 ray, single modes, and psi0/mode
// mixtures. Random gaussian directions alone miss the low-lying positive
// directions where the sphere minimum actually sits.
std::vector<GridFunction> structured_sphere(const LinkingProblem& prob,
                                            double target_xnorm) {
    std::vector<GridFunction> out;
    auto push_scaled = [&](GridFunction f) {
        double xn = xnorm(f, *prob.spec);
        if (xn <= 0.0) return;
        for (auto& v : f.values) v *= target_xnorm / xn;
        out.push_back(std::move(f));
        GridFunction neg = out.back();
        for (auto& v : neg.values) v = -v;
        out.push_back(std::move(neg));
    };
    push_scaled(prob.psi0);
    int kmax = std::min(prob.n, 8);
    for (int k = 0; k < kmax; ++k) push_scaled(prob.spec->eigenfunction(k));
    for (int k = 0; k < kmax; ++k) {
        GridFunction mix = prob.spec->eigenfunction(k);
        double xk = xnorm(mix, *prob.spec);
        for (std::size_t i = 0; i < mix.size(); ++i)
            mix.values[i] = prob.psi0.values[i] + mix.values[i] / xk;
        push_scaled(std::move(mix));
    }
    return out;
}

// Stationarize the antisymmetric block: I is strictly concave in b, so a
// damped Newton ascent converges to its unique maximizer.
void solve_b(Coordinates& z, const LinkingProblem& prob) {
    const int n = prob.n;
    for (int it = 0; it < 80; ++it) {
        Eigen::VectorXd gr = grad_energy_raw(z, prob).segment(1 + n, n);
        if (gr.norm() <= 1e-12) return;
        Eigen::MatrixXd Hbb =
            hess_energy(z, prob).block(1 + n, 1 + n, n, n);
        Eigen::VectorXd step = (-Hbb).ldlt().solve(gr);
        double base = energy(z, prob);
        double t = 1.0;
        Coordinates trial = z;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            trial.b = z.b + t * step;
            if (energy(trial, prob) > base) break;
        }
        z.b = trial.b;
        if ((t * step).norm() < 1e-13) return;
    }
}

// 1-D maximum of t -> I(t*dir, b solved) for a direction with nontrivial
// positive part; the superquadratic term guarantees a bounded hump.
double ray_max(Coordinates& z, const LinkingProblem& prob, const Eigen::VectorXd& dir,
               double t_start, double t_cap) {
    auto eval = [&](double t) {
        Coordinates trial = z;
        trial.r = t * dir(0);
        trial.a = t * dir.segment(1, prob.n);
        solve_b(trial, prob);
        z = trial;
        return energy(trial, prob);
    };
    double t1 = std::max(t_start, 1e-6), f1 = eval(t1);
    double t0 = 0.5 * t1, f0 = eval(t0);
    double t2 = 1.5 * t1, f2 = eval(t2);
    // expand until a hump is bracketed
    int guard = 0;
    while (f2 > f1 && t2 < t_cap && ++guard < 80) {
        t0 = t1; f0 = f1;
        t1 = t2; f1 = f2;
        t2 *= 1.5;
        f2 = eval(t2);
    }
    while (f0 > f1 && t0 > 1e-9 && ++guard < 160) {
        t2 = t1; f2 = f1;
        t1 = t0; f1 = f0;
        t0 *= 0.5;
        f0 = eval(t0);
    }
    // golden-section on [t0, t2]
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = t0, hi = t2;
    double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
    double fm1 = eval(m1), fm2 = eval(m2);
    for (int it = 0; it < 80 && hi - lo > 1e-10 * (1.0 + hi); ++it) {
        if (fm1 < fm2) {
            lo = m1;
            m1 = m2; fm1 = fm2;
            m2 = lo + gr * (hi - lo);
            fm2 = eval(m2);
        } else {
            hi = m2;
            m2 = m1; fm2 = fm1;
            m1 = hi - gr * (hi - lo);
            fm1 = eval(m1);
        }
    }
    double t_best = 0.5 * (lo + hi);
    eval(t_best);
    return t_best;
}

}  // namespace

GeometryReport verify_geometry(const LinkingGeometry& geom, const NonlinearTerms& terms,
                               const LinkingProblem& prob, long samples,
                               std::uint64_t seed) {
    (void)terms;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const Grid& g = *prob.grid;

    GeometryReport rep;
    rep.samples_per_face = samples;
    rep.accepted = true;
    rep.sphere_min = 1e300;
    rep.e_minus_max = -1e300;
    rep.top_face_max = -1e300;
    rep.lateral_max = -1e300;

    auto note_violation = [&](const char* face, double val) {
        if (rep.accepted) rep.witness = std::string(face) + " I=" + std::to_string(val);
        rep.accepted = false;
    };

    // Sphere in the symmetric subspace: ||(w,w)|| = rho_ball. Structured
    // directions first, random fill afterwards.
    {
        auto structured = structured_sphere(prob, geom.rho_ball / std::sqrt(2.0));
        long k = 0;
        for (; k < samples; ++k) {
            GridFunction w =
                k < static_cast<long>(structured.size())
                    ? structured[static_cast<std::size_t>(k)]
                    : random_span_function(prob, gen, geom.rho_ball / std::sqrt(2.0));
            double I = energy_grid(w, w, prob);
            rep.sphere_min = std::min(rep.sphere_min, I);
            if (I < geom.sigma) note_violation("sphere", I);
        }
    }

    // Antisymmetric face: always nonpositive, sampled for completeness.
    for (long k = 0; k < samples; ++k) {
        double rad = geom.R0 * std::pow(U(gen), 0.5) / std::sqrt(2.0);
        GridFunction w = random_span_function(prob, gen, rad);
        GridFunction mw = w;
        for (auto& v : mw.values) v = -v;
        double I = energy_grid(w, mw, prob);
        rep.e_minus_max = std::max(rep.e_minus_max, I);
        if (I > 0.0) note_violation("antisymmetric-face", I);
    }

    // Top face: coefficient R1 on (psi0,psi0) plus an antisymmetric part.
    for (long k = 0; k < samples; ++k) {
        double rad = geom.R0 * std::pow(U(gen), 0.5) / std::sqrt(2.0);
        GridFunction w =
            k == 0 ? GridFunction(prob.grid, 0.0) : random_span_function(prob, gen, rad);
        GridFunction u(prob.grid), v(prob.grid);
        for (std::size_t i = 0; i < u.size(); ++i) {
            u.values[i] = geom.R1 * geom.psi0.values[i] + w.values[i];
            v.values[i] = geom.R1 * geom.psi0.values[i] - w.values[i];
        }
        double I = energy_grid(u, v, prob);
        rep.top_face_max = std::max(rep.top_face_max, I);
        if (I > 0.0) note_violation("top-face", I);
    }
    rep.analytic_top_bound = geom.R1 * geom.R1 -
                             2.0 * std::pow(geom.R1, geom.kappa_coercivity) *
                                 [&] {
                                     double acc = 0.0;
                                     for (std::size_t i = 0; i < geom.psi0.size(); ++i)
                                         acc += std::pow(geom.psi0.values[i],
                                                         geom.kappa_coercivity) *
                                                g.weights[i];
                                     return acc;
                                 }() +
                             2.0 * geom.C_kappa * g.volume();
    if (rep.analytic_top_bound > 0.0) note_violation("top-face-analytic", rep.analytic_top_bound);

    // Lateral face: ||(w,-w)|| = R0, coefficient r in [0, R1].
    for (long k = 0; k < samples; ++k) {
        double r = geom.R1 * U(gen);
        GridFunction w = random_span_function(prob, gen, geom.R0 / std::sqrt(2.0));
        GridFunction u(prob.grid), v(prob.grid);
        for (std::size_t i = 0; i < u.size(); ++i) {
            u.values[i] = r * geom.psi0.values[i] + w.values[i];
            v.values[i] = r * geom.psi0.values[i] - w.values[i];
        }
        double I = energy_grid(u, v, prob);
        rep.lateral_max = std::max(rep.lateral_max, I);
        if (I > 0.0) note_violation("lateral-face", I);
    }
    return rep;
}

LinkingGeometry calibrate_geometry(const NonlinearTerms& terms, const LinkingProblem& prob,
                                   const StabilityReport& stability, std::uint64_t seed) {
    if (!stability.stable)
        throw numeric_error(
            "calibrate_geometry: frozen pair is not stable (gap_u=" +
            std::to_string(stability.gap_u) + ", gap_v=" + std::to_string(stability.gap_v) +
            "); the sphere bound has no positive lower estimate");

    LinkingGeometry geom;
    geom.psi0 = prob.psi0;
    const Grid& g = *prob.grid;

    // Coercivity pieces for the top face: H(r,t) >= t^kappa - C on r <= M.
    double kappa = 0.5 * (2.0 + std::min(terms.p, terms.q) + 1.0);
    geom.kappa_coercivity = kappa;
    double pmin = std::min(terms.p, terms.q);
    double t_star = std::pow(pmin + 1.0, 1.0 / (pmin + 1.0 - kappa));
    double C = 0.0;
    for (int ir = 0; ir <= 100; ++ir) {
        double r = terms.M * ir / 100.0;
        for (int it = 0; it <= 400; ++it) {
            double tt = 2.0 * t_star * it / 400.0;
            C = std::max(C, std::pow(tt, kappa) - H_eval(r, tt, terms.p));
            C = std::max(C, std::pow(tt, kappa) - H_eval(r, tt, terms.q));
        }
    }
    geom.C_kappa = C;

    double psi_kappa = 0.0;
    for (std::size_t i = 0; i < geom.psi0.size(); ++i)
        psi_kappa += std::pow(geom.psi0.values[i], kappa) * g.weights[i];

    double R1 = 1.0;
    while (R1 < 1e8 &&
           R1 * R1 - 2.0 * std::pow(R1, kappa) * psi_kappa + 2.0 * C * g.volume() >
               -0.05 * R1 * R1)
        R1 *= 1.5;
    if (R1 >= 1e8) throw numeric_error("calibrate_geometry: no R1 found");
    geom.R1 = R1;
    geom.R0 = std::sqrt(2.0) * R1;

    // Decreasing sphere scan over structured plus random directions.
    std::mt19937_64 gen(seed);
    for (double rho = 1.0; rho > 1e-7; rho *= 0.5) {
        double min_I = 1e300;
        for (auto& w : structured_sphere(prob, rho / std::sqrt(2.0)))
            min_I = std::min(min_I, energy_grid(w, w, prob));
        for (int k = 0; k < 256; ++k) {
            GridFunction w = random_span_function(prob, gen, rho / std::sqrt(2.0));
            min_I = std::min(min_I, energy_grid(w, w, prob));
        }
        if (min_I > 0.0) {
            geom.rho_ball = rho;
            geom.sigma = 0.5 * min_I;
            if (rho >= std::sqrt(2.0) * R1)
                throw numeric_error("calibrate_geometry: sphere does not link the cylinder");
            return geom;
        }
    }
    throw numeric_error("calibrate_geometry: no positive sphere radius found");
}

CriticalPoint find_critical_point(const LinkingProblem& prob, const LinkingGeometry& geom,
                                  const NonlinearTerms& terms, double tol,
                                  std::uint64_t seed) {
    (void)terms;
    const int n = prob.n;
    const int dim = 1 + 2 * n;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> Z(0.0, 1.0);

    CriticalPoint best;
    best.n = n;

    for (int attempt = 0; attempt < 6; ++attempt) {
        // Phase 1: ray ascent along the psi0 direction (perturbed on retries)
        // alternated with the concave b-solve until the level stagnates.
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(1 + n);
        dir(0) = 1.0;
        if (attempt > 0)
            for (int k = 0; k < n; ++k) dir(1 + k) = 0.15 * Z(gen) / (1.0 + k);
        dir /= dir.norm();
        Eigen::VectorXd dfull = Eigen::VectorXd::Zero(1 + n);
        dfull = dir;

        Coordinates z = Coordinates::zero(n);
        z.r = 0.5 * geom.R1;
        double t = z.r, level = -1e300;
        for (int sweep = 0; sweep < 8; ++sweep) {
            t = ray_max(z, prob, dfull, t, 10.0 * geom.R1);
            double next = energy(z, prob);
            if (std::abs(next - level) < 1e-9 * (1.0 + std::abs(next))) break;
            level = next;
        }

        // Phase 2: damped root-finder on the gradient with analytic Hessian.
        Eigen::VectorXd x = z.packed();
        double mu = 1e-3;
        CeramiLog cerami;
        std::vector<std::array<double, 3>> trace;
        double lim_hv = 0.0, lim_hu = 0.0, lim_H = 0.0, lim_Ht = 0.0;
        for (int it = 0; it < 300; ++it) {
            Coordinates zc = Coordinates::unpack(x, n);
            Eigen::VectorXd F = grad_energy_raw(zc, prob);
            double fn = F.norm();
            trace.push_back({static_cast<double>(it), energy(zc, prob), fn});
            // Cerami witnesses along the tail of the search.
            {
                auto rec = reconstruct(zc, prob);
                double hv_v = 0.0, hu_u = 0.0, HH = 0.0, HHt = 0.0;
                const Grid& gg = *prob.grid;
                for (std::size_t i = 0; i < rec.u.size(); ++i) {
                    hv_v += gg.weights[i] *
                            h_eval(prob.frozen_v.values[i], rec.v.values[i], prob.p) *
                            rec.v.values[i];
                    hu_u += gg.weights[i] *
                            h_eval(prob.frozen_u.values[i], rec.u.values[i], prob.q) *
                            rec.u.values[i];
                    HH += gg.weights[i] *
                          H_eval(prob.frozen_v.values[i], rec.v.values[i], prob.p);
                    HHt += gg.weights[i] *
                           H_eval(prob.frozen_u.values[i], rec.u.values[i], prob.q);
                }
                cerami.max_hv_v = std::max(cerami.max_hv_v, hv_v);
                cerami.max_hu_u = std::max(cerami.max_hu_u, hu_u);
                cerami.max_H = std::max(cerami.max_H, HH);
                cerami.max_Ht = std::max(cerami.max_Ht, HHt);
                lim_hv = hv_v;
                lim_hu = hu_u;
                lim_H = HH;
                lim_Ht = HHt;
            }
            if (fn < 1e3 * tol && grad_energy(zc, prob).norm() <= tol) break;
            Eigen::MatrixXd J = hess_energy(zc, prob);
            Eigen::MatrixXd A = J * J + mu * Eigen::MatrixXd::Identity(dim, dim);
            Eigen::VectorXd step = A.ldlt().solve(-(J * F));
            Coordinates zt = Coordinates::unpack(x + step, n);
            double f_new = grad_energy_raw(zt, prob).norm();
            if (f_new < fn) {
                x += step;
                mu = std::max(mu * 0.3, 1e-14);
            } else {
                mu = std::min(mu * 4.0, 1e8);
            }
            if (mu >= 1e8) break;
        }

        Coordinates zf = Coordinates::unpack(x, n);
        CriticalPoint cp;
        cp.n = n;
        cp.z = zf;
        cp.retries = attempt;
        cp.trace = std::move(trace);
        cp.grad_norm = grad_energy(zf, prob).norm();
        cp.energy = energy(zf, prob);
        cp.u0 = prob.reconstruct_u(zf);
        cp.v0 = prob.reconstruct_v(zf);
        cp.cerami = cerami;
        cp.cerami.bounded =
            std::isfinite(cerami.max_hv_v) && std::isfinite(cerami.max_hu_u) &&
            std::isfinite(cerami.max_H) && std::isfinite(cerami.max_Ht) &&
            cerami.max_hv_v <= 10.0 * (lim_hv + 1.0) &&
            cerami.max_hu_u <= 10.0 * (lim_hu + 1.0) &&
            cerami.max_H <= 10.0 * (lim_H + 1.0) && cerami.max_Ht <= 10.0 * (lim_Ht + 1.0);

        // Nonnegativity certificate: energy norm of the negative parts.
        GridFunction un(prob.grid), vn(prob.grid);
        for (std::size_t i = 0; i < un.size(); ++i) {
            un.values[i] = std::max(-cp.u0.values[i], 0.0);
            vn.values[i] = std::max(-cp.v0.values[i], 0.0);
        }
        cp.neg_part_norm = std::max(xnorm(un, *prob.spec), xnorm(vn, *prob.spec));

        bool nontrivial = std::max(cp.u0.max(), cp.v0.max()) > 10.0 * tol;
        bool in_window = cp.energy >= 0.9 * geom.sigma &&
                         cp.energy <= 1.1 * geom.R1 * geom.R1;
        cp.accepted = cp.grad_norm <= tol && in_window && nontrivial &&
                      cp.neg_part_norm <= tol && cp.cerami.bounded;
        if (cp.accepted && (!best.accepted || cp.energy < best.energy)) best = cp;
        if (best.accepted && attempt >= 1) break;
        if (!best.accepted || cp.grad_norm < best.grad_norm) {
            if (!cp.accepted && !best.accepted) best = cp;
        }
    }
    if (!best.accepted)
        warn("find_critical_point: no accepted critical point (grad_norm=" +
             std::to_string(best.grad_norm) + ", energy=" + std::to_string(best.energy) +
             ")");
    return best;
}

SolveReport assemble_second_solution(const CriticalPoint& cp, const SolveReport& minimal,
                                     const GreenMatrix& G, const Measure& mu,
                                     const Measure& nu, const SystemParams& params,
                                     double tol) {
    if (!cp.accepted)
        throw std::invalid_argument("assemble_second_solution: critical point not accepted");
    if (!minimal.converged)
        throw std::invalid_argument("assemble_second_solution: minimal pair not converged");
    if (std::max(cp.u0.max(), cp.v0.max()) <= 10.0 * tol)
        throw std::invalid_argument("assemble_second_solution: trivial critical point");

    const int n = G.size();
    const GridFunction& fu = minimal.u;
    const GridFunction& fv = minimal.v;

    // Full-grid Newton polish of u0 = G[h(v_,v0)], v0 = G[h~(u_,u0)]; the
    // mode-truncated critical point is the starting guess and the correction
    // is essentially its spectral tail.
    Eigen::VectorXd u0(n), v0(n);
    for (int i = 0; i < n; ++i) {
        u0(i) = cp.u0.values[static_cast<std::size_t>(i)];
        v0(i) = cp.v0.values[static_cast<std::size_t>(i)];
    }
    double polish_delta = 0.0;
    for (int it = 0; it < 40; ++it) {
        Eigen::VectorXd hv(n), hu(n), dv(n), du(n);
        for (int i = 0; i < n; ++i) {
            std::size_t si = static_cast<std::size_t>(i);
            hv(i) = h_eval(fv.values[si], v0(i), params.p);
            hu(i) = h_eval(fu.values[si], u0(i), params.q);
            dv(i) = h_slope(fv.values[si], v0(i), params.p);
            du(i) = h_slope(fu.values[si], u0(i), params.q);
        }
        Eigen::VectorXd F(2 * n);
        F.head(n) = u0 - G.entries * hv;
        F.tail(n) = v0 - G.entries * hu;
        if (F.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + u0.cwiseAbs().maxCoeff())) break;
        Eigen::MatrixXd J = Eigen::MatrixXd::Identity(2 * n, 2 * n);
        J.topRightCorner(n, n) = -G.entries * dv.asDiagonal();
        J.bottomLeftCorner(n, n) = -G.entries * du.asDiagonal();
        Eigen::VectorXd step = J.partialPivLu().solve(-F);
        u0 += step.head(n);
        v0 += step.tail(n);
        polish_delta = std::max(polish_delta, step.cwiseAbs().maxCoeff());
    }

    SolveReport out;
    out.provenance = "linking-search";
    out.u = GridFunction(G.grid);
    out.v = GridFunction(G.grid);
    for (int i = 0; i < n; ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        out.u.values[si] = fu.values[si] + u0(i);
        out.v.values[si] = fv.values[si] + v0(i);
    }

    // Full-system residual, computed directly.
    GridFunction Gmu = apply_green(G, mu.scaled(params.rho), params);
    GridFunction Gnu = apply_green(G, nu.scaled(params.tau), params);
    GridFunction ru = apply_green(G, pow_clamped(out.v, params.p, &out.clamp_count));
    GridFunction rv = apply_green(G, pow_clamped(out.u, params.q, &out.clamp_count));
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        res = std::max(res, std::abs(out.u.values[si] - ru.values[si] - Gmu.values[si]));
        res = std::max(res, std::abs(out.v.values[si] - rv.values[si] - Gnu.values[si]));
    }
    out.final_residual = res;
    out.converged = res <= tol;
    if (!out.converged)
        throw numeric_error("assemble_second_solution: full-system residual " +
                            std::to_string(res) + " above tolerance");

    // Strict dominance over the minimal pair; violations indicate a spurious
    // critical point.
    double sep = 0.0;
    int worst = -1;
    for (int i = 0; i < n; ++i) {
        if (u0(i) <= 0.0 || v0(i) <= 0.0) worst = i;
        sep = std::max(sep, std::max(u0(i), v0(i)));
    }
    if (worst >= 0)
        throw numeric_error(
            "assemble_second_solution: dominance violated at node " + std::to_string(worst) +
            " (u0=" + std::to_string(u0(worst)) + ", v0=" + std::to_string(v0(worst)) + ")");
    if (sep <= 10.0 * tol)
        throw numeric_error("assemble_second_solution: separation below 10*tol");

    out.iterations = minimal.iterations;
    out.monotone = true;
    {
        SolveNorms nn;
        nn.u_l1 = norm_weighted(out.u, 1.0, 0.0);
        nn.v_l1 = norm_weighted(out.v, 1.0, 0.0);
        nn.u_lq_ds = norm_weighted(out.u, params.q, params.s);
        nn.v_lp_ds = norm_weighted(out.v, params.p, params.s);
        out.norms = nn;
    }
    return out;
}

}  // namespace fraclane
