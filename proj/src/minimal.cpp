#include "fraclane/minimal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fraclane/kernel_verify.hpp"

namespace fraclane {

namespace {

// One rounding ulp of slack per entry: the monotone structure is exact in
// exact arithmetic, so anything beyond this is an assembly bug.
bool dominates(const GridFunction& a, const GridFunction& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        double slack = 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max(std::abs(a.values[i]), 1.0);
        if (a.values[i] < b.values[i] - slack) return false;
    }
    return true;
}

// Same formula as norm_weighted but admits exponents below 1 (the report
// records the L^p(delta^s) quasi-norm even for sublinear p).
double lp_delta(const GridFunction& f, double kappa, double weight_exponent) {
    const Grid& g = *f.grid;
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += std::pow(std::abs(f.values[i]), kappa) *
               std::pow(g.delta[i], weight_exponent) * g.weights[i];
    return std::pow(acc, 1.0 / kappa);
}

SolveNorms compute_norms(const GridFunction& u, const GridFunction& v,
                         const SystemParams& sp) {
    SolveNorms n;
    n.u_l1 = lp_delta(u, 1.0, 0.0);
    n.v_l1 = lp_delta(v, 1.0, 0.0);
    n.u_lq_ds = lp_delta(u, sp.q, sp.s);
    n.v_lp_ds = lp_delta(v, sp.p, sp.s);
    return n;
}

}  // namespace

SolveReport picard_iterate(const GreenMatrix& G, const Measure& mu, const Measure& nu,
                           const SystemParams& params, const PicardOptions& opts) {
    if (opts.tol <= 0.0) throw std::invalid_argument("picard_iterate: tol must be positive");
    if (opts.max_iter < 1) throw std::invalid_argument("picard_iterate: max_iter >= 1");
    mu.validate(*G.grid);
    nu.validate(*G.grid);

    GridFunction Gmu = apply_green(G, mu.scaled(params.rho), params);
    GridFunction Gnu = apply_green(G, nu.scaled(params.tau), params);

    SolveReport rep;
    rep.u = Gmu;
    rep.v = Gnu;
    if (opts.observer) opts.observer(0, rep.u, rep.v);

    for (int k = 1; k <= opts.max_iter; ++k) {
        GridFunction vp = pow_clamped(rep.v, params.p, &rep.clamp_count);
        GridFunction uq = pow_clamped(rep.u, params.q, &rep.clamp_count);
        GridFunction u_next = apply_green(G, vp);
        GridFunction v_next = apply_green(G, uq);
        for (std::size_t i = 0; i < u_next.size(); ++i) {
            u_next.values[i] += Gmu.values[i];
            v_next.values[i] += Gnu.values[i];
        }
        rep.iterations = k;
        if (!dominates(u_next, rep.u) || !dominates(v_next, rep.v)) rep.monotone = false;

        double change = std::max(max_norm_diff(u_next, rep.u), max_norm_diff(v_next, rep.v));
        rep.u = std::move(u_next);
        rep.v = std::move(v_next);
        if (opts.observer) opts.observer(k, rep.u, rep.v);

        if (std::max(rep.u.max(), rep.v.max()) > opts.divergence_guard) {
            rep.diverged = true;
            break;
        }
        if (change < opts.tol) {
            rep.converged = true;
            break;
        }
    }

    // Fixed-point residual by one extra application of the iteration map.
    {
        GridFunction ru = apply_green(G, pow_clamped(rep.v, params.p));
        GridFunction rv = apply_green(G, pow_clamped(rep.u, params.q));
        double res = 0.0;
        for (std::size_t i = 0; i < ru.size(); ++i) {
            res = std::max(res, std::abs(rep.u.values[i] - ru.values[i] - Gmu.values[i]));
            res = std::max(res, std::abs(rep.v.values[i] - rv.values[i] - Gnu.values[i]));
        }
        rep.final_residual = res;
    }

    if (rep.converged) {
        // The limit dominates the data term (first iterate monotonicity).
        if (!dominates(rep.u, Gmu) || !dominates(rep.v, Gnu))
            rep.monotone = false;
    }
    rep.norms = compute_norms(rep.u, rep.v, params);
    return rep;
}

SupersolutionParams build_supersolution(const GreenMatrix& G, const Measure& mu,
                                        const Measure& nu, const SystemParams& params,
                                        double theta1, double theta2) {
    const Grid& g = *G.grid;
    if (std::abs(mu.delta_mass(g, params.s) - 1.0) > 1e-6 ||
        std::abs(nu.delta_mass(g, params.s) - 1.0) > 1e-6)
        throw std::invalid_argument("build_supersolution: data must be unit-normalized");
    if (!params.subcritical_mixed())
        throw std::invalid_argument("build_supersolution: requires q(p+1)/(q+1) < Ns");
    double pq = params.p * params.q;
    if (std::abs(pq - 1.0) < 1e-12)
        throw std::invalid_argument("build_supersolution: pq = 1 excluded");

    SupersolutionParams out;
    out.theta1 = theta1;
    out.theta2 = theta2;

    // Source measure for the second component.
    GridFunction Gmu = apply_green(G, mu.scaled(theta1), params);
    if (!std::isfinite(norm_weighted(Gmu, params.q, params.s)))
        throw numeric_error("build_supersolution: G[mu]^q not integrable against delta^s");
    Measure Psi;
    Psi.density = pow_clamped(Gmu, params.q);
    if (nu.density) {
        if (!Psi.density->grid) Psi.density = GridFunction(G.grid, 0.0);
        for (std::size_t i = 0; i < Psi.density->size(); ++i)
            Psi.density->values[i] += theta2 * nu.density->values[i];
    }
    for (const Atom& a : nu.atoms) Psi.atoms.push_back({a.location, theta2 * a.mass});
    out.Psi = Psi;

    // Extracted constant: the two chain constants on the normalized Psi.
    Measure Psi_unit = Psi.normalized(g, params.s);
    double t = params.q * (params.p + 1.0) / (params.q + 1.0);
    EstimateReport chain = check_g3_chain(G, Psi_unit, params, t);
    double C = std::max(chain.constant, chain.aux_constant);
    out.C_extracted = C;

    // Scalar feasibility: C (A^pq kappa^(pq-1) + 1) <= A.
    auto feasible = [&](double A, double kappa) {
        return C * (std::pow(A, pq) * std::pow(kappa, pq - 1.0) + 1.0) <= A;
    };
    double A = 0.0, kappa = 0.0;
    if (pq > 1.0) {
        bool found = false;
        for (double Atry : {2.0 * C, 4.0 * C, 8.0 * C}) {
            if (!feasible(Atry, 0.0) && !feasible(Atry, 1e-300)) continue;
            double lo = 0.0, hi = 1.0;
            if (feasible(Atry, 1.0)) {
                kappa = 1.0;
            } else {
                for (int it = 0; it < 200; ++it) {
                    double mid = 0.5 * (lo + hi);
                    (feasible(Atry, mid) ? lo : hi) = mid;
                }
                kappa = lo;
            }
            if (kappa > 0.0) {
                A = Atry;
                found = true;
                break;
            }
        }
        if (!found)
            throw numeric_error(
                "build_supersolution: infeasible at A in {2C,4C,8C}; extracted C = " +
                std::to_string(C));
    } else {
        kappa = 1.0;
        A = std::max(1.0, 2.0 * C);
        while (!feasible(A, kappa) && A < 1e12) A *= 2.0;
        if (!feasible(A, kappa))
            throw numeric_error("build_supersolution: no feasible A for pq < 1");
    }
    out.A = A;
    out.kappa_scalar = kappa;

    // Nodewise certificate; halve kappa until it holds.
    GridFunction GPsi = apply_green(G, Psi, params);
    for (int halvings = 0;; ++halvings) {
        if (halvings > 60)
            throw numeric_error("build_supersolution: certificate failed down to kappa ~ 0");
        double rho = std::pow(kappa, 1.0 / params.q) * theta1;
        double tau = kappa * theta2;
        GridFunction V(G.grid);
        for (std::size_t i = 0; i < V.size(); ++i)
            V.values[i] = A * kappa * GPsi.values[i];
        GridFunction U = apply_green(G, pow_clamped(V, params.p));
        GridFunction Grm = apply_green(G, mu.scaled(rho), params);
        for (std::size_t i = 0; i < U.size(); ++i) U.values[i] += Grm.values[i];

        GridFunction lhs = apply_green(G, pow_clamped(U, params.q));
        GridFunction Gtn = apply_green(G, nu.scaled(tau), params);
        bool ok = true;
        for (std::size_t i = 0; i < lhs.size(); ++i)
            if (lhs.values[i] + Gtn.values[i] > V.values[i]) {
                ok = false;
                break;
            }
        if (ok) {
            out.kappa_scale = kappa;
            out.kappa_halvings = halvings;
            out.rho = rho;
            out.tau = tau;
            out.U = std::move(U);
            out.V = std::move(V);
            return out;
        }
        kappa *= 0.5;
    }
}

ThresholdScan threshold_scan(const GreenMatrix& G, const Measure& mu, const Measure& nu,
                             const SystemParams& params, int grid_points) {
    if (!params.superlinear())
        throw std::invalid_argument("threshold_scan: requires pq > 1");
    const Grid& g = *G.grid;
    if (std::abs(mu.delta_mass(g, params.s) - 1.0) > 1e-6 ||
        std::abs(nu.delta_mass(g, params.s) - 1.0) > 1e-6)
        warn("threshold_scan: data not unit-normalized; the bracket scales with the mass");

    PicardOptions opts;
    opts.tol = 1e-9;
    opts.max_iter = 1500;

    auto converges = [&](double t) {
        SystemParams sp = params;
        sp.rho = sp.tau = t;
        SolveReport r = picard_iterate(G, mu, nu, sp, opts);
        return r.converged;
    };

    ThresholdScan scan;
    double t = 1e-3;
    bool seen_divergence = false;
    for (int k = 0; k < grid_points; ++k, t *= 2.0) {
        bool conv = converges(t);
        scan.ladder.push_back({t, t, conv});
        if (conv && seen_divergence) scan.monotone_outcome = false;
        if (conv) scan.t_conv = t;
        if (!conv && !seen_divergence) {
            seen_divergence = true;
            scan.t_div = t;
        }
        if (seen_divergence && k >= 1) break;
    }
    if (!seen_divergence) {
        scan.no_divergence = true;
        return scan;
    }
    if (scan.t_conv == 0.0) scan.t_conv = scan.t_div / 2.0;

    // Bisection down to a 10% bracket.
    while (scan.t_div / scan.t_conv > 1.1) {
        double mid = std::sqrt(scan.t_conv * scan.t_div);
        (converges(mid) ? scan.t_conv : scan.t_div) = mid;
    }
    scan.bracket_found = true;
    return scan;
}

double check_leub(const SolveReport& report, const GreenMatrix& G, const Measure& mu,
                  const Measure& nu, const SystemParams& params, long* excluded_nodes) {
    if (!report.converged)
        throw std::invalid_argument("check_leub: needs a converged report");
    const Grid& g = *G.grid;
    if (mu.is_zero() && nu.is_zero()) return 0.0;

    Measure mu_t = mu.is_zero() ? mu : mu.normalized(g, params.s);
    Measure nu_t = nu.is_zero() ? nu : nu.normalized(g, params.s);
    GridFunction denom = apply_green(G, mu_t, params);
    GridFunction dnu = apply_green(G, nu_t, params);
    for (std::size_t i = 0; i < denom.size(); ++i) denom.values[i] += dnu.values[i];

    double K = 0.0;
    long excluded = 0;
    for (std::size_t i = 0; i < denom.size(); ++i) {
        if (denom.values[i] < 1e-14) {
            ++excluded;
            continue;
        }
        K = std::max(K, std::max(report.u.values[i], report.v.values[i]) / denom.values[i]);
    }
    if (excluded_nodes) *excluded_nodes = excluded;
    return K;
}

}  // namespace fraclane
