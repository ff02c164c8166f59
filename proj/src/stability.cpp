#include "fraclane/stability.hpp"

#include <cmath>
#include <stdexcept>

namespace fraclane {

namespace {

double measure_integral(const GridFunction& f, const Measure& m) {
    const Grid& g = *f.grid;
    double acc = 0.0;
    if (m.density)
        for (std::size_t i = 0; i < f.size(); ++i)
            acc += f.values[i] * m.density->values[i] * g.weights[i];
    for (const Atom& a : m.atoms) {
        // Atom integrals take the containing-cell nodal value (mollified).
        int j = g.nearest_node(a.location);
        acc += f.values[static_cast<std::size_t>(j)] * a.mass;
    }
    return acc;
}

}  // namespace

double stability_gap(const SpectralData& spec, const GridFunction& weight, double coeff) {
    if (coeff <= 0.0) throw std::invalid_argument("stability_gap: coeff must be positive");
    if (weight.min() < 0.0)
        throw std::invalid_argument("stability_gap: weight must be nonnegative");
    if (weight.max_abs() == 0.0) return 1.0;
    if (parseval_defect(weight, spec) > 0.01)
        throw numeric_error("stability_gap: weight truncation defect above 1%");

    const Grid& g = *spec.grid;
    const int n = g.resolution();
    Eigen::VectorXd ww(n);
    for (int i = 0; i < n; ++i)
        ww(i) = g.weights[static_cast<std::size_t>(i)] *
                weight.values[static_cast<std::size_t>(i)];
    Eigen::MatrixXd M = spec.phi.transpose() * ww.asDiagonal() * spec.phi;
    for (int j = 0; j < spec.count; ++j)
        for (int k = 0; k < spec.count; ++k)
            M(j, k) /= std::sqrt(spec.eigenvalues[static_cast<std::size_t>(j)] *
                                 spec.eigenvalues[static_cast<std::size_t>(k)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success)
        throw numeric_error("stability_gap: eigensolver failed");
    return 1.0 - coeff * es.eigenvalues().maxCoeff();
}

StabilityReport make_stability_report(const SpectralData& spec, const SolveReport& minimal,
                                      const SystemParams& params) {
    if (!minimal.converged)
        throw std::invalid_argument("make_stability_report: needs a converged pair");
    GridFunction wv = pow_clamped(minimal.v, params.p - 1.0);
    GridFunction wu = pow_clamped(minimal.u, params.q - 1.0);
    StabilityReport r;
    r.modes = spec.count;
    r.defect_v = parseval_defect(wv, spec);
    r.defect_u = parseval_defect(wu, spec);
    r.gap_v = stability_gap(spec, wv, params.p);
    r.gap_u = stability_gap(spec, wu, params.q);
    r.stable = r.gap_u > 0.0 && r.gap_v > 0.0;
    r.C_strict = std::min(r.gap_u, r.gap_v);
    return r;
}

AprioriRecord apriori_check(const SolveReport& report, const SpectralData& spec,
                            const Measure& mu, const Measure& nu,
                            const SystemParams& params) {
    if (params.p <= 1.0 || params.q <= 1.0)
        throw std::invalid_argument("apriori_check: requires p, q > 1");
    if (!report.converged)
        throw std::invalid_argument("apriori_check: needs a converged report");

    const Grid& g = *spec.grid;
    GridFunction phi1 = spec.eigenfunction(0);
    double lam1 = spec.lambda1();

    GridFunction vp = pow_clamped(report.v, params.p);
    GridFunction uq = pow_clamped(report.u, params.q);

    AprioriRecord rec;
    double lhs_u = lam1 * l2_inner(report.u, phi1);
    double rhs_u = l2_inner(vp, phi1) + measure_integral(phi1, mu.scaled(params.rho));
    rec.identity_residual_u = std::abs(lhs_u - rhs_u);
    double lhs_v = lam1 * l2_inner(report.v, phi1);
    double rhs_v = l2_inner(uq, phi1) + measure_integral(phi1, nu.scaled(params.tau));
    rec.identity_residual_v = std::abs(lhs_v - rhs_v);

    double ds_vol = 0.0;
    for (int i = 0; i < g.resolution(); ++i)
        ds_vol += std::pow(g.delta[static_cast<std::size_t>(i)], params.s) *
                  g.weights[static_cast<std::size_t>(i)];
    rec.lp_bound_v = std::pow(report.norms.v_lp_ds, params.p) / ds_vol;
    rec.lq_bound_u = std::pow(report.norms.u_lq_ds, params.q) / ds_vol;
    rec.l1_chain_u = report.norms.u_l1 /
                     (std::pow(report.norms.v_lp_ds, params.p) +
                      params.rho * mu.delta_mass(g, params.s));
    rec.l1_chain_v = report.norms.v_l1 /
                     (std::pow(report.norms.u_lq_ds, params.q) +
                      params.tau * nu.delta_mass(g, params.s));

    double comp = 0.0;
    for (int i = 0; i < g.resolution(); ++i) {
        double ratio = phi1[i] / std::pow(g.delta[static_cast<std::size_t>(i)], params.s);
        comp = std::max(comp, std::max(ratio, 1.0 / ratio));
    }
    rec.phi1_comparability = comp;
    return rec;
}

}  // namespace fraclane
