#pragma once

#include "fraclane/green.hpp"
#include "fraclane/minimal.hpp"

namespace fraclane {

/// Relative spectral gaps of the linearized quadratic forms
/// ||phi||_X^2 - p int v^(p-1) phi^2 (and the mirror with q, u) on the
/// frozen minimal pair, reported as the coefficient of ||phi||_X^2.
struct StabilityReport {
    double gap_v = 0.0;
    double gap_u = 0.0;
    bool stable = false;
    double C_strict = 0.0;
    int modes = 0;
    double defect_u = 0.0;  // Parseval defects of the two weights
    double defect_v = 0.0;
};

/// Smallest relative gap of ||phi||_X^2 - coeff * int weight phi^2 over the
/// retained spectral span: 1 - coeff * lambda_max(M) with
/// M_jk = sum_i w_i weight_i phi_j phi_k / sqrt(lambda_j lambda_k).
/// Fails when the truncation Parseval defect of the weight exceeds 1%.
double stability_gap(const SpectralData& spec, const GridFunction& weight, double coeff);

StabilityReport make_stability_report(const SpectralData& spec, const SolveReport& minimal,
                                      const SystemParams& params);

/// First-eigenpair identities and extracted a priori constants on a converged
/// pair: lambda_1 int u phi_1 = int v^p phi_1 + int phi_1 d(rho mu) and the
/// mirror, plus the L^p(delta^s) and L^1-chain constants.
struct AprioriRecord {
    double identity_residual_u = 0.0;
    double identity_residual_v = 0.0;
    double lp_bound_v = 0.0;      // ||v||^p_{L^p(ds)} / int delta^s
    double lq_bound_u = 0.0;
    double l1_chain_u = 0.0;      // ||u||_L1 / (||v||^p_{L^p(ds)} + rho)
    double l1_chain_v = 0.0;
    double phi1_comparability = 0.0;  // c with c^-1 d^s <= phi_1 <= c d^s
};

AprioriRecord apriori_check(const SolveReport& report, const SpectralData& spec,
                            const Measure& mu, const Measure& nu,
                            const SystemParams& params);

}  // namespace fraclane
