#pragma once

#include <functional>
#include <optional>
#include <string>

#include "fraclane/green.hpp"

namespace fraclane {

struct SolveNorms {
    double u_l1 = 0.0;
    double u_lq_ds = 0.0;
    double v_l1 = 0.0;
    double v_lp_ds = 0.0;
};

/// Outcome of a fixed-point construction (monotone iteration or the
/// variational route). The residual is the max-norm defect of both
/// fixed-point identities u = G[v^p] + G[rho mu], v = G[u^q] + G[tau nu].
struct SolveReport {
    std::string provenance = "minimal-iteration";
    int iterations = 0;
    double final_residual = 0.0;
    bool monotone = true;
    bool converged = false;
    bool diverged = false;
    long clamp_count = 0;
    GridFunction u, v;
    SolveNorms norms;
    std::optional<double> sup_bound_K;
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 2000;
    double divergence_guard = 1e6;
    /// Called with (iteration, u_k, v_k), including the starting pair at 0.
    std::function<void(int, const GridFunction&, const GridFunction&)> observer;
};

/// Monotone iteration from (G[rho mu], G[tau nu]). Every iterate dominates its
/// predecessor (positivity of the Green matrix); a non-monotone history is an
/// assembly bug and reported through the monotone flag.
SolveReport picard_iterate(const GreenMatrix& G, const Measure& mu, const Measure& nu,
                           const SystemParams& params, const PicardOptions& opts = {});

/// Explicit supersolution construction. The source measure for the second
/// component is Psi = G[theta1 mu]^q dx + theta2 nu; the scale parameters are
/// rho = kappa^(1/q) theta1, tau = kappa theta2, and (A, kappa) satisfy the
/// scalar feasibility rule C (A^(pq) kappa^(pq-1) + 1) <= A with C extracted
/// from the composition-chain constants on Psi. kappa is then halved, if
/// needed, until the pair certificate holds nodewise.
struct SupersolutionParams {
    double theta1 = 1.0, theta2 = 1.0;
    double A = 0.0;
    double kappa_scale = 0.0;          // final, nodewise-verified kappa
    double kappa_scalar = 0.0;         // kappa from the scalar rule alone
    int kappa_halvings = 0;
    double rho = 0.0, tau = 0.0;
    double C_extracted = 0.0;
    Measure Psi;
    GridFunction U, V;
};

SupersolutionParams build_supersolution(const GreenMatrix& G, const Measure& mu,
                                        const Measure& nu, const SystemParams& params,
                                        double theta1 = 1.0, double theta2 = 1.0);

struct ThresholdPoint {
    double rho = 0.0;
    double tau = 0.0;
    bool converged = false;
};

struct ThresholdScan {
    std::vector<ThresholdPoint> ladder;
    bool bracket_found = false;
    bool no_divergence = false;  // ladder too short: everything converged
    double t_conv = 0.0;         // largest converging value found
    double t_div = 0.0;          // smallest diverging value found
    bool monotone_outcome = true;
};

/// Geometric rho = tau ladder with bisection refinement of the divergence
/// transition down to t_div / t_conv <= 1.1.
ThresholdScan threshold_scan(const GreenMatrix& G, const Measure& mu, const Measure& nu,
                             const SystemParams& params, int grid_points = 20);

/// K = max over nodes of max(u, v) / G[mu~ + nu~] for the unit-normalized
/// data pair; nodes with a vanishing denominator are excluded and counted.
double check_leub(const SolveReport& report, const GreenMatrix& G, const Measure& mu,
                  const Measure& nu, const SystemParams& params,
                  long* excluded_nodes = nullptr);

}  // namespace fraclane
