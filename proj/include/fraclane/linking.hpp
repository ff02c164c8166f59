#pragma once

#include <cstdint>

#include "fraclane/green.hpp"
#include "fraclane/minimal.hpp"
#include "fraclane/stability.hpp"

namespace fraclane {

/// Primitive nonlinearities of the shifted problem:
///   H(r,t;e) = [(r + t+)^(e+1) - r^(e+1) - (e+1) r^e t+] / (e+1)
///   h(r,t;e) = (r + t+)^e - r^e
/// with t+ = max(t, 0); both vanish for t <= 0.
double H_eval(double r, double t, double e);
double h_eval(double r, double t, double e);
/// dh/dt for t > 0 (e (r+t)^(e-1)), 0 for t < 0.
double h_slope(double r, double t, double e);

/// Superquadraticity data on the frozen minimal pair: a sup bound M, an
/// exponent theta in (2, min(p,q)+1) and the threshold T above which
/// H(r,t) <= h(r,t) t / theta holds for all r <= M.
struct NonlinearTerms {
    double p = 1.2, q = 1.4;
    double M = 0.0;
    double theta = 2.0;
    double T = 0.0;
};

NonlinearTerms make_nonlinear_terms(const SolveReport& minimal, const SystemParams& params);

/// Finite-dimensional search space: the span of (psi0,psi0), the n symmetric
/// pairs (phi_k, phi_k) and the n antisymmetric pairs (phi_k, -phi_k), over
/// the frozen minimal pair. Coordinates (r, a, b) reconstruct
/// u = r psi0 + sum (a_k + b_k) phi_k,  v = r psi0 + sum (a_k - b_k) phi_k.
struct LinkingProblem {
    GridPtr grid;
    const SpectralData* spec = nullptr;
    int n = 0;
    double p = 1.2, q = 1.4;
    GridFunction frozen_u, frozen_v;
    GridFunction psi0;            // nonnegative, unit energy norm
    Eigen::VectorXd psi0_l2;      // L^2 coefficients over the n modes

    static LinkingProblem make(const SpectralData& spec, const SolveReport& minimal,
                               const SystemParams& params, int n,
                               const GridFunction* psi0 = nullptr);

    GridFunction reconstruct_u(const struct Coordinates& z) const;
    GridFunction reconstruct_v(const struct Coordinates& z) const;
};

struct Coordinates {
    double r = 0.0;
    Eigen::VectorXd a, b;  // size n each

    static Coordinates zero(int n);
    Eigen::VectorXd packed() const;                  // (r, a, b)
    static Coordinates unpack(const Eigen::VectorXd& x, int n);
};

/// I(z) = <u,v>_X - int H(v_, v) - int H~(u_, u), evaluated spectrally for
/// the quadratic part and by grid quadrature for the nonlinear part.
double energy(const Coordinates& z, const LinkingProblem& prob);
/// Coordinate partials of I (what central differences approximate).
Eigen::VectorXd grad_energy_raw(const Coordinates& z, const LinkingProblem& prob);
/// Energy-preconditioned gradient: mode components divided by lambda_k, so
/// zeros coincide with critical points of the restricted functional.
Eigen::VectorXd grad_energy(const Coordinates& z, const LinkingProblem& prob);
Eigen::MatrixXd hess_energy(const Coordinates& z, const LinkingProblem& prob);

/// Linking-geometry radii: rho_ball and R0 are product-space norms, R1 bounds
/// the (psi0,psi0) coefficient, sigma the sphere level.
struct LinkingGeometry {
    GridFunction psi0;
    double rho_ball = 0.0;
    double sigma = 0.0;
    double R0 = 0.0;
    double R1 = 0.0;
    double kappa_coercivity = 0.0;  // exponent used by the top-face bound
    double C_kappa = 0.0;           // its coercivity constant
};

struct GeometryReport {
    bool accepted = false;
    double sphere_min = 0.0;
    double e_minus_max = 0.0;
    double top_face_max = 0.0;
    double lateral_max = 0.0;
    double analytic_top_bound = 0.0;
    long samples_per_face = 0;
    std::string witness;  // worst offender when rejected
};

GeometryReport verify_geometry(const LinkingGeometry& geom, const NonlinearTerms& terms,
                               const LinkingProblem& prob, long samples,
                               std::uint64_t seed);

/// rho by decreasing scan until the sampled sphere minimum is positive
/// (sigma = half that minimum), R1 by increasing scan until the top-face
/// coercivity bound is nonpositive, R0 = sqrt(2) R1. Throws when no sphere
/// radius works: that is instability of the frozen pair.
LinkingGeometry calibrate_geometry(const NonlinearTerms& terms, const LinkingProblem& prob,
                                   const StabilityReport& stability,
                                   std::uint64_t seed = 0);

/// Boundedness witnesses recorded along the accepted search tail.
struct CeramiLog {
    double max_hv_v = 0.0;   // int h(v_,v) v
    double max_hu_u = 0.0;   // int h~(u_,u) u
    double max_H = 0.0;      // int H(v_,v)
    double max_Ht = 0.0;     // int H~(u_,u)
    bool bounded = true;
};

struct CriticalPoint {
    GridFunction u0, v0;
    double energy = 0.0;
    double grad_norm = 0.0;
    int n = 0;
    bool accepted = false;
    Coordinates z;
    double neg_part_norm = 0.0;
    CeramiLog cerami;
    int retries = 0;
    /// Root-finder trajectory of the reported attempt: {iter, I, |grad|}.
    std::vector<std::array<double, 3>> trace;
};

/// Two-phase search: alternating ray ascent along the psi0 direction with an
/// exact concave stationarization in the antisymmetric block, then a damped
/// (Levenberg-Marquardt) root-finder on the gradient. Retries from perturbed
/// seeded starts on stagnation.
CriticalPoint find_critical_point(const LinkingProblem& prob, const LinkingGeometry& geom,
                                  const NonlinearTerms& terms, double tol = 1e-8,
                                  std::uint64_t seed = 0);

/// u = u_ + u0, v = v_ + v0 with a full-grid Newton polish of the pair
/// equations u0 = G[h(v_,v0)], v0 = G[h~(u_,u0)], then certification of the
/// full-system fixed point, strict dominance, and separation.
SolveReport assemble_second_solution(const CriticalPoint& cp, const SolveReport& minimal,
                                     const GreenMatrix& G, const Measure& mu,
                                     const Measure& nu, const SystemParams& params,
                                     double tol = 1e-6);

}  // namespace fraclane
