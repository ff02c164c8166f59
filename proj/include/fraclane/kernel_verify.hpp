#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "fraclane/green.hpp"

namespace fraclane {

/// Which kernel estimate a report certifies.
enum class EstimateId {
    TwoSided,       // sandwich against min{|x-y|^(2s-N), d^s d^s |x-y|^(-N)}
    Bnd233,         // G <= C d(y)^s |x-y|^(s-N)
    Bnd234,         // G <= C (d(y)/d(x))^s |x-y|^(2s-N)
    ThreeG,         // triple-kernel inequality
    Ingg,           // G[G[lam]^p] <= C G[lam]
    Inggs,          // G[G[lam]^p] <= C G[lam]^theta
    G3,             // full composition chain
    Marcinkiewicz,  // weak-norm mapping M(delta^gamma) -> M^k(delta^alpha)
    RegularityMap,  // L^t mapping bounds, both branches
};

std::string to_string(EstimateId id);
EstimateId estimate_id_from_string(const std::string& name);

/// One extracted constant with its provenance. `stable` is filled by
/// mark_stable once a second resolution is available.
struct EstimateReport {
    EstimateId id = EstimateId::TwoSided;
    long samples = 0;
    double constant = 0.0;
    double aux_constant = 0.0;            // secondary constant where the
                                          // estimate extracts two (chain ops)
    std::array<double, 6> worst_pair{};   // sample coordinates of the argmax
    bool stable = false;
    bool window_violation = false;        // hypothesis violated on purpose
    std::string note;

    std::string to_json_line() const;
    static EstimateReport from_json_line(const std::string& line);
};

/// Marks `fine` stable when the constant moved less than rel between the two
/// resolutions. Returns fine.
EstimateReport& mark_stable(EstimateReport& fine, const EstimateReport& coarse,
                            double rel = 0.10);

/// Lemma-style exponent table for the weak-norm mapping.
double k_alpha_gamma(int N, double s, double alpha, double gamma);

/// Sandwich constant of the assembled kernel over random plus structured node
/// pairs: smallest c with c^-1 <= K / min-form <= c.
EstimateReport check_two_sided(const GreenMatrix& G, const SystemParams& params,
                               long samples, std::uint64_t seed);

/// Upper-bound constants of the two boundary estimates. which is 233 or 234.
EstimateReport check_boundary_bound(const GreenMatrix& G, const SystemParams& params,
                                    int which, long samples, std::uint64_t seed);

/// Triple-kernel constant over sampled node triples.
EstimateReport check_3g(const GreenMatrix& G, const SystemParams& params,
                        long samples, std::uint64_t seed);

/// Composition constant C = max_i G[G[lam]^p](x_i) / G[lam](x_i)^theta for a
/// unit measure lam. theta = 1 reports Ingg, theta < 1 reports Inggs; a theta
/// outside the admissible window is allowed through with window_violation set
/// (the constant is then expected to grow under refinement).
EstimateReport check_composition(const GreenMatrix& G, const Measure& lam,
                                 double p, double theta, const SystemParams& params);

/// Chain constants: constant = max G[G[G[lam]^p]^q] / G[lam],
/// aux_constant = max G[G[lam]^p]^q / G[lam]^t.
EstimateReport check_g3_chain(const GreenMatrix& G, const Measure& lam,
                              const SystemParams& params, double t);

/// Operator-norm surrogate over a battery of unit-L^t densities: sup-norm
/// ratio when t > N/(2s), L^(Nt/(N-2ts)) ratio when t < N/(2s).
EstimateReport check_mapping(const GreenMatrix& G, const SystemParams& params,
                             double t, std::uint64_t seed);

/// Weak-norm mapping ratio over a battery of unit measures in M(delta^gamma).
EstimateReport check_weak_mapping(const GreenMatrix& G, const SystemParams& params,
                                  double alpha, double gamma, std::uint64_t seed);

}  // namespace fraclane
