#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fraclane/stability.hpp"
#include "test_support.hpp"

using namespace fraclane;
using fraclane::testing::cached_green;
using fraclane::testing::lebesgue_unit;
using fraclane::testing::ref_params;

namespace {

const SpectralData& spec256() {
    static SpectralData spec = spectral_decompose(cached_green(256), 200);
    return spec;
}

// Independent largest-eigenvalue oracle: plain power iteration on the pencil
// matrix, no library eigensolver involved.
double pencil_lambda_max(const SpectralData& spec, const GridFunction& weight) {
    const Grid& g = *spec.grid;
    const int n = g.resolution();
    Eigen::VectorXd ww(n);
    for (int i = 0; i < n; ++i) ww(i) = g.weights[i] * weight.values[i];
    Eigen::MatrixXd M = spec.phi.transpose() * ww.asDiagonal() * spec.phi;
    for (int j = 0; j < spec.count; ++j)
        for (int k = 0; k < spec.count; ++k)
            M(j, k) /= std::sqrt(spec.eigenvalues[j] * spec.eigenvalues[k]);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(spec.count).normalized();
    double lam = 0.0;
    for (int it = 0; it < 20000; ++it) {
        Eigen::VectorXd y = M * x;
        double next = y.norm();
        y /= next;
        if (std::abs(next - lam) < 1e-12 * next && it > 10) return next;
        lam = next;
        x = y;
    }
    return lam;
}

}  // namespace

TEST_CASE("gap of the unweighted form is 1") {
    GridFunction zero(spec256().grid, 0.0);
    CHECK(stability_gap(spec256(), zero, 1.2) == 1.0);
}

TEST_CASE("constant weight diagonalizes in the eigenbasis") {
    double c = 0.37;
    GridFunction w(spec256().grid, c);
    double gap = stability_gap(spec256(), w, 1.2);
    CHECK(gap == doctest::Approx(1.0 - 1.2 * c / spec256().lambda1()).epsilon(1e-10));
}

TEST_CASE("scaling covariance and weight monotonicity") {
    auto sp = ref_params();
    const auto& G = cached_green(256);
    auto rep = picard_iterate(G, lebesgue_unit(G.grid, sp.s),
                              lebesgue_unit(G.grid, sp.s), sp);
    REQUIRE(rep.converged);
    GridFunction w = pow_clamped(rep.v, sp.p - 1.0);

    double gap = stability_gap(spec256(), w, sp.p);
    for (double t : {0.5, 2.0, 7.0}) {
        GridFunction wt = w;
        for (auto& v : wt.values) v *= t;
        CHECK(stability_gap(spec256(), wt, sp.p) ==
              doctest::Approx(1.0 - t * (1.0 - gap)).epsilon(1e-10));
    }

    // nodewise-larger weight gives a smaller or equal gap
    GridFunction bigger = w;
    for (auto& v : bigger.values) v += 0.05;
    CHECK(stability_gap(spec256(), bigger, sp.p) <= gap);
}

TEST_CASE("pencil eigenvalue agrees with the power-iteration oracle") {
    auto sp = ref_params();
    const auto& G = cached_green(256);
    auto rep = picard_iterate(G, lebesgue_unit(G.grid, sp.s),
                              lebesgue_unit(G.grid, sp.s), sp);
    GridFunction w = pow_clamped(rep.v, sp.p - 1.0);
    double gap = stability_gap(spec256(), w, sp.p);
    double oracle = 1.0 - sp.p * pencil_lambda_max(spec256(), w);
    CHECK(gap == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("minimal pair is stable at small data; gaps rise toward 1") {
    const auto& G = cached_green(256);
    auto leb = lebesgue_unit(G.grid, 0.25);
    double prev_u = -1.0, prev_v = -1.0;
    for (double t : {0.02, 0.01, 0.005, 0.0025}) {
        auto sp = ref_params(t, t);
        auto rep = picard_iterate(G, leb, leb, sp);
        REQUIRE(rep.converged);
        auto stab = make_stability_report(spec256(), rep, sp);
        CHECK(stab.stable);
        CHECK(stab.gap_u > 0.0);
        CHECK(stab.gap_v > 0.0);
        CHECK(stab.C_strict == std::min(stab.gap_u, stab.gap_v));
        if (prev_u >= 0.0) {
            CHECK(stab.gap_u > prev_u);
            CHECK(stab.gap_v > prev_v);
        }
        prev_u = stab.gap_u;
        prev_v = stab.gap_v;
    }
    CHECK(prev_u < 1.0);
    CHECK(prev_v < 1.0);
}

TEST_CASE("truncation defect guard fires") {
    SpectralData tiny = spectral_decompose(cached_green(256), 4);
    GridFunction spike(tiny.grid, 0.0);
    spike[37] = 1.0;
    CHECK_THROWS_AS(stability_gap(tiny, spike, 1.0), numeric_error);
    GridFunction neg(tiny.grid, -1.0);
    CHECK_THROWS_AS(stability_gap(spec256(), neg, 1.0), std::invalid_argument);
}

TEST_CASE("first-eigenpair identities on a converged pair") {
    auto sp = ref_params();
    const auto& G = cached_green(256);
    auto leb = lebesgue_unit(G.grid, sp.s);
    auto rep = picard_iterate(G, leb, leb, sp);
    REQUIRE(rep.converged);

    auto rec = apriori_check(rep, spec256(), leb, leb, sp);
    CHECK(rec.identity_residual_u < 1e-6);
    CHECK(rec.identity_residual_v < 1e-6);
    CHECK(std::isfinite(rec.lp_bound_v));
    CHECK(std::isfinite(rec.l1_chain_u));
    CHECK(std::isfinite(rec.l1_chain_v));
    CHECK(rec.phi1_comparability > 1.0);
    CHECK(rec.phi1_comparability < 1e3);

    // chain constants stable under refinement
    SpectralData spec128 = spectral_decompose(cached_green(128), 100);
    auto rep128 = picard_iterate(cached_green(128), lebesgue_unit(spec128.grid, sp.s),
                                 lebesgue_unit(spec128.grid, sp.s), sp);
    auto rec128 = apriori_check(rep128, spec128, lebesgue_unit(spec128.grid, sp.s),
                                lebesgue_unit(spec128.grid, sp.s), sp);
    CHECK(rec.l1_chain_u == doctest::Approx(rec128.l1_chain_u).epsilon(0.10));

    // zero data: all integrals vanish, identities are 0 = 0
    auto sp0 = ref_params(0.0, 0.0);
    auto rep0 = picard_iterate(G, Measure::zero(), Measure::zero(), sp0);
    auto rec0 = apriori_check(rep0, spec256(), Measure::zero(), Measure::zero(), sp0);
    CHECK(rec0.identity_residual_u == 0.0);
    CHECK(rec0.identity_residual_v == 0.0);

    auto sp_bad = SystemParams::make(1, 0.25, 0.5, 1.5, 0.01, 0.01);
    CHECK_THROWS_AS(apriori_check(rep, spec256(), leb, leb, sp_bad),
                    std::invalid_argument);
}
