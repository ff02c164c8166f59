#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fraclane/linking.hpp"
#include "test_support.hpp"

using namespace fraclane;
using fraclane::testing::cached_green;
using fraclane::testing::lebesgue_unit;
using fraclane::testing::ref_params;

namespace {

struct Setup {
    SystemParams sp;
    SolveReport minimal;
    SpectralData spec;
    StabilityReport stab;
    NonlinearTerms terms;
    LinkingProblem prob;
    LinkingGeometry geom;
};

const Setup& setup(double p = 1.2, double q = 1.4, int n = 40) {
    static std::vector<std::pair<std::array<double, 3>, Setup*>> cache;
    for (auto& [key, s] : cache)
        if (key[0] == p && key[1] == q && key[2] == n) return *s;
    auto* s = new Setup{};
    s->sp = SystemParams::make(1, 0.25, p, q, 0.01, 0.01);
    const auto& G = cached_green(256);
    auto leb = lebesgue_unit(G.grid, s->sp.s);
    s->minimal = picard_iterate(G, leb, leb, s->sp);
    s->spec = spectral_decompose(G, 200);
    s->stab = make_stability_report(s->spec, s->minimal, s->sp);
    s->terms = make_nonlinear_terms(s->minimal, s->sp);
    s->prob = LinkingProblem::make(s->spec, s->minimal, s->sp, n);
    s->geom = calibrate_geometry(s->terms, s->prob, s->stab, 0);
    cache.emplace_back(std::array<double, 3>{p, q, double(n)}, s);
    return *s;
}

Coordinates random_coords(int n, std::mt19937_64& gen, double scale) {
    std::normal_distribution<double> Z(0.0, scale);
    Coordinates z = Coordinates::zero(n);
    z.r = std::abs(Z(gen)) + 0.1;
    for (int k = 0; k < n; ++k) {
        z.a(k) = Z(gen) / (1.0 + k);
        z.b(k) = Z(gen) / (1.0 + k);
    }
    return z;
}

}  // namespace

TEST_CASE("primitive nonlinearities: values and pointwise inequalities") {
    double p = 1.2;
    CHECK(H_eval(0.7, -3.0, p) == 0.0);
    CHECK(h_eval(0.7, -3.0, p) == 0.0);
    CHECK(H_eval(0.0, 2.0, p) ==
          doctest::Approx(std::pow(2.0, p + 1.0) / (p + 1.0)).epsilon(1e-14));
    CHECK(h_eval(0.0, 2.0, p) == doctest::Approx(std::pow(2.0, p)).epsilon(1e-14));

    // strict lower bound t^(p+1)/(p+1) < H(r,t) for r, t > 0 on a log grid
    for (int ir = 1; ir <= 100; ++ir)
        for (int it = 1; it <= 100; ++it) {
            double r = 1e-3 * std::pow(1e4, ir / 100.0);
            double t = 1e-3 * std::pow(1e4, it / 100.0);
            CHECK(H_eval(r, t, p) > std::pow(t, p + 1.0) / (p + 1.0));
        }

    // nonnegativity on a signed grid
    for (double r : {0.0, 0.3, 2.0})
        for (double t : {-5.0, -0.1, 0.0, 0.1, 5.0}) {
            CHECK(H_eval(r, t, p) >= 0.0);
            CHECK(H_eval(r, t, 1.4) >= 0.0);
        }
}

TEST_CASE("split upper bound with grid-extracted constants") {
    // H(r,t) - (p/2) r^(p-1) t^2 <= eps r^(p-1) t^2 + c_eps t^(p+1)
    double p = 1.2;
    for (double eps : {0.1, 0.01}) {
        // extract c_eps by maximization over a coarse grid...
        double c_eps = 0.0;
        for (int ir = 0; ir <= 60; ++ir)
            for (int it = 1; it <= 60; ++it) {
                double r = 2.0 * ir / 60.0, t = 3.0 * it / 60.0;
                double lhs = H_eval(r, t, p) - 0.5 * p * std::pow(r, p - 1.0) * t * t -
                             eps * std::pow(r, p - 1.0) * t * t;
                c_eps = std::max(c_eps, lhs / std::pow(t, p + 1.0));
            }
        CHECK(std::isfinite(c_eps));
        // ...and confirm the inequality with margin on a finer grid
        for (int ir = 0; ir <= 173; ++ir)
            for (int it = 1; it <= 173; ++it) {
                double r = 2.0 * ir / 173.0, t = 3.0 * it / 173.0;
                CHECK(H_eval(r, t, p) - 0.5 * p * std::pow(r, p - 1.0) * t * t <=
                      eps * std::pow(r, p - 1.0) * t * t +
                          1.05 * c_eps * std::pow(t, p + 1.0) + 1e-14);
            }
    }
}

TEST_CASE("superquadraticity threshold from the frozen pair") {
    const auto& S = setup();
    CHECK(S.terms.theta > 2.0);
    CHECK(S.terms.theta < std::min(S.sp.p, S.sp.q) + 1.0);
    CHECK(S.terms.T > 0.0);
    CHECK(S.terms.M >= std::max(S.minimal.u.max(), S.minimal.v.max()));
    // H <= h t / theta on r <= M, t >= T over a 100x100 grid
    for (int ir = 0; ir <= 100; ++ir)
        for (int it = 0; it <= 100; ++it) {
            double r = S.terms.M * ir / 100.0;
            double t = S.terms.T * std::pow(100.0, it / 100.0);
            CHECK(H_eval(r, t, S.sp.p) <= h_eval(r, t, S.sp.p) * t / S.terms.theta);
            CHECK(H_eval(r, t, S.sp.q) <= h_eval(r, t, S.sp.q) * t / S.terms.theta);
        }
}

TEST_CASE("coercivity above any subcritical power") {
    // H(r,t) >= t^kappa - C with a grid-extracted finite C
    double p = 1.2, kappa = 2.1;
    double C = 0.0;
    double t_star = std::pow(p + 1.0, 1.0 / (p + 1.0 - kappa));
    for (int ir = 0; ir <= 100; ++ir)
        for (int it = 0; it <= 300; ++it) {
            double r = 2.0 * ir / 100.0;
            double t = 2.0 * t_star * it / 300.0;
            C = std::max(C, std::pow(t, kappa) - H_eval(r, t, p));
        }
    CHECK(std::isfinite(C));
    for (int ir = 0; ir <= 57; ++ir)
        for (int it = 0; it <= 357; ++it) {
            double r = 2.0 * ir / 57.0;
            double t = 3.0 * t_star * it / 357.0;
            CHECK(H_eval(r, t, p) >= std::pow(t, kappa) - 1.01 * C - 1e-12);
        }
}

TEST_CASE("energy basics: origin, pure antisymmetric elements") {
    const auto& S = setup();
    CHECK(energy(Coordinates::zero(S.prob.n), S.prob) == 0.0);
    CHECK(grad_energy_raw(Coordinates::zero(S.prob.n), S.prob).norm() == 0.0);

    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
        Coordinates z = random_coords(S.prob.n, gen, 0.5);
        z.r = 0.0;
        z.a.setZero();  // pure (w, -w)
        CHECK(energy(z, S.prob) <= 0.0);
    }
}

TEST_CASE("gradient matches central finite differences") {
    // three configurations, twenty random coordinate points each
    for (auto [p, q] : {std::pair<double, double>{1.2, 1.4}, {1.3, 1.3}, {1.1, 1.5}}) {
        const auto& S = setup(p, q, 12);
        std::mt19937_64 gen(11 + static_cast<std::uint64_t>(10 * p));
        for (int trial = 0; trial < 20; ++trial) {
            Coordinates z = random_coords(S.prob.n, gen, 0.6);
            Eigen::VectorXd g = grad_energy_raw(z, S.prob);
            Eigen::VectorXd x = z.packed();
            for (int k : {0, 1, 1 + S.prob.n / 2, S.prob.n, 1 + S.prob.n,
                          2 * S.prob.n}) {
                double h = 1e-6 * (1.0 + std::abs(x(k)));
                Eigen::VectorXd xp = x, xm = x;
                xp(k) += h;
                xm(k) -= h;
                double fd = (energy(Coordinates::unpack(xp, S.prob.n), S.prob) -
                             energy(Coordinates::unpack(xm, S.prob.n), S.prob)) /
                            (2.0 * h);
                double scale = std::max({std::abs(fd), std::abs(g(k)), 1e-4});
                CHECK(std::abs(fd - g(k)) / scale <= 1e-5);
            }
        }
    }
}

TEST_CASE("preconditioned gradient is the raw one scaled by the spectrum") {
    const auto& S = setup();
    std::mt19937_64 gen(5);
    Coordinates z = random_coords(S.prob.n, gen, 0.4);
    Eigen::VectorXd raw = grad_energy_raw(z, S.prob);
    Eigen::VectorXd pre = grad_energy(z, S.prob);
    CHECK(pre(0) == raw(0));
    for (int k = 0; k < S.prob.n; ++k) {
        CHECK(pre(1 + k) == doctest::Approx(raw(1 + k) / S.spec.eigenvalues[k]));
        CHECK(pre(1 + S.prob.n + k) ==
              doctest::Approx(raw(1 + S.prob.n + k) / S.spec.eigenvalues[k]));
    }
}

TEST_CASE("antisymmetric gradient block: -2 lambda b plus nonlinear part") {
    const auto& S = setup();
    std::mt19937_64 gen(7);
    Coordinates z = random_coords(S.prob.n, gen, 0.3);
    Eigen::VectorXd g = grad_energy_raw(z, S.prob);
    // The quadratic part of the b-gradient is exactly -2 lambda_k b_k; the
    // remainder must match central differences of the nonlinear part, i.e.
    // the energy with the closed-form quadratic subtracted.
    auto nonquad = [&](const Coordinates& zz) {
        double Q = zz.r * zz.r;
        for (int k = 0; k < S.prob.n; ++k)
            Q += S.spec.eigenvalues[k] *
                 (2.0 * zz.r * S.prob.psi0_l2(k) * zz.a(k) + zz.a(k) * zz.a(k) -
                  zz.b(k) * zz.b(k));
        return energy(zz, S.prob) - Q;
    };
    for (int k : {0, 3, S.prob.n - 1}) {
        double h = 1e-6 * (1.0 + std::abs(z.b(k)));
        Coordinates zp = z, zm = z;
        zp.b(k) += h;
        zm.b(k) -= h;
        double nl_fd = (nonquad(zp) - nonquad(zm)) / (2.0 * h);
        double nl_grad = g(1 + S.prob.n + k) + 2.0 * S.spec.eigenvalues[k] * z.b(k);
        CHECK(nl_grad == doctest::Approx(nl_fd).epsilon(1e-5));
    }
}

TEST_CASE("hessian matches finite differences of the gradient") {
    const auto& S = setup(1.2, 1.4, 8);
    std::mt19937_64 gen(13);
    Coordinates z = random_coords(S.prob.n, gen, 0.5);
    Eigen::MatrixXd H = hess_energy(z, S.prob);
    Eigen::VectorXd x = z.packed();
    for (int k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        double h = 1e-6 * (1.0 + std::abs(x(k)));
        xp(k) += h;
        xm(k) -= h;
        Eigen::VectorXd col =
            (grad_energy_raw(Coordinates::unpack(xp, S.prob.n), S.prob) -
             grad_energy_raw(Coordinates::unpack(xm, S.prob.n), S.prob)) /
            (2.0 * h);
        for (int j = 0; j < x.size(); ++j)
            CHECK(std::abs(H(j, k) - col(j)) <= 1e-4 * (1.0 + std::abs(col(j))));
    }
}

TEST_CASE("exchange symmetry of the functional") {
    const auto& S = setup(1.3, 1.3);
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 10; ++trial) {
        Coordinates z = random_coords(S.prob.n, gen, 0.5);
        Coordinates zs = z;
        zs.b = -z.b;  // swaps u and v
        CHECK(energy(z, S.prob) == energy(zs, S.prob));
    }
}

TEST_CASE("calibrated geometry passes verification") {
    const auto& S = setup();
    CHECK(S.geom.sigma > 0.0);
    CHECK(S.geom.rho_ball > 0.0);
    CHECK(S.geom.R0 >= std::sqrt(2.0) * S.geom.R1);
    auto rep = verify_geometry(S.geom, S.terms, S.prob, 1000, 42);
    CHECK(rep.accepted);
    CHECK(rep.sphere_min >= S.geom.sigma);
    CHECK(rep.e_minus_max <= 0.0);
    CHECK(rep.top_face_max <= 0.0);
    CHECK(rep.lateral_max <= 0.0);
    CHECK(rep.analytic_top_bound <= 0.0);
    // lateral-face algebra: R1^2 - R0^2/2 <= 0 once R0 >= sqrt(2) R1
    CHECK(S.geom.R1 * S.geom.R1 - 0.5 * S.geom.R0 * S.geom.R0 <= 1e-12);
}

TEST_CASE("calibration rejects an unstable frozen pair") {
    const auto& S = setup();
    StabilityReport bad = S.stab;
    bad.stable = false;
    bad.gap_u = -0.1;
    CHECK_THROWS_AS(calibrate_geometry(S.terms, S.prob, bad, 0), numeric_error);
}

TEST_CASE("sigma shrinks as the data grows") {
    const auto& G = cached_green(256);
    auto leb = lebesgue_unit(G.grid, 0.25);
    SpectralData spec = spectral_decompose(G, 200);
    double prev = 1e300;
    for (double t : {0.0025, 0.02, 0.08}) {
        auto sp = ref_params(t, t);
        auto rep = picard_iterate(G, leb, leb, sp);
        REQUIRE(rep.converged);
        auto stab = make_stability_report(spec, rep, sp);
        auto terms = make_nonlinear_terms(rep, sp);
        auto prob = LinkingProblem::make(spec, rep, sp, 40);
        auto geom = calibrate_geometry(terms, prob, stab, 0);
        CHECK(geom.sigma > 0.0);
        CHECK(geom.sigma < prev);
        prev = geom.sigma;
    }
}

TEST_CASE("critical point: acceptance, symmetry, and assembly") {
    const auto& S = setup();
    auto cp = find_critical_point(S.prob, S.geom, S.terms, 1e-8, 0);
    REQUIRE(cp.accepted);
    CHECK(cp.grad_norm <= 1e-8);
    CHECK(cp.energy >= 0.9 * S.geom.sigma);
    CHECK(cp.energy <= 1.1 * S.geom.R1 * S.geom.R1);
    CHECK(cp.neg_part_norm <= 1e-8);
    CHECK(cp.u0.max() > 1e-7);
    CHECK(cp.cerami.bounded);
    CHECK(std::isfinite(cp.cerami.max_hv_v));
    CHECK(std::isfinite(cp.cerami.max_H));

    const auto& G = cached_green(256);
    auto leb = lebesgue_unit(G.grid, S.sp.s);
    auto second = assemble_second_solution(cp, S.minimal, G, leb, leb, S.sp);
    CHECK(second.converged);
    CHECK(second.provenance == "linking-search");
    CHECK(second.final_residual <= 1e-6);
    // residual no worse than 10x the component residuals
    CHECK(second.final_residual <= 10.0 * (S.minimal.final_residual + 1e-11));
    // strict dominance, largest at an interior bump
    int center = G.grid->nearest_node({0.0, 0.0});
    CHECK(second.u[center] > S.minimal.u[center]);
    for (std::size_t i = 0; i < second.u.size(); ++i) {
        CHECK(second.u[i] > S.minimal.u[i]);
        CHECK(second.v[i] > S.minimal.v[i]);
    }
    CHECK(max_norm_diff(second.u, S.minimal.u) > 1e-4);

    // minimality of the monotone limit against the second solution
    for (std::size_t i = 0; i < second.u.size(); ++i) {
        CHECK(S.minimal.u[i] <= second.u[i]);
        CHECK(S.minimal.v[i] <= second.v[i]);
    }

    // trivial critical point is rejected
    CriticalPoint trivial;
    trivial.accepted = true;
    trivial.n = cp.n;
    trivial.u0 = GridFunction(G.grid, 0.0);
    trivial.v0 = GridFunction(G.grid, 0.0);
    CHECK_THROWS_AS(assemble_second_solution(trivial, S.minimal, G, leb, leb, S.sp),
                    std::invalid_argument);
}

TEST_CASE("level is stable in the subspace dimension") {
    const auto& S40 = setup();
    const auto& S20 = setup(1.2, 1.4, 20);
    auto cp40 = find_critical_point(S40.prob, S40.geom, S40.terms, 1e-8, 0);
    auto cp20 = find_critical_point(S20.prob, S20.geom, S20.terms, 1e-8, 0);
    REQUIRE(cp40.accepted);
    REQUIRE(cp20.accepted);
    CHECK(std::abs(cp40.energy - cp20.energy) <= 0.05 * cp40.energy);
}

TEST_CASE("symmetric configuration yields an exchange-symmetric saddle") {
    const auto& S = setup(1.3, 1.3);
    auto cp = find_critical_point(S.prob, S.geom, S.terms, 1e-8, 0);
    REQUIRE(cp.accepted);
    CHECK(max_norm_diff(cp.u0, cp.v0) <= 1e-10);
}
