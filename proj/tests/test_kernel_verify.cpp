#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fraclane/kernel_verify.hpp"
#include "test_support.hpp"

using namespace fraclane;
using fraclane::testing::cached_green;
using fraclane::testing::lebesgue_unit;
using fraclane::testing::ref_params;

namespace {

Measure unit_dirac(const GridPtr& g, double s) {
    return Measure::dirac({0.0, 0.0}, 1.0).normalized(*g, s);
}

// 3G ratio straight from the normalized matrix entries.
double three_g_ratio(const GreenMatrix& G, double s, int i, int j, int k) {
    const Grid& g = *G.grid;
    auto kv = [&](int a, int b) { return G.entries(a, b) / g.weights[b]; };
    double e = g.dim - 2.0 * s;
    double dij = dist(g.nodes[i], g.nodes[j]);
    double djk = dist(g.nodes[j], g.nodes[k]);
    double dik = dist(g.nodes[i], g.nodes[k]);
    return kv(i, j) * kv(j, k) / kv(i, k) /
           (std::pow(dik, e) / (std::pow(dij, e) * std::pow(djk, e)));
}

}  // namespace

TEST_CASE("two-sided sandwich constant: frozen reference, refinement-stable") {
    auto sp = ref_params();
    auto fine = check_two_sided(cached_green(256), sp, 10000, 0);
    auto coarse = check_two_sided(cached_green(128), sp, 10000, 0);
    mark_stable(fine, coarse);
    CHECK(fine.stable);
    CHECK(fine.constant == doctest::Approx(4.586).epsilon(0.10));
    CHECK(fine.aux_constant > 0.0);  // lower ratio strictly positive
    // sample-count invariance
    auto more = check_two_sided(cached_green(256), sp, 20000, 0);
    CHECK(std::abs(more.constant - fine.constant) <= 0.10 * fine.constant);
}

TEST_CASE("boundary upper bounds hold with finite constants") {
    auto sp = ref_params();
    for (int which : {233, 234}) {
        auto fine = check_boundary_bound(cached_green(256), sp, which, 5000, 0);
        auto coarse = check_boundary_bound(cached_green(128), sp, which, 5000, 0);
        mark_stable(fine, coarse);
        CHECK(std::isfinite(fine.constant));
        CHECK(fine.constant > 0.0);
        CHECK(fine.stable);
    }
    CHECK_THROWS_AS(check_boundary_bound(cached_green(128), sp, 300, 100, 0),
                    std::invalid_argument);
}

TEST_CASE("triple-kernel constant: finite, stable, symmetric in the outer pair") {
    auto sp = ref_params();
    auto fine = check_3g(cached_green(256), sp, 2000, 0);
    auto coarse = check_3g(cached_green(128), sp, 2000, 0);
    mark_stable(fine, coarse);
    CHECK(fine.stable);
    CHECK(fine.constant == doctest::Approx(0.397).epsilon(0.10));
    CHECK(fine.note.find("skipped") != std::string::npos);
    CHECK_THROWS_AS(check_3g(cached_green(128), sp, 100, 0), std::invalid_argument);

    // swapping the outer points changes the ratio only through the assembly's
    // symmetry defect
    const auto& G = cached_green(256);
    double a = three_g_ratio(G, sp.s, 10, 97, 201);
    double b = three_g_ratio(G, sp.s, 201, 97, 10);
    CHECK(a == doctest::Approx(b).epsilon(0.02));
}

TEST_CASE("composition constants over the data battery") {
    auto sp = ref_params();
    const auto& Gf = cached_green(256);
    const auto& Gc = cached_green(128);
    auto leb_f = lebesgue_unit(Gf.grid, sp.s), leb_c = lebesgue_unit(Gc.grid, sp.s);
    auto dir_f = unit_dirac(Gf.grid, sp.s), dir_c = unit_dirac(Gc.grid, sp.s);

    for (double p : {0.8, 1.0, 1.2}) {
        for (double theta : {1.0, (p + 1.0) / (sp.q + 1.0)}) {
            auto rf = check_composition(Gf, leb_f, p, theta, sp);
            auto rc = check_composition(Gc, leb_c, p, theta, sp);
            mark_stable(rf, rc);
            CHECK(std::isfinite(rf.constant));
            CHECK(rf.stable);
            CHECK(!rf.window_violation);
            auto df = check_composition(Gf, dir_f, p, theta, sp);
            auto dc = check_composition(Gc, dir_c, p, theta, sp);
            mark_stable(df, dc);
            CHECK(std::isfinite(df.constant));
            CHECK(df.stable);
        }
    }

    // frozen reference constants (regression, 10%)
    CHECK(check_composition(Gf, leb_f, 1.2, 1.0, sp).constant ==
          doctest::Approx(0.9968).epsilon(0.10));
    CHECK(check_composition(Gf, dir_f, 1.2, 1.0, sp).constant ==
          doctest::Approx(1.468).epsilon(0.10));

    // worst admissible case: p just below the subcritical exponent
    double p_hi = 0.99 * sp.Ns();
    auto worst_f = check_composition(Gf, dir_f, p_hi, 1.0, sp);
    auto worst_c = check_composition(Gc, dir_c, p_hi, 1.0, sp);
    CHECK(std::isfinite(worst_f.constant));
    CHECK(std::abs(worst_f.constant - worst_c.constant) <= 0.10 * worst_f.constant);

    // extracted constants vary monotonically along the p-ladder (decreasing
    // here: the unit-normalized potential sits below 1 at the maximizer)
    double prev = 1e300;
    for (double p : {0.8, 1.0, 1.2}) {
        double c = check_composition(Gf, leb_f, p, 1.0, sp).constant;
        CHECK(c < prev);
        prev = c;
    }

    CHECK_THROWS_WITH_AS(check_composition(Gf, leb_f, 2.0, 1.0, sp),
                         doctest::Contains("subcriticality"), std::invalid_argument);
    CHECK_THROWS_AS(check_composition(Gf, Measure::dirac({0.0, 0.0}, 2.0), 1.0, 1.0, sp),
                    std::invalid_argument);
}

TEST_CASE("out-of-window probe blows up under refinement") {
    // p just below the subcritical exponent, theta far below the window,
    // point mass at the origin: the constant must grow and lose stability.
    auto spw = SystemParams::make(1, 0.25, 1.6, 1.6);
    double first = 0.0, last = 0.0;
    EstimateReport prev;
    bool have_prev = false;
    for (int n : {32, 64, 128, 256}) {
        auto g = build_grid(1, 1.0, n);
        GreenMatrix G = assemble_green(g, spw);
        auto r = check_composition(G, unit_dirac(g, spw.s), 1.6, 0.05, spw);
        CHECK(r.window_violation);
        if (!have_prev) first = r.constant;
        if (have_prev) {
            mark_stable(r, prev);
            CHECK(!r.stable);
        }
        last = r.constant;
        prev = r;
        have_prev = true;
    }
    CHECK(last / first >= 2.0);
}

TEST_CASE("composition chain constants") {
    auto sp = ref_params();
    const auto& Gf = cached_green(256);
    const auto& Gc = cached_green(128);
    auto leb_f = lebesgue_unit(Gf.grid, sp.s), leb_c = lebesgue_unit(Gc.grid, sp.s);
    double t = sp.q * (sp.p + 1.0) / (sp.q + 1.0);

    auto rf = check_g3_chain(Gf, leb_f, sp, t);
    auto rc = check_g3_chain(Gc, leb_c, sp, t);
    mark_stable(rf, rc);
    CHECK(rf.stable);
    CHECK(rf.constant == doctest::Approx(0.8877).epsilon(0.10));
    CHECK(rf.aux_constant == doctest::Approx(0.9558).epsilon(0.10));

    // p = q: the window simplifies and the chain stays finite
    auto sp_eq = SystemParams::make(1, 0.25, 1.3, 1.3);
    auto req = check_g3_chain(Gf, leb_f, sp_eq, 1.3);
    CHECK(std::isfinite(req.constant));

    CHECK_THROWS_WITH_AS(check_g3_chain(Gf, leb_f, sp, sp.q + 0.5),
                         doctest::Contains("t must lie"), std::invalid_argument);
    auto sp_bad = SystemParams::make(1, 0.25, 1.6, 2.2);  // q(p+1)/(q+1) >= Ns
    CHECK_THROWS_WITH_AS(check_g3_chain(Gf, leb_f, sp_bad, 1.0),
                         doctest::Contains("q(p+1)/(q+1)"), std::invalid_argument);
}

TEST_CASE("mapping bounds: both branches and the exponent table") {
    auto sp = ref_params();
    const auto& G = cached_green(256);
    double borderline = sp.dim / (2.0 * sp.s);  // = 2

    auto sup = check_mapping(G, sp, 3.0, 0);
    CHECK(std::isfinite(sup.constant));
    CHECK(sup.note.find("sup-norm") != std::string::npos);
    auto leb = check_mapping(G, sp, 1.5, 0);
    CHECK(std::isfinite(leb.constant));
    CHECK_THROWS_AS(check_mapping(G, sp, borderline, 0), std::invalid_argument);
    CHECK_THROWS_AS(check_mapping(G, sp, 0.9, 0), std::invalid_argument);

    // t >> N/(2s), density 1: the sup of the response to 1 equals the largest
    // row sum of the assembled operator
    GridFunction g1 = apply_green(G, GridFunction(G.grid, 1.0));
    double rowmax = 0.0;
    for (int i = 0; i < G.size(); ++i) rowmax = std::max(rowmax, G.entries.row(i).sum());
    CHECK(g1.max() == doctest::Approx(rowmax).epsilon(1e-13));

    // exponent table
    CHECK(k_alpha_gamma(1, 0.25, 0.25, 0.25) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(k_alpha_gamma(1, 0.25, 0.0, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(k_alpha_gamma(1, 0.25, 0.0, 0.25) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(k_alpha_gamma(1, 0.25, 0.25, 0.0) == doctest::Approx(2.0).epsilon(1e-15));

    for (double alpha : {0.0, sp.s})
        for (double gamma : {0.0, sp.s}) {
            auto w = check_weak_mapping(G, sp, alpha, gamma, 0);
            CHECK(std::isfinite(w.constant));
            CHECK(w.constant > 0.0);
            CHECK(w.aux_constant ==
                  doctest::Approx(k_alpha_gamma(sp.dim, sp.s, alpha, gamma)).epsilon(1e-14));
        }
}

TEST_CASE("lower comparability of Green potentials against delta^s") {
    // G[lam]^theta >= c delta^s with c > 0 for unit measures, theta in {1/2, 1}
    auto sp = ref_params();
    const auto& G = cached_green(128);
    std::vector<Measure> battery{
        lebesgue_unit(G.grid, sp.s), unit_dirac(G.grid, sp.s),
        Measure::dirac({0.9, 0.0}, 1.0).normalized(*G.grid, sp.s)};
    {
        Measure two;
        two.atoms.push_back({{-0.5, 0.0}, 1.0});
        two.atoms.push_back({{0.25, 0.0}, 0.5});
        battery.push_back(two.normalized(*G.grid, sp.s));
    }
    for (const auto& lam : battery)
        for (double theta : {0.5, 1.0}) {
            GridFunction Gl = apply_green(G, lam, sp);
            double cmin = 1e300;
            for (int i = 0; i < G.size(); ++i)
                cmin = std::min(cmin, std::pow(Gl[i], theta) /
                                          std::pow(G.grid->delta[i], sp.s));
            CHECK(cmin > 0.0);
        }
}

TEST_CASE("estimate reports round-trip through JSON lines") {
    auto sp = ref_params();
    auto r = check_3g(cached_green(128), sp, 1000, 7);
    r.stable = true;
    auto back = EstimateReport::from_json_line(r.to_json_line());
    CHECK(back.id == r.id);
    CHECK(back.samples == r.samples);
    CHECK(back.constant == r.constant);
    CHECK(back.aux_constant == r.aux_constant);
    CHECK(back.worst_pair == r.worst_pair);
    CHECK(back.stable == r.stable);
    CHECK(back.window_violation == r.window_violation);
    CHECK(back.note == r.note);
    CHECK_THROWS_AS(estimate_id_from_string("NoSuchEstimate"), std::invalid_argument);
}
