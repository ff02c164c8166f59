#include "fraclane/kernel_verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace fraclane {

namespace {

double delta_of(const Grid& g, int i) { return g.delta[static_cast<std::size_t>(i)]; }

// Kernel value from the assembled matrix after cell-volume normalization.
double kval(const GreenMatrix& G, int i, int j) {
    return G.entries(i, j) / G.grid->weights[static_cast<std::size_t>(j)];
}

void record_pair(EstimateReport& r, const Grid& g, int i, int j, int k = -1) {
    r.worst_pair = {g.nodes[static_cast<std::size_t>(i)][0],
                    g.nodes[static_cast<std::size_t>(i)][1],
                    g.nodes[static_cast<std::size_t>(j)][0],
                    g.nodes[static_cast<std::size_t>(j)][1],
                    k >= 0 ? g.nodes[static_cast<std::size_t>(k)][0] : 0.0,
                    k >= 0 ? g.nodes[static_cast<std::size_t>(k)][1] : 0.0};
}

// Structured pairs worth always probing: adjacent nodes and boundary corners.
std::vector<std::pair<int, int>> structured_pairs(const Grid& g) {
    std::vector<std::pair<int, int>> out;
    int n = g.resolution();
    for (int i = 0; i + 1 < n; ++i) out.emplace_back(i, i + 1);
    for (int i = 0; i + 2 < n; ++i) out.emplace_back(i, i + 2);
    out.emplace_back(0, n - 1);
    out.emplace_back(0, n / 2);
    return out;
}

}  // namespace

std::string to_string(EstimateId id) {
    switch (id) {
        case EstimateId::TwoSided: return "TwoSided";
        case EstimateId::Bnd233: return "Bnd233";
        case EstimateId::Bnd234: return "Bnd234";
        case EstimateId::ThreeG: return "ThreeG";
        case EstimateId::Ingg: return "Ingg";
        case EstimateId::Inggs: return "Inggs";
        case EstimateId::G3: return "G3";
        case EstimateId::Marcinkiewicz: return "Marcinkiewicz";
        case EstimateId::RegularityMap: return "RegularityMap";
    }
    return "?";
}

EstimateId estimate_id_from_string(const std::string& name) {
    for (int k = 0; k <= static_cast<int>(EstimateId::RegularityMap); ++k)
        if (to_string(static_cast<EstimateId>(k)) == name)
            return static_cast<EstimateId>(k);
    throw std::invalid_argument("unknown estimate id: " + name);
}

std::string EstimateReport::to_json_line() const {
    nlohmann::json j;
    j["estimate"] = to_string(id);
    j["samples"] = samples;
    j["constant"] = constant;
    j["aux_constant"] = aux_constant;
    j["worst_pair"] = worst_pair;
    j["stable"] = stable;
    j["window_violation"] = window_violation;
    j["note"] = note;
    return j.dump();
}

EstimateReport EstimateReport::from_json_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    EstimateReport r;
    r.id = estimate_id_from_string(j["estimate"].get<std::string>());
    r.samples = j["samples"].get<long>();
    r.constant = j["constant"].get<double>();
    r.aux_constant = j["aux_constant"].get<double>();
    auto wp = j["worst_pair"].get<std::vector<double>>();
    std::copy_n(wp.begin(), 6, r.worst_pair.begin());
    r.stable = j["stable"].get<bool>();
    r.window_violation = j["window_violation"].get<bool>();
    r.note = j["note"].get<std::string>();
    return r;
}

EstimateReport& mark_stable(EstimateReport& fine, const EstimateReport& coarse,
                            double rel) {
    double scale = std::max(std::abs(fine.constant), std::abs(coarse.constant));
    fine.stable = scale > 0.0 && std::abs(fine.constant - coarse.constant) <= rel * scale;
    return fine;
}

double k_alpha_gamma(int N, double s, double alpha, double gamma) {
    if (alpha < N * gamma / (N - 2.0 * s))
        return (N + alpha) / (N - 2.0 * s + gamma);
    return N / (N - 2.0 * s);
}

EstimateReport check_two_sided(const GreenMatrix& G, const SystemParams& params,
                               long samples, std::uint64_t seed) {
    const Grid& g = *G.grid;
    const int n = g.resolution();
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    auto pairs = structured_pairs(g);
    while (static_cast<long>(pairs.size()) < samples) {
        int i = pick(gen), j = pick(gen);
        if (i != j) pairs.emplace_back(i, j);
    }

    EstimateReport r;
    r.id = EstimateId::TwoSided;
    r.samples = static_cast<long>(pairs.size());
    // Parallel per-sample evaluation, deterministic serial reduction.
    std::vector<double> ratios(pairs.size());
    parallel_for(pairs.size(), Execution::parallel, [&](std::size_t k) {
        auto [i, j] = pairs[k];
        double d = dist(g.nodes[static_cast<std::size_t>(i)],
                        g.nodes[static_cast<std::size_t>(j)]);
        double bound = std::min(std::pow(d, 2.0 * params.s - params.dim),
                                std::pow(delta_of(g, i) * delta_of(g, j), params.s) *
                                    std::pow(d, -params.dim));
        ratios[k] = kval(G, i, j) / bound;
    });
    double lo = 1e300, hi = 0.0;
    int wi = 0, wj = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (ratios[k] > hi) {
            hi = ratios[k];
            wi = pairs[k].first;
            wj = pairs[k].second;
        }
        lo = std::min(lo, ratios[k]);
    }
    r.constant = std::max(hi, 1.0 / lo);
    r.aux_constant = lo;
    record_pair(r, g, wi, wj);
    return r;
}

EstimateReport check_boundary_bound(const GreenMatrix& G, const SystemParams& params,
                                    int which, long samples, std::uint64_t seed) {
    if (which != 233 && which != 234)
        throw std::invalid_argument("check_boundary_bound: which must be 233 or 234");
    const Grid& g = *G.grid;
    const int n = g.resolution();
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    auto pairs = structured_pairs(g);
    while (static_cast<long>(pairs.size()) < samples) {
        int i = pick(gen), j = pick(gen);
        if (i != j) pairs.emplace_back(i, j);
    }

    EstimateReport r;
    r.id = which == 233 ? EstimateId::Bnd233 : EstimateId::Bnd234;
    r.samples = static_cast<long>(pairs.size());
    int wi = 0, wj = 0;
    for (auto [i, j] : pairs) {
        double d = dist(g.nodes[static_cast<std::size_t>(i)],
                        g.nodes[static_cast<std::size_t>(j)]);
        double bound =
            which == 233
                ? std::pow(delta_of(g, j), params.s) * std::pow(d, params.s - params.dim)
                : std::pow(delta_of(g, j) / delta_of(g, i), params.s) *
                      std::pow(d, 2.0 * params.s - params.dim);
        double ratio = kval(G, i, j) / bound;
        if (ratio > r.constant) {
            r.constant = ratio;
            wi = i;
            wj = j;
        }
    }
    record_pair(r, g, wi, wj);
    return r;
}

EstimateReport check_3g(const GreenMatrix& G, const SystemParams& params,
                        long samples, std::uint64_t seed) {
    if (samples < 1000)
        throw std::invalid_argument("check_3g: needs at least 10^3 triples");
    const Grid& g = *G.grid;
    const int n = g.resolution();
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    EstimateReport r;
    r.id = EstimateId::ThreeG;
    long skipped = 0;
    std::vector<std::array<int, 3>> triples;
    triples.reserve(static_cast<std::size_t>(samples));
    for (long t = 0; t < samples; ++t) {
        int i = pick(gen), j = pick(gen), k = pick(gen);
        if (i == j || j == k || i == k) {
            ++skipped;
            continue;
        }
        triples.push_back({i, j, k});
    }
    if (static_cast<long>(triples.size()) < samples / 2)
        throw numeric_error("check_3g: fewer than half the requested triples usable");

    double e = params.dim - 2.0 * params.s;
    std::vector<double> ratios(triples.size());
    parallel_for(triples.size(), Execution::parallel, [&](std::size_t t) {
        auto [i, j, k] = triples[t];
        double dij = dist(g.nodes[static_cast<std::size_t>(i)],
                          g.nodes[static_cast<std::size_t>(j)]);
        double djk = dist(g.nodes[static_cast<std::size_t>(j)],
                          g.nodes[static_cast<std::size_t>(k)]);
        double dik = dist(g.nodes[static_cast<std::size_t>(i)],
                          g.nodes[static_cast<std::size_t>(k)]);
        double lhs = kval(G, i, j) * kval(G, j, k) / kval(G, i, k);
        double rhs = std::pow(dik, e) / (std::pow(dij, e) * std::pow(djk, e));
        ratios[t] = lhs / rhs;
    });
    int wi = 0, wj = 0, wk = 0;
    for (std::size_t t = 0; t < triples.size(); ++t)
        if (ratios[t] > r.constant) {
            r.constant = ratios[t];
            wi = triples[t][0];
            wj = triples[t][1];
            wk = triples[t][2];
        }
    r.samples = static_cast<long>(triples.size());
    r.note = "skipped " + std::to_string(skipped) + " degenerate triples";
    record_pair(r, g, wi, wj, wk);
    return r;
}

EstimateReport check_composition(const GreenMatrix& G, const Measure& lam,
                                 double p, double theta, const SystemParams& params) {
    const Grid& g = *G.grid;
    if (p >= params.Ns())
        throw std::invalid_argument(
            "check_composition: requires the subcriticality condition p < (N+s)/(N-s)");
    if (std::abs(lam.delta_mass(g, params.s) - 1.0) > 1e-8)
        throw std::invalid_argument("check_composition: measure must have unit mass");
    if (theta <= 0.0 || theta > 1.0)
        throw std::invalid_argument("check_composition: theta must lie in (0, 1]");

    double window_lo = std::max(0.0, p - params.Ns() + 1.0);

    EstimateReport r;
    r.id = theta == 1.0 ? EstimateId::Ingg : EstimateId::Inggs;
    r.window_violation = theta <= window_lo;
    if (r.window_violation)
        r.note = "theta below the admissible window; constant expected to grow "
                 "under refinement";

    GridFunction Gl = apply_green(G, lam, params);
    GridFunction inner = pow_clamped(Gl, p);
    GridFunction num = apply_green(G, inner);
    int wi = 0;
    for (int i = 0; i < g.resolution(); ++i) {
        double ratio = num[i] / std::pow(Gl[i], theta);
        if (ratio > r.constant) {
            r.constant = ratio;
            wi = i;
        }
    }
    r.samples = g.resolution();
    record_pair(r, g, wi, wi);
    return r;
}

EstimateReport check_g3_chain(const GreenMatrix& G, const Measure& lam,
                              const SystemParams& params, double t) {
    const Grid& g = *G.grid;
    double mixed = params.q * (params.p + 1.0) / (params.q + 1.0);
    if (!(mixed < params.Ns()))
        throw std::invalid_argument(
            "check_g3_chain: requires q(p+1)/(q+1) < (N+s)/(N-s)");
    double lo = std::max(0.0, params.ts());
    if (!(t > lo && t <= params.q))
        throw std::invalid_argument(
            "check_g3_chain: t must lie in (max(0, q(p-Ns+1)), q]");
    if (std::abs(lam.delta_mass(g, params.s) - 1.0) > 1e-8)
        throw std::invalid_argument("check_g3_chain: measure must have unit mass");

    GridFunction Gl = apply_green(G, lam, params);
    GridFunction G2 = apply_green(G, pow_clamped(Gl, params.p));
    GridFunction G2q = pow_clamped(G2, params.q);
    GridFunction G3 = apply_green(G, G2q);

    EstimateReport r;
    r.id = EstimateId::G3;
    r.samples = g.resolution();
    int wi = 0;
    for (int i = 0; i < g.resolution(); ++i) {
        double c_t = G2q[i] / std::pow(Gl[i], t);
        r.aux_constant = std::max(r.aux_constant, c_t);
        double c_chain = G3[i] / Gl[i];
        if (c_chain > r.constant) {
            r.constant = c_chain;
            wi = i;
        }
    }
    record_pair(r, g, wi, wi);
    return r;
}

EstimateReport check_mapping(const GreenMatrix& G, const SystemParams& params,
                             double t, std::uint64_t seed) {
    const Grid& g = *G.grid;
    double borderline = params.dim / (2.0 * params.s);
    if (t <= 1.0) throw std::invalid_argument("check_mapping: t must exceed 1");
    if (std::abs(t - borderline) < 1e-12)
        throw std::invalid_argument("check_mapping: t = N/(2s) excluded");

    // Battery of rough-but-admissible densities, normalized in L^t.
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> U(0.5, 1.5);
    std::vector<GridFunction> battery;
    battery.emplace_back(G.grid, 1.0);
    {
        GridFunction f(G.grid);  // interior power spike, still in L^t
        double beta = 0.5 * params.dim / t;
        for (int i = 0; i < g.resolution(); ++i)
            f[i] = std::pow(std::max(norm2(g.nodes[static_cast<std::size_t>(i)]), 1e-6),
                            -beta);
        battery.push_back(f);
    }
    {
        GridFunction f(G.grid);  // boundary layer
        double gamma = 0.5 / t;
        for (int i = 0; i < g.resolution(); ++i)
            f[i] = std::pow(delta_of(g, i), -gamma);
        battery.push_back(f);
    }
    {
        GridFunction f(G.grid);
        for (int i = 0; i < g.resolution(); ++i) f[i] = U(gen);
        battery.push_back(f);
    }

    EstimateReport r;
    r.id = EstimateId::RegularityMap;
    r.samples = static_cast<long>(battery.size());
    double target = params.dim * t / (params.dim - 2.0 * t * params.s);
    for (auto& f : battery) {
        double scale = norm_weighted(f, t, 0.0);
        for (auto& v : f.values) v /= scale;
        GridFunction Gf = apply_green(G, f);
        double val = t > borderline ? Gf.max_abs() : norm_weighted(Gf, target, 0.0);
        r.constant = std::max(r.constant, val);
    }
    r.note = t > borderline ? "sup-norm branch" : "Lebesgue branch, exponent Nt/(N-2ts)";
    return r;
}

EstimateReport check_weak_mapping(const GreenMatrix& G, const SystemParams& params,
                                  double alpha, double gamma, std::uint64_t seed) {
    const Grid& g = *G.grid;
    (void)seed;
    double k = k_alpha_gamma(params.dim, params.s, alpha, gamma);

    std::vector<Measure> battery;
    battery.push_back(Measure::from_density(GridFunction(G.grid, 1.0)));
    battery.push_back(Measure::dirac({0.0, 0.0}, 1.0));
    battery.push_back(Measure::dirac({0.7 * g.radius, 0.0}, 1.0));
    {
        Measure two;
        two.atoms.push_back({{-0.5 * g.radius, 0.0}, 0.3});
        two.atoms.push_back({{0.25 * g.radius, 0.0}, 1.1});
        battery.push_back(two);
    }

    GridFunction dalpha(G.grid);
    for (int i = 0; i < g.resolution(); ++i) dalpha[i] = std::pow(delta_of(g, i), alpha);

    EstimateReport r;
    r.id = EstimateId::Marcinkiewicz;
    r.samples = static_cast<long>(battery.size());
    r.aux_constant = k;
    for (auto& m : battery) {
        // unit mass in M(Omega, delta^gamma)
        double mass = 0.0;
        if (m.density)
            for (int i = 0; i < g.resolution(); ++i)
                mass += m.density->values[static_cast<std::size_t>(i)] *
                        std::pow(delta_of(g, i), gamma) *
                        g.weights[static_cast<std::size_t>(i)];
        for (const Atom& a : m.atoms)
            mass += a.mass * std::pow(g.radius - norm2(a.location), gamma);
        Measure unit = m.scaled(1.0 / mass);
        GridFunction Gm = apply_green(G, unit, params);
        r.constant = std::max(r.constant, weak_quasinorm(Gm, k, dalpha));
    }
    r.note = "alpha=" + std::to_string(alpha) + " gamma=" + std::to_string(gamma);
    return r;
}

}  // namespace fraclane
