#include "fraclane/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace fraclane {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

Measure build_measure(const MeasureSpec& spec, GridPtr grid, double s) {
    Measure m;
    if (spec.type == "lebesgue") {
        m.density = GridFunction(grid, 1.0);
    } else if (spec.type == "power") {
        GridFunction f(grid);
        for (std::size_t i = 0; i < f.size(); ++i)
            f.values[i] = std::pow(grid->delta[i], spec.exponent);
        m.density = f;
    } else if (spec.type == "zero") {
        return Measure::zero();
    } else if (spec.type == "atoms") {
        // atoms only
    } else {
        throw std::invalid_argument("build_measure: unknown type " + spec.type);
    }
    for (const Atom& a : spec.atoms) m.atoms.push_back(a);
    m.validate(*grid);
    if (spec.normalize && !m.is_zero()) m = m.normalized(*grid, s);
    return m;
}

ExperimentConfig ExperimentConfig::reference() { return ExperimentConfig{}; }

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["params"] = {{"N", dim}, {"s", s},     {"p", p},    {"q", q},
                   {"rho", rho}, {"tau", tau}};
    j["grid"] = {{"radius", radius}, {"resolution", resolution}};
    auto mspec = [](const MeasureSpec& ms) {
        nlohmann::json mj;
        mj["type"] = ms.type;
        mj["exponent"] = ms.exponent;
        mj["normalize"] = ms.normalize;
        nlohmann::json atoms = nlohmann::json::array();
        for (const Atom& a : ms.atoms)
            atoms.push_back({{"x", a.location[0]}, {"y", a.location[1]}, {"mass", a.mass}});
        mj["atoms"] = atoms;
        return mj;
    };
    j["mu"] = mspec(mu);
    j["nu"] = mspec(nu);
    j["seed"] = seed;
    j["tol"] = tol;
    j["max_iter"] = max_iter;
    j["modes"] = modes;
    j["linking_n"] = linking_n;
    j["kernel_samples"] = kernel_samples;
    j["trace"] = trace;
    j["stages"] = stages;
    j["green_cache"] = green_cache;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("params")) {
        const auto& p = j["params"];
        if (p.contains("N")) c.dim = p["N"].get<int>();
        if (p.contains("s")) c.s = p["s"].get<double>();
        if (p.contains("p")) c.p = p["p"].get<double>();
        if (p.contains("q")) c.q = p["q"].get<double>();
        if (p.contains("rho")) c.rho = p["rho"].get<double>();
        if (p.contains("tau")) c.tau = p["tau"].get<double>();
    }
    if (j.contains("grid")) {
        if (j["grid"].contains("radius")) c.radius = j["grid"]["radius"].get<double>();
        if (j["grid"].contains("resolution"))
            c.resolution = j["grid"]["resolution"].get<int>();
    }
    auto mspec = [](const nlohmann::json& mj) {
        MeasureSpec ms;
        if (mj.contains("type")) ms.type = mj["type"].get<std::string>();
        if (mj.contains("exponent")) ms.exponent = mj["exponent"].get<double>();
        if (mj.contains("normalize")) ms.normalize = mj["normalize"].get<bool>();
        if (mj.contains("atoms"))
            for (const auto& a : mj["atoms"])
                ms.atoms.push_back(
                    {{a["x"].get<double>(), a.value("y", 0.0)}, a["mass"].get<double>()});
        return ms;
    };
    if (j.contains("mu")) c.mu = mspec(j["mu"]);
    if (j.contains("nu")) c.nu = mspec(j["nu"]);
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
    if (j.contains("modes")) c.modes = j["modes"].get<int>();
    if (j.contains("linking_n")) c.linking_n = j["linking_n"].get<int>();
    if (j.contains("kernel_samples")) c.kernel_samples = j["kernel_samples"].get<long>();
    if (j.contains("trace")) c.trace = j["trace"].get<bool>();
    if (j.contains("stages")) c.stages = j["stages"].get<std::vector<std::string>>();
    if (j.contains("green_cache")) c.green_cache = j["green_cache"].get<std::string>();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return from_json(nlohmann::json::parse(in));
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> known{"kernel-verify", "minimal", "stability",
                                             "second", "scan-threshold"};
    std::set<std::string> seen;
    for (const auto& st : stages) {
        if (!known.count(st))
            throw std::invalid_argument("config: unknown stage " + st);
        if ((st == "stability" || st == "second") && !seen.count("minimal"))
            throw std::invalid_argument("config: stage " + st +
                                        " requires minimal earlier in the chain");
        seen.insert(st);
    }
    if (resolution < 8) throw std::invalid_argument("config: resolution below 8");
    if (modes > resolution)
        throw std::invalid_argument("config: modes exceed the grid resolution");
    if (linking_n > modes)
        throw std::invalid_argument("config: linking_n exceeds the retained modes");
    (void)params();  // parameter validation
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["version"] = version;
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages)
        st.push_back({{"name", s.name},
                      {"status", s.status},
                      {"error_code", s.error_code},
                      {"message", s.message},
                      {"wall_ms", s.wall_ms},
                      {"outputs", s.outputs}});
    j["stages"] = st;
    return j;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const nlohmann::json& j) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("write: cannot open " + tmp);
        out << text;
        if (!out) throw std::runtime_error("write: failed for " + tmp);
    }
    fs::rename(tmp, path);
}

void write_grid_function_csv(const GridFunction& f, const std::string& path) {
    std::ostringstream out;
    const Grid& g = *f.grid;
    out << (g.dim == 1 ? "x,value\n" : "x,y,value\n");
    for (std::size_t i = 0; i < f.size(); ++i) {
        out << fmt17(g.nodes[i][0]);
        if (g.dim == 2) out << "," << fmt17(g.nodes[i][1]);
        out << "," << fmt17(f.values[i]) << "\n";
    }
    write_text_atomic(path, out.str());
}

GridFunction read_grid_function_csv(const std::string& path, GridPtr grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    GridFunction f(grid, 0.0);
    std::size_t i = 0;
    while (std::getline(in, line) && i < f.size()) {
        auto pos = line.rfind(',');
        f.values[i++] = std::stod(line.substr(pos + 1));
    }
    if (i != f.size()) throw std::runtime_error("csv: row count mismatch in " + path);
    return f;
}

nlohmann::json grid_to_json(const Grid& g) {
    nlohmann::json j;
    j["dim"] = g.dim;
    j["radius"] = g.radius;
    j["resolution"] = g.resolution();
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& p : g.nodes)
        g.dim == 1 ? nodes.push_back(p[0]) : nodes.push_back({p[0], p[1]});
    j["nodes"] = nodes;
    j["weights"] = g.weights;
    return j;
}

nlohmann::json measure_to_json(const Measure& m) {
    nlohmann::json j;
    j["density"] = m.density ? nlohmann::json(m.density->values) : nlohmann::json();
    nlohmann::json atoms = nlohmann::json::array();
    for (const Atom& a : m.atoms)
        atoms.push_back({{"x", a.location[0]}, {"y", a.location[1]}, {"mass", a.mass}});
    j["atoms"] = atoms;
    return j;
}

nlohmann::json solve_report_to_json(const SolveReport& r) {
    nlohmann::json j;
    j["provenance"] = r.provenance;
    j["iterations"] = r.iterations;
    j["final_residual"] = r.final_residual;
    j["monotone"] = r.monotone;
    j["converged"] = r.converged;
    j["diverged"] = r.diverged;
    j["clamp_count"] = r.clamp_count;
    j["norms"] = {{"u_l1", r.norms.u_l1},
                  {"u_lq_ds", r.norms.u_lq_ds},
                  {"v_l1", r.norms.v_l1},
                  {"v_lp_ds", r.norms.v_lp_ds}};
    j["sup_bound_K"] = r.sup_bound_K ? nlohmann::json(*r.sup_bound_K) : nlohmann::json();
    return j;
}

nlohmann::json stability_report_to_json(const StabilityReport& r) {
    nlohmann::json j;
    j["gap_u"] = r.gap_u;
    j["gap_v"] = r.gap_v;
    j["stable"] = r.stable;
    j["C_strict"] = r.C_strict;
    j["modes"] = r.modes;
    j["defect_u"] = r.defect_u;
    j["defect_v"] = r.defect_v;
    return j;
}

nlohmann::json critical_point_to_json(const CriticalPoint& cp) {
    nlohmann::json j;
    j["energy"] = cp.energy;
    j["grad_norm"] = cp.grad_norm;
    j["n"] = cp.n;
    j["accepted"] = cp.accepted;
    j["neg_part_norm"] = cp.neg_part_norm;
    j["retries"] = cp.retries;
    j["r"] = cp.z.r;
    j["a"] = std::vector<double>(cp.z.a.data(), cp.z.a.data() + cp.z.a.size());
    j["b"] = std::vector<double>(cp.z.b.data(), cp.z.b.data() + cp.z.b.size());
    j["cerami"] = {{"max_hv_v", cp.cerami.max_hv_v},
                   {"max_hu_u", cp.cerami.max_hu_u},
                   {"max_H", cp.cerami.max_H},
                   {"max_Ht", cp.cerami.max_Ht},
                   {"bounded", cp.cerami.bounded}};
    return j;
}

nlohmann::json threshold_scan_to_json(const ThresholdScan& scan) {
    nlohmann::json j;
    nlohmann::json ladder = nlohmann::json::array();
    for (const auto& p : scan.ladder)
        ladder.push_back({{"rho", p.rho}, {"tau", p.tau}, {"converged", p.converged}});
    j["ladder"] = ladder;
    j["bracket_found"] = scan.bracket_found;
    j["no_divergence"] = scan.no_divergence;
    j["t_conv"] = scan.t_conv;
    j["t_div"] = scan.t_div;
    j["monotone_outcome"] = scan.monotone_outcome;
    return j;
}

namespace {

struct PipelineContext {
    ExperimentConfig cfg;
    GridPtr grid;
    GreenMatrix G;
    bool have_G = false;
    Measure mu, nu;
    SolveReport minimal;
    bool have_minimal = false;
    SpectralData spec;
    bool have_spec = false;

    const GreenMatrix& green() {
        if (!have_G) {
            if (!cfg.green_cache.empty() && fs::exists(cfg.green_cache)) {
                G = green_load(cfg.green_cache);
                if (G.size() != cfg.resolution || G.s != cfg.s)
                    throw std::invalid_argument("green cache does not match the config");
                grid = G.grid;
            } else {
                G = assemble_green(grid, cfg.params());
                if (!cfg.green_cache.empty()) green_save(G, cfg.green_cache);
            }
            have_G = true;
        }
        return G;
    }

    const SpectralData& spectral() {
        if (!have_spec) {
            spec = spectral_decompose(green(), cfg.modes);
            have_spec = true;
        }
        return spec;
    }
};

void stage_kernel_verify(PipelineContext& ctx, const std::string& dir,
                         std::vector<std::string>& outputs) {
    const auto& cfg = ctx.cfg;
    SystemParams sp = cfg.params();
    std::ostringstream lines;

    auto coarse_grid = build_grid(cfg.dim, cfg.radius, cfg.resolution / 2);
    GreenMatrix Gc = assemble_green(coarse_grid, sp);
    const GreenMatrix& Gf = ctx.green();

    auto leb_f = build_measure({"lebesgue", 0.0, {}, true}, ctx.grid, sp.s);
    auto leb_c = build_measure({"lebesgue", 0.0, {}, true}, coarse_grid, sp.s);
    auto dir_f = Measure::dirac({0.0, 0.0}, 1.0).normalized(*ctx.grid, sp.s);
    auto dir_c = Measure::dirac({0.0, 0.0}, 1.0).normalized(*coarse_grid, sp.s);

    auto emit = [&](EstimateReport fine, const EstimateReport& coarse) {
        mark_stable(fine, coarse);
        lines << fine.to_json_line() << "\n";
    };

    emit(check_two_sided(Gf, sp, cfg.kernel_samples, cfg.seed),
         check_two_sided(Gc, sp, cfg.kernel_samples, cfg.seed));
    emit(check_boundary_bound(Gf, sp, 233, cfg.kernel_samples, cfg.seed),
         check_boundary_bound(Gc, sp, 233, cfg.kernel_samples, cfg.seed));
    emit(check_boundary_bound(Gf, sp, 234, cfg.kernel_samples, cfg.seed),
         check_boundary_bound(Gc, sp, 234, cfg.kernel_samples, cfg.seed));
    emit(check_3g(Gf, sp, std::max(1000L, cfg.kernel_samples / 10), cfg.seed),
         check_3g(Gc, sp, std::max(1000L, cfg.kernel_samples / 10), cfg.seed));

    for (double p : {0.8, 1.0, 1.2}) {
        for (double theta : {1.0, (p + 1.0) / (sp.q + 1.0)}) {
            emit(check_composition(Gf, leb_f, p, theta, sp),
                 check_composition(Gc, leb_c, p, theta, sp));
            emit(check_composition(Gf, dir_f, p, theta, sp),
                 check_composition(Gc, dir_c, p, theta, sp));
        }
    }
    {
        double t = sp.q * (sp.p + 1.0) / (sp.q + 1.0);
        emit(check_g3_chain(Gf, leb_f, sp, t), check_g3_chain(Gc, leb_c, sp, t));
    }
    {
        double borderline = sp.dim / (2.0 * sp.s);
        emit(check_mapping(Gf, sp, 1.5 * borderline, cfg.seed),
             check_mapping(Gc, sp, 1.5 * borderline, cfg.seed));
        emit(check_mapping(Gf, sp, 0.75 * borderline, cfg.seed),
             check_mapping(Gc, sp, 0.75 * borderline, cfg.seed));
    }
    for (double alpha : {0.0, sp.s})
        for (double gamma : {0.0, sp.s})
            emit(check_weak_mapping(Gf, sp, alpha, gamma, cfg.seed),
                 check_weak_mapping(Gc, sp, alpha, gamma, cfg.seed));

    // Out-of-window probe: constant expected to grow under refinement.
    {
        SystemParams spw = SystemParams::make(cfg.dim, cfg.s, 0.96 * sp.Ns(),
                                              0.96 * sp.Ns());
        EstimateReport prev;
        bool have_prev = false;
        double first = 0.0, last = 0.0;
        for (int n = cfg.resolution / 8; n <= cfg.resolution; n *= 2) {
            auto gw = build_grid(cfg.dim, cfg.radius, n);
            GreenMatrix Gw = assemble_green(gw, spw);
            auto dw = Measure::dirac({0.0, 0.0}, 1.0).normalized(*gw, spw.s);
            EstimateReport r = check_composition(Gw, dw, spw.p, 0.05, spw);
            if (!have_prev) first = r.constant;
            if (have_prev) mark_stable(r, prev);
            last = r.constant;
            prev = r;
            have_prev = true;
        }
        prev.note = "out-of-window probe; ladder growth x" +
                    std::to_string(last / first);
        lines << prev.to_json_line() << "\n";
    }

    std::string path = dir + "/estimates.jsonl";
    write_text_atomic(path, lines.str());
    outputs.push_back(path);
}

void stage_minimal(PipelineContext& ctx, const std::string& dir,
                   std::vector<std::string>& outputs) {
    const auto& cfg = ctx.cfg;
    SystemParams sp = cfg.params();
    PicardOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    ctx.minimal = picard_iterate(ctx.green(), ctx.mu, ctx.nu, sp, opts);
    if (ctx.minimal.converged)
        ctx.minimal.sup_bound_K =
            check_leub(ctx.minimal, ctx.green(), ctx.mu, ctx.nu, sp);
    ctx.have_minimal = true;
    if (!ctx.minimal.converged)
        throw numeric_error(ctx.minimal.diverged
                                ? "minimal: iteration diverged (data beyond the "
                                  "existence regime)"
                                : "minimal: iteration exhausted max_iter");

    write_text_atomic(dir + "/report.json",
                      solve_report_to_json(ctx.minimal).dump(2) + "\n");
    write_grid_function_csv(ctx.minimal.u, dir + "/u.csv");
    write_grid_function_csv(ctx.minimal.v, dir + "/v.csv");
    outputs.insert(outputs.end(), {dir + "/report.json", dir + "/u.csv", dir + "/v.csv"});
}

void stage_stability(PipelineContext& ctx, const std::string& dir,
                     std::vector<std::string>& outputs) {
    SystemParams sp = ctx.cfg.params();
    StabilityReport rep = make_stability_report(ctx.spectral(), ctx.minimal, sp);
    nlohmann::json j = stability_report_to_json(rep);
    if (sp.p > 1.0 && sp.q > 1.0) {
        AprioriRecord ap = apriori_check(ctx.minimal, ctx.spectral(), ctx.mu, ctx.nu, sp);
        j["apriori"] = {{"identity_residual_u", ap.identity_residual_u},
                        {"identity_residual_v", ap.identity_residual_v},
                        {"lp_bound_v", ap.lp_bound_v},
                        {"lq_bound_u", ap.lq_bound_u},
                        {"l1_chain_u", ap.l1_chain_u},
                        {"l1_chain_v", ap.l1_chain_v},
                        {"phi1_comparability", ap.phi1_comparability}};
    }
    write_text_atomic(dir + "/report.json", j.dump(2) + "\n");
    outputs.push_back(dir + "/report.json");
}

void stage_second(PipelineContext& ctx, const std::string& dir,
                  std::vector<std::string>& outputs) {
    const auto& cfg = ctx.cfg;
    SystemParams sp = cfg.params();
    StabilityReport stab = make_stability_report(ctx.spectral(), ctx.minimal, sp);
    NonlinearTerms terms = make_nonlinear_terms(ctx.minimal, sp);
    LinkingProblem prob =
        LinkingProblem::make(ctx.spectral(), ctx.minimal, sp, cfg.linking_n);
    LinkingGeometry geom = calibrate_geometry(terms, prob, stab, cfg.seed);
    GeometryReport grep = verify_geometry(geom, terms, prob, 1000, cfg.seed + 1);
    if (!grep.accepted)
        throw numeric_error("second: geometry rejected (" + grep.witness + ")");
    CriticalPoint cp = find_critical_point(prob, geom, terms, 1e-8, cfg.seed);
    if (!cp.accepted) throw numeric_error("second: no accepted critical point");
    SolveReport second =
        assemble_second_solution(cp, ctx.minimal, ctx.green(), ctx.mu, ctx.nu, sp);

    nlohmann::json gj;
    gj["rho_ball"] = geom.rho_ball;
    gj["sigma"] = geom.sigma;
    gj["R0"] = geom.R0;
    gj["R1"] = geom.R1;
    gj["kappa"] = geom.kappa_coercivity;
    gj["C_kappa"] = geom.C_kappa;
    gj["sphere_min"] = grep.sphere_min;
    gj["top_face_max"] = grep.top_face_max;
    gj["lateral_max"] = grep.lateral_max;
    gj["analytic_top_bound"] = grep.analytic_top_bound;
    write_text_atomic(dir + "/geometry.json", gj.dump(2) + "\n");
    if (cfg.trace) {
        std::ostringstream tr;
        for (const auto& row : cp.trace) {
            nlohmann::json line = {{"iter", static_cast<int>(row[0])},
                                   {"energy", row[1]},
                                   {"grad_norm", row[2]}};
            tr << line.dump() << "\n";
        }
        write_text_atomic(dir + "/trace.jsonl", tr.str());
        outputs.push_back(dir + "/trace.jsonl");
    }
    write_text_atomic(dir + "/critical_point.json",
                      critical_point_to_json(cp).dump(2) + "\n");
    write_text_atomic(dir + "/report.json", solve_report_to_json(second).dump(2) + "\n");
    write_grid_function_csv(second.u, dir + "/u.csv");
    write_grid_function_csv(second.v, dir + "/v.csv");
    outputs.insert(outputs.end(),
                   {dir + "/geometry.json", dir + "/critical_point.json",
                    dir + "/report.json", dir + "/u.csv", dir + "/v.csv"});
}

void stage_scan(PipelineContext& ctx, const std::string& dir,
                std::vector<std::string>& outputs) {
    ThresholdScan scan =
        threshold_scan(ctx.green(), ctx.mu, ctx.nu, ctx.cfg.params());
    write_text_atomic(dir + "/scan.json", threshold_scan_to_json(scan).dump(2) + "\n");
    outputs.push_back(dir + "/scan.json");
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);

    PipelineContext ctx;
    ctx.cfg = config;
    ctx.grid = build_grid(config.dim, config.radius, config.resolution);
    ctx.mu = build_measure(config.mu, ctx.grid, config.s);
    ctx.nu = build_measure(config.nu, ctx.grid, config.s);

    RunManifest manifest;
    manifest.config_hash = config_hash(config.to_json());
    write_text_atomic(out_dir + "/config.json", config.to_json().dump(2) + "\n");

    // Domain + data documents: {dim, radius, resolution, nodes, weights,
    // density, atoms} per measure.
    for (auto [name, m] : {std::pair<const char*, const Measure*>{"mu", &ctx.mu},
                           {"nu", &ctx.nu}}) {
        nlohmann::json doc = grid_to_json(*ctx.grid);
        nlohmann::json md = measure_to_json(*m);
        doc["density"] = md["density"];
        doc["atoms"] = md["atoms"];
        write_text_atomic(out_dir + "/" + name + ".json", doc.dump(2) + "\n");
    }

    bool chain_broken = false;
    for (const std::string& name : config.stages) {
        StageStatus st;
        st.name = name;
        auto t0 = std::chrono::steady_clock::now();
        if (chain_broken && (name == "stability" || name == "second")) {
            st.status = "skipped";
            st.error_code = "DEPENDENCY_FAILED";
            manifest.stages.push_back(st);
            continue;
        }
        std::string dir = out_dir + "/" +
                          (name == "scan-threshold" ? std::string("threshold") : name);
        fs::create_directories(dir);
        try {
            if (name == "kernel-verify") stage_kernel_verify(ctx, dir, st.outputs);
            else if (name == "minimal") stage_minimal(ctx, dir, st.outputs);
            else if (name == "stability") stage_stability(ctx, dir, st.outputs);
            else if (name == "second") stage_second(ctx, dir, st.outputs);
            else if (name == "scan-threshold") stage_scan(ctx, dir, st.outputs);
            st.status = "ok";
        } catch (const std::invalid_argument& e) {
            st.status = "error";
            st.error_code = "VALIDATION";
            st.message = e.what();
            if (name == "minimal") chain_broken = true;
        } catch (const numeric_error& e) {
            st.status = "error";
            st.error_code = "NUMERIC";
            st.message = e.what();
            if (name == "minimal") chain_broken = true;
        } catch (const std::exception& e) {
            st.status = "error";
            st.error_code = "IO";
            st.message = e.what();
            if (name == "minimal") chain_broken = true;
        }
        st.wall_ms = wall_ms_since(t0);
        manifest.stages.push_back(st);
    }
    write_text_atomic(out_dir + "/manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

namespace {

void compare_json_values(const nlohmann::json& a, const nlohmann::json& b,
                         const std::string& file, const std::string& path, double tol,
                         GoldenReport& rep) {
    if (a.is_number() && b.is_number()) {
        double ga = a.get<double>(), gb = b.get<double>();
        double rel = std::abs(ga - gb) / std::max({std::abs(ga), std::abs(gb), 1e-300});
        if (rel > tol) rep.drifts.push_back({file, path, ga, gb, rel});
        return;
    }
    if (a.is_boolean() && b.is_boolean()) {
        if (a != b)
            rep.drifts.push_back({file, path, a.get<bool>() ? 1.0 : 0.0,
                                  b.get<bool>() ? 1.0 : 0.0, 1.0});
        return;
    }
    if (a.type() != b.type()) {
        rep.schema_ok = false;
        rep.schema_error = file + ":" + path + " type mismatch";
        return;
    }
    if (a.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) {
                rep.schema_ok = false;
                rep.schema_error = file + ":" + path + " missing key " + it.key();
                return;
            }
            compare_json_values(it.value(), b[it.key()], file, path + "." + it.key(), tol,
                                rep);
        }
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!a.contains(it.key())) {
                rep.schema_ok = false;
                rep.schema_error = file + ":" + path + " extra key " + it.key();
                return;
            }
        return;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) {
            rep.schema_ok = false;
            rep.schema_error = file + ":" + path + " length mismatch";
            return;
        }
        for (std::size_t i = 0; i < a.size(); ++i)
            compare_json_values(a[i], b[i], file,
                                path + "[" + std::to_string(i) + "]", tol, rep);
        return;
    }
    if (a != b) {
        rep.schema_ok = false;
        rep.schema_error = file + ":" + path + " value mismatch";
    }
}

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

}  // namespace

GoldenReport compare_golden(const std::string& run_dir, const std::string& golden_dir,
                            double rel_tol, double estimate_tol) {
    GoldenReport rep;
    auto listing = [&](const std::string& root) {
        std::vector<std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (!e.is_regular_file()) continue;
            std::string ext = e.path().extension().string();
            if (ext != ".json" && ext != ".jsonl" && ext != ".csv") continue;
            std::string rel = fs::relative(e.path(), root).string();
            if (rel == "manifest.json") continue;  // wall-times differ by design
            files.push_back(rel);
        }
        std::sort(files.begin(), files.end());
        return files;
    };
    auto golden_files = listing(golden_dir);
    auto run_files = listing(run_dir);
    if (golden_files != run_files) {
        rep.schema_ok = false;
        rep.schema_error = "file sets differ between run and golden directories";
        return rep;
    }

    for (const std::string& rel : golden_files) {
        double tol = rel.find("estimates") != std::string::npos ? estimate_tol : rel_tol;
        std::ifstream ga(golden_dir + "/" + rel), ra(run_dir + "/" + rel);
        if (!ga || !ra) {
            rep.schema_ok = false;
            rep.schema_error = "cannot open " + rel;
            return rep;
        }
        if (rel.ends_with(".json")) {
            compare_json_values(nlohmann::json::parse(ga), nlohmann::json::parse(ra), rel,
                                "", tol, rep);
        } else if (rel.ends_with(".jsonl")) {
            std::string la, lb;
            int line = 0;
            while (std::getline(ga, la)) {
                if (!std::getline(ra, lb)) {
                    rep.schema_ok = false;
                    rep.schema_error = rel + ": line count mismatch";
                    return rep;
                }
                compare_json_values(nlohmann::json::parse(la), nlohmann::json::parse(lb),
                                    rel, "line" + std::to_string(line++), tol, rep);
            }
            if (std::getline(ra, lb)) {
                rep.schema_ok = false;
                rep.schema_error = rel + ": line count mismatch";
                return rep;
            }
        } else {
            std::string la, lb;
            int line = 0;
            while (std::getline(ga, la)) {
                if (!std::getline(ra, lb)) {
                    rep.schema_ok = false;
                    rep.schema_error = rel + ": row count mismatch";
                    return rep;
                }
                std::stringstream sa(la), sb(lb);
                std::string ca, cb;
                int col = 0;
                while (std::getline(sa, ca, ',')) {
                    if (!std::getline(sb, cb, ',')) {
                        rep.schema_ok = false;
                        rep.schema_error = rel + ": column count mismatch";
                        return rep;
                    }
                    double va, vb;
                    std::string path =
                        "r" + std::to_string(line) + "c" + std::to_string(col++);
                    if (parse_double(ca, va) && parse_double(cb, vb)) {
                        double rel_d =
                            std::abs(va - vb) / std::max({std::abs(va), std::abs(vb), 1e-300});
                        if (rel_d > tol) rep.drifts.push_back({rel, path, va, vb, rel_d});
                    } else if (ca != cb) {
                        rep.schema_ok = false;
                        rep.schema_error = rel + ":" + path + " token mismatch";
                        return rep;
                    }
                }
                ++line;
            }
        }
        if (!rep.schema_ok) return rep;
    }
    return rep;
}

void render_report(const std::string& run_dir, const std::string& out_path) {
    std::ostringstream md;
    md << "# Run summary\n\n";

    std::ifstream mf(run_dir + "/manifest.json");
    if (!mf) throw std::runtime_error("report: no manifest in " + run_dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    md << "config hash: `" << manifest["config_hash"].get<std::string>() << "`\n\n";
    md << "| stage | status | wall (ms) |\n|---|---|---|\n";
    for (const auto& st : manifest["stages"])
        md << "| " << st["name"].get<std::string>() << " | "
           << st["status"].get<std::string>() << " | "
           << fmt17(st["wall_ms"].get<double>()) << " |\n";
    md << "\n";

    fs::create_directories(run_dir + "/plots");
    if (fs::exists(run_dir + "/minimal/report.json")) {
        nlohmann::json r =
            nlohmann::json::parse(std::ifstream(run_dir + "/minimal/report.json"));
        md << "## Minimal pair\n\n"
           << "- iterations: " << r["iterations"] << "\n"
           << "- residual: " << r["final_residual"] << "\n"
           << "- monotone: " << r["monotone"] << "\n"
           << "- |u|_L1: " << r["norms"]["u_l1"] << ", |v|_L1: " << r["norms"]["v_l1"]
           << "\n\n";
        // plot-ready profiles
        std::ifstream uc(run_dir + "/minimal/u.csv"), vc(run_dir + "/minimal/v.csv");
        std::ostringstream prof;
        std::string lu, lv;
        std::getline(uc, lu);
        std::getline(vc, lv);
        prof << "x,u_minimal,v_minimal\n";
        while (std::getline(uc, lu) && std::getline(vc, lv)) {
            auto cu = lu.rfind(','), cv = lv.rfind(',');
            prof << lu.substr(0, cu) << "," << lu.substr(cu + 1) << ","
                 << lv.substr(cv + 1) << "\n";
        }
        write_text_atomic(run_dir + "/plots/minimal_profiles.csv", prof.str());
    }
    if (fs::exists(run_dir + "/stability/report.json")) {
        nlohmann::json r =
            nlohmann::json::parse(std::ifstream(run_dir + "/stability/report.json"));
        md << "## Stability\n\n- gap_u: " << r["gap_u"] << "\n- gap_v: " << r["gap_v"]
           << "\n- stable: " << r["stable"] << "\n\n";
    }
    if (fs::exists(run_dir + "/second/report.json")) {
        nlohmann::json r =
            nlohmann::json::parse(std::ifstream(run_dir + "/second/report.json"));
        nlohmann::json cp =
            nlohmann::json::parse(std::ifstream(run_dir + "/second/critical_point.json"));
        md << "## Second solution\n\n- level: " << cp["energy"]
           << "\n- gradient norm: " << cp["grad_norm"]
           << "\n- residual: " << r["final_residual"] << "\n\n";
    }
    if (fs::exists(run_dir + "/threshold/scan.json")) {
        nlohmann::json r =
            nlohmann::json::parse(std::ifstream(run_dir + "/threshold/scan.json"));
        md << "## Threshold scan\n\n- bracket: [" << r["t_conv"] << ", " << r["t_div"]
           << "]\n\n";
        std::ostringstream sc;
        sc << "rho,converged\n";
        for (const auto& p : r["ladder"])
            sc << fmt17(p["rho"].get<double>()) << ","
               << (p["converged"].get<bool>() ? 1 : 0) << "\n";
        write_text_atomic(run_dir + "/plots/threshold.csv", sc.str());
    }
    if (fs::exists(run_dir + "/kernel-verify/estimates.jsonl")) {
        md << "## Kernel estimates\n\n| estimate | constant | stable |\n|---|---|---|\n";
        std::ifstream es(run_dir + "/kernel-verify/estimates.jsonl");
        std::string line;
        while (std::getline(es, line)) {
            auto r = EstimateReport::from_json_line(line);
            md << "| " << to_string(r.id) << " | " << fmt17(r.constant) << " | "
               << (r.stable ? "yes" : "no") << " |\n";
        }
        md << "\n";
    }
    write_text_atomic(out_path, md.str());
}

}  // namespace fraclane
