// Command-line front end: every subcommand reads an experiment config (JSON)
// and writes reports under an output directory. Exit codes: 0 ok,
// 2 validation, 3 numeric failure, 4 I/O.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fraclane/harness.hpp"

using namespace fraclane;

namespace {

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return ExperimentConfig::reference();
    return ExperimentConfig::load(path);
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    }
}

int exit_code_from(const RunManifest& manifest) {
    for (const auto& st : manifest.stages) {
        if (st.status != "error") continue;
        if (st.error_code == "VALIDATION") return 2;
        if (st.error_code == "NUMERIC") return 3;
        return 4;
    }
    return 0;
}

int run_stages(std::string config_path, std::string out, std::string cache,
               std::vector<std::string> stages, std::uint64_t* seed = nullptr,
               long* samples = nullptr, int* linking_n = nullptr, int* modes = nullptr,
               bool trace = false) {
    ExperimentConfig cfg = load_config(config_path);
    if (!stages.empty()) cfg.stages = std::move(stages);
    if (!cache.empty()) cfg.green_cache = cache;
    if (seed) cfg.seed = *seed;
    if (samples) cfg.kernel_samples = *samples;
    if (linking_n) cfg.linking_n = *linking_n;
    if (modes) cfg.modes = *modes;
    if (trace) cfg.trace = true;
    RunManifest m = run_pipeline(cfg, out);
    for (const auto& st : m.stages)
        std::printf("%-14s %-8s %8.1f ms  %s\n", st.name.c_str(), st.status.c_str(),
                    st.wall_ms, st.message.c_str());
    return exit_code_from(m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fractional Lane-Emden laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", green_cache, solution_dir, minimal_dir;
    std::string golden_dir, report_out = "report.md", estimates = "all";
    std::uint64_t seed = 0;
    long samples = 10000;
    int linking_n = 40, modes = 200;
    double rel_tol = 1e-6;
    bool trace = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--green-cache", green_cache, "Green matrix cache file");
    };

    auto* vk = app.add_subcommand("verify-kernel", "certify the kernel estimates");
    add_common(vk);
    vk->add_option("--estimates", estimates, "which estimates (only 'all' implemented)");
    vk->add_option("--seed", seed, "sampling seed");
    vk->add_option("--samples", samples, "sample count");

    auto* sm = app.add_subcommand("solve-minimal", "monotone iteration");
    add_common(sm);

    auto* cs = app.add_subcommand("check-stability", "stability of the minimal pair");
    add_common(cs);
    cs->add_option("--solution", solution_dir, "directory of a solve-minimal run");
    cs->add_option("--modes", modes, "retained spectral modes");

    auto* ss = app.add_subcommand("solve-second", "linking construction");
    add_common(ss);
    ss->add_option("--minimal", minimal_dir, "directory of a solve-minimal run");
    ss->add_option("--n", linking_n, "linking subspace dimension");
    ss->add_option("--seed", seed, "search seed");
    ss->add_flag("--trace", trace, "keep the search trajectory log");

    auto* st = app.add_subcommand("scan-threshold", "bracket the divergence transition");
    add_common(st);

    auto* cg = app.add_subcommand("compare-golden", "compare a run against a golden run");
    cg->add_option("--run", out_dir, "run directory")->required();
    cg->add_option("--golden", golden_dir, "golden directory")->required();
    cg->add_option("--rel-tol", rel_tol, "relative tolerance for solutions");

    auto* rp = app.add_subcommand("report", "render a markdown summary");
    rp->add_option("--run", out_dir, "run directory")->required();
    rp->add_option("--out", report_out, "markdown output path");

    auto* pl = app.add_subcommand("pipeline", "run the configured stage chain");
    add_common(pl);

    CLI11_PARSE(app, argc, argv);

    if (vk->parsed())
        return run_guarded([&] {
            if (estimates != "all")
                throw std::invalid_argument("--estimates: only 'all' is implemented");
            return run_stages(config_path, out_dir, green_cache, {"kernel-verify"}, &seed,
                              &samples);
        });
    if (sm->parsed())
        return run_guarded([&] {
            return run_stages(config_path, out_dir, green_cache, {"minimal"});
        });
    if (cs->parsed())
        return run_guarded([&] {
            std::string cfg = solution_dir.empty() ? config_path
                                                   : solution_dir + "/config.json";
            return run_stages(cfg, out_dir, green_cache, {"minimal", "stability"},
                              nullptr, nullptr, nullptr, &modes);
        });
    if (ss->parsed())
        return run_guarded([&] {
            std::string cfg =
                minimal_dir.empty() ? config_path : minimal_dir + "/config.json";
            return run_stages(cfg, out_dir, green_cache, {"minimal", "second"}, &seed,
                              nullptr, &linking_n, nullptr, trace);
        });
    if (st->parsed())
        return run_guarded([&] {
            return run_stages(config_path, out_dir, green_cache, {"scan-threshold"});
        });
    if (cg->parsed())
        return run_guarded([&] {
            GoldenReport rep = compare_golden(out_dir, golden_dir, rel_tol);
            if (!rep.schema_ok) {
                std::fprintf(stderr, "schema mismatch: %s\n", rep.schema_error.c_str());
                return 2;
            }
            for (const auto& d : rep.drifts)
                std::printf("drift %s %s golden=%.17g actual=%.17g rel=%.3g\n",
                            d.file.c_str(), d.path.c_str(), d.golden, d.actual, d.rel);
            if (!rep.drifts.empty()) {
                std::fprintf(stderr, "%zu numeric drifts\n", rep.drifts.size());
                return 3;
            }
            std::printf("golden comparison clean\n");
            return 0;
        });
    if (rp->parsed())
        return run_guarded([&] {
            render_report(out_dir, report_out);
            std::printf("wrote %s\n", report_out.c_str());
            return 0;
        });
    if (pl->parsed())
        return run_guarded(
            [&] { return run_stages(config_path, out_dir, green_cache, {}); });
    return 0;
}
