#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fraclane/kernel_verify.hpp"
#include "fraclane/linking.hpp"
#include "fraclane/minimal.hpp"
#include "fraclane/stability.hpp"

namespace fraclane {

/// Declarative measure: constant density, power density c*delta^exponent,
/// atoms, or combinations; normalized to unit mass in M(Omega, delta^s)
/// unless normalize = false.
struct MeasureSpec {
    std::string type = "lebesgue";  // "lebesgue" | "power" | "zero" | "atoms"
    double exponent = 0.0;
    std::vector<Atom> atoms;
    bool normalize = true;
};

Measure build_measure(const MeasureSpec& spec, GridPtr grid, double s);

struct ExperimentConfig {
    int dim = 1;
    double s = 0.25;
    double p = 1.2;
    double q = 1.4;
    double rho = 0.01;
    double tau = 0.01;
    double radius = 1.0;
    int resolution = 256;
    MeasureSpec mu, nu;
    std::uint64_t seed = 0;
    double tol = 1e-10;
    int max_iter = 2000;
    int modes = 200;
    int linking_n = 40;
    long kernel_samples = 10000;
    bool trace = false;  // keep the saddle-search trajectory log
    std::vector<std::string> stages{"kernel-verify", "minimal", "stability", "second"};
    std::string green_cache;

    SystemParams params() const { return SystemParams::make(dim, s, p, q, rho, tau); }

    static ExperimentConfig reference();
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
    nlohmann::json to_json() const;
    /// Checks stage names and the dependency chain (stability/second need
    /// minimal). Throws std::invalid_argument.
    void validate() const;
};

struct StageStatus {
    std::string name;
    std::string status;  // "ok" | "error" | "skipped"
    std::string error_code;
    std::string message;
    double wall_ms = 0.0;
    std::vector<std::string> outputs;
};

struct RunManifest {
    std::string config_hash;
    std::string version = "0.1.0";
    std::vector<StageStatus> stages;
    nlohmann::json to_json() const;
};

/// Executes the configured stages in dependency order under out_dir. Partial
/// failure stops dependents but keeps completed outputs; the manifest is
/// written last, atomically (tmp + rename).
RunManifest run_pipeline(const ExperimentConfig& config, const std::string& out_dir);

struct DriftRecord {
    std::string file;
    std::string path;
    double golden = 0.0;
    double actual = 0.0;
    double rel = 0.0;
};

struct GoldenReport {
    bool schema_ok = true;
    std::string schema_error;
    std::vector<DriftRecord> drifts;
    bool clean() const { return schema_ok && drifts.empty(); }
};

/// Field-by-field numeric comparison of every JSON/JSONL/CSV output under the
/// two directories (manifest excluded: wall-times differ between runs).
/// Estimate files use estimate_tol, everything else rel_tol.
GoldenReport compare_golden(const std::string& run_dir, const std::string& golden_dir,
                            double rel_tol = 1e-6, double estimate_tol = 0.10);

/// Markdown summary plus plot-ready CSV extracts of a run directory.
void render_report(const std::string& run_dir, const std::string& out_path);

std::string config_hash(const nlohmann::json& j);

/// FNV-1a of a canonical dump; used for the manifest hash.
std::uint64_t fnv1a(const std::string& text);

nlohmann::json solve_report_to_json(const SolveReport& r);
nlohmann::json stability_report_to_json(const StabilityReport& r);
nlohmann::json critical_point_to_json(const CriticalPoint& cp);
nlohmann::json threshold_scan_to_json(const ThresholdScan& scan);
nlohmann::json grid_to_json(const Grid& g);
nlohmann::json measure_to_json(const Measure& m);

void write_grid_function_csv(const GridFunction& f, const std::string& path);
GridFunction read_grid_function_csv(const std::string& path, GridPtr grid);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace fraclane
