#pragma once

#include "sfbm/fbm.hpp"
#include "sfbm/limit.hpp"
#include "sfbm/sde.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sfbm {

inline constexpr std::string_view kVersion = "1.0.0";

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "SFBM_OUTPUT_DIR";

enum class NoiseMode { fbm, zero };

/// Check identifiers in report order.
inline const std::vector<std::string>& all_check_ids() {
    static const std::vector<std::string> ids{
        "comparison",     "nestedness",    "upper_bound", "measure_decay", "nonnegativity",
        "singular_integral", "compensator", "eps_continuity", "picard", "excursions",
        "endpoint_limits", "restart_identity", "initial_identity",
    };
    return ids;
}

/// Human-readable statement each check exercises.
std::string_view check_anchor(std::string_view id);

struct Tolerances {
    double tol_mono = 1e-12;
    double tol_bound = 1e-9;
    double tol_nonneg = 1e-9;        ///< added to the Cauchy gap
    double picard = 1e-10;
    double measure_threshold = 0.02; ///< fraction of the horizon
    double endpoint = 1e-6;          ///< added to the Cauchy gap
};

struct ContinuitySettings {
    double eps_star = 0.05;
    std::vector<double> h{0.025, 0.0125, 0.00625};
};

struct ResidualSettings {
    std::size_t margin = 5;
    std::size_t min_interior_nodes = 20;
};

struct PicardSettings {
    std::size_t steps = 4096;
    std::size_t check_nodes = 256;
    std::optional<double> beta;  ///< H/2 when absent
    double consistency_slack = 1e-3;
    std::size_t consistency_depth = 20;
};

struct ExperimentConfig {
    SdeSpec spec{1.0, 1.0, 0.5, 1.0, HurstParam(0.25)};
    TimeGrid grid{1.0, 4096};
    EpsilonLadder ladder{0.1, 0.5, 10};
    std::uint64_t master_seed = 42;
    std::size_t paths = 1;
    GeneratorTag generator = GeneratorTag::circulant;
    NoiseMode noise = NoiseMode::fbm;
    StepRule rule = StepRule::drift_implicit;
    Tolerances tolerances;
    ContinuitySettings continuity;
    ResidualSettings residual;
    PicardSettings picard;
    std::map<std::string, double> allowances{{"compensator", 0.05}};  ///< allowed failing fraction per check
    std::vector<std::string> checks = all_check_ids();
    std::filesystem::path output_dir;
    std::size_t csv_paths = 1;
    unsigned threads = 0;  ///< 0 means hardware concurrency
};

/// Parses the fixed schema; unknown keys and out-of-domain values throw
/// DomainError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Canonical form with defaults filled in. Output directory and thread count
/// are omitted: they do not change results.
nlohmann::json canonical_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct CheckOutcome {
    bool passed = false;
    double value = 0.0;      ///< larger is worse
    double tolerance = 0.0;  ///< NaN when the check has no scalar threshold
    std::map<std::string, double> details;
    std::string message;     ///< set when the check aborted
    double seconds = 0.0;
};

struct PathOutcome {
    std::size_t path_index = 0;
    std::map<std::string, CheckOutcome> checks;
};

struct CampaignResult {
    nlohmann::json report;
    std::vector<PathOutcome> paths;
    bool passed = false;
};

/// Runs every enabled check on every path, writes per-path CSVs for the
/// first `csv_paths` paths and report.json into the output directory (when
/// `write_files` is set), and aggregates in path order.
CampaignResult run_campaign(const ExperimentConfig& config, bool write_files = true);

/// Runs all enabled checks on one path.
PathOutcome evaluate_path(const ExperimentConfig& config, std::size_t path_index,
                          const std::optional<std::filesystem::path>& csv_dir = std::nullopt);

/// Drops timestamp and runtime fields, leaving the deterministic content.
nlohmann::json strip_timing(const nlohmann::json& report);

/// Fixed-width table of a stored report.
std::string render_report(const nlohmann::json& report);

}  // namespace sfbm
