#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <noisy/control.hpp>
#include <noisy/response.hpp>
#include <noisy/validate.hpp>

namespace noisy::cli {

/// Raised for malformed or out-of-range configuration; the message names the key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ExitCode : int {
    Ok = 0,
    ValidationFailed = 2,
    ConfigError = 3,
    NotConverged = 4,
};

struct TargetSpec {
    /// Measure CSV (resolved against the config directory), or
    std::optional<std::filesystem::path> file;
    /// a difference of two Gaussian bumps, projected to zero mass.
    double plus_center = 0.4;
    double minus_center = 0.65;
    double width = 0.08;
};

struct ExperimentConfig {
    explicit ExperimentConfig(SystemSpec spec) : system(std::move(spec)) {}

    SystemSpec system;
    std::optional<PerturbationSpec> perturbation;
    /// Mixture weight used by simulate (0 when no mixture perturbation).
    double mixture_weight = 0.0;
    StationaryOptions stationary{};
    std::size_t mixing_steps = 55;
    std::size_t exact_mixing_max_cells = kExactMixingMaxCells;
    std::vector<double> deltas{1e-2, 1e-3, 1e-4, 1e-5};
    std::optional<NormKind> norm;
    std::vector<std::uint64_t> seeds{1};
    std::size_t simulation_steps = 1000000;
    std::size_t burn_in = 10000;
    std::size_t histogram_cells = 0;  // 0: system grid
    TargetSpec target{};
    ControlOptions control{};
    bool export_matrix = false;
    std::filesystem::path output = "out";
};

/// Parses a JSON document; unknown keys and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"stationary", "mixing", "respond", "validate", "simulate", "control"};
    return names;
}

/// Runs one pipeline, writing CSV artifacts and diagnostics.json into
/// config.output. Numerical errors propagate to the caller.
ExitCode run(const std::string& command, const ExperimentConfig& config);

/// run() plus error-to-exit-code mapping; messages go to `err`.
int run_guarded(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out_dir, std::optional<std::uint64_t> seed,
                std::ostream& err);

}  // namespace noisy::cli
