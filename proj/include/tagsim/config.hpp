#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tagsim/classification.hpp"
#include "tagsim/energy_path.hpp"
#include "tagsim/errors.hpp"
#include "tagsim/office_scenario.hpp"
#include "tagsim/power_modes.hpp"
#include "tagsim/ranging.hpp"
#include "tagsim/traces.hpp"

namespace tagsim::config {

// `range`: one fixed DS-TWR round against a declared anchor set.
struct RangeSection {
    std::vector<Eigen::Vector3d> anchors;
    Eigen::Vector3d tag_position{0.0, 0.0, 0.0};
    double tick_s = ranging::kDefaultTickSeconds;
    double tag_drift_ppm = 0.0;
    std::vector<double> anchor_drift_ppm;  // empty = all zero
    double noise_sigma_m = 0.0;
    double nlos_bias_m = 0.0;
    double max_range_m = ranging::kDefaultMaxRangeMeters;
    double reply_delay_base_s = 2e-3;
    double reply_delay_step_s = 1e-3;
    double tag_turnaround_s = 1e-3;
    std::vector<bool> lost;
};

// `locate`: Monte-Carlo localization over a list or grid of true positions.
struct LocateSection {
    scenario::LocalizationSetup setup;
    int dimension = 2;
    std::vector<Eigen::Vector3d> tag_positions;
    int trials_per_position = 25;
    std::string tag_id = "tag-0";
};

// `energy`: power-path simulation over a loaded or synthesized trace.
struct EnergySection {
    energy::SolarCellModel cell;
    energy::ConverterModel converter;
    energy::BatteryState battery;
    std::optional<std::filesystem::path> trace_path;
    std::string trace_label = "trace";
    std::optional<traces::SynthStats> synth;
    double base_power_w = 4.68e-6;
    int localizations_per_day = 0;
    double event_energy_j = 10.84e-3;
    std::optional<std::filesystem::path> motion_trace_path;
    double wdi_timeout_s = 5.0;
    power::MotionIdleMode motion_idle_mode = power::MotionIdleMode::Sleep;
    std::vector<double> sweep_rates;
    bool find_crossing = false;
    double crossing_hi = 10.0;
    bool surplus_sink = false;
    double max_step_s = 60.0;
    int timeline_stride = 1;
};

// `classify`: cross-validated location classification.
struct ClassifySection {
    std::optional<std::filesystem::path> dataset_path;
    bool synthesize_office = false;
    scenario::LocalizationSetup setup;
    scenario::OfficeDatasetParams office_params;
    classify::ClassifierSpec spec;
    int folds = 10;
    std::vector<int> oversampling_rates{1};
};

struct ScenarioConfig {
    std::uint64_t seed = 0;
    std::optional<RangeSection> range;
    std::optional<LocateSection> locate;
    std::optional<EnergySection> energy;
    std::optional<ClassifySection> classify;
};

// Parses and fully validates a scenario file. Unknown keys, out-of-bounds
// values, and missing referenced files are ConfigError with the offending
// key in the message. seed_override (from --seed) wins over the file.
ScenarioConfig load_config(const std::filesystem::path& path,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

// Command runners. Each writes its outputs atomically under out_dir and is
// byte-deterministic for a fixed seed. Missing section -> ConfigError.
void cmd_range(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
void cmd_locate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
void cmd_energy(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
void cmd_classify(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace tagsim::config
