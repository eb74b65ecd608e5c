#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tagsim/classification.hpp"
#include "tagsim/multilateration.hpp"
#include "tagsim/ranging.hpp"

// Synthetic stand-in for the multi-room office deployment: a four-anchor
// layout at 2.0 m / 1.5 m mounting heights clustered in one room of an
// 18 m x 11 m floor, ranging noise calibrated against the reference
// accuracy figures (docs/calibration.md), and a 38-class asset layout
// (24 desks, 12 shelves, 2 roaming classes).
namespace tagsim::scenario {

struct LocalizationSetup {
    mlat::AnchorSet anchors;
    double tick_s = ranging::kDefaultTickSeconds;
    double drift_ppm_range = 20.0;  // per-trial clock drifts ~ U(-range, range) ppm
    double noise_sigma_m = 0.25;    // calibrated range noise (docs/calibration.md)
    double nlos_bias_m = 0.0;
    double max_range_m = ranging::kDefaultMaxRangeMeters;
    double tag_turnaround_s = 1e-3;
};

// Anchor positions of the reference office deployment.
std::vector<Eigen::Vector3d> office_anchor_positions();
LocalizationSetup office_default();

// One motion-triggered localization: clock drifts drawn, a full two-broadcast
// ranging round executed, invalid ranges gated, position solved. nullopt when
// fewer than dimension + 1 ranges survive the gate.
std::optional<mlat::PositionFix> localize_once(const LocalizationSetup& setup,
                                               const Eigen::Vector3d& tag_position,
                                               int dimension, std::mt19937_64& rng);

struct ErrorStats {
    std::vector<double> errors_m;  // sorted ascending
    double mean_m = 0.0;
    double median_m = 0.0;
    double p90_m = 0.0;
    int no_fix_count = 0;
};

ErrorStats collect_error_stats(std::vector<double> errors, int no_fix_count);

// Test positions spread over the full floor at carry height.
std::vector<Eigen::Vector3d> office_grid_positions(double z = 1.0);

struct OfficeClass {
    int label = 0;
    std::string name;
    Eigen::Vector3d center{0.0, 0.0, 0.0};
    Eigen::Vector3d half_extent{0.0, 0.0, 0.0};  // uniform placement box
};

// The 38 asset locations. Shelves sit in the anchor room (stacked pairs
// included); desks cover the whole floor; two roaming classes model a
// carried tag and the exit area.
std::vector<OfficeClass> office38_layout();

struct OfficeDatasetParams {
    int windows_per_class = 34;  // tag placements per class
    int window_size = 15;        // fixes per placement (max oversampling rate)
    int dimension = 3;
};

// Fixes generated through the full pipeline (ranging -> gating ->
// multilateration) at positions drawn inside each class box. group ids
// enumerate placements, so aggregating at any rate <= window_size works on
// whole windows.
std::vector<classify::LabeledFix> generate_office_dataset(const LocalizationSetup& setup,
                                                          const OfficeDatasetParams& params,
                                                          std::mt19937_64& rng);

}  // namespace tagsim::scenario
