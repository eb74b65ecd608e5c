#include "tagsim/office_scenario.hpp"

#include <algorithm>
#include <cmath>

namespace tagsim::scenario {

std::vector<Eigen::Vector3d> office_anchor_positions() {
    return {
        {0.5, 0.5, 2.0},
        {8.5, 0.5, 1.5},
        {8.5, 6.5, 2.0},
        {0.5, 6.5, 1.5},
    };
}

LocalizationSetup office_default() {
    LocalizationSetup setup;
    setup.anchors = mlat::AnchorSet::from_positions(office_anchor_positions());
    return setup;
}

std::optional<mlat::PositionFix> localize_once(const LocalizationSetup& setup,
                                               const Eigen::Vector3d& tag_position,
                                               int dimension, std::mt19937_64& rng) {
    const std::size_t n = setup.anchors.positions.size();
    std::uniform_real_distribution<double> drift(-setup.drift_ppm_range * 1e-6,
                                                 setup.drift_ppm_range * 1e-6);
    ranging::ExchangeScenario s;
    s.tag_position = tag_position;
    s.anchor_positions = setup.anchors.positions;
    s.tag_clock = ranging::ClockModel{drift(rng), 0.0, setup.tick_s};
    for (std::size_t i = 0; i < n; ++i)
        s.anchor_clocks.push_back(ranging::ClockModel{drift(rng), 0.0, setup.tick_s});
    s.reply_delays_s = ranging::ExchangeScenario::default_reply_delays(n);
    s.tag_turnaround_s = setup.tag_turnaround_s;
    s.noise_sigma_m = setup.noise_sigma_m;
    s.nlos_bias_m = setup.nlos_bias_m;
    s.max_range_m = setup.max_range_m;

    const auto measurements = ranging::run_ranging_round(s, rng);
    return mlat::gate_and_solve(measurements, setup.anchors, dimension);
}

ErrorStats collect_error_stats(std::vector<double> errors, int no_fix_count) {
    ErrorStats stats;
    stats.no_fix_count = no_fix_count;
    std::sort(errors.begin(), errors.end());
    stats.errors_m = std::move(errors);
    const std::size_t n = stats.errors_m.size();
    if (n == 0) return stats;
    double sum = 0.0;
    for (double e : stats.errors_m) sum += e;
    stats.mean_m = sum / static_cast<double>(n);
    stats.median_m = stats.errors_m[n / 2];
    stats.p90_m = stats.errors_m[static_cast<std::size_t>(0.9 * static_cast<double>(n - 1))];
    return stats;
}

std::vector<Eigen::Vector3d> office_grid_positions(double z) {
    std::vector<Eigen::Vector3d> positions;
    for (int ix = 0; ix < 9; ++ix)
        for (int iy = 0; iy < 7; ++iy)
            positions.emplace_back(1.0 + 2.0 * ix, 1.0 + 1.5 * iy, z);
    return positions;
}

std::vector<OfficeClass> office38_layout() {
    std::vector<OfficeClass> classes;
    int label = 0;

    // 24 desks on a 6 x 4 grid; two desk banks with a corridor between the
    // second and third row.
    const double desk_y[4] = {2.0, 4.0, 7.8, 9.6};
    for (double y : desk_y)
        for (int ix = 0; ix < 6; ++ix) {
            OfficeClass c;
            c.label = label;
            c.name = "desk-" + std::to_string(label);
            c.center = {2.0 + 3.0 * ix, y, 0.75};
            c.half_extent = {0.5, 0.35, 0.05};
            classes.push_back(c);
            ++label;
        }

    // 12 shelf positions along the anchor-room walls: six spots, two levels
    // each. Proximity to the anchors keeps the height information usable.
    const double shelf_xy[6][2] = {{0.8, 0.8}, {4.5, 0.6}, {8.2, 0.8},
                                   {0.8, 6.2}, {4.5, 6.4}, {8.2, 6.2}};
    const double shelf_z[2] = {0.3, 1.8};
    for (const auto& xy : shelf_xy)
        for (double z : shelf_z) {
            OfficeClass c;
            c.label = label;
            c.name = "shelf-" + std::to_string(label - 24);
            c.center = {xy[0], xy[1], z};
            c.half_extent = {0.35, 0.15, 0.08};
            classes.push_back(c);
            ++label;
        }

    // Carried through the corridor outside the anchor room.
    OfficeClass carried;
    carried.label = label++;
    carried.name = "carried";
    carried.center = {13.0, 6.0, 1.2};
    carried.half_extent = {3.5, 0.6, 0.25};
    classes.push_back(carried);

    // Near the exit, far corner from the anchors.
    OfficeClass exit_area;
    exit_area.label = label++;
    exit_area.name = "exit";
    exit_area.center = {17.4, 10.6, 1.2};
    exit_area.half_extent = {0.5, 0.35, 0.25};
    classes.push_back(exit_area);

    return classes;
}

std::vector<classify::LabeledFix> generate_office_dataset(const LocalizationSetup& setup,
                                                          const OfficeDatasetParams& params,
                                                          std::mt19937_64& rng) {
    if (params.windows_per_class < 1 || params.window_size < 1)
        throw InvalidInput("generate_office_dataset: window parameters must be >= 1");
    std::vector<classify::LabeledFix> fixes;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (const OfficeClass& cls : office38_layout()) {
        for (int w = 0; w < params.windows_per_class; ++w) {
            Eigen::Vector3d placement = cls.center;
            for (int axis = 0; axis < 3; ++axis)
                placement(axis) += unit(rng) * cls.half_extent(axis);
            int produced = 0;
            int attempts = 0;
            while (produced < params.window_size) {
                // A no-fix (gated-out round) is retried; it carries no sample.
                const auto fix = localize_once(setup, placement, params.dimension, rng);
                if (++attempts > 16 * params.window_size)
                    throw InsufficientData("generate_office_dataset: ranging never yields a fix");
                if (!fix) continue;
                classify::LabeledFix lf;
                lf.position = fix->position;
                lf.label = cls.label;
                lf.group = w;
                fixes.push_back(lf);
                ++produced;
            }
        }
    }
    return fixes;
}

}  // namespace tagsim::scenario
