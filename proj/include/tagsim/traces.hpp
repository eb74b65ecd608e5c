#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tagsim/errors.hpp"
#include "tagsim/io_util.hpp"

namespace tagsim::energy {
struct SolarCellModel;  // defined in energy_path.hpp
}

namespace tagsim::traces {

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kGapThresholdSeconds = 3600.0;  // flag gaps > 1 h

struct IlluminanceSample {
    double timestamp_s = 0.0;  // seconds since epoch; day boundaries at multiples of 86400
    double lux = 0.0;
};

// Logged ambient illuminance. Samples hold until the next timestamp
// (zero-order hold), which keeps integrals invariant under resampling onto
// finer grids.
struct IlluminanceTrace {
    std::vector<IlluminanceSample> samples;
    std::string position_label;

    void validate() const;  // strictly increasing times, lux >= 0
    double start_s() const { return samples.front().timestamp_s; }
    double end_s() const { return samples.back().timestamp_s; }
    double duration_s() const { return samples.empty() ? 0.0 : end_s() - start_s(); }
};

struct Gap {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct LoadResult {
    IlluminanceTrace trace;
    std::vector<Gap> gaps;  // sample spacings above the gap threshold
};

// CSV schema: header `timestamp_s,lux`, one sample per line. Parse errors
// name the line; gaps longer than 1 h are reported, not rejected (the
// zero-order hold then conservatively extends the pre-gap level, and
// summaries flag the day).
LoadResult load_trace(const std::filesystem::path& path, const std::string& label);
LoadResult read_trace(std::istream& in, const std::string& name, const std::string& label);
void write_trace(std::ostream& out, const IlluminanceTrace& trace);
void write_trace(const std::filesystem::path& path, const IlluminanceTrace& trace);

// Zero-order-hold resampling onto a uniform grid of period dt covering the
// original span.
IlluminanceTrace resample_zoh(const IlluminanceTrace& trace, double dt_s);

// Mirrors the harvesting-potential table: day-window illuminance statistics
// and per-day harvestable energy density.
struct DailyEnergySummary {
    std::string position_label;
    int n_days = 0;
    double day_lux_mean = 0.0;        // time-weighted over day-window samples
    double day_lux_std = 0.0;
    double daily_energy_mean_mj_per_cm2 = 0.0;  // across days
    double daily_energy_std_mj_per_cm2 = 0.0;
    int n_gaps = 0;
};

inline constexpr double kDefaultDayStartHour = 8.0;
inline constexpr double kDefaultDayWindowHours = 12.0;  // 08:00-20:00

// Requires the trace to span at least one day. Energy integrates the cell's
// MPP power per cm^2 over the full trace (nights contribute ~0); the lux
// statistics cover the configured day window only.
DailyEnergySummary summarize(const IlluminanceTrace& trace,
                             const energy::SolarCellModel& cell,
                             double day_window_hours = kDefaultDayWindowHours,
                             double day_start_hour = kDefaultDayStartHour,
                             int n_gaps = 0);

std::string summary_json(const DailyEnergySummary& summary);

// Statistical surrogate for an unavailable logged trace. Each day is a
// plateau-with-ramps profile over the day window, scaled by a per-day
// lognormal draw; parameters are solved so the day-window sample statistics
// converge to (mean_lux, std_lux). Nights are 0 lux.
struct SynthStats {
    double mean_lux = 0.0;
    double std_lux = 0.0;
    int n_days = 1;
    double day_window_hours = kDefaultDayWindowHours;
    double day_start_hour = kDefaultDayStartHour;
    double sample_period_s = 60.0;
    // Smooth ramp fraction at each window edge; shrunk automatically when the
    // requested std is too small to afford the shape variance.
    double ramp_fraction = 0.15;
    // Optional seasonal modulation of the per-day amplitude: 1 + a*sin(2*pi*day/365).
    double seasonal_amplitude = 0.0;
};

IlluminanceTrace synthesize_trace(const SynthStats& stats, std::uint64_t seed,
                                  const std::string& label = "synthetic");

}  // namespace tagsim::traces
