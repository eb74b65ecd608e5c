#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "tagsim/errors.hpp"

namespace tagsim::ranging {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact

// DW3000 family timestamp grain: 1 / (128 * 499.2 MHz) ~= 15.65 ps.
inline constexpr double kDefaultTickSeconds = 1.0 / (128.0 * 499.2e6);

inline constexpr double kDefaultDriftCap = 100e-6;       // +/-100 ppm
inline constexpr double kDefaultMaxRangeMeters = 150.0;  // validity gate

// Affine local clock: a true duration D is measured as (1 + drift) * D,
// quantized to integer ticks. The epoch offset cancels in every duration and
// is kept only so device clocks are fully specified.
struct ClockModel {
    double drift = 0.0;      // fractional frequency error (20e-6 == +20 ppm)
    double offset_s = 0.0;
    double tick_s = kDefaultTickSeconds;

    // Throws InvalidInput if |drift| exceeds the cap or tick_s <= 0.
    static ClockModel make(double drift, double offset_s = 0.0,
                           double tick_s = kDefaultTickSeconds,
                           double drift_cap = kDefaultDriftCap);

    std::int64_t measure_ticks(double true_duration_s) const;
};

// The four durations feeding the double-sided two-way ranging estimate.
// Round trips and replies are local measurements of two different devices,
// which is exactly where the drift error comes from.
struct TimestampQuad {
    std::int64_t t_round1 = 0;
    std::int64_t t_reply1 = 0;
    std::int64_t t_round2 = 0;
    std::int64_t t_reply2 = 0;
};

struct RangeMeasurement {
    int anchor_id = -1;
    double propagation_time_s = 0.0;
    double distance_m = 0.0;  // always propagation_time_s * c, sign included
    bool valid = false;
};

// A full tag/anchor exchange setup. validate() enforces the documented
// bounds; the simulation functions assume a validated scenario.
struct ExchangeScenario {
    Eigen::Vector3d tag_position{0.0, 0.0, 0.0};
    std::vector<Eigen::Vector3d> anchor_positions;
    ClockModel tag_clock;
    std::vector<ClockModel> anchor_clocks;      // one per anchor
    std::vector<double> reply_delays_s;         // anchor processing delay per anchor
    double tag_turnaround_s = 1e-3;             // gap before the second broadcast
    double noise_sigma_m = 0.0;                 // Gaussian range noise (1-sigma)
    double nlos_bias_m = 0.0;                   // non-negative range bias
    double max_range_m = kDefaultMaxRangeMeters;
    std::vector<bool> lost;                     // per-anchor packet loss flag; empty = none

    void validate() const;  // throws InvalidInput

    // Staggered reply slots: 2 ms + index * 1 ms, matching reply-in-ID-order
    // operation.
    static std::vector<double> default_reply_delays(std::size_t n_anchors);
};

// Average propagation time in ticks (real-valued):
//   (t_round1 * t_round2 - t_reply1 * t_reply2) /
//   (t_round1 + t_round2 + t_reply1 + t_reply2)
// May be negative for pathological quads; callers gate via RangeMeasurement.
// Throws InvalidInput when the denominator is zero.
double ds_twr_propagation(const TimestampQuad& q);

// Single-sided baseline (t_round1 - t_reply1) / 2, in ticks. Subject to the
// first-order drift error the double-sided estimate cancels.
double ss_twr_propagation(const TimestampQuad& q);

// Simulates one three-message exchange between the tag and one anchor.
// True event times come from geometry and reply delays; one Gaussian range
// perturbation plus the NLOS bias is applied to the true time of flight
// before any device timestamps it; each duration is then measured on the
// owning device's clock. Deterministic for a given rng state.
TimestampQuad simulate_exchange(const ExchangeScenario& s, std::size_t anchor_index,
                                std::mt19937_64& rng);

// Converts a quad to seconds/meters and applies the validity gate
// (non-negative propagation, distance <= max_range).
RangeMeasurement range_from_quad(const TimestampQuad& q, double tick_s,
                                 double max_range_m = kDefaultMaxRangeMeters,
                                 int anchor_id = -1);

// One anchor's slice of a full ranging round: raw quad plus derived range.
struct AnchorExchange {
    TimestampQuad quad;
    RangeMeasurement measurement;
};

// Executes the two-broadcast sequence against every anchor in ID order.
// Anchors flagged as lost produce an invalid, zeroed measurement. The second
// broadcast is sent one tag_turnaround_s after the last received reply.
std::vector<AnchorExchange> run_ranging_round_detailed(const ExchangeScenario& s,
                                                       std::mt19937_64& rng);
std::vector<RangeMeasurement> run_ranging_round(const ExchangeScenario& s,
                                                std::mt19937_64& rng);

// CSV dump, one row per anchor:
// anchor_id,t_round1,t_reply1,t_round2,t_reply2,prop_time_s,distance_m,valid
void write_measurements_csv(std::ostream& out, const std::vector<AnchorExchange>& round);

}  // namespace tagsim::ranging
