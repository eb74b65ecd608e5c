#include "tagsim/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tagsim/io_util.hpp"

namespace tagsim::ranging {

ClockModel ClockModel::make(double drift, double offset_s, double tick_s, double drift_cap) {
    if (!(tick_s > 0.0))
        throw InvalidInput("ClockModel: tick duration must be positive");
    if (std::abs(drift) > drift_cap)
        throw InvalidInput("ClockModel: |drift| exceeds cap of " +
                           std::to_string(drift_cap * 1e6) + " ppm");
    return ClockModel{drift, offset_s, tick_s};
}

std::int64_t ClockModel::measure_ticks(double true_duration_s) const {
    return std::llround(true_duration_s * (1.0 + drift) / tick_s);
}

void ExchangeScenario::validate() const {
    if (anchor_positions.empty())
        throw InvalidInput("ExchangeScenario: at least one anchor required");
    if (anchor_clocks.size() != anchor_positions.size())
        throw InvalidInput("ExchangeScenario: anchor_clocks size mismatch");
    if (reply_delays_s.size() != anchor_positions.size())
        throw InvalidInput("ExchangeScenario: reply_delays size mismatch");
    if (!lost.empty() && lost.size() != anchor_positions.size())
        throw InvalidInput("ExchangeScenario: lost flags size mismatch");
    if (noise_sigma_m < 0.0)
        throw InvalidInput("ExchangeScenario: noise_sigma must be >= 0");
    if (nlos_bias_m < 0.0)
        throw InvalidInput("ExchangeScenario: nlos_bias must be >= 0");
    if (!(tag_turnaround_s > 0.0))
        throw InvalidInput("ExchangeScenario: tag_turnaround must be positive");
    if (!(max_range_m > 0.0))
        throw InvalidInput("ExchangeScenario: max_range must be positive");
    for (double d : reply_delays_s)
        if (!(d > 0.0)) throw InvalidInput("ExchangeScenario: reply delays must be positive");
    if (!(tag_clock.tick_s > 0.0))
        throw InvalidInput("ExchangeScenario: tag clock tick must be positive");
    for (const ClockModel& c : anchor_clocks)
        if (!(c.tick_s > 0.0))
            throw InvalidInput("ExchangeScenario: anchor clock tick must be positive");
}

std::vector<double> ExchangeScenario::default_reply_delays(std::size_t n_anchors) {
    std::vector<double> d(n_anchors);
    for (std::size_t i = 0; i < n_anchors; ++i)
        d[i] = 2e-3 + static_cast<double>(i) * 1e-3;
    return d;
}

double ds_twr_propagation(const TimestampQuad& q) {
    // Exact integer arithmetic: products of two int64 always fit in 128 bits,
    // so symmetric quads reduce to (round - reply) / 2 without rounding.
    const __int128 num = static_cast<__int128>(q.t_round1) * q.t_round2 -
                         static_cast<__int128>(q.t_reply1) * q.t_reply2;
    const __int128 den = static_cast<__int128>(q.t_round1) + q.t_round2 +
                         q.t_reply1 + q.t_reply2;
    if (den == 0)
        throw InvalidInput("ds_twr_propagation: zero denominator quad");
    return static_cast<double>(num) / static_cast<double>(den);
}

double ss_twr_propagation(const TimestampQuad& q) {
    return static_cast<double>(q.t_round1 - q.t_reply1) / 2.0;
}

namespace {

// One perturbed time of flight per anchor per round: the Gaussian range error
// and NLOS bias enter as a distance perturbation converted to seconds.
double perturbed_tof(const ExchangeScenario& s, std::size_t i, std::mt19937_64& rng) {
    const double true_dist = (s.tag_position - s.anchor_positions[i]).norm();
    double dist = true_dist + s.nlos_bias_m;
    if (s.noise_sigma_m > 0.0) {
        std::normal_distribution<double> noise(0.0, s.noise_sigma_m);
        dist += noise(rng);
    }
    return dist / kSpeedOfLight;
}

bool is_lost(const ExchangeScenario& s, std::size_t i) {
    return !s.lost.empty() && s.lost[i];
}

}  // namespace

TimestampQuad simulate_exchange(const ExchangeScenario& s, std::size_t anchor_index,
                                std::mt19937_64& rng) {
    if (anchor_index >= s.anchor_positions.size())
        throw InvalidInput("simulate_exchange: anchor index out of range");
    const double tof = perturbed_tof(s, anchor_index, rng);
    const double reply1 = s.reply_delays_s[anchor_index];  // anchor processing
    const double reply2 = s.tag_turnaround_s;              // tag processing
    const ClockModel& tag = s.tag_clock;
    const ClockModel& anchor = s.anchor_clocks[anchor_index];

    TimestampQuad q;
    q.t_round1 = tag.measure_ticks(2.0 * tof + reply1);
    q.t_reply1 = anchor.measure_ticks(reply1);
    q.t_round2 = anchor.measure_ticks(2.0 * tof + reply2);
    q.t_reply2 = tag.measure_ticks(reply2);
    return q;
}

RangeMeasurement range_from_quad(const TimestampQuad& q, double tick_s,
                                 double max_range_m, int anchor_id) {
    RangeMeasurement m;
    m.anchor_id = anchor_id;
    m.propagation_time_s = ds_twr_propagation(q) * tick_s;
    m.distance_m = m.propagation_time_s * kSpeedOfLight;
    m.valid = m.propagation_time_s >= 0.0 && m.distance_m <= max_range_m;
    return m;
}

std::vector<AnchorExchange> run_ranging_round_detailed(const ExchangeScenario& s,
                                                       std::mt19937_64& rng) {
    s.validate();
    const std::size_t n = s.anchor_positions.size();

    // Noise is drawn for every anchor in ID order, lost or not, so the random
    // stream does not depend on the loss flags.
    std::vector<double> tof(n);
    for (std::size_t i = 0; i < n; ++i) tof[i] = perturbed_tof(s, i, rng);

    // Broadcast 1 at t = 0. Anchor i replies reply_delays[i] after reception;
    // the tag sends broadcast 2 one turnaround after the last reply it hears.
    double last_reply_rx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_lost(s, i)) continue;
        last_reply_rx = std::max(last_reply_rx, 2.0 * tof[i] + s.reply_delays_s[i]);
    }
    const double t_bcast2 = last_reply_rx + s.tag_turnaround_s;

    std::vector<AnchorExchange> round(n);
    for (std::size_t i = 0; i < n; ++i) {
        AnchorExchange& ex = round[i];
        ex.measurement.anchor_id = static_cast<int>(i);
        if (is_lost(s, i)) {
            ex.measurement.valid = false;
            continue;
        }
        const double d1 = s.reply_delays_s[i];
        const double rx1 = 2.0 * tof[i] + d1;      // tag hears anchor i's reply
        const ClockModel& tag = s.tag_clock;
        const ClockModel& anchor = s.anchor_clocks[i];
        ex.quad.t_round1 = tag.measure_ticks(rx1);
        ex.quad.t_reply1 = anchor.measure_ticks(d1);
        ex.quad.t_round2 = anchor.measure_ticks(t_bcast2 - d1);
        ex.quad.t_reply2 = tag.measure_ticks(t_bcast2 - rx1);
        ex.measurement = range_from_quad(ex.quad, tag.tick_s, s.max_range_m,
                                         static_cast<int>(i));
    }
    return round;
}

std::vector<RangeMeasurement> run_ranging_round(const ExchangeScenario& s,
                                                std::mt19937_64& rng) {
    std::vector<RangeMeasurement> out;
    for (const AnchorExchange& ex : run_ranging_round_detailed(s, rng))
        out.push_back(ex.measurement);
    return out;
}

void write_measurements_csv(std::ostream& out, const std::vector<AnchorExchange>& round) {
    out << "anchor_id,t_round1,t_reply1,t_round2,t_reply2,prop_time_s,distance_m,valid\n";
    for (const AnchorExchange& ex : round) {
        out << ex.measurement.anchor_id << ',' << ex.quad.t_round1 << ','
            << ex.quad.t_reply1 << ',' << ex.quad.t_round2 << ',' << ex.quad.t_reply2
            << ',' << format_full(ex.measurement.propagation_time_s) << ','
            << format_full(ex.measurement.distance_m) << ','
            << (ex.measurement.valid ? 1 : 0) << '\n';
    }
}

}  // namespace tagsim::ranging
