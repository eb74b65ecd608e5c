#include "tagsim/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tagsim/energy_path.hpp"

namespace tagsim::traces {

void IlluminanceTrace::validate() const {
    if (samples.empty()) throw InvalidInput("IlluminanceTrace: empty trace");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].lux < 0.0)
            throw InvalidInput("IlluminanceTrace: negative lux at sample " + std::to_string(i));
        if (i > 0 && !(samples[i].timestamp_s > samples[i - 1].timestamp_s))
            throw InvalidInput("IlluminanceTrace: timestamps must be strictly increasing");
    }
}

namespace {

double parse_double(std::string_view field, const std::string& name, int lineno,
                    const char* what) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError(name + ":" + std::to_string(lineno) + ": bad " + what + " value '" +
                         std::string(field) + "'");
    return value;
}

double nominal_cadence(const std::vector<IlluminanceSample>& samples) {
    if (samples.size() < 2) return 60.0;
    std::vector<double> diffs;
    diffs.reserve(samples.size() - 1);
    for (std::size_t i = 1; i < samples.size(); ++i)
        diffs.push_back(samples[i].timestamp_s - samples[i - 1].timestamp_s);
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    return std::min(diffs[diffs.size() / 2], kGapThresholdSeconds);
}

}  // namespace

LoadResult read_trace(std::istream& in, const std::string& name, const std::string& label) {
    std::vector<IlluminanceSample> raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("timestamp_s", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(name + ":" + std::to_string(lineno) + ": expected timestamp_s,lux");
        IlluminanceSample s;
        s.timestamp_s =
            parse_double(std::string_view(line).substr(0, comma), name, lineno, "timestamp");
        s.lux = parse_double(std::string_view(line).substr(comma + 1), name, lineno, "lux");
        if (s.lux < 0.0)
            throw ParseError(name + ":" + std::to_string(lineno) + ": negative lux rejected");
        if (!raw.empty() && !(s.timestamp_s > raw.back().timestamp_s))
            throw ParseError(name + ":" + std::to_string(lineno) +
                             ": timestamps must be strictly increasing");
        raw.push_back(s);
    }
    if (raw.empty()) throw ParseError(name + ": no samples");

    // Gaps are zero-filled for energy integration: the last pre-gap sample
    // only holds for one nominal cadence, then illuminance is unknown and
    // treated as dark.
    LoadResult result;
    result.trace.position_label = label;
    const double cadence = nominal_cadence(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        result.trace.samples.push_back(raw[i]);
        if (i + 1 < raw.size()) {
            const double dt = raw[i + 1].timestamp_s - raw[i].timestamp_s;
            if (dt > kGapThresholdSeconds) {
                result.gaps.push_back({raw[i].timestamp_s, raw[i + 1].timestamp_s});
                if (raw[i].lux > 0.0)
                    result.trace.samples.push_back({raw[i].timestamp_s + cadence, 0.0});
            }
        }
    }
    result.trace.validate();
    return result;
}

LoadResult load_trace(const std::filesystem::path& path, const std::string& label) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace: " + path.string());
    return read_trace(in, path.filename().string(), label);
}

void write_trace(std::ostream& out, const IlluminanceTrace& trace) {
    out << "timestamp_s,lux\n";
    for (const IlluminanceSample& s : trace.samples)
        out << format_full(s.timestamp_s) << ',' << format_full(s.lux) << '\n';
}

void write_trace(const std::filesystem::path& path, const IlluminanceTrace& trace) {
    std::ostringstream out;
    write_trace(out, trace);
    write_file_atomic(path, out.str());
}

IlluminanceTrace resample_zoh(const IlluminanceTrace& trace, double dt_s) {
    trace.validate();
    if (!(dt_s > 0.0)) throw InvalidInput("resample_zoh: dt must be positive");
    IlluminanceTrace out;
    out.position_label = trace.position_label;
    std::size_t i = 0;
    const double t0 = trace.start_s();
    for (std::int64_t k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) * dt_s;
        if (t > trace.end_s()) break;
        while (i + 1 < trace.samples.size() && trace.samples[i + 1].timestamp_s <= t) ++i;
        out.samples.push_back({t, trace.samples[i].lux});
    }
    return out;
}

DailyEnergySummary summarize(const IlluminanceTrace& trace, const energy::SolarCellModel& cell,
                             double day_window_hours, double day_start_hour, int n_gaps) {
    trace.validate();
    if (trace.duration_s() < kSecondsPerDay)
        throw InsufficientData("summarize: trace spans less than one day");
    if (!(day_window_hours > 0.0) || day_start_hour < 0.0 ||
        day_start_hour + day_window_hours > 24.0)
        throw InvalidInput("summarize: bad day window");

    const long day_first = static_cast<long>(std::ceil(trace.start_s() / kSecondsPerDay - 1e-9));
    const long day_last = static_cast<long>(std::floor(trace.end_s() / kSecondsPerDay + 1e-9));
    const long n_days = day_last - day_first;  // fully covered days only
    if (n_days < 1) throw InsufficientData("summarize: no fully covered day");

    std::vector<double> day_energy_j_cm2(static_cast<std::size_t>(n_days), 0.0);
    double lux_t = 0.0, lux_integral = 0.0, lux_sq_integral = 0.0;

    const double win_lo = day_start_hour * 3600.0;
    const double win_hi = (day_start_hour + day_window_hours) * 3600.0;
    const double t_lo = static_cast<double>(day_first) * kSecondsPerDay;
    const double t_hi = static_cast<double>(day_last) * kSecondsPerDay;

    for (std::size_t i = 0; i + 1 < trace.samples.size(); ++i) {
        double a = std::max(trace.samples[i].timestamp_s, t_lo);
        const double b = std::min(trace.samples[i + 1].timestamp_s, t_hi);
        if (b <= a) continue;
        const double lux = trace.samples[i].lux;
        const double p_cm2 = energy::mpp_power_density(cell, lux);
        // Split the held interval at day boundaries.
        while (a < b) {
            const long day = static_cast<long>(std::floor(a / kSecondsPerDay + 1e-9));
            const double day_end = static_cast<double>(day + 1) * kSecondsPerDay;
            const double seg_end = std::min(b, day_end);
            day_energy_j_cm2[static_cast<std::size_t>(day - day_first)] +=
                p_cm2 * (seg_end - a);
            // Day-window overlap for the illuminance statistics.
            const double day_t0 = static_cast<double>(day) * kSecondsPerDay;
            const double w_a = std::max(a - day_t0, win_lo);
            const double w_b = std::min(seg_end - day_t0, win_hi);
            if (w_b > w_a) {
                const double w = w_b - w_a;
                lux_t += w;
                lux_integral += lux * w;
                lux_sq_integral += lux * lux * w;
            }
            a = seg_end;
        }
    }

    DailyEnergySummary s;
    s.position_label = trace.position_label;
    s.n_days = static_cast<int>(n_days);
    s.n_gaps = n_gaps;
    if (lux_t > 0.0) {
        s.day_lux_mean = lux_integral / lux_t;
        const double var = std::max(0.0, lux_sq_integral / lux_t - s.day_lux_mean * s.day_lux_mean);
        s.day_lux_std = std::sqrt(var);
    }
    double e_mean = 0.0;
    for (double e : day_energy_j_cm2) e_mean += e;
    e_mean /= static_cast<double>(n_days);
    double e_var = 0.0;
    for (double e : day_energy_j_cm2) e_var += (e - e_mean) * (e - e_mean);
    e_var = n_days > 1 ? e_var / static_cast<double>(n_days - 1) : 0.0;
    s.daily_energy_mean_mj_per_cm2 = e_mean * 1e3;
    s.daily_energy_std_mj_per_cm2 = std::sqrt(e_var) * 1e3;
    return s;
}

std::string summary_json(const DailyEnergySummary& s) {
    nlohmann::ordered_json j;
    j["position"] = s.position_label;
    j["n_days"] = s.n_days;
    j["day_illuminance_mean_lux"] = s.day_lux_mean;
    j["day_illuminance_std_lux"] = s.day_lux_std;
    j["daily_energy_mean_mj_per_cm2"] = s.daily_energy_mean_mj_per_cm2;
    j["daily_energy_std_mj_per_cm2"] = s.daily_energy_std_mj_per_cm2;
    j["n_gaps"] = s.n_gaps;
    return j.dump(2) + "\n";
}

namespace {

// Plateau with sin^2 ramps over u in [0,1); ramp fraction r each side.
double day_shape(double u, double r) {
    if (u < 0.0 || u >= 1.0) return 0.0;
    if (r <= 0.0) return 1.0;
    if (u < r) {
        const double s = std::sin(0.5 * M_PI * u / r);
        return s * s;
    }
    if (u > 1.0 - r) {
        const double s = std::sin(0.5 * M_PI * (1.0 - u) / r);
        return s * s;
    }
    return 1.0;
}

// Continuous shape moment ratio E[s^2]/E[s]^2 = (1 - 1.25 r) / (1 - r)^2.
// Largest ramp fraction whose shape variance spends at most half of the
// requested coefficient of variation squared.
double feasible_ramp_fraction(double cov_sq) {
    const double K = 1.0 + 0.5 * cov_sq;
    // K r^2 - (2K - 1.25) r + (K - 1) = 0, smaller root.
    const double bq = 2.0 * K - 1.25;
    const double disc = bq * bq - 4.0 * K * (K - 1.0);
    if (disc <= 0.0) return 0.0;
    const double r = (bq - std::sqrt(disc)) / (2.0 * K);
    return std::clamp(r, 0.0, 0.5);
}

}  // namespace

IlluminanceTrace synthesize_trace(const SynthStats& stats, std::uint64_t seed,
                                  const std::string& label) {
    if (stats.mean_lux < 0.0) throw InvalidInput("synthesize_trace: mean must be >= 0");
    if (stats.std_lux < 0.0) throw InvalidInput("synthesize_trace: std must be >= 0");
    if (stats.n_days < 1) throw InvalidInput("synthesize_trace: need n_days >= 1");
    if (stats.mean_lux == 0.0 && stats.std_lux > 0.0)
        throw InvalidInput("synthesize_trace: zero mean with nonzero std");
    if (!(stats.sample_period_s > 0.0))
        throw InvalidInput("synthesize_trace: sample period must be positive");
    if (!(stats.day_window_hours > 0.0) || stats.day_start_hour < 0.0 ||
        stats.day_start_hour + stats.day_window_hours > 24.0)
        throw InvalidInput("synthesize_trace: bad day window");

    const double period = stats.sample_period_s;
    const double win_lo = stats.day_start_hour * 3600.0;
    const double win_len = stats.day_window_hours * 3600.0;

    const double cov = stats.mean_lux > 0.0 ? stats.std_lux / stats.mean_lux : 0.0;
    const double r = std::min(stats.ramp_fraction, feasible_ramp_fraction(cov * cov));

    // One day's shape on the actual sample grid; amplitude moments are solved
    // against the discrete moments so the generated sample statistics match
    // the request exactly in expectation.
    std::vector<std::pair<double, double>> day_grid;  // (t within day, shape)
    double s1 = 0.0, s2 = 0.0;
    long n_win = 0;
    const long samples_per_day = static_cast<long>(kSecondsPerDay / period);
    for (long k = 0; k < samples_per_day; ++k) {
        const double t = static_cast<double>(k) * period;
        const double u = (t - win_lo) / win_len;
        const double s = day_shape(u, r);
        day_grid.emplace_back(t, s);
        if (u >= 0.0 && u < 1.0) {
            s1 += s;
            s2 += s * s;
            ++n_win;
        }
    }
    if (n_win == 0) throw InvalidInput("synthesize_trace: day window shorter than the sample period");
    s1 /= static_cast<double>(n_win);
    s2 /= static_cast<double>(n_win);

    double mu_ln = 0.0, sigma_ln = 0.0, mean_amp = 0.0;
    if (stats.mean_lux > 0.0) {
        mean_amp = stats.mean_lux / s1;
        const double m2_amp =
            (stats.std_lux * stats.std_lux + stats.mean_lux * stats.mean_lux) / s2;
        const double cov_amp_sq = std::max(0.0, m2_amp / (mean_amp * mean_amp) - 1.0);
        sigma_ln = std::sqrt(std::log1p(cov_amp_sq));
        mu_ln = std::log(mean_amp) - 0.5 * sigma_ln * sigma_ln;
    }

    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> amp_dist(mu_ln, sigma_ln);

    IlluminanceTrace trace;
    trace.position_label = label;
    trace.samples.reserve(static_cast<std::size_t>(stats.n_days) *
                              static_cast<std::size_t>(samples_per_day) + 1);
    for (int d = 0; d < stats.n_days; ++d) {
        double amp = 0.0;
        if (stats.mean_lux > 0.0)
            amp = (stats.std_lux > 0.0 || sigma_ln > 0.0) ? amp_dist(rng) : mean_amp;
        if (stats.seasonal_amplitude != 0.0)
            amp *= 1.0 + stats.seasonal_amplitude *
                             std::sin(2.0 * M_PI * static_cast<double>(d) / 365.0);
        const double day_t0 = static_cast<double>(d) * kSecondsPerDay;
        for (const auto& [t, s] : day_grid)
            trace.samples.push_back({day_t0 + t, std::max(0.0, amp * s)});
    }
    // Closing sample so the final day is fully covered.
    trace.samples.push_back({static_cast<double>(stats.n_days) * kSecondsPerDay, 0.0});
    return trace;
}

}  // namespace tagsim::traces
