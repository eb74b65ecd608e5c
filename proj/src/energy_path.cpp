#include "tagsim/energy_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tagsim::energy {

// ---------------------------------------------------------------------------
// Solar cell
// ---------------------------------------------------------------------------

SolarCellModel SolarCellModel::sp4237_default() {
    SolarCellModel cell;
    // Quadratic MPP fit, W/cm^2: pinned to 1.25 uW/cm^2 at 112 lux, least
    // squares over the other harvesting-potential rows in expected-power form
    // (the quadratic is convex, so each row's illuminance variance feeds the
    // fit; see docs/calibration.md).
    cell.mpp_coeffs_w_per_cm2 = {0.0, 9.307939244469e-09, 1.654263429683e-11};
    return cell;
}

SolarCellModel SolarCellModel::linear_p06() {
    SolarCellModel cell;
    // 1.25 uW/cm^2 at 112 lux, purely linear.
    cell.mpp_coeffs_w_per_cm2 = {0.0, 1.25e-6 / 112.0};
    return cell;
}

void SolarCellModel::validate() const {
    if (!(active_area_cm2 > 0.0))
        throw InvalidInput("SolarCellModel: active area must be positive");
    if (mpp_coeffs_w_per_cm2.empty() || mpp_coeffs_w_per_cm2[0] != 0.0)
        throw InvalidInput("SolarCellModel: polynomial must vanish at 0 lux");
    if (!(calibrated_max_lux > 0.0))
        throw InvalidInput("SolarCellModel: calibrated range must be positive");
    // Non-negative and non-decreasing over the calibrated range.
    double prev = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double lux = calibrated_max_lux * i / 200.0;
        double p = 0.0;
        for (std::size_t k = mpp_coeffs_w_per_cm2.size(); k-- > 0;)
            p = p * lux + mpp_coeffs_w_per_cm2[k];
        if (p < 0.0 || p + 1e-18 < prev)
            throw InvalidInput("SolarCellModel: MPP power must be non-negative and "
                               "non-decreasing over the calibrated range");
        prev = p;
    }
}

namespace {

double poly_eval(const std::vector<double>& coeffs, double x) {
    double p = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) p = p * x + coeffs[k];
    return p;
}

double poly_derivative(const std::vector<double>& coeffs, double x) {
    double d = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 1;)
        d = d * x + coeffs[k] * static_cast<double>(k);
    return d;
}

}  // namespace

double mpp_power_density(const SolarCellModel& cell, double lux, Warnings* warnings) {
    if (lux <= 0.0) return 0.0;
    if (lux > cell.calibrated_max_lux) {
        warn(warnings, "illuminance " + format_fixed(lux, 1) +
                           " lux above calibrated range; extrapolating linearly");
        const double p_edge = poly_eval(cell.mpp_coeffs_w_per_cm2, cell.calibrated_max_lux);
        const double slope = poly_derivative(cell.mpp_coeffs_w_per_cm2, cell.calibrated_max_lux);
        return p_edge + slope * (lux - cell.calibrated_max_lux);
    }
    return std::max(0.0, poly_eval(cell.mpp_coeffs_w_per_cm2, lux));
}

double harvest_power(const SolarCellModel& cell, double lux, Warnings* warnings) {
    if (lux < 0.0) throw InvalidInput("harvest_power: negative illuminance");
    return cell.active_area_cm2 * mpp_power_density(cell, lux, warnings);
}

// ---------------------------------------------------------------------------
// Converter
// ---------------------------------------------------------------------------

ConverterModel ConverterModel::default_synthetic() {
    ConverterModel c;
    c.power_grid_w = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
    c.voltage_grid_v = {3.4, 4.15};
    c.efficiency = {
        {0.0, 0.0}, {0.60, 0.60}, {0.80, 0.80}, {0.88, 0.88}, {0.91, 0.91},
    };
    return c;
}

void ConverterModel::validate() const {
    if (power_grid_w.size() < 2 || voltage_grid_v.empty())
        throw InvalidInput("ConverterModel: need >= 2 power and >= 1 voltage grid points");
    if (efficiency.size() != power_grid_w.size())
        throw InvalidInput("ConverterModel: efficiency rows must match power grid");
    for (const auto& row : efficiency) {
        if (row.size() != voltage_grid_v.size())
            throw InvalidInput("ConverterModel: efficiency columns must match voltage grid");
        for (double e : row)
            if (e < 0.0 || e > kConverterEfficiencyCeiling + 1e-12)
                throw InvalidInput("ConverterModel: efficiency outside [0, 0.91]");
    }
    if (!std::is_sorted(power_grid_w.begin(), power_grid_w.end()) ||
        !std::is_sorted(voltage_grid_v.begin(), voltage_grid_v.end()))
        throw InvalidInput("ConverterModel: grids must be ascending");
    if (power_grid_w.front() <= 0.0)
        throw InvalidInput("ConverterModel: power grid must be positive");
    if (quiescent_w < 0.0) throw InvalidInput("ConverterModel: negative quiescent power");
}

double ConverterModel::efficiency_at(double input_w, double battery_v) const {
    if (input_w < power_grid_w.front()) return 0.0;  // below cold-start threshold
    const double x = std::log10(std::min(input_w, power_grid_w.back()));

    std::size_t pi = 0;
    while (pi + 2 < power_grid_w.size() && std::log10(power_grid_w[pi + 1]) < x) ++pi;
    const double x0 = std::log10(power_grid_w[pi]);
    const double x1 = std::log10(power_grid_w[pi + 1]);
    const double tx = std::clamp((x - x0) / (x1 - x0), 0.0, 1.0);

    const double v = std::clamp(battery_v, voltage_grid_v.front(), voltage_grid_v.back());
    std::size_t vi = 0;
    double tv = 0.0;
    if (voltage_grid_v.size() > 1) {
        while (vi + 2 < voltage_grid_v.size() && voltage_grid_v[vi + 1] < v) ++vi;
        tv = (v - voltage_grid_v[vi]) / (voltage_grid_v[vi + 1] - voltage_grid_v[vi]);
        tv = std::clamp(tv, 0.0, 1.0);
    }
    const std::size_t vj = voltage_grid_v.size() > 1 ? vi + 1 : vi;
    const double e0 = efficiency[pi][vi] + tv * (efficiency[pi][vj] - efficiency[pi][vi]);
    const double e1 =
        efficiency[pi + 1][vi] + tv * (efficiency[pi + 1][vj] - efficiency[pi + 1][vi]);
    return e0 + tx * (e1 - e0);
}

// ---------------------------------------------------------------------------
// Battery
// ---------------------------------------------------------------------------

double BatteryState::self_discharge_power_w() const {
    return soc * capacity_j * self_discharge_per_month / kSecondsPerMonth;
}

void BatteryState::validate() const {
    if (!(capacity_j > 0.0)) throw InvalidInput("BatteryState: capacity must be positive");
    if (soc < 0.0 || soc > 1.0) throw InvalidInput("BatteryState: soc outside [0, 1]");
    if (self_discharge_per_month < 0.0)
        throw InvalidInput("BatteryState: negative self-discharge rate");
    if (!(v_full > v_empty)) throw InvalidInput("BatteryState: voltage curve must increase");
}

BatteryState BatteryState::lipo_50mah_default() { return BatteryState{}; }

double battery_capacity_joules(double mah, double nominal_v) {
    return mah * 1e-3 * 3600.0 * nominal_v;
}

double battery_event_capacity(double capacity_j, double event_energy_j) {
    if (!(event_energy_j > 0.0))
        throw InvalidInput("battery_event_capacity: event energy must be positive");
    return capacity_j / event_energy_j;
}

double events_per_day(double surplus_j_per_day, double event_energy_j) {
    if (!(event_energy_j > 0.0))
        throw InvalidInput("events_per_day: event energy must be positive");
    return surplus_j_per_day / event_energy_j;
}

void LoadSchedule::validate() const {
    if (base_power_w < 0.0) throw InvalidInput("LoadSchedule: negative base power");
    if (event_energy_j < 0.0) throw InvalidInput("LoadSchedule: negative event energy");
    if (!std::is_sorted(event_times_s.begin(), event_times_s.end()))
        throw InvalidInput("LoadSchedule: event times must be ascending");
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

SimulationResult simulate(const traces::IlluminanceTrace& trace, const SolarCellModel& cell,
                          const ConverterModel& converter, const BatteryState& initial,
                          const LoadSchedule& load, const SimulationOptions& options) {
    trace.validate();
    cell.validate();
    converter.validate();
    initial.validate();
    load.validate();
    if (!(options.max_step_s > 0.0)) throw InvalidInput("simulate: max step must be positive");

    BatteryState bat = initial;
    SimulationResult result;
    result.initial_soc = bat.soc;
    result.min_soc = bat.soc;
    result.max_soc = bat.soc;

    std::size_t next_event = 0;
    const auto& events = load.event_times_s;
    // Skip events before the trace starts.
    while (next_event < events.size() && events[next_event] < trace.start_s()) ++next_event;

    for (std::size_t i = 0; i + 1 < trace.samples.size(); ++i) {
        const double seg_start = trace.samples[i].timestamp_s;
        const double seg_end = trace.samples[i + 1].timestamp_s;
        const double p_harvest = harvest_power(cell, trace.samples[i].lux);

        double t = seg_start;
        while (t < seg_end) {
            double dt = std::min(options.max_step_s, seg_end - t);
            // Steps split at event instants; lumps due at the step start are
            // consumed now.
            if (next_event < events.size() && events[next_event] > t &&
                events[next_event] < t + dt)
                dt = events[next_event] - t;
            double lump = 0.0;
            while (next_event < events.size() && events[next_event] <= t) {
                lump += load.event_energy_j;
                ++next_event;
            }

            const double e_harv = p_harvest * dt;
            const double eta = converter.efficiency_at(p_harvest, bat.voltage());
            double e_conv = std::max(0.0, eta * p_harvest * dt - converter.quiescent_w * dt);
            const double e_conv_raw = e_conv;  // converter output before any gating
            const double e_conv_loss = e_harv - e_conv;

            const double e_sd_want = bat.self_discharge_power_w() * dt;
            const double e_load_want = load.base_power_w * dt + lump;

            // Charging gate: overcharge protection by terminal voltage.
            double e_curtail = 0.0;
            if (bat.voltage() >= bat.overcharge_voltage_v) {
                e_curtail = e_conv;
                e_conv = 0.0;
            }

            double stored = bat.soc * bat.capacity_j;
            double e_new = stored + e_conv - e_sd_want - e_load_want;
            double e_sd = e_sd_want;
            double e_load = e_load_want;
            double e_deficit = 0.0;
            if (e_new > bat.capacity_j) {  // full: reject the excess
                e_curtail += e_new - bat.capacity_j;
                e_new = bat.capacity_j;
            } else if (e_new < 0.0) {  // empty: the load browns out first
                e_deficit = -e_new;
                e_new = 0.0;
                if (e_deficit <= e_load) {
                    e_load -= e_deficit;
                } else {  // even self-discharge cannot be sustained
                    e_sd -= e_deficit - e_load;
                    e_load = 0.0;
                }
            }
            bat.soc = e_new / bat.capacity_j;

            double e_surplus = 0.0;
            if (options.surplus_sink) {
                e_surplus = e_curtail;
                e_curtail = 0.0;
            }

            result.ledger.harvested_j += e_harv;
            result.ledger.converted_j += e_conv_raw;
            result.ledger.conversion_loss_j += e_conv_loss;
            result.ledger.load_j += e_load;
            result.ledger.self_discharge_j += e_sd;
            result.ledger.curtailed_j += e_curtail;
            result.ledger.surplus_j += e_surplus;
            result.ledger.deficit_j += e_deficit;

            t += dt;
            result.min_soc = std::min(result.min_soc, bat.soc);
            result.max_soc = std::max(result.max_soc, bat.soc);
            if (options.record_timeline) {
                StepRecord rec;
                rec.t_s = t;
                rec.dt_s = dt;
                rec.soc = bat.soc;
                rec.p_harvest_w = p_harvest;
                rec.p_converted_w = e_conv_raw / dt;
                rec.p_load_w = e_load / dt;
                rec.p_selfdischarge_w = e_sd / dt;
                rec.p_curtailed_w = (e_curtail + e_surplus) / dt;
                rec.p_deficit_w = e_deficit / dt;
                result.timeline.push_back(rec);
            }
        }
    }

    result.final_soc = bat.soc;
    result.duration_s = trace.duration_s();
    return result;
}

void write_soc_timeline_csv(std::ostream& out, const SimulationResult& result) {
    out << "t,soc,p_harvest,p_load,p_selfdischarge,p_curtailed\n";
    for (const StepRecord& r : result.timeline)
        out << format_full(r.t_s) << ',' << format_full(r.soc) << ','
            << format_full(r.p_harvest_w) << ',' << format_full(r.p_load_w) << ','
            << format_full(r.p_selfdischarge_w) << ',' << format_full(r.p_curtailed_w) << '\n';
}

std::string ledger_json(const SimulationResult& result) {
    nlohmann::ordered_json j;
    j["duration_s"] = result.duration_s;
    j["initial_soc"] = result.initial_soc;
    j["final_soc"] = result.final_soc;
    j["min_soc"] = result.min_soc;
    j["max_soc"] = result.max_soc;
    j["harvested_j"] = result.ledger.harvested_j;
    j["converted_j"] = result.ledger.converted_j;
    j["conversion_loss_j"] = result.ledger.conversion_loss_j;
    j["load_j"] = result.ledger.load_j;
    j["self_discharge_j"] = result.ledger.self_discharge_j;
    j["curtailed_j"] = result.ledger.curtailed_j;
    j["surplus_j"] = result.ledger.surplus_j;
    j["deficit_j"] = result.ledger.deficit_j;
    return j.dump(2) + "\n";
}

std::vector<RateOutcome> neutrality_sweep(const traces::IlluminanceTrace& trace,
                                          const SolarCellModel& cell,
                                          const ConverterModel& converter,
                                          const BatteryState& battery_template,
                                          const LoadSchedule& load,
                                          const std::vector<double>& self_discharge_rates,
                                          const SimulationOptions& options) {
    std::vector<RateOutcome> outcomes;
    SimulationOptions opt = options;
    opt.record_timeline = false;
    for (double rate : self_discharge_rates) {
        if (rate < 0.0) throw InvalidInput("neutrality_sweep: negative rate");
        BatteryState bat = battery_template;
        bat.self_discharge_per_month = rate;
        const SimulationResult r = simulate(trace, cell, converter, bat, load, opt);
        outcomes.push_back({rate, r.final_soc, r.min_soc, r.max_soc});
    }
    return outcomes;
}

double find_neutrality_crossing(const traces::IlluminanceTrace& trace,
                                const SolarCellModel& cell, const ConverterModel& converter,
                                const BatteryState& battery_template, const LoadSchedule& load,
                                double rate_lo, double rate_hi, double tol_rate,
                                const SimulationOptions& options) {
    SimulationOptions opt = options;
    opt.record_timeline = false;
    const double target = battery_template.soc;
    auto balance = [&](double rate) {
        BatteryState bat = battery_template;
        bat.self_discharge_per_month = rate;
        return simulate(trace, cell, converter, bat, load, opt).final_soc - target;
    };
    double f_lo = balance(rate_lo);
    double f_hi = balance(rate_hi);
    if (f_lo < 0.0 || f_hi > 0.0) return std::numeric_limits<double>::quiet_NaN();
    while (rate_hi - rate_lo > tol_rate) {
        const double mid = 0.5 * (rate_lo + rate_hi);
        if (balance(mid) >= 0.0)
            rate_lo = mid;
        else
            rate_hi = mid;
    }
    return 0.5 * (rate_lo + rate_hi);
}

void write_sweep_csv(std::ostream& out, const std::vector<RateOutcome>& outcomes) {
    out << "self_discharge_per_month,final_soc,min_soc,max_soc\n";
    for (const RateOutcome& o : outcomes)
        out << format_full(o.rate_per_month) << ',' << format_full(o.final_soc) << ','
            << format_full(o.min_soc) << ',' << format_full(o.max_soc) << '\n';
}

FitMetrics fit_metrics(const std::vector<double>& predicted_w,
                       const std::vector<double>& measured_w) {
    if (predicted_w.size() != measured_w.size())
        throw InvalidInput("fit_metrics: series length mismatch");
    const std::size_t n = measured_w.size();
    if (n < 2) throw InvalidInput("fit_metrics: need at least 2 samples");

    double sq_err = 0.0, meas_sum = 0.0, pred_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = predicted_w[i] - measured_w[i];
        sq_err += e * e;
        meas_sum += measured_w[i];
        pred_sum += predicted_w[i];
    }
    const double meas_mean = meas_sum / static_cast<double>(n);
    double meas_var = 0.0;
    for (double m : measured_w) meas_var += (m - meas_mean) * (m - meas_mean);

    FitMetrics metrics;
    metrics.rmse_w = std::sqrt(sq_err / static_cast<double>(n));
    if (meas_var > 0.0)
        metrics.r_squared = 1.0 - sq_err / meas_var;
    else
        metrics.r_squared =
            sq_err == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    if (meas_sum == 0.0)
        throw UndefinedMetric("fit_metrics: measured series integrates to zero");
    // Uniform sampling: the integral ratio reduces to the sum ratio.
    metrics.energy_error_pct = (pred_sum / meas_sum - 1.0) * 100.0;
    return metrics;
}

}  // namespace tagsim::energy
