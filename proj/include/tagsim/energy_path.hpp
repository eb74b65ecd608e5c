#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "tagsim/errors.hpp"
#include "tagsim/io_util.hpp"
#include "tagsim/traces.hpp"

namespace tagsim::energy {

// ---------------------------------------------------------------------------
// Solar cell
// ---------------------------------------------------------------------------

// Thin-film cell at its maximum power point under indoor light. The MPP power
// density is a polynomial in illuminance, calibrated per cm^2 so the
// harvesting-potential table reproduces (see docs/calibration.md); linear
// extrapolation above the calibrated range.
struct SolarCellModel {
    double active_area_cm2 = 25.9;  // 70 mm x 37 mm
    // Polynomial c[0] + c[1]*L + c[2]*L^2 + ... in W/cm^2 (c[0] must be 0).
    std::vector<double> mpp_coeffs_w_per_cm2;
    double calibrated_max_lux = 2000.0;
    double voc_fraction_at_mpp = 0.75;  // informational, from the cell characterization

    // Default SP4.2-37 fit: quadratic pinned to the 112 lux / 54 mJ/cm^2/day
    // point, least squares over the remaining table rows.
    static SolarCellModel sp4237_default();
    // Single-coefficient variant from the same 112-lux fixed point.
    static SolarCellModel linear_p06();

    void validate() const;  // p(0) = 0, non-decreasing on [0, calibrated_max_lux]
};

// MPP power density in W/cm^2 at the given illuminance (clamped at 0 below,
// linear extrapolation with a warning above the calibrated range).
double mpp_power_density(const SolarCellModel& cell, double lux, Warnings* warnings = nullptr);

// Whole-cell MPP power in watts.
double harvest_power(const SolarCellModel& cell, double lux, Warnings* warnings = nullptr);

// ---------------------------------------------------------------------------
// Converter
// ---------------------------------------------------------------------------

// Boost-converter efficiency over (input power, battery voltage). The
// published ceiling is 91%; everything else in the default map is synthetic
// and fully configurable. Interpolation is bilinear on (log10 P, V); inputs
// below the first grid point convert nothing.
struct ConverterModel {
    std::vector<double> power_grid_w;    // ascending, > 0
    std::vector<double> voltage_grid_v;  // ascending
    std::vector<std::vector<double>> efficiency;  // [power][voltage]
    double quiescent_w = 0.0;  // own draw; 0 by default (management domain is in the load)

    static ConverterModel default_synthetic();

    double efficiency_at(double input_w, double battery_v) const;
    void validate() const;  // shape, efficiency in [0, 0.91]
};

inline constexpr double kConverterEfficiencyCeiling = 0.91;

// ---------------------------------------------------------------------------
// Battery
// ---------------------------------------------------------------------------

// 50 mAh LiPo pouch cell by default. Self-discharge is proportional to the
// current state of charge (a LiPo-typical percentage per 30-day month);
// terminal voltage is linear in SoC and spans exactly the energy-budget
// measurement voltages.
struct BatteryState {
    double capacity_j = 666.0;  // 50 mAh * 3.7 V
    double soc = 0.5;
    double self_discharge_per_month = 0.03;
    double overcharge_voltage_v = 4.2;
    double v_empty = 3.4;
    double v_full = 4.15;

    double voltage() const { return v_empty + soc * (v_full - v_empty); }
    double self_discharge_power_w() const;  // at the current SoC
    void validate() const;

    static BatteryState lipo_50mah_default();
};

inline constexpr double kSecondsPerMonth = 30.0 * 86400.0;

double battery_capacity_joules(double mah, double nominal_v);

// Events a battery of this capacity can supply at the given per-event energy.
double battery_event_capacity(double capacity_j, double event_energy_j);

// Localization events per day a daily energy surplus can fund.
double events_per_day(double surplus_j_per_day, double event_energy_j);

// ---------------------------------------------------------------------------
// Load
// ---------------------------------------------------------------------------

// Constant idle draw plus optional localization lumps at given instants.
struct LoadSchedule {
    double base_power_w = 4.68e-6;  // SLEEP
    std::vector<double> event_times_s;  // must be ascending
    double event_energy_j = 10.84e-3;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Power-path simulation
// ---------------------------------------------------------------------------

struct StepRecord {
    double t_s = 0.0;
    double dt_s = 0.0;
    double soc = 0.0;            // at step end
    double p_harvest_w = 0.0;    // cell MPP output (pre conversion)
    double p_converted_w = 0.0;  // after converter efficiency and quiescent draw
    double p_load_w = 0.0;       // served load
    double p_selfdischarge_w = 0.0;
    double p_curtailed_w = 0.0;  // overcharge-rejected (or surplus-sunk)
    double p_deficit_w = 0.0;    // unserved load when the battery is empty
};

struct EnergyLedger {
    double harvested_j = 0.0;
    double converted_j = 0.0;
    double conversion_loss_j = 0.0;
    double load_j = 0.0;     // served
    double self_discharge_j = 0.0;
    double curtailed_j = 0.0;
    double surplus_j = 0.0;  // curtailment rerouted when surplus_sink is on
    double deficit_j = 0.0;  // unserved load
};

struct SimulationOptions {
    double max_step_s = 60.0;
    // Books would-be overcharge curtailment as consumed surplus instead, so
    // harvest totals are not distorted by a full battery.
    bool surplus_sink = false;
    bool record_timeline = true;
};

struct SimulationResult {
    std::vector<StepRecord> timeline;
    EnergyLedger ledger;
    double initial_soc = 0.0;
    double final_soc = 0.0;
    double min_soc = 1.0;
    double max_soc = 0.0;
    double duration_s = 0.0;
};

// Forward-Euler integration of the harvest -> convert -> store -> load path
// over a zero-order-hold illuminance trace. Steps never exceed
// options.max_step_s and split at trace samples and load events. Charging is
// suppressed above the overcharge voltage; SoC is clamped to [0, 1]; every
// step balances harvested = dE + load + self-discharge + curtailed +
// conversion loss exactly.
SimulationResult simulate(const traces::IlluminanceTrace& trace, const SolarCellModel& cell,
                          const ConverterModel& converter, const BatteryState& initial,
                          const LoadSchedule& load, const SimulationOptions& options = {});

// t,soc,p_harvest,p_load,p_selfdischarge,p_curtailed
void write_soc_timeline_csv(std::ostream& out, const SimulationResult& result);
std::string ledger_json(const SimulationResult& result);

// ---------------------------------------------------------------------------
// Neutrality sweep
// ---------------------------------------------------------------------------

struct RateOutcome {
    double rate_per_month = 0.0;
    double final_soc = 0.0;
    double min_soc = 0.0;
    double max_soc = 0.0;
};

// Runs simulate once per self-discharge rate from the template's initial SoC.
std::vector<RateOutcome> neutrality_sweep(const traces::IlluminanceTrace& trace,
                                          const SolarCellModel& cell,
                                          const ConverterModel& converter,
                                          const BatteryState& battery_template,
                                          const LoadSchedule& load,
                                          const std::vector<double>& self_discharge_rates,
                                          const SimulationOptions& options = {});

// Largest self-discharge rate at which the final SoC still reaches the
// initial SoC (bisection over [lo, hi]); NaN when no crossing exists in the
// bracket.
double find_neutrality_crossing(const traces::IlluminanceTrace& trace,
                                const SolarCellModel& cell, const ConverterModel& converter,
                                const BatteryState& battery_template, const LoadSchedule& load,
                                double rate_lo, double rate_hi, double tol_rate = 0.01,
                                const SimulationOptions& options = {});

void write_sweep_csv(std::ostream& out, const std::vector<RateOutcome>& outcomes);

// ---------------------------------------------------------------------------
// Model verification metrics
// ---------------------------------------------------------------------------

struct FitMetrics {
    double rmse_w = 0.0;
    double r_squared = 0.0;
    double energy_error_pct = 0.0;
};

// RMSE, coefficient of determination, and the ratio-of-integrals energy error
// (percent) between a predicted and a measured power series sampled on the
// same uniform grid. Throws on length mismatch (< 2 samples) and when the
// measured series integrates to zero.
FitMetrics fit_metrics(const std::vector<double>& predicted_w,
                       const std::vector<double>& measured_w);

}  // namespace tagsim::energy
