#include "tagsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tagsim/io_util.hpp"
#include "tagsim/multilateration.hpp"

namespace tagsim::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            fail(path, "unknown key '" + key + "'");
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const std::string& path, const char* key,
                  double fallback, double lo, double hi) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number()) fail(path + "." + key, "expected a number");
    const double x = v->get<double>();
    if (x < lo || x > hi)
        fail(path + "." + key, "value " + format_full(x) + " outside [" + format_full(lo) +
                                   ", " + format_full(hi) + "]");
    return x;
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback,
            int lo, int hi) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
    const int x = v->get<int>();
    if (x < lo || x > hi)
        fail(path + "." + key, "value " + std::to_string(x) + " outside [" +
                                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
    return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_string()) fail(path + "." + key, "expected a string");
    return v->get<std::string>();
}

Eigen::Vector3d parse_vec3(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number())
        fail(path, "expected [x, y, z]");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

std::vector<Eigen::Vector3d> parse_positions(const json& obj, const std::string& path,
                                             const char* key) {
    const json* v = find(obj, key);
    if (!v) fail(path, "missing required key '" + std::string(key) + "'");
    if (!v->is_array() || v->empty()) fail(path + "." + key, "expected a non-empty array");
    std::vector<Eigen::Vector3d> out;
    for (std::size_t i = 0; i < v->size(); ++i)
        out.push_back(parse_vec3((*v)[i], path + "." + key + "[" + std::to_string(i) + "]"));
    return out;
}

std::filesystem::path existing_file(const std::string& value, const std::string& path,
                                    const std::filesystem::path& base_dir) {
    std::filesystem::path p(value);
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) fail(path, "referenced file does not exist: " + p.string());
    return p;
}

RangeSection parse_range(const json& obj, const std::string& path) {
    check_keys(obj, path,
               {"anchors", "tag_position", "tick_duration_s", "tag_drift_ppm",
                "anchor_drift_ppm", "noise_sigma_m", "nlos_bias_m", "max_range_m",
                "reply_delay_base_s", "reply_delay_step_s", "tag_turnaround_s", "lost"});
    RangeSection s;
    s.anchors = parse_positions(obj, path, "anchors");
    if (const json* v = find(obj, "tag_position"))
        s.tag_position = parse_vec3(*v, path + ".tag_position");
    else
        fail(path, "missing required key 'tag_position'");
    s.tick_s = get_number(obj, path, "tick_duration_s", ranging::kDefaultTickSeconds, 1e-15, 1.0);
    s.tag_drift_ppm = get_number(obj, path, "tag_drift_ppm", 0.0, -100.0, 100.0);
    if (const json* v = find(obj, "anchor_drift_ppm")) {
        if (!v->is_array() || v->size() != s.anchors.size())
            fail(path + ".anchor_drift_ppm", "expected one value per anchor");
        for (const auto& d : *v) {
            if (!d.is_number() || std::abs(d.get<double>()) > 100.0)
                fail(path + ".anchor_drift_ppm", "drift outside +/-100 ppm");
            s.anchor_drift_ppm.push_back(d.get<double>());
        }
    }
    s.noise_sigma_m = get_number(obj, path, "noise_sigma_m", 0.0, 0.0, 100.0);
    s.nlos_bias_m = get_number(obj, path, "nlos_bias_m", 0.0, 0.0, 100.0);
    s.max_range_m = get_number(obj, path, "max_range_m", ranging::kDefaultMaxRangeMeters,
                               1e-3, 1e6);
    s.reply_delay_base_s = get_number(obj, path, "reply_delay_base_s", 2e-3, 1e-6, 1.0);
    s.reply_delay_step_s = get_number(obj, path, "reply_delay_step_s", 1e-3, 0.0, 1.0);
    s.tag_turnaround_s = get_number(obj, path, "tag_turnaround_s", 1e-3, 1e-6, 1.0);
    if (const json* v = find(obj, "lost")) {
        if (!v->is_array() || v->size() != s.anchors.size())
            fail(path + ".lost", "expected one flag per anchor");
        for (const auto& f : *v) {
            if (!f.is_boolean()) fail(path + ".lost", "expected booleans");
            s.lost.push_back(f.get<bool>());
        }
    }
    return s;
}

void parse_setup_noise(const json& obj, const std::string& path,
                       scenario::LocalizationSetup& setup) {
    setup.noise_sigma_m =
        get_number(obj, path, "noise_sigma_m", setup.noise_sigma_m, 0.0, 100.0);
    setup.nlos_bias_m = get_number(obj, path, "nlos_bias_m", setup.nlos_bias_m, 0.0, 100.0);
    setup.drift_ppm_range =
        get_number(obj, path, "drift_ppm_range", setup.drift_ppm_range, 0.0, 100.0);
    setup.tick_s = get_number(obj, path, "tick_duration_s", setup.tick_s, 1e-15, 1.0);
    setup.max_range_m = get_number(obj, path, "max_range_m", setup.max_range_m, 1e-3, 1e6);
    setup.tag_turnaround_s =
        get_number(obj, path, "tag_turnaround_s", setup.tag_turnaround_s, 1e-6, 1.0);
}

LocateSection parse_locate(const json& obj, const std::string& path) {
    check_keys(obj, path,
               {"anchors", "dimension", "tag_positions", "grid", "trials_per_position",
                "noise_sigma_m", "nlos_bias_m", "drift_ppm_range", "tick_duration_s",
                "max_range_m", "tag_turnaround_s", "tag_id"});
    LocateSection s;
    s.setup = scenario::office_default();
    if (find(obj, "anchors"))
        s.setup.anchors = mlat::AnchorSet::from_positions(parse_positions(obj, path, "anchors"));
    s.dimension = get_int(obj, path, "dimension", 2, 2, 3);
    if (static_cast<int>(s.setup.anchors.positions.size()) < s.dimension + 1)
        fail(path, std::to_string(s.dimension) + "D localization needs at least " +
                       std::to_string(s.dimension + 1) + " anchors (got " +
                       std::to_string(s.setup.anchors.positions.size()) + ")");
    const json* positions = find(obj, "tag_positions");
    const json* grid = find(obj, "grid");
    if (positions && grid) fail(path, "give either tag_positions or grid, not both");
    if (positions) {
        s.tag_positions = parse_positions(obj, path, "tag_positions");
    } else if (grid) {
        const std::string gp = path + ".grid";
        check_keys(*grid, gp, {"x0", "x1", "nx", "y0", "y1", "ny", "z"});
        const double x0 = get_number(*grid, gp, "x0", 0.0, -1e6, 1e6);
        const double x1 = get_number(*grid, gp, "x1", 0.0, -1e6, 1e6);
        const double y0 = get_number(*grid, gp, "y0", 0.0, -1e6, 1e6);
        const double y1 = get_number(*grid, gp, "y1", 0.0, -1e6, 1e6);
        const int nx = get_int(*grid, gp, "nx", 2, 1, 10000);
        const int ny = get_int(*grid, gp, "ny", 2, 1, 10000);
        const double z = get_number(*grid, gp, "z", 1.0, -100.0, 100.0);
        for (int ix = 0; ix < nx; ++ix)
            for (int iy = 0; iy < ny; ++iy)
                s.tag_positions.emplace_back(
                    nx > 1 ? x0 + (x1 - x0) * ix / (nx - 1) : x0,
                    ny > 1 ? y0 + (y1 - y0) * iy / (ny - 1) : y0, z);
    } else {
        fail(path, "missing required key 'tag_positions' (or 'grid')");
    }
    s.trials_per_position = get_int(obj, path, "trials_per_position", 25, 1, 100000);
    parse_setup_noise(obj, path, s.setup);
    s.tag_id = get_string(obj, path, "tag_id", "tag-0");
    return s;
}

energy::SolarCellModel parse_cell(const json* obj, const std::string& path) {
    energy::SolarCellModel cell = energy::SolarCellModel::sp4237_default();
    if (!obj) return cell;
    check_keys(*obj, path, {"preset", "area_cm2", "mpp_coeffs_w_per_cm2", "calibrated_max_lux"});
    const std::string preset = get_string(*obj, path, "preset", "sp4.2-37");
    if (preset == "sp4.2-37")
        cell = energy::SolarCellModel::sp4237_default();
    else if (preset == "linear-p06")
        cell = energy::SolarCellModel::linear_p06();
    else
        fail(path + ".preset", "unknown cell preset '" + preset + "'");
    cell.active_area_cm2 = get_number(*obj, path, "area_cm2", cell.active_area_cm2, 1e-3, 1e4);
    if (const json* v = find(*obj, "mpp_coeffs_w_per_cm2")) {
        if (!v->is_array() || v->empty()) fail(path + ".mpp_coeffs_w_per_cm2", "expected an array");
        cell.mpp_coeffs_w_per_cm2.clear();
        for (const auto& c : *v) {
            if (!c.is_number()) fail(path + ".mpp_coeffs_w_per_cm2", "expected numbers");
            cell.mpp_coeffs_w_per_cm2.push_back(c.get<double>());
        }
    }
    cell.calibrated_max_lux =
        get_number(*obj, path, "calibrated_max_lux", cell.calibrated_max_lux, 1.0, 1e6);
    cell.validate();
    return cell;
}

energy::ConverterModel parse_converter(const json* obj, const std::string& path) {
    energy::ConverterModel conv = energy::ConverterModel::default_synthetic();
    if (!obj) return conv;
    check_keys(*obj, path,
               {"preset", "power_grid_w", "voltage_grid_v", "efficiency", "quiescent_w"});
    const std::string preset = get_string(*obj, path, "preset", "default");
    if (preset != "default") fail(path + ".preset", "unknown converter preset '" + preset + "'");
    if (const json* v = find(*obj, "power_grid_w")) {
        conv.power_grid_w.clear();
        for (const auto& p : *v) conv.power_grid_w.push_back(p.get<double>());
    }
    if (const json* v = find(*obj, "voltage_grid_v")) {
        conv.voltage_grid_v.clear();
        for (const auto& p : *v) conv.voltage_grid_v.push_back(p.get<double>());
    }
    if (const json* v = find(*obj, "efficiency")) {
        conv.efficiency.clear();
        for (const auto& row : *v) {
            std::vector<double> r;
            for (const auto& e : row) r.push_back(e.get<double>());
            conv.efficiency.push_back(std::move(r));
        }
    }
    conv.quiescent_w = get_number(*obj, path, "quiescent_w", conv.quiescent_w, 0.0, 1.0);
    try {
        conv.validate();
    } catch (const InvalidInput& e) {
        fail(path, e.what());
    }
    return conv;
}

energy::BatteryState parse_battery(const json* obj, const std::string& path) {
    energy::BatteryState bat = energy::BatteryState::lipo_50mah_default();
    if (!obj) return bat;
    check_keys(*obj, path,
               {"preset", "capacity_j", "initial_soc", "self_discharge_per_month",
                "overcharge_voltage_v", "v_empty", "v_full"});
    const std::string preset = get_string(*obj, path, "preset", "lipo-50mah");
    if (preset != "lipo-50mah") fail(path + ".preset", "unknown battery preset '" + preset + "'");
    bat.capacity_j = get_number(*obj, path, "capacity_j", bat.capacity_j, 1e-3, 1e9);
    bat.soc = get_number(*obj, path, "initial_soc", bat.soc, 0.0, 1.0);
    bat.self_discharge_per_month =
        get_number(*obj, path, "self_discharge_per_month", bat.self_discharge_per_month, 0.0, 1.0);
    bat.overcharge_voltage_v =
        get_number(*obj, path, "overcharge_voltage_v", bat.overcharge_voltage_v, 0.1, 10.0);
    bat.v_empty = get_number(*obj, path, "v_empty", bat.v_empty, 0.1, 10.0);
    bat.v_full = get_number(*obj, path, "v_full", bat.v_full, 0.1, 10.0);
    bat.validate();
    return bat;
}

EnergySection parse_energy(const json& obj, const std::string& path,
                           const std::filesystem::path& base_dir) {
    check_keys(obj, path,
               {"cell", "converter", "battery", "trace", "load", "sweep", "surplus_sink",
                "max_step_s", "timeline_stride"});
    EnergySection s;
    s.cell = parse_cell(find(obj, "cell"), path + ".cell");
    s.converter = parse_converter(find(obj, "converter"), path + ".converter");
    s.battery = parse_battery(find(obj, "battery"), path + ".battery");

    const json* trace = find(obj, "trace");
    if (!trace) fail(path, "missing required key 'trace'");
    const std::string tp = path + ".trace";
    check_keys(*trace, tp, {"path", "label", "synthesize"});
    s.trace_label = get_string(*trace, tp, "label", "trace");
    const json* synth = find(*trace, "synthesize");
    if (const json* file = find(*trace, "path")) {
        if (synth) fail(tp, "give either path or synthesize, not both");
        if (!file->is_string()) fail(tp + ".path", "expected a string");
        s.trace_path = existing_file(file->get<std::string>(), tp + ".path", base_dir);
    } else if (synth) {
        const std::string sp = tp + ".synthesize";
        check_keys(*synth, sp,
                   {"mean_lux", "std_lux", "n_days", "day_window_h", "day_start_h",
                    "sample_period_s", "ramp_fraction", "seasonal_amplitude"});
        traces::SynthStats st;
        st.mean_lux = get_number(*synth, sp, "mean_lux", -1.0, 0.0, 1e6);
        if (st.mean_lux < 0.0) fail(sp, "missing required key 'mean_lux'");
        st.std_lux = get_number(*synth, sp, "std_lux", 0.0, 0.0, 1e6);
        st.n_days = get_int(*synth, sp, "n_days", 1, 1, 100000);
        st.day_window_hours = get_number(*synth, sp, "day_window_h", 12.0, 0.1, 24.0);
        st.day_start_hour = get_number(*synth, sp, "day_start_h", 8.0, 0.0, 23.9);
        st.sample_period_s = get_number(*synth, sp, "sample_period_s", 60.0, 1.0, 3600.0);
        st.ramp_fraction = get_number(*synth, sp, "ramp_fraction", 0.15, 0.0, 0.5);
        st.seasonal_amplitude = get_number(*synth, sp, "seasonal_amplitude", 0.0, 0.0, 0.95);
        s.synth = st;
    } else {
        fail(tp, "missing required key 'path' (or 'synthesize')");
    }

    if (const json* load = find(obj, "load")) {
        const std::string lp = path + ".load";
        check_keys(*load, lp,
                   {"base_power_w", "localizations_per_day", "event_energy_j",
                    "battery_voltage_v", "oversampling", "transceiver", "motion_trace",
                    "wdi_timeout_s", "motion_idle_mode"});
        s.base_power_w = get_number(*load, lp, "base_power_w", s.base_power_w, 0.0, 10.0);
        s.localizations_per_day =
            get_int(*load, lp, "localizations_per_day", 0, 0, 1000000);
        const std::string tx = get_string(*load, lp, "transceiver", "DW3000");
        if (tx != "DW3000" && tx != "DW1000")
            fail(lp + ".transceiver", "expected DW3000 or DW1000");
        const int oversampling = get_int(*load, lp, "oversampling", 1, 1, 1000);
        const double vbat = get_number(*load, lp, "battery_voltage_v", 3.7, 3.0, 4.5);
        const double default_event = power::localization_energy(
            vbat, oversampling,
            tx == "DW3000" ? power::Transceiver::DW3000 : power::Transceiver::DW1000);
        s.event_energy_j = get_number(*load, lp, "event_energy_j", default_event, 0.0, 100.0);
        if (const json* mt = find(*load, "motion_trace")) {
            if (!mt->is_string()) fail(lp + ".motion_trace", "expected a string");
            s.motion_trace_path =
                existing_file(mt->get<std::string>(), lp + ".motion_trace", base_dir);
        }
        s.wdi_timeout_s = get_number(*load, lp, "wdi_timeout_s", 5.0, 1e-3, 1e5);
        const std::string idle = get_string(*load, lp, "motion_idle_mode", "SLEEP");
        if (idle == "SLEEP")
            s.motion_idle_mode = power::MotionIdleMode::Sleep;
        else if (idle == "ACTIVE")
            s.motion_idle_mode = power::MotionIdleMode::Active;
        else
            fail(lp + ".motion_idle_mode", "expected SLEEP or ACTIVE");
    }

    if (const json* sweep = find(obj, "sweep")) {
        const std::string wp = path + ".sweep";
        check_keys(*sweep, wp, {"rates_per_month", "find_crossing", "crossing_hi"});
        if (const json* rates = find(*sweep, "rates_per_month")) {
            if (!rates->is_array() || rates->empty())
                fail(wp + ".rates_per_month", "expected a non-empty array");
            for (const auto& r : *rates) {
                if (!r.is_number() || r.get<double>() < 0.0)
                    fail(wp + ".rates_per_month", "rates must be >= 0");
                s.sweep_rates.push_back(r.get<double>() / 100.0);
            }
        }
        s.find_crossing = get_bool(*sweep, wp, "find_crossing", false);
        s.crossing_hi = get_number(*sweep, wp, "crossing_hi", 10.0, 0.01, 100.0) / 100.0;
    }

    s.surplus_sink = get_bool(obj, path, "surplus_sink", false);
    s.max_step_s = get_number(obj, path, "max_step_s", 60.0, 1e-3, 60.0);
    s.timeline_stride = get_int(obj, path, "timeline_stride", 1, 1, 1000000);
    return s;
}

ClassifySection parse_classify(const json& obj, const std::string& path,
                               const std::filesystem::path& base_dir) {
    check_keys(obj, path, {"dataset", "office", "classifier", "k", "folds", "oversampling"});
    ClassifySection s;
    s.setup = scenario::office_default();
    const json* dataset = find(obj, "dataset");
    const json* office = find(obj, "office");
    if (dataset && office) fail(path, "give either dataset or office, not both");
    if (dataset) {
        const std::string dp = path + ".dataset";
        check_keys(*dataset, dp, {"path"});
        const json* file = find(*dataset, "path");
        if (!file || !file->is_string()) fail(dp, "missing required key 'path'");
        s.dataset_path = existing_file(file->get<std::string>(), dp + ".path", base_dir);
    } else if (office) {
        const std::string op = path + ".office";
        check_keys(*office, op,
                   {"windows_per_class", "window_size", "dimension", "noise_sigma_m",
                    "nlos_bias_m", "drift_ppm_range"});
        s.synthesize_office = true;
        s.office_params.windows_per_class =
            get_int(*office, op, "windows_per_class", 34, 1, 100000);
        s.office_params.window_size = get_int(*office, op, "window_size", 15, 1, 1000);
        s.office_params.dimension = get_int(*office, op, "dimension", 3, 2, 3);
        parse_setup_noise(*office, op, s.setup);
    } else {
        fail(path, "missing required key 'dataset' (or 'office')");
    }
    const std::string classifier = get_string(obj, path, "classifier", "knn");
    if (classifier == "knn")
        s.spec.kind = classify::ClassifierKind::Knn;
    else if (classifier == "nearest_centroid")
        s.spec.kind = classify::ClassifierKind::NearestCentroid;
    else
        fail(path + ".classifier", "expected knn or nearest_centroid");
    s.spec.k = get_int(obj, path, "k", 5, 1, 1000);
    s.folds = get_int(obj, path, "folds", 10, 2, 1000);
    if (const json* rates = find(obj, "oversampling")) {
        if (!rates->is_array() || rates->empty())
            fail(path + ".oversampling", "expected a non-empty array");
        s.oversampling_rates.clear();
        for (const auto& r : *rates) {
            if (!r.is_number_integer() || r.get<int>() < 1)
                fail(path + ".oversampling", "rates must be integers >= 1");
            s.oversampling_rates.push_back(r.get<int>());
        }
    }
    return s;
}

}  // namespace

ScenarioConfig load_config(const std::filesystem::path& path,
                           std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root, "top-level", {"seed", "range", "locate", "energy", "classify"});

    const std::filesystem::path base_dir = path.parent_path();
    ScenarioConfig cfg;
    if (const json* seed = find(root, "seed")) {
        if (!seed->is_number_unsigned()) fail("seed", "expected a non-negative integer");
        cfg.seed = seed->get<std::uint64_t>();
    }
    if (seed_override) cfg.seed = *seed_override;
    if (const json* sec = find(root, "range")) cfg.range = parse_range(*sec, "range");
    if (const json* sec = find(root, "locate")) cfg.locate = parse_locate(*sec, "locate");
    if (const json* sec = find(root, "energy"))
        cfg.energy = parse_energy(*sec, "energy", base_dir);
    if (const json* sec = find(root, "classify"))
        cfg.classify = parse_classify(*sec, "classify", base_dir);
    return cfg;
}

// ---------------------------------------------------------------------------
// Command runners
// ---------------------------------------------------------------------------

namespace {

void ensure_out_dir(const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
}

ranging::ExchangeScenario build_exchange(const RangeSection& s) {
    ranging::ExchangeScenario ex;
    ex.tag_position = s.tag_position;
    ex.anchor_positions = s.anchors;
    ex.tag_clock = ranging::ClockModel::make(s.tag_drift_ppm * 1e-6, 0.0, s.tick_s);
    for (std::size_t i = 0; i < s.anchors.size(); ++i) {
        const double drift =
            s.anchor_drift_ppm.empty() ? 0.0 : s.anchor_drift_ppm[i] * 1e-6;
        ex.anchor_clocks.push_back(ranging::ClockModel::make(drift, 0.0, s.tick_s));
    }
    for (std::size_t i = 0; i < s.anchors.size(); ++i)
        ex.reply_delays_s.push_back(s.reply_delay_base_s +
                                    static_cast<double>(i) * s.reply_delay_step_s);
    ex.tag_turnaround_s = s.tag_turnaround_s;
    ex.noise_sigma_m = s.noise_sigma_m;
    ex.nlos_bias_m = s.nlos_bias_m;
    ex.max_range_m = s.max_range_m;
    ex.lost = s.lost;
    ex.validate();
    return ex;
}

}  // namespace

void cmd_range(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    if (!cfg.range) throw ConfigError("config: missing required section 'range'");
    ensure_out_dir(out_dir);
    const ranging::ExchangeScenario scenario = build_exchange(*cfg.range);
    std::mt19937_64 rng(cfg.seed);
    const auto round = ranging::run_ranging_round_detailed(scenario, rng);
    std::ostringstream csv;
    ranging::write_measurements_csv(csv, round);
    write_file_atomic(out_dir / "measurements.csv", csv.str());
}

void cmd_locate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    if (!cfg.locate) throw ConfigError("config: missing required section 'locate'");
    const LocateSection& s = *cfg.locate;
    ensure_out_dir(out_dir);
    std::mt19937_64 rng(cfg.seed);

    std::ostringstream fixes;
    fixes << "trial,true_x,true_y,true_z,fix_x,fix_y,fix_z,residual,n_anchors,error_m\n";
    std::vector<double> errors;
    std::vector<power::LoRaReport> reports;
    int no_fix = 0;
    int trial = 0;
    for (const Eigen::Vector3d& truth : s.tag_positions) {
        for (int rep = 0; rep < s.trials_per_position; ++rep, ++trial) {
            const auto fix = scenario::localize_once(s.setup, truth, s.dimension, rng);
            if (!fix) {
                ++no_fix;
                continue;
            }
            Eigen::Vector3d diff = fix->position - truth;
            if (s.dimension == 2) diff.z() = 0.0;
            const double error = diff.norm();
            errors.push_back(error);
            fixes << trial << ',' << format_full(truth.x()) << ',' << format_full(truth.y())
                  << ',' << format_full(truth.z()) << ',' << format_full(fix->position.x())
                  << ',' << format_full(fix->position.y()) << ','
                  << format_full(fix->position.z()) << ',' << format_full(fix->residual)
                  << ',' << fix->n_anchors_used << ',' << format_full(error) << '\n';
            power::LoRaReport report;
            report.tag_id = s.tag_id;
            report.position = fix->position;
            report.residual = fix->residual;
            report.time_s = static_cast<double>(trial);
            reports.push_back(report);
        }
    }
    write_file_atomic(out_dir / "fixes.csv", fixes.str());

    const scenario::ErrorStats stats = scenario::collect_error_stats(errors, no_fix);
    std::ostringstream cdf;
    cdf << "error_m,cdf\n";
    for (std::size_t i = 0; i < stats.errors_m.size(); ++i)
        cdf << format_full(stats.errors_m[i]) << ','
            << format_full(static_cast<double>(i + 1) /
                           static_cast<double>(stats.errors_m.size()))
            << '\n';
    write_file_atomic(out_dir / "error_cdf.csv", cdf.str());

    nlohmann::ordered_json summary;
    summary["dimension"] = s.dimension;
    summary["n_fixes"] = stats.errors_m.size();
    summary["no_fix_count"] = stats.no_fix_count;
    summary["mean_error_m"] = stats.mean_m;
    summary["median_error_m"] = stats.median_m;
    summary["p90_error_m"] = stats.p90_m;
    write_file_atomic(out_dir / "locate_summary.json", summary.dump(2) + "\n");
    write_file_atomic(out_dir / "lora_reports.json", power::lora_reports_json(reports));
}

void cmd_energy(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    if (!cfg.energy) throw ConfigError("config: missing required section 'energy'");
    const EnergySection& s = *cfg.energy;
    ensure_out_dir(out_dir);

    traces::IlluminanceTrace trace;
    int n_gaps = 0;
    if (s.trace_path) {
        traces::LoadResult loaded = traces::load_trace(*s.trace_path, s.trace_label);
        trace = std::move(loaded.trace);
        n_gaps = static_cast<int>(loaded.gaps.size());
    } else {
        trace = traces::synthesize_trace(*s.synth, cfg.seed, s.trace_label);
    }

    if (trace.duration_s() >= traces::kSecondsPerDay) {
        try {
            const traces::DailyEnergySummary summary =
                traces::summarize(trace, s.cell, traces::kDefaultDayWindowHours,
                                  traces::kDefaultDayStartHour, n_gaps);
            write_file_atomic(out_dir / "trace_summary.json", traces::summary_json(summary));
        } catch (const InsufficientData& e) {
            // A day-long trace can still cover no full calendar day.
            log_message(LogLevel::Info, std::string("trace summary skipped: ") + e.what());
        }
    }

    energy::LoadSchedule load;
    load.base_power_w = s.base_power_w;
    load.event_energy_j = s.event_energy_j;
    if (s.motion_trace_path) {
        const power::MotionEventTrace motion = power::load_motion_trace_csv(*s.motion_trace_path);
        power::TraceRunConfig rc;
        rc.wdi_timeout_s = s.wdi_timeout_s;
        rc.motion_idle_mode = s.motion_idle_mode;
        rc.duration_s = std::max(trace.duration_s(),
                                 motion.events.empty() ? 0.0 : motion.events.back().time_s);
        const power::PowerModeProfile profile;
        power::LocalizationEnergyBudget budget;
        budget.total_j = s.event_energy_j;
        const power::TraceRunResult run = power::run_trace(motion, rc, profile, budget);
        for (double t : run.localization_times_s)
            load.event_times_s.push_back(trace.start_s() + t);
        std::ostringstream timeline;
        power::write_timeline_csv(timeline, run.timeline);
        write_file_atomic(out_dir / "mode_timeline.csv", timeline.str());
    } else if (s.localizations_per_day > 0) {
        const double day = traces::kSecondsPerDay;
        const long first_day = static_cast<long>(std::floor(trace.start_s() / day));
        const long last_day = static_cast<long>(std::ceil(trace.end_s() / day));
        for (long d = first_day; d < last_day; ++d)
            for (int k = 0; k < s.localizations_per_day; ++k) {
                const double t =
                    (static_cast<double>(d) + (k + 0.5) / s.localizations_per_day) * day;
                if (t >= trace.start_s() && t < trace.end_s()) load.event_times_s.push_back(t);
            }
    }

    energy::SimulationOptions options;
    options.max_step_s = s.max_step_s;
    options.surplus_sink = s.surplus_sink;
    const energy::SimulationResult result =
        energy::simulate(trace, s.cell, s.converter, s.battery, load, options);

    std::ostringstream soc;
    soc << "t,soc,p_harvest,p_load,p_selfdischarge,p_curtailed\n";
    for (std::size_t i = 0; i < result.timeline.size(); ++i) {
        if (i % static_cast<std::size_t>(s.timeline_stride) != 0) continue;
        const energy::StepRecord& r = result.timeline[i];
        soc << format_full(r.t_s) << ',' << format_full(r.soc) << ','
            << format_full(r.p_harvest_w) << ',' << format_full(r.p_load_w) << ','
            << format_full(r.p_selfdischarge_w) << ',' << format_full(r.p_curtailed_w) << '\n';
    }
    write_file_atomic(out_dir / "soc_timeline.csv", soc.str());

    nlohmann::ordered_json ledger = nlohmann::ordered_json::parse(energy::ledger_json(result));
    ledger["n_localization_events"] = load.event_times_s.size();
    ledger["trace_gaps"] = n_gaps;

    if (!s.sweep_rates.empty()) {
        const auto outcomes = energy::neutrality_sweep(trace, s.cell, s.converter, s.battery,
                                                       load, s.sweep_rates, options);
        std::ostringstream sweep;
        energy::write_sweep_csv(sweep, outcomes);
        write_file_atomic(out_dir / "neutrality_sweep.csv", sweep.str());
    }
    if (s.find_crossing) {
        const double crossing = energy::find_neutrality_crossing(
            trace, s.cell, s.converter, s.battery, load, 0.0, s.crossing_hi, 0.0005, options);
        ledger["neutrality_crossing_rate_per_month"] =
            std::isnan(crossing) ? nlohmann::ordered_json() : nlohmann::ordered_json(crossing * 100.0);
    }
    write_file_atomic(out_dir / "ledger.json", ledger.dump(2) + "\n");
}

void cmd_classify(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    if (!cfg.classify) throw ConfigError("config: missing required section 'classify'");
    const ClassifySection& s = *cfg.classify;
    ensure_out_dir(out_dir);

    std::vector<classify::LabeledFix> dataset;
    if (s.dataset_path) {
        dataset = classify::load_dataset_csv(*s.dataset_path);
    } else {
        std::mt19937_64 rng(cfg.seed);
        dataset = scenario::generate_office_dataset(s.setup, s.office_params, rng);
        std::ostringstream csv;
        classify::write_dataset_csv(csv, dataset);
        write_file_atomic(out_dir / "office_dataset.csv", csv.str());
    }

    for (int rate : s.oversampling_rates) {
        const std::vector<classify::LabeledFix> data =
            rate == 1 ? dataset : classify::aggregate_dataset(dataset, rate);
        const classify::ClassificationReport report = classify::cross_validate(
            data, s.spec, s.folds, cfg.seed + static_cast<std::uint64_t>(rate));
        write_file_atomic(out_dir / ("classification_report_n" + std::to_string(rate) + ".json"),
                          classify::report_json(report));
    }
}

}  // namespace tagsim::config
