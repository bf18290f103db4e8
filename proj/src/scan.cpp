#include "darkcool/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "darkcool/error.hpp"
#include "darkcool/fano.hpp"
#include "darkcool/geometry.hpp"
#include "darkcool/liouville.hpp"
#include "darkcool/mcwf.hpp"

#ifndef DARKCOOL_VERSION
#define DARKCOOL_VERSION "0.0.0"
#endif

namespace darkcool {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGuard = 0.2;

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& value)
{
    try {
        size_t used = 0;
        const double x = std::stod(value, &used);
        if (used == value.size()) return x;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, "key '" + key + "' expects a number, got '" + value + "'");
}

int to_int(const std::string& key, const std::string& value)
{
    const double x = to_double(key, value);
    if (x != std::floor(x) || std::abs(x) > 1e9)
        throw Error(ErrorCode::InvalidArgument, "key '" + key + "' expects an integer, got '" + value + "'");
    return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw Error(ErrorCode::InvalidArgument, "key '" + key + "' expects true or false, got '" + value + "'");
}

std::string exact(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string_view spacing_name(Spacing s) { return s == Spacing::lin ? "lin" : "log"; }

std::string_view condition_name(Condition c)
{
    switch (c) {
    case Condition::none: return "none";
    case Condition::eta_a: return "eta_a";
    case Condition::omega_b: return "omega_b";
    }
    return "none";
}

Condition parse_condition(const std::string& v)
{
    if (v == "none") return Condition::none;
    if (v == "eta_a") return Condition::eta_a;
    if (v == "omega_b") return Condition::omega_b;
    throw Error(ErrorCode::InvalidArgument, "condition must be none, eta_a or omega_b");
}

RateMethod parse_rate_method(const std::string& v)
{
    if (v == "closed_form") return RateMethod::closed_form;
    if (v == "numeric_projection" || v == "projection") return RateMethod::numeric_projection;
    if (v == "spectral") return RateMethod::spectral;
    if (v == "evolve_fit") return RateMethod::evolve_fit;
    throw Error(ErrorCode::InvalidArgument, "unknown rate method '" + v + "'");
}

double* param_slot(SystemParams& p, std::string_view name)
{
    if (name == "nu") return &p.nu;
    if (name == "gamma") return &p.gamma;
    if (name == "delta") return &p.delta;
    if (name == "omega_a") return &p.omega_a;
    if (name == "omega_b") return &p.omega_b;
    if (name == "eta_a") return &p.eta_a;
    if (name == "eta_b") return &p.eta_b;
    if (name == "phi") return &p.phi;
    if (name == "eta_up") return &p.eta_up;
    if (name == "eta_down") return &p.eta_down;
    if (name == "alpha") return &p.alpha;
    return nullptr;
}

const std::vector<std::string>& param_names()
{
    static const std::vector<std::string> names = {"nu",    "gamma", "delta",  "omega_a",  "omega_b", "eta_a",
                                                   "eta_b", "phi",   "eta_up", "eta_down", "alpha"};
    return names;
}

bool is_axis_name(std::string_view name)
{
    if (name == "omega_b_offset") return true;
    const auto& names = param_names();
    return name != "alpha" && std::find(names.begin(), names.end(), name) != names.end();
}

using Setter = std::function<void(ScanConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        for (const auto& name : param_names())
            t[name] = [name](ScanConfig& c, const std::string& k, const std::string& v) {
                *param_slot(c.base, name) = to_double(k, v);
            };
        t["n_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.base.n_max = to_int(k, v); };
        t["scheme"] = [](ScanConfig& c, const std::string&, const std::string& v) {
            c.schemes.clear();
            for (const auto& s : split_list(v)) c.schemes.push_back(parse_scheme(s));
        };
        t["quantities"] = [](ScanConfig& c, const std::string&, const std::string& v) { c.quantities = split_list(v); };
        t["condition"] = [](ScanConfig& c, const std::string&, const std::string& v) { c.condition = parse_condition(v); };
        t["rate_method"] = [](ScanConfig& c, const std::string&, const std::string& v) {
            c.rate_method = parse_rate_method(v);
        };
        t["guard"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.guard = to_bool(k, v); };
        t["check_convergence"] = [](ScanConfig& c, const std::string& k, const std::string& v) {
            c.check_convergence = to_bool(k, v);
        };
        t["preset"] = [](ScanConfig& c, const std::string&, const std::string& v) { c.preset = v; };
        t["output"] = [](ScanConfig& c, const std::string&, const std::string& v) { c.output = v; };
        t["note"] = [](ScanConfig& c, const std::string&, const std::string& v) { c.note = v; };
        t["threads"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.threads = to_int(k, v); };
        t["seed"] = [](ScanConfig& c, const std::string& k, const std::string& v) {
            try {
                size_t used = 0;
                c.seed = std::stoull(v, &used);
                if (used == v.size()) return;
            } catch (const std::exception&) {
            }
            throw Error(ErrorCode::InvalidArgument, "key '" + k + "' expects an unsigned integer");
        };

        t["evolve.t_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.evolve.t_max = to_double(k, v); };
        t["evolve.t_points"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.evolve.t_points = to_int(k, v); };
        t["evolve.initial_n"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.evolve.initial_n = to_int(k, v); };

        t["mcwf.n_ions"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.n_ions = to_int(k, v); };
        t["mcwf.addressed_mode"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.addressed_mode = to_int(k, v); };
        t["mcwf.n_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.n_max = to_int(k, v); };
        t["mcwf.initial_nbar"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.initial_nbar = to_double(k, v); };
        t["mcwf.trajectories"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.trajectories = to_int(k, v); };
        t["mcwf.t_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.t_max = to_double(k, v); };
        t["mcwf.t_points"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.t_points = to_int(k, v); };
        t["mcwf.dt"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.dt = to_double(k, v); };
        t["mcwf.max_excited"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.max_excited = to_int(k, v); };
        t["mcwf.second_order"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.mcwf.second_order = to_bool(k, v); };

        t["geometry.theta_deg"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.geometry.theta_deg = to_double(k, v); };
        t["geometry.wavelength_ratio"] = [](ScanConfig& c, const std::string& k, const std::string& v) {
            c.geometry.wavelength_ratio = to_double(k, v);
        };

        t["fano.modes"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.fano.modes = to_int(k, v); };
        t["fano.strength"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.fano.strength = to_double(k, v); };
        t["fano.k_min"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.fano.k_min = to_double(k, v); };
        t["fano.k_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.fano.k_max = to_double(k, v); };
        t["fano.width"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.fano.width = to_double(k, v); };

        t["effective.omega_p"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.effective.raman.omega_p = to_double(k, v); };
        t["effective.eta_p"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.effective.raman.eta_p = to_double(k, v); };
        t["effective.delta_prime"] = [](ScanConfig& c, const std::string& k, const std::string& v) {
            c.effective.raman.delta_prime = to_double(k, v);
        };
        t["effective.t_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.effective.t_max = to_double(k, v); };
        t["effective.n_max"] = [](ScanConfig& c, const std::string& k, const std::string& v) { c.effective.n_max = to_int(k, v); };
        t["effective.order"] = [](ScanConfig& c, const std::string&, const std::string& v) {
            if (v == "first") c.effective.order = EliminationOrder::first;
            else if (v == "full") c.effective.order = EliminationOrder::full;
            else throw Error(ErrorCode::InvalidArgument, "effective.order must be first or full");
        };
        return t;
    }();
    return table;
}

// axisN.field; returns the 0-based axis index or -1 when the key is not an axis key.
int axis_key(const std::string& key, std::string& field)
{
    if (key.rfind("axis", 0) != 0) return -1;
    const auto dot = key.find('.');
    if (dot == std::string::npos) return -1;
    const std::string digits = key.substr(4, dot - 4);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) return -1;
    field = key.substr(dot + 1);
    const int n = std::stoi(digits);
    if (n < 1) return -1;
    return n - 1;
}

void apply(ScanConfig& cfg, const std::string& key, const std::string& value)
{
    std::string field;
    const int axis = axis_key(key, field);
    if (axis >= 0) {
        if (axis >= 2) throw Error(ErrorCode::AxisLimit, "at most two scan axes are supported ('" + key + "')");
        if (static_cast<int>(cfg.axes.size()) <= axis) cfg.axes.resize(axis + 1);
        ScanAxis& a = cfg.axes[axis];
        if (field == "name") a.name = value;
        else if (field == "start") a.start = to_double(key, value);
        else if (field == "stop") a.stop = to_double(key, value);
        else if (field == "points") a.points = to_int(key, value);
        else if (field == "spacing") {
            if (value == "lin") a.spacing = Spacing::lin;
            else if (value == "log") a.spacing = Spacing::log;
            else throw Error(ErrorCode::InvalidArgument, "spacing must be lin or log");
        } else
            throw Error(ErrorCode::UnknownKey, "unknown key '" + key + "'");
        return;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::UnknownKey, "unknown key '" + key + "'");
    it->second(cfg, key, value);
}

bool guard_violated(const SystemParams& p)
{
    return p.omega_a * p.eta_a >= kGuard * p.nu || std::abs(p.omega_b) * p.eta_b >= kGuard * p.nu;
}

bool is_perturbative(const std::string& q, RateMethod method)
{
    if (q == "w_closed_form" || q == "w_projection") return true;
    if (q == "a_plus" || q == "a_minus" || q == "w" || q == "n_rate")
        return method == RateMethod::closed_form || method == RateMethod::numeric_projection;
    return false;
}

std::string error_text(const std::exception& e) { return e.what(); }

std::vector<double> uniform_times(double t_max, int points)
{
    if (!(t_max > 0.0) || points < 2) throw Error(ErrorCode::RangeInvalid, "time grid needs t_max > 0 and at least two points");
    std::vector<double> t(points);
    for (int i = 0; i < points; ++i) t[i] = t_max * i / (points - 1);
    return t;
}

std::vector<std::string> param_header()
{
    std::vector<std::string> h = param_names();
    h.push_back("n_max");
    return h;
}

std::vector<std::string> param_row(const SystemParams& p)
{
    std::vector<std::string> r;
    for (const auto& name : param_names()) r.push_back(format_number(*param_slot(const_cast<SystemParams&>(p), name)));
    r.push_back(std::to_string(p.n_max));
    return r;
}

} // namespace

std::vector<double> ScanAxis::values() const
{
    std::vector<double> v(points);
    for (int i = 0; i < points; ++i) {
        const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        v[i] = spacing == Spacing::lin ? start + (stop - start) * f : start * std::pow(stop / start, f);
    }
    if (points > 1) v.back() = stop;
    return v;
}

const std::vector<std::string>& scan_quantities()
{
    static const std::vector<std::string> q = {"n_ss",          "fidelity",     "a_plus",     "a_minus", "w", "n_rate",
                                               "w_closed_form", "w_projection", "w_spectral"};
    return q;
}

void ScanConfig::validate() const
{
    if (axes.size() > 2) throw Error(ErrorCode::AxisLimit, "at most two scan axes are supported");
    std::set<std::string> seen;
    for (size_t i = 0; i < axes.size(); ++i) {
        const ScanAxis& a = axes[i];
        const std::string label = "axis" + std::to_string(i + 1);
        if (a.name.empty()) throw Error(ErrorCode::InvalidArgument, label + " has no name");
        if (!is_axis_name(a.name)) throw Error(ErrorCode::UnknownKey, label + " scans unknown parameter '" + a.name + "'");
        if (!seen.insert(a.name).second) throw Error(ErrorCode::InvalidArgument, "parameter '" + a.name + "' scanned twice");
        if (!std::isfinite(a.start) || !std::isfinite(a.stop) || a.start == a.stop)
            throw Error(ErrorCode::RangeInvalid, label + " needs a finite, non-empty range");
        if (a.points < 2) throw Error(ErrorCode::RangeInvalid, label + " needs at least two points");
        if (a.spacing == Spacing::log && !(a.start > 0.0 && a.stop > 0.0))
            throw Error(ErrorCode::RangeInvalid, label + " uses log spacing with a non-positive endpoint");
    }
    if (condition == Condition::eta_a && seen.count("eta_a"))
        throw Error(ErrorCode::InvalidArgument, "eta_a is fixed by the condition and cannot be scanned");
    if (condition == Condition::omega_b && seen.count("omega_b"))
        throw Error(ErrorCode::InvalidArgument, "omega_b is fixed by the condition and cannot be scanned");
    if (schemes.empty()) throw Error(ErrorCode::InvalidArgument, "at least one scheme is required");
    if (quantities.empty()) throw Error(ErrorCode::InvalidArgument, "at least one quantity is required");
    for (const auto& q : quantities)
        if (std::find(scan_quantities().begin(), scan_quantities().end(), q) == scan_quantities().end())
            throw Error(ErrorCode::UnknownKey, "unknown quantity '" + q + "'");
    if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be at least 1");
    if (base.n_max < 2) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 2");
    for (const auto& name : param_names())
        if (!std::isfinite(*param_slot(const_cast<SystemParams&>(base), name)))
            throw Error(ErrorCode::RangeInvalid, "parameter '" + name + "' must be finite");
    if (mcwf.trajectories < 2) throw Error(ErrorCode::InvalidArgument, "mcwf.trajectories must be at least 2");
    if (mcwf.t_points < 2 || !(mcwf.t_max > 0.0)) throw Error(ErrorCode::RangeInvalid, "mcwf time grid is invalid");
    if (evolve.t_points < 2 || !(evolve.t_max > 0.0)) throw Error(ErrorCode::RangeInvalid, "evolve time grid is invalid");
}

std::map<std::string, std::string> ScanConfig::to_map() const
{
    std::map<std::string, std::string> m;
    for (const auto& name : param_names()) m[name] = exact(*param_slot(const_cast<SystemParams&>(base), name));
    m["n_max"] = std::to_string(base.n_max);
    std::string s;
    for (Scheme sc : schemes) s += (s.empty() ? "" : ", ") + std::string(to_string(sc));
    m["scheme"] = s;
    std::string q;
    for (const auto& x : quantities) q += (q.empty() ? "" : ", ") + x;
    m["quantities"] = q;
    m["condition"] = std::string(condition_name(condition));
    m["rate_method"] = std::string(to_string(rate_method));
    m["guard"] = guard ? "true" : "false";
    m["check_convergence"] = check_convergence ? "true" : "false";
    if (!preset.empty()) m["preset"] = preset;
    if (!output.empty()) m["output"] = output;
    if (!note.empty()) m["note"] = note;
    m["threads"] = std::to_string(threads);
    m["seed"] = std::to_string(seed);
    for (size_t i = 0; i < axes.size(); ++i) {
        const std::string k = "axis" + std::to_string(i + 1) + ".";
        m[k + "name"] = axes[i].name;
        m[k + "start"] = exact(axes[i].start);
        m[k + "stop"] = exact(axes[i].stop);
        m[k + "points"] = std::to_string(axes[i].points);
        m[k + "spacing"] = std::string(spacing_name(axes[i].spacing));
    }
    m["evolve.t_max"] = exact(evolve.t_max);
    m["evolve.t_points"] = std::to_string(evolve.t_points);
    m["evolve.initial_n"] = std::to_string(evolve.initial_n);
    m["mcwf.n_ions"] = std::to_string(mcwf.n_ions);
    m["mcwf.addressed_mode"] = std::to_string(mcwf.addressed_mode);
    m["mcwf.n_max"] = std::to_string(mcwf.n_max);
    m["mcwf.initial_nbar"] = exact(mcwf.initial_nbar);
    m["mcwf.trajectories"] = std::to_string(mcwf.trajectories);
    m["mcwf.t_max"] = exact(mcwf.t_max);
    m["mcwf.t_points"] = std::to_string(mcwf.t_points);
    m["mcwf.dt"] = exact(mcwf.dt);
    m["mcwf.max_excited"] = std::to_string(mcwf.max_excited);
    m["mcwf.second_order"] = mcwf.second_order ? "true" : "false";
    m["geometry.theta_deg"] = exact(geometry.theta_deg);
    m["geometry.wavelength_ratio"] = exact(geometry.wavelength_ratio);
    m["fano.modes"] = std::to_string(fano.modes);
    m["fano.strength"] = exact(fano.strength);
    m["fano.k_min"] = exact(fano.k_min);
    m["fano.k_max"] = exact(fano.k_max);
    m["fano.width"] = exact(fano.width);
    m["effective.omega_p"] = exact(effective.raman.omega_p);
    m["effective.eta_p"] = exact(effective.raman.eta_p);
    m["effective.delta_prime"] = exact(effective.raman.delta_prime);
    m["effective.t_max"] = exact(effective.t_max);
    m["effective.n_max"] = std::to_string(effective.n_max);
    m["effective.order"] = effective.order == EliminationOrder::first ? "first" : "full";
    return m;
}

ScanConfig parse_config(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> items;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": empty key");
        items.emplace_back(section.empty() ? key : section + "." + key, value);
    }

    ScanConfig cfg;
    for (const auto& [k, v] : items)
        if (k == "preset") cfg = preset_config(v);
    for (const auto& [k, v] : items) apply(cfg, k, v);
    cfg.validate();
    return cfg;
}

ScanConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names = {"fig2", "fig4", "fig5", "fig7", "fig8", "fig9"};
    return names;
}

ScanConfig preset_config(std::string_view name)
{
    ScanConfig c;
    c.preset = std::string(name);
    c.base.nu = 1.0;
    c.base.gamma = 15.0;
    c.base.delta = 0.0;
    if (name == "fig2") {
        c.base.eta_b = 0.4;
        c.base.omega_a = 0.1;
        c.condition = Condition::omega_b;
        c.axes = {{"eta_a", 0.01, 0.1, 10, Spacing::lin}, {"omega_b_offset", -0.05, 0.05, 11, Spacing::lin}};
        c.quantities = {"n_ss"};
        c.note = "omega_b = omega_b0 (1 + omega_b_offset), omega_b0 from the cancellation condition; "
                 "axis ranges are preset defaults";
    } else if (name == "fig4") {
        c.base.omega_b = 1.3;
        c.base.eta_b = 0.1;
        c.condition = Condition::eta_a;
        c.axes = {{"omega_a", 0.1, 400.0, 25, Spacing::log}};
        c.quantities = {"w_closed_form", "w_spectral"};
        c.guard = false;
        c.note = "analytic versus full-Liouvillian cooling rate; perturbative guard disabled";
    } else if (name == "fig5") {
        c.base.omega_b = 1.3;
        c.base.eta_b = 0.1;
        c.base.n_max = 8;
        c.condition = Condition::eta_a;
        c.schemes = {Scheme::robust, Scheme::eit};
        c.axes = {{"omega_a", 0.1, 10.0, 25, Spacing::lin}};
        c.quantities = {"w_spectral"};
        c.note = "full-Liouvillian cooling rate; both schemes share eta_a from the condition and delta = 0";
    } else if (name == "fig7" || name == "fig8") {
        c.base.omega_b = 5.0;
        c.base.omega_a = 400.0;
        c.base.eta_b = 0.1;
        c.condition = Condition::eta_a;
        c.axes = {{"phi", 0.0, 2.0 * M_PI, 25, Spacing::lin}};
        c.quantities = {"n_ss", "w_spectral"};
        c.guard = false;
        c.note = "omega_a = 400 nu violates the perturbative guard; full-Liouvillian n_ss and W are reported";
    } else if (name == "fig9") {
        c.base.omega_b = 1.0;
        c.base.omega_a = 2.3;
        c.base.eta_b = 0.1;
        c.base.eta_a = 0.025;
        c.mcwf.n_ions = 3;
        c.mcwf.addressed_mode = 1;
        c.mcwf.n_max = 3;
        c.mcwf.initial_nbar = 1.0;
        c.mcwf.trajectories = 80;
        c.mcwf.t_max = 600.0;
        c.mcwf.t_points = 31;
        c.mcwf.dt = 1.0;
        c.mcwf.max_excited = 1;
        c.seed = 9;
        c.note = "three ions, middle-frequency mode addressed; at most one ion excited; trajectory count "
                 "and truncation chosen for the artifact";
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown preset '" + std::string(name) + "'");
    }
    return c;
}

SystemParams point_params(const ScanConfig& cfg, const std::vector<double>& axis_values)
{
    SystemParams p = cfg.base;
    double offset = 0.0;
    for (size_t i = 0; i < axis_values.size() && i < cfg.axes.size(); ++i) {
        if (cfg.axes[i].name == "omega_b_offset") offset = axis_values[i];
        else *param_slot(p, cfg.axes[i].name) = axis_values[i];
    }
    if (cfg.condition == Condition::eta_a) p.eta_a = eta_a_for_condition(p.nu, p.omega_b, p.eta_b);
    if (cfg.condition == Condition::omega_b) p.omega_b = omega_b_for_condition(p.nu, p.eta_a, p.eta_b);
    p.omega_b *= 1.0 + offset;
    return p;
}

std::string format_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.11e", x);
    return buf;
}

int CsvTable::column(std::string_view name) const
{
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

double CsvTable::number(size_t row, std::string_view name) const
{
    const int c = column(name);
    if (c < 0) throw Error(ErrorCode::InvalidArgument, "no column '" + std::string(name) + "'");
    const std::string& s = rows.at(row).at(c);
    if (s.empty() || s == "nan") return kNaN;
    return std::stod(s);
}

RunResult run_scan(const ScanConfig& cfg)
{
    cfg.validate();
    struct Point {
        Scheme scheme;
        std::vector<double> values;
    };
    std::vector<Point> points;
    std::vector<std::vector<double>> grids;
    for (const auto& a : cfg.axes) grids.push_back(a.values());
    for (Scheme s : cfg.schemes) {
        std::vector<size_t> idx(grids.size(), 0);
        while (true) {
            Point pt{s, {}};
            for (size_t k = 0; k < grids.size(); ++k) pt.values.push_back(grids[k][idx[k]]);
            points.push_back(pt);
            int k = static_cast<int>(grids.size()) - 1;
            while (k >= 0 && ++idx[k] == grids[k].size()) idx[k--] = 0;
            if (k < 0) break;
        }
    }

    const bool needs_steady = std::any_of(cfg.quantities.begin(), cfg.quantities.end(),
                                          [](const std::string& q) { return q == "n_ss" || q == "fidelity"; });
    const bool condition_column = cfg.condition != Condition::none;
    const std::string condition_param(condition_name(cfg.condition));

    CsvTable table;
    table.header.push_back("scheme");
    for (const auto& a : cfg.axes) table.header.push_back(a.name);
    if (condition_column) table.header.push_back(condition_param);
    for (const auto& q : cfg.quantities) table.header.push_back(q);
    if (needs_steady) table.header.push_back("converged");
    table.header.push_back("error");

    struct Outcome {
        std::vector<std::string> row;
        bool failed = false;
        bool unconverged = false;
    };
    std::vector<Outcome> outcomes(points.size());

    auto evaluate = [&](size_t k) {
        const Point& pt = points[k];
        Outcome out;
        std::vector<std::string> errors;
        out.row.push_back(std::string(to_string(pt.scheme)));
        for (double v : pt.values) out.row.push_back(format_number(v));
        SystemParams p;
        try {
            p = point_params(cfg, pt.values);
            p.validate();
        } catch (const std::exception& e) {
            if (condition_column) out.row.push_back("nan");
            for (size_t i = 0; i < cfg.quantities.size(); ++i) out.row.push_back("nan");
            if (needs_steady) out.row.push_back("");
            out.row.push_back(error_text(e));
            out.failed = true;
            outcomes[k] = out;
            return;
        }
        if (condition_column) out.row.push_back(format_number(*param_slot(p, condition_param)));

        SteadyStateResult ss;
        bool steady_ok = false;
        if (needs_steady) {
            try {
                SteadyStateOptions opts;
                opts.check_convergence = cfg.check_convergence;
                ss = solve_steady_state(p, pt.scheme, opts);
                steady_ok = true;
            } catch (const std::exception& e) {
                errors.push_back(error_text(e));
            }
        }

        std::map<RateMethod, RateCoefficients> rates;
        std::map<RateMethod, std::string> rate_errors;
        auto rate = [&](RateMethod m) -> const RateCoefficients* {
            if (rates.count(m)) return &rates[m];
            if (rate_errors.count(m)) return nullptr;
            try {
                switch (m) {
                case RateMethod::closed_form:
                    if (pt.scheme != Scheme::robust)
                        throw Error(ErrorCode::InvalidArgument, "closed forms describe the robust scheme only");
                    rates[m] = closed_form_rates(p);
                    break;
                case RateMethod::numeric_projection: rates[m] = project_rate_equation(p, pt.scheme); break;
                case RateMethod::spectral: rates[m] = numeric_rate_spectral(p, pt.scheme); break;
                case RateMethod::evolve_fit: rates[m] = numeric_rate_evolve(p, pt.scheme); break;
                }
                return &rates[m];
            } catch (const std::exception& e) {
                rate_errors[m] = error_text(e);
                errors.push_back(rate_errors[m]);
                return nullptr;
            }
        };

        const bool guarded = cfg.guard && guard_violated(p);
        bool guard_noted = false;
        int failures = 0;
        for (const auto& q : cfg.quantities) {
            double v = kNaN;
            if (guarded && is_perturbative(q, cfg.rate_method)) {
                if (!guard_noted) errors.push_back("guard: Omega_i eta_i >= 0.2 nu, perturbative quantities withheld");
                guard_noted = true;
            } else if (q == "n_ss" || q == "fidelity") {
                if (steady_ok) v = q == "n_ss" ? ss.mean_n : ss.fidelity_target;
            } else if (q == "w_closed_form" || q == "w_projection" || q == "w_spectral") {
                const RateMethod m = q == "w_closed_form"  ? RateMethod::closed_form
                                     : q == "w_projection" ? RateMethod::numeric_projection
                                                           : RateMethod::spectral;
                if (const auto* r = rate(m)) v = r->w;
            } else if (const auto* r = rate(cfg.rate_method)) {
                const bool has_a = cfg.rate_method == RateMethod::closed_form ||
                                   cfg.rate_method == RateMethod::numeric_projection;
                if (q == "w") v = r->w;
                else if (q == "n_rate") v = r->n_ss;
                else if (has_a) v = q == "a_plus" ? r->a_plus : r->a_minus;
            }
            if (std::isnan(v)) ++failures;
            out.row.push_back(format_number(v));
        }
        if (needs_steady) {
            out.row.push_back(steady_ok ? (ss.converged ? "1" : "0") : "");
            out.unconverged = steady_ok && !ss.converged;
        }
        std::string joined;
        for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
        out.row.push_back(joined);
        out.failed = failures == static_cast<int>(cfg.quantities.size());
        outcomes[k] = out;
    };

    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t k = next++; k < points.size(); k = next++) evaluate(k);
    };
    const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(points.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    RunResult result;
    result.n_max = cfg.base.n_max;
    result.points = static_cast<int>(points.size());
    for (auto& o : outcomes) {
        table.rows.push_back(std::move(o.row));
        result.failed_points += o.failed;
        result.unconverged_points += o.unconverged;
    }
    result.table = std::move(table);
    if (!cfg.note.empty()) result.notes.push_back(cfg.note);
    return result;
}

namespace {

RunResult single_row(CsvTable table)
{
    RunResult r;
    r.points = static_cast<int>(table.rows.size());
    r.table = std::move(table);
    return r;
}

RunResult run_steady(const ScanConfig& cfg)
{
    const SystemParams p = point_params(cfg, {});
    CsvTable t;
    t.header = param_header();
    for (const char* h : {"scheme", "n_ss", "fidelity", "relative_residual", "converged", "n_ss_check"}) t.header.push_back(h);
    RunResult r;
    r.n_max = p.n_max;
    for (Scheme s : cfg.schemes) {
        SteadyStateOptions opts;
        opts.check_convergence = cfg.check_convergence;
        const SteadyStateResult ss = solve_steady_state(p, s, opts);
        auto row = param_row(p);
        row.push_back(std::string(to_string(s)));
        row.push_back(format_number(ss.mean_n));
        row.push_back(format_number(ss.fidelity_target));
        row.push_back(format_number(ss.relative_residual));
        row.push_back(ss.convergence_checked ? (ss.converged ? "1" : "0") : "");
        row.push_back(ss.convergence_checked ? format_number(ss.mean_n_check) : "nan");
        t.rows.push_back(row);
        r.unconverged_points += ss.convergence_checked && !ss.converged;
    }
    r.points = static_cast<int>(t.rows.size());
    r.table = std::move(t);
    return r;
}

RunResult run_rates(const ScanConfig& cfg)
{
    const SystemParams p = point_params(cfg, {});
    const Scheme scheme = cfg.schemes.front();
    CsvTable t;
    t.header = {"method", "a_plus", "a_minus", "w", "n_ss", "error"};
    RunResult r;
    for (RateMethod m : {RateMethod::closed_form, RateMethod::numeric_projection, RateMethod::spectral}) {
        std::vector<std::string> row = {std::string(to_string(m))};
        try {
            RateCoefficients c;
            if (m == RateMethod::closed_form) {
                if (scheme != Scheme::robust)
                    throw Error(ErrorCode::InvalidArgument, "closed forms describe the robust scheme only");
                c = closed_form_rates(p);
            } else if (m == RateMethod::numeric_projection) {
                c = project_rate_equation(p, scheme);
            } else {
                c = numeric_rate_spectral(p, scheme);
            }
            const bool has_a = m != RateMethod::spectral;
            row.push_back(has_a ? format_number(c.a_plus) : "nan");
            row.push_back(has_a ? format_number(c.a_minus) : "nan");
            row.push_back(format_number(c.w));
            row.push_back(has_a ? format_number(c.n_ss) : "nan");
            row.push_back("");
        } catch (const std::exception& e) {
            row.insert(row.end(), {"nan", "nan", "nan", "nan", error_text(e)});
            ++r.failed_points;
        }
        t.rows.push_back(row);
    }
    if (cfg.guard && guard_violated(p)) r.notes.push_back("Omega_i eta_i >= 0.2 nu: perturbative rates outside their validity");
    r.points = static_cast<int>(t.rows.size());
    r.table = std::move(t);
    return r;
}

RunResult run_evolve(const ScanConfig& cfg)
{
    const SystemParams p = point_params(cfg, {});
    const SuperOp L = build_liouvillian(p, cfg.schemes.front());
    if (cfg.evolve.initial_n < 0 || cfg.evolve.initial_n > p.n_max)
        throw Error(ErrorCode::InvalidArgument, "evolve.initial_n must lie in [0, n_max]");
    const auto times = uniform_times(cfg.evolve.t_max, cfg.evolve.t_points);
    const EvolutionRecord rec = evolve(L.total, L.space, product_state(L.space, Level::minus, cfg.evolve.initial_n), times);
    CsvTable t;
    t.header = {"t", "mean_n", "p_minus", "p_plus", "p_excited", "trace"};
    for (size_t k = 0; k < rec.times.size(); ++k)
        t.rows.push_back({format_number(rec.times[k]), format_number(rec.mean_n[k]), format_number(rec.populations[k](0)),
                          format_number(rec.populations[k](1)), format_number(rec.populations[k](2)),
                          format_number(rec.trace[k])});
    RunResult r = single_row(std::move(t));
    r.n_max = p.n_max;
    return r;
}

RunResult run_mcwf(const ScanConfig& cfg)
{
    const McwfSettings& s = cfg.mcwf;
    ChainConfig chain = make_chain(s.n_ions, s.addressed_mode, cfg.base, s.n_max, s.initial_nbar);
    chain.scheme = cfg.schemes.front();
    chain.max_excited = s.max_excited;
    chain.second_order = s.second_order;
    const ChainModel model = build_chain(chain);
    TrajectoryOptions opts;
    opts.dt = s.dt;
    const auto times = uniform_times(s.t_max, s.t_points);
    const auto records = run_ensemble(model, s.trajectories, cfg.seed, times, cfg.threads, opts);
    const EnsembleAverage avg = ensemble_average(records);

    CsvTable t;
    t.header = {"t", "mode", "frequency", "mean_n", "std_error"};
    for (size_t k = 0; k < times.size(); ++k)
        for (int m = 0; m < s.n_ions; ++m)
            t.rows.push_back({format_number(times[k]), std::to_string(m), format_number(model.mode_frequencies(m)),
                              format_number(avg.mean_n(k, m)), format_number(avg.std_error(k, m))});
    RunResult r = single_row(std::move(t));
    r.n_max = s.n_max;
    double jumps = 0.0, halvings = 0.0;
    bool monotone = true;
    for (const auto& rec : records) {
        jumps += static_cast<double>(rec.jumps.size());
        halvings += rec.step_halvings;
        monotone = monotone && rec.norm_monotone;
    }
    r.summary["trajectories"] = s.trajectories;
    r.summary["dimension"] = static_cast<double>(model.dim);
    r.summary["jumps"] = jumps;
    r.summary["step_halvings"] = halvings;
    r.summary["norm_monotone"] = monotone ? 1.0 : 0.0;
    if (!cfg.note.empty()) r.notes.push_back(cfg.note);
    return r;
}

RunResult run_geometry(const ScanConfig& cfg)
{
    const double theta = rad(cfg.geometry.theta_deg);
    const double r_ratio = cfg.geometry.wavelength_ratio;
    const SystemParams& p = cfg.base;
    CsvTable t;
    t.header = {"theta_deg", "ratio", "tilt_deg", "theta_prime_deg", "multiaxial_ratio", "beyond_b_axis", "error"};
    std::vector<std::string> errors;
    auto attempt = [&](auto f) -> double {
        try {
            return f();
        } catch (const std::exception& e) {
            errors.push_back(error_text(e));
            return kNaN;
        }
    };
    const double ratio = attempt([&] { return ratio_at_angle(theta, r_ratio); });
    const double tilt = attempt([&] { return deg(tilt_angle(p.omega_b, p.nu, r_ratio)); });
    OptimalAxis axis{kNaN, false};
    attempt([&] {
        axis = optimal_axis(theta, p.omega_b, p.nu, r_ratio);
        return 0.0;
    });
    const double multi = std::isnan(axis.theta_prime) ? kNaN
                                                       : attempt([&] { return multiaxial_ratio(theta, axis.theta_prime, r_ratio); });
    std::string joined;
    for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
    t.rows.push_back({format_number(cfg.geometry.theta_deg), format_number(ratio), format_number(tilt),
                      format_number(std::isnan(axis.theta_prime) ? kNaN : deg(axis.theta_prime)), format_number(multi),
                      std::isnan(axis.theta_prime) ? "" : (axis.beyond_b_axis ? "1" : "0"), joined});
    RunResult r = single_row(std::move(t));
    r.failed_points = errors.size() >= 3 ? 1 : 0;
    return r;
}

RunResult run_fano(const ScanConfig& cfg)
{
    const FanoSettings& f = cfg.fano;
    const SystemParams& p = cfg.base;
    const ContinuumModel model = f.width > 0.0 ? tapered_continuum(p.omega_a, p.omega_b, f.modes, f.width, f.strength, f.k_min, f.k_max)
                                               : flat_continuum(p.omega_a, p.omega_b, f.modes, f.strength, f.k_min, f.k_max);
    const ContinuumSpectrum spec = diagonalize_continuum(model);
    CsvTable t;
    t.header = {"energy", "overlap_e", "overlap_plus", "ratio", "ratio_predicted"};
    for (Eigen::Index i = 0; i < spec.energies.size(); ++i) {
        const double e = spec.energies(i);
        t.rows.push_back({format_number(e), format_number(spec.overlap_e(i)), format_number(spec.overlap_plus(i)),
                          format_number(spec.overlap_e(i) / spec.overlap_plus(i)),
                          format_number(std::sqrt(2.0) / p.omega_a * (e - p.omega_b))});
    }
    RunResult r = single_row(std::move(t));
    r.summary["grid_spacing"] = grid_spacing(model);
    try {
        const double k0 = fano_zero(spec);
        r.summary["fano_zero"] = k0;
        r.summary["fano_zero_error"] = k0 - p.omega_b;
    } catch (const Error& e) {
        r.notes.push_back(e.what());
    }
    return r;
}

RunResult run_effective(const ScanConfig& cfg)
{
    const EffectiveSettings& s = cfg.effective;
    const EffectiveCoupling c = effective_params(s.raman);
    const EffectiveCoefficients k = effective_coefficients(s.raman);
    const EliminationCheck check = validate_elimination(s.raman, s.t_max, s.n_max, s.order);
    CsvTable t;
    t.header = {"omega_p", "eta_p", "delta_prime", "omega_b", "eta_b", "eta_ratio", "stark", "q_sigma_y", "p_sigma_z",
                "max_deviation", "t_max"};
    t.rows.push_back({format_number(s.raman.omega_p), format_number(s.raman.eta_p), format_number(s.raman.delta_prime),
                      format_number(c.omega_b), format_number(c.eta_b),
                      format_number(s.raman.eta_p != 0.0 ? c.eta_b / s.raman.eta_p : kNaN), format_number(k.stark),
                      format_number(k.q_sigma_y), format_number(k.p_sigma_z), format_number(check.max_deviation),
                      format_number(check.t_max)});
    RunResult r = single_row(std::move(t));
    r.n_max = s.n_max;
    return r;
}

} // namespace

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names = {"steady", "rates", "evolve", "scan", "mcwf", "geometry", "fano", "effective"};
    return names;
}

RunResult run_command(std::string_view command, const ScanConfig& cfg)
{
    cfg.validate();
    if (command == "scan") return cfg.preset == "fig9" ? run_mcwf(cfg) : run_scan(cfg);
    if (command == "steady") return run_steady(cfg);
    if (command == "rates") return run_rates(cfg);
    if (command == "evolve") return run_evolve(cfg);
    if (command == "mcwf") return run_mcwf(cfg);
    if (command == "geometry") return run_geometry(cfg);
    if (command == "fano") return run_fano(cfg);
    if (command == "effective") return run_effective(cfg);
    throw Error(ErrorCode::InvalidArgument, "unknown command '" + std::string(command) + "'");
}

void write_csv(const CsvTable& table, std::ostream& out)
{
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    };
    auto line = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << field(cells[i]);
        out << '\n';
    };
    line(table.header);
    for (const auto& row : table.rows) line(row);
}

std::string metadata_json(const ScanConfig& cfg, std::string_view command, const RunResult& result,
                          const std::string& timestamp)
{
    nlohmann::json j;
    j["command"] = std::string(command);
    j["version"] = std::string(version());
    j["config"] = cfg.to_map();
    j["columns"] = result.table.header;
    j["truncation"] = {{"n_max", result.n_max}, {"convergence_check", cfg.check_convergence},
                       {"convergence_extra_levels", 5}, {"convergence_tolerance", 0.01}};
    j["points"] = {{"total", result.points}, {"failed", result.failed_points}, {"unconverged", result.unconverged_points}};
    j["summary"] = result.summary;
    j["notes"] = result.notes;
    j["timestamp"] = timestamp;
    return j.dump(2) + "\n";
}

void write_outputs(const ScanConfig& cfg, std::string_view command, const RunResult& result, const std::string& path)
{
    std::ofstream csv(path);
    if (!csv) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    write_csv(result.table, csv);
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::ofstream meta(path + ".meta.json");
    if (!meta) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + ".meta.json'");
    meta << metadata_json(cfg, command, result, stamp);
}

std::string_view version() { return DARKCOOL_VERSION; }

} // namespace darkcool
