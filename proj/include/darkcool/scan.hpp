#pragma once

// Configuration, parameter scans, presets and CSV / metadata output.
//
// Config grammar (one item per line):
//     # comment
//     key = value
//     [section]          following keys are read as section.key
// Values are numbers, words, or comma-separated lists. Unknown keys are errors.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "darkcool/model.hpp"
#include "darkcool/raman.hpp"
#include "darkcool/rates.hpp"

namespace darkcool {

enum class Spacing { lin, log };

struct ScanAxis {
    std::string name;
    double start = 0.0;
    double stop = 0.0;
    int points = 2;
    Spacing spacing = Spacing::lin;

    std::vector<double> values() const;
};

/// Parameter fixed at every grid point by the cancellation condition.
enum class Condition { none, eta_a, omega_b };

struct EvolveSettings {
    double t_max = 50.0;
    int t_points = 51;
    int initial_n = 1;
};

struct McwfSettings {
    int n_ions = 1;
    int addressed_mode = 0; // 0-based
    int n_max = 3;
    double initial_nbar = 0.5;
    int trajectories = 100;
    double t_max = 100.0;
    int t_points = 21;
    double dt = 0.5;
    int max_excited = -1;
    bool second_order = true;
};

struct GeometrySettings {
    double theta_deg = 45.0;
    double wavelength_ratio = 1.0;
};

struct FanoSettings {
    int modes = 1000;
    double strength = 1.0;
    double k_min = -5.0;
    double k_max = 5.0;
    double width = 0.0; // > 0 tapers the coupling profile
};

struct EffectiveSettings {
    RamanParams raman;
    double t_max = 0.0;
    int n_max = 6;
    EliminationOrder order = EliminationOrder::full;
};

struct ScanConfig {
    SystemParams base;
    std::vector<Scheme> schemes{Scheme::robust};
    std::vector<ScanAxis> axes;
    std::vector<std::string> quantities{"n_ss"};
    Condition condition = Condition::none;
    RateMethod rate_method = RateMethod::closed_form;
    bool guard = true;             // withhold perturbative quantities when Omega_i eta_i >= 0.2 nu
    bool check_convergence = true; // steady states re-run at n_max + 5
    std::string preset;
    std::string output;
    std::string note;              // preset documentation copied to the metadata sidecar
    int threads = 1;
    std::uint64_t seed = 1;

    EvolveSettings evolve;
    McwfSettings mcwf;
    GeometrySettings geometry;
    FanoSettings fano;
    EffectiveSettings effective;

    void validate() const;
    /// Flat key = value view of every setting, in the config grammar.
    std::map<std::string, std::string> to_map() const;
};

/// Known quantity names for scans.
const std::vector<std::string>& scan_quantities();

ScanConfig parse_config(std::string_view text);
ScanConfig load_config(const std::string& path);

/// fig2, fig4, fig5, fig7 (alias fig8), fig9.
ScanConfig preset_config(std::string_view name);
const std::vector<std::string>& preset_names();

/// Applies the axis values, the cancellation condition and the omega_b_offset axis to base.
SystemParams point_params(const ScanConfig& cfg, const std::vector<double>& axis_values);

/// 12-significant-digit scientific notation.
std::string format_number(double x);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const; // -1 when absent
    double number(size_t row, std::string_view name) const;
};

struct RunResult {
    CsvTable table;
    int points = 0;
    int failed_points = 0;
    int unconverged_points = 0;
    int n_max = 0;
    std::map<std::string, double> summary; // scalar results for the sidecar
    std::vector<std::string> notes;
};

/// Grid over the axes (row-major, first axis outermost) for every scheme. Per-point
/// failures fill the error column and never abort the scan.
RunResult run_scan(const ScanConfig& cfg);

/// Subcommands: steady, rates, evolve, scan, mcwf, geometry, fano, effective.
RunResult run_command(std::string_view command, const ScanConfig& cfg);
const std::vector<std::string>& command_names();

void write_csv(const CsvTable& table, std::ostream& out);

/// JSON sidecar: config, version, truncation, convergence outcomes, summary, timestamp.
std::string metadata_json(const ScanConfig& cfg, std::string_view command, const RunResult& result,
                          const std::string& timestamp);

/// Writes path and path + ".meta.json".
void write_outputs(const ScanConfig& cfg, std::string_view command, const RunResult& result, const std::string& path);

std::string_view version();

} // namespace darkcool
