#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "darkcool/error.hpp"
#include "darkcool/scan.hpp"

using namespace darkcool;

namespace {

ErrorCode code_of(std::string_view text)
{
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a config error");
    return ErrorCode::InvalidArgument;
}

std::string csv_text(const CsvTable& t)
{
    std::ostringstream out;
    write_csv(t, out);
    return out.str();
}

} // namespace

TEST_CASE("minimal config applies defaults")
{
    const ScanConfig c = parse_config("nu = 1\ngamma = 15\n");
    const SystemParams d;
    CHECK(c.base.gamma == 15.0);
    CHECK(c.base.omega_a == d.omega_a);
    CHECK(c.base.n_max == d.n_max);
    CHECK(c.axes.empty());
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("grammar: comments, sections and lists")
{
    const ScanConfig c = parse_config(R"(
# comment line
omega_a = 0.4   # trailing comment
scheme = robust, eit
quantities = n_ss, w_closed_form
[mcwf]
n_ions = 2
[axis1]
name = omega_b
start = 0.5
stop = 2
points = 4
spacing = log
)");
    CHECK(c.base.omega_a == 0.4);
    CHECK(c.schemes.size() == 2);
    CHECK(c.quantities == std::vector<std::string>{"n_ss", "w_closed_form"});
    CHECK(c.mcwf.n_ions == 2);
    REQUIRE(c.axes.size() == 1);
    const std::vector<double> v = c.axes[0].values();
    CHECK(v.front() == 0.5);
    CHECK(v.back() == 2.0);
    CHECK(v[1] / v[0] == doctest::Approx(v[2] / v[1]));
}

TEST_CASE("config errors")
{
    CHECK(code_of("omega_q = 1") == ErrorCode::UnknownKey);
    CHECK(code_of("axis3.name = phi") == ErrorCode::AxisLimit);
    CHECK(code_of("axis1.name = phi\naxis1.start = 0\naxis1.stop = 1\naxis1.points = 1") == ErrorCode::RangeInvalid);
    CHECK(code_of("axis1.name = phi\naxis1.start = 1\naxis1.stop = 1") == ErrorCode::RangeInvalid);
    CHECK(code_of("axis1.name = phi\naxis1.start = 0\naxis1.stop = 1\naxis1.spacing = log") == ErrorCode::RangeInvalid);
    CHECK(code_of("axis1.name = omega_q\naxis1.start = 0\naxis1.stop = 1") == ErrorCode::UnknownKey);
    CHECK(code_of("quantities = n_ss, speed") == ErrorCode::UnknownKey);
    CHECK_THROWS_AS(parse_config("gamma = fast"), Error);
    CHECK_THROWS_AS(preset_config("fig99"), Error);
}

TEST_CASE("fig4 preset is fully populated")
{
    const ScanConfig c = parse_config("preset = fig4");
    CHECK(c.base.gamma == 15.0);
    CHECK(c.base.omega_b == 1.3);
    CHECK(c.base.eta_b == 0.1);
    CHECK(c.condition == Condition::eta_a);
    REQUIRE(c.axes.size() == 1);
    CHECK(c.axes[0].name == "omega_a");
    CHECK(c.axes[0].spacing == Spacing::log);
    CHECK(!c.quantities.empty());
    CHECK_NOTHROW(c.validate());

    // Later keys override the preset.
    const ScanConfig o = parse_config("gamma = 5\npreset = fig4");
    CHECK(o.base.gamma == 5.0);
    for (const auto& name : preset_names()) CHECK_NOTHROW(preset_config(name).validate());
}

TEST_CASE("config round-trips through its key map")
{
    for (const auto& name : preset_names()) {
        const ScanConfig c = preset_config(name);
        std::string text;
        for (const auto& [k, v] : c.to_map()) text += k + " = " + v + "\n";
        const ScanConfig back = parse_config(text);
        CHECK(back.to_map() == c.to_map());
    }
}

TEST_CASE("condition and offset axis fix the point parameters")
{
    ScanConfig c = parse_config("omega_b = 1\neta_b = 0.4\ncondition = eta_a\n");
    CHECK(point_params(c, {}).eta_a == doctest::Approx(0.1));
    c = parse_config("eta_a = 0.1\neta_b = 0.4\ncondition = omega_b\naxis1.name = omega_b_offset\n"
                     "axis1.start = -0.1\naxis1.stop = 0.1\naxis1.points = 3");
    CHECK(point_params(c, {0.0}).omega_b == doctest::Approx(1.0));
    CHECK(point_params(c, {0.1}).omega_b == doctest::Approx(1.1));
}

TEST_CASE("scan table layout and determinism")
{
    const std::string text = "omega_b = 1.3\neta_b = 0.1\ncondition = eta_a\nscheme = robust, eit\n"
                             "quantities = w_closed_form, a_plus\n"
                             "axis1.name = omega_a\naxis1.start = 0.1\naxis1.stop = 0.5\naxis1.points = 3\n"
                             "axis2.name = delta\naxis2.start = -0.2\naxis2.stop = 0.2\naxis2.points = 2\n";
    ScanConfig c = parse_config(text);
    const RunResult a = run_scan(c);
    CHECK(a.table.header ==
          std::vector<std::string>{"scheme", "omega_a", "delta", "eta_a", "w_closed_form", "a_plus", "error"});
    REQUIRE(a.table.rows.size() == 12);
    CHECK(a.points == 12);
    // Row-major: the second axis varies fastest.
    CHECK(a.table.number(0, "delta") == doctest::Approx(-0.2));
    CHECK(a.table.number(1, "delta") == doctest::Approx(0.2));
    CHECK(a.table.number(2, "omega_a") == doctest::Approx(0.3));
    CHECK(a.table.rows[0][0] == "robust");
    CHECK(a.table.rows[6][0] == "eit");
    for (size_t r = 0; r < 6; ++r) CHECK(std::abs(a.table.number(r, "a_plus")) < 1e-12);
    // Closed forms exist for the robust scheme only; the failure is recorded, not thrown.
    CHECK(std::isnan(a.table.number(6, "w_closed_form")));
    CHECK(!a.table.rows[6].back().empty());
    CHECK(a.failed_points == 6);

    c.threads = 3;
    CHECK(csv_text(run_scan(c).table) == csv_text(a.table));
}

TEST_CASE("steady-state scans report convergence")
{
    ScanConfig c = parse_config("omega_b = 1\neta_b = 0.1\ncondition = eta_a\nn_max = 6\nquantities = n_ss, fidelity\n"
                                "axis1.name = omega_a\naxis1.start = 1\naxis1.stop = 2\naxis1.points = 2\n");
    const RunResult r = run_scan(c);
    CHECK(r.table.column("converged") >= 0);
    CHECK(r.table.rows[0][static_cast<size_t>(r.table.column("converged"))] == "1");
    CHECK(r.table.number(0, "fidelity") > 0.99);
    CHECK(r.unconverged_points == 0);
}

TEST_CASE("the perturbative guard withholds rates")
{
    const ScanConfig c = parse_config("omega_a = 10\neta_a = 0.05\nquantities = w_closed_form\n");
    const RunResult r = run_scan(c);
    CHECK(std::isnan(r.table.number(0, "w_closed_form")));
    CHECK(r.table.rows[0].back().find("guard") != std::string::npos);
}

TEST_CASE("invalid points become error rows")
{
    const ScanConfig c = parse_config("quantities = w_closed_form\naxis1.name = gamma\naxis1.start = -1\n"
                                      "axis1.stop = 1\naxis1.points = 2\n");
    const RunResult r = run_scan(c);
    REQUIRE(r.table.rows.size() == 2);
    CHECK(r.table.rows[0].back().find("InvalidArgument") != std::string::npos);
    CHECK(r.failed_points >= 1);
}

TEST_CASE("csv formatting")
{
    CHECK(format_number(0.1) == "1.00000000000e-01");
    CHECK(format_number(NAN) == "nan");
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{"x,y", "say \"hi\""}};
    CHECK(csv_text(t) == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
}

TEST_CASE("metadata sidecar")
{
    const ScanConfig c = parse_config("quantities = w_closed_form\n");
    const RunResult r = run_scan(c);
    const auto j = nlohmann::json::parse(metadata_json(c, "scan", r, "2026-01-01T00:00:00Z"));
    CHECK(j["command"] == "scan");
    CHECK(j["version"] == std::string(version()));
    CHECK(j["config"]["gamma"] == c.to_map().at("gamma"));
    CHECK(j["points"]["total"] == 1);
    CHECK(j["truncation"]["n_max"] == c.base.n_max);
    CHECK(j["timestamp"] == "2026-01-01T00:00:00Z");
}

TEST_CASE("subcommands")
{
    ScanConfig c = parse_config("omega_b = 1\neta_b = 0.4\ncondition = eta_a\nomega_a = 0.3\n");
    const RunResult rates = run_command("rates", c);
    CHECK(rates.table.rows.size() == 3);
    CHECK(rates.table.number(0, "w") == doctest::Approx(rates.table.number(1, "w")).epsilon(1e-6));

    const RunResult geo = run_command("geometry", parse_config("geometry.theta_deg = 45\n"));
    CHECK(geo.table.number(0, "ratio") == doctest::Approx(2.0 * std::sqrt(2.0)));

    const RunResult fano = run_command("fano", parse_config("omega_b = 0.7\nomega_a = 1\nfano.modes = 600\n"));
    CHECK(std::abs(fano.summary.at("fano_zero") - 0.7) < fano.summary.at("grid_spacing"));

    CHECK_THROWS_AS(run_command("bake", c), Error);
}
