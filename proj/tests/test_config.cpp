#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qdsq/cli.hpp"
#include "qdsq/config.hpp"
#include "qdsq/errors.hpp"
#include "qdsq/table.hpp"

using namespace qdsq;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    fs::path d = fs::temp_directory_path() / "qdsq_tests";
    fs::create_directories(d);
    return d;
}

int config_error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const config_error& e) {
        return e.line;
    }
    return -1;
}

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "qdsq");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("empty model section keeps the operating-point defaults") {
    const RunSpec r = parse_config("[model]\n");
    const ModelParams& m = r.model();
    CHECK(m.gamma_c == 2e10);
    CHECK(m.gamma == 2e11);
    CHECK(m.gamma_nr == 2e10);
    CHECK(m.gamma_nl == 3e12);
    CHECK(m.wavelength == 0.92e-6);
    CHECK(m.dipole == doctest::Approx(phys::e_charge * 0.5e-9));
    CHECK_FALSE(m.inj_rate);
    CHECK_FALSE(m.inj_power);
    CHECK(r.ensemble().n_bins == 25);
    CHECK(r.ensemble().inhomogeneous_fwhm == doctest::Approx(10e-3));
}

TEST_CASE("units are converted to base units") {
    const RunSpec r = parse_config(
        "[model]\n"
        "gamma_c = 3e10 /s\n"
        "gamma = 0.2 /ps\n"
        "wavelength = 920 nm\n"
        "dipole = 0.5 e nm\n"
        "inj_power = 4 uW\n"
        "pump = 1.5e12 1/s\n"
        "[ensemble]\n"
        "fwhm = 10 meV\n"
        "qd_density = 2e10 /cm^2\n"
        "[integration]\n"
        "t_max = 20 ns\n");
    CHECK(r.model().gamma_c == 3e10);
    CHECK(r.model().gamma == doctest::Approx(2e11));
    CHECK(r.model().wavelength == doctest::Approx(0.92e-6));
    CHECK(r.model().dipole == doctest::Approx(phys::e_charge * 0.5e-9));
    CHECK(*r.model().inj_power == doctest::Approx(4e-6));
    CHECK(r.ensemble().inhomogeneous_fwhm == doctest::Approx(0.01));
    CHECK(r.ensemble().qd_density == doctest::Approx(2e14));
    CHECK(r.integration().t_max == doctest::Approx(20e-9));
}

TEST_CASE("config errors carry line numbers") {
    CHECK_THROWS_AS(parse_config("[model]\ngamma_c = -1 /s\n"), invalid_parameter);
    CHECK(config_error_line("[model]\n\ngamma_c = 2e10\n") == 3);
    CHECK(config_error_line("[model]\ngamma_c = 2e10 m\n") == 2);
    CHECK(config_error_line("[model]\ncolour = red\n") == 2);
    CHECK(config_error_line("[model]\n[lasers]\n") == 2);
    CHECK(config_error_line("[model]\ngamma = 1 /s\ngamma = 2 /s\n") == 3);
    CHECK(config_error_line("[model]\ninj_rate = 2e13 /s\ninj_power = 4 uW\n") == 3);
    CHECK(config_error_line("[model]\npump 1e12 /s\n") == 2);
    CHECK(config_error_line("[sweep]\nvalues = 1 /s, 2 /s\nstart = 1 /s\n") > 0);
    CHECK(config_error_line("[model]\ngamma_c = 2e10 /s\n") == -1);
}

TEST_CASE("sweep grids") {
    const RunSpec lin = parse_config("[sweep]\nparameter = pump\nstart = 1e11 /s\nstop = 5e11 /s\npoints = 5\n");
    REQUIRE(lin.sweep.grid.size() == 5);
    CHECK(lin.sweep.grid[2] == doctest::Approx(3e11));
    const RunSpec lg =
        parse_config("[sweep]\nparameter = fwhm\nstart = 1 MHz\nstop = 10 GHz\npoints = 5\nspacing = log\n");
    REQUIRE(lg.sweep.grid.size() == 5);
    CHECK(lg.sweep.grid[1] == doctest::Approx(1e7));
    CHECK(lg.sweep.grid[4] == doctest::Approx(1e10));
    CHECK(lg.sweep.jitter.has_value());
    const RunSpec vals = parse_config("[sweep]\nparameter = inj_power\nvalues = 0 uW, 2 uW, 4 uW\n");
    REQUIRE(vals.sweep.grid.size() == 3);
    CHECK(vals.sweep.grid[2] == doctest::Approx(4e-6));
}

TEST_CASE("config round trip") {
    const RunSpec r = parse_config(
        "[model]\n"
        "gamma_c = 3e10 /s\n"
        "inj_rate = 20 /ps\n"
        "pump_correlation_decay = true\n"
        "[ensemble]\n"
        "n_bins = 7\n"
        "center_energy = 1.35 eV\n"
        "[integration]\n"
        "rel_tol = 1e-7\n"
        "newton_polish = false\n"
        "[sweep]\n"
        "parameter = fwhm\n"
        "values = 0 Hz, 1 GHz, 3.3 GHz\n"
        "jitter_distribution = gaussian\n"
        "jitter_samples = 12\n"
        "gamma_c_list = 1e10 /s, 2e10 /s\n"
        "targets = 1 dB, 2.5 dB\n"
        "seed = 12345678901\n"
        "threads = 3\n"
        "output = out.csv\n"
        "[oracle]\n"
        "n_dots = 2\n"
        "detuning = 0 rad/s, 1e11 rad/s\n"
        "alpha0 = 0.7\n"
        "fields = a_mean, d_pdp\n");
    const std::string text = serialize_config(r);
    const RunSpec back = parse_config(text);
    CHECK(back == r);
    CHECK(serialize_config(back) == text);
    CHECK(parse_config(serialize_config(RunSpec{})) == RunSpec{});
}

TEST_CASE("shortest round-trip formatting") {
    for (double x : {0.1, 1.0 / 3.0, 6.283185307179586, 1e-300, 2e10, -0.0, 8.636721112746935e-09}) {
        const std::string s = format_double(x);
        CHECK(std::stod(s) == x);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2e10) == "2e+10");
}

TEST_CASE("tables") {
    const fs::path dir = scratch_dir();
    SweepResult r;
    r.parameter = SweepParameter::pump;
    const Table empty = to_table(r);
    const std::vector<std::string> lead{"pump", "p_out_w", "g2", "var_x", "var_y", "dn_rel", "product", "squeeze_db",
                                        "converged"};
    REQUIRE(empty.header.size() >= lead.size());
    CHECK(std::equal(lead.begin(), lead.end(), empty.header.begin()));
    write_table(empty, (dir / "empty.csv").string());
    const Table e2 = read_table((dir / "empty.csv").string());
    CHECK(e2.header == empty.header);
    CHECK(e2.rows.empty());

    Table t;
    t.header = {"x", "y"};
    t.rows = {{0.1, 1.0 / 3.0}, {std::numeric_limits<double>::quiet_NaN(), 6.02214076e23}, {-1e-310, 0.0}};
    write_table(t, (dir / "t.csv").string());
    const Table back = read_table((dir / "t.csv").string());
    REQUIRE(back.rows.size() == 3);
    CHECK(back.rows[0][1] == 1.0 / 3.0);
    CHECK(std::isnan(back.rows[1][0]));
    CHECK(back.rows[2][0] == -1e-310);

    Table ragged = t;
    ragged.rows.push_back({1.0});
    CHECK_THROWS_AS(write_table(ragged, (dir / "r.csv").string()), invalid_parameter);
    CHECK_THROWS_AS(write_table(t, "/nonexistent-dir/t.csv"), io_error);
    CHECK(manifest_path("a/b.c/run.csv") == "a/b.c/run.manifest.json");
    CHECK(manifest_path("a/b.c/run") == "a/b.c/run.manifest.json");
}

TEST_CASE("manifest echoes the run") {
    const fs::path dir = scratch_dir();
    RunSpec spec;
    spec.sweep.seed = 77;
    ManifestInfo info;
    info.subcommand = "sweep-pump";
    info.version = "x";
    info.rows = 3;
    const std::string table = (dir / "m.csv").string();
    write_manifest(table, spec, info);
    std::ifstream f(manifest_path(table));
    const auto j = nlohmann::json::parse(f);
    CHECK(j["schema_version"] == table_schema_version);
    CHECK(j["seed"] == 77);
    CHECK(j["subcommand"] == "sweep-pump");
    CHECK(parse_config(j["run_spec"].get<std::string>()) == spec);
}

TEST_CASE("command line") {
    const fs::path dir = scratch_dir();
    CHECK(cli({}).code == 1);
    CHECK(cli({"launch", "--config", "x"}).code == 1);
    CHECK(cli({"steady"}).code == 1);
    CHECK(cli({"steady", "--config", (dir / "missing.cfg").string()}).code == 1);

    write_file(dir / "bad.cfg", "[model]\ngamma_c = -1 /s\n");
    CHECK(cli({"steady", "--config", (dir / "bad.cfg").string()}).code == 1);
    write_file(dir / "excl.cfg", "[model]\ninj_rate = 1 /ps\ninj_power = 1 uW\n");
    const Run excl = cli({"steady", "--config", (dir / "excl.cfg").string()});
    CHECK(excl.code == 1);
    CHECK(excl.err.find("line 3") != std::string::npos);

    write_file(dir / "steady.cfg", "[model]\npump = 0 /s\n[ensemble]\nn_bins = 3\n");
    const Run st = cli({"steady", "--config", (dir / "steady.cfg").string()});
    CHECK(st.code == 0);
    CHECK(st.out.find("var_x=0.25\n") != std::string::npos);
    CHECK(st.out.find("converged=1\n") != std::string::npos);

    // sweep subcommands insist on the matching parameter
    CHECK(cli({"sweep-cavity", "--config", (dir / "steady.cfg").string()}).code == 1);

    const std::string out = (dir / "pump.csv").string();
    write_file(dir / "pump.cfg",
               "[ensemble]\nn_bins = 2\n[sweep]\nparameter = pump\nvalues = 0 /s, 1e12 /s\n");
    const Run sw = cli({"sweep-pump", "--config", (dir / "pump.cfg").string(), "--out", out, "--threads", "2",
                        "--seed", "5"});
    CHECK(sw.code == 0);
    const Table t = read_table(out);
    CHECK(t.rows.size() == 2);
    std::ifstream mf(manifest_path(out));
    const auto j = nlohmann::json::parse(mf);
    CHECK(j["threads"] == 2);
    CHECK(j["seed"] == 5);

    write_file(dir / "oracle.cfg", "[oracle]\nt_end = 5 ps\nsamples = 6\n");
    const Run orc = cli({"oracle-check", "--config", (dir / "oracle.cfg").string(), "--out",
                         (dir / "oracle.csv").string()});
    CHECK(orc.code == 0);
    CHECK(orc.out.find("overall,pass") != std::string::npos);

    write_file(dir / "strict.cfg", "[oracle]\ntolerance = 1e-12\n");
    CHECK(cli({"oracle-check", "--config", (dir / "strict.cfg").string(), "--out", (dir / "o2.csv").string()}).code ==
          2);
}
