#include "qdsq/cli.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "qdsq/config.hpp"
#include "qdsq/errors.hpp"
#include "qdsq/experiments.hpp"
#include "qdsq/oracle.hpp"
#include "qdsq/table.hpp"
#include "qdsq/version.hpp"

namespace qdsq {

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

RunSpec load(const Options& o) {
    RunSpec spec = load_config(o.config);
    if (o.seed) spec.sweep.seed = *o.seed;
    if (o.threads) spec.sweep.threads = *o.threads;
    if (!o.out.empty()) spec.output = o.out;
    spec.validate();
    return spec;
}

void require_parameter(const RunSpec& spec, std::initializer_list<SweepParameter> allowed, const char* cmd) {
    for (auto p : allowed)
        if (spec.sweep.parameter == p) return;
    std::string names;
    for (auto p : allowed) names += std::string(names.empty() ? "" : " or ") + to_string(p);
    throw config_error(std::string(cmd) + " needs [sweep] parameter = " + names);
}

std::string output_path(const RunSpec& spec, const char* fallback) {
    return spec.output.empty() ? std::string(fallback) : spec.output;
}

Progress reporter(std::ostream& err, const char* cmd) {
    return [&err, cmd](std::size_t done, std::size_t total) {
        err << cmd << ": " << done << "/" << total << " points\n" << std::flush;
    };
}

void finish(const Table& table, const std::string& path, const RunSpec& spec, const char* cmd,
            std::chrono::steady_clock::time_point t0, std::ostream& err) {
    write_table(table, path);
    ManifestInfo info;
    info.subcommand = cmd;
    info.version = version;
    info.rows = table.rows.size();
    info.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(path, spec, info);
    err << cmd << ": wrote " << path << " (" << table.rows.size() << " rows) and " << manifest_path(path) << "\n";
}

int cmd_steady(const Options& o, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunSpec spec = load(o);
    const Ensemble ens = build_ensemble(spec.ensemble(), spec.model());
    err << "steady: " << ens.size() << " bins\n";
    const PointResult r = solve_point(spec.model(), ens, spec.integration());
    const Observables& ob = r.obs;
    auto kv = [&out](const char* k, double v) { out << k << "=" << format_double(v) << "\n"; };
    kv("var_x", ob.var_x);
    kv("var_y", ob.var_y);
    kv("n_mean", ob.n_mean);
    kv("dn2", ob.dn2);
    kv("dn_rel", ob.dn_rel);
    kv("g2", ob.g2);
    kv("p_out_photons", ob.p_out_photons);
    kv("p_out_watts", ob.p_out_watts);
    kv("squeeze_db", ob.squeeze_db);
    kv("uncertainty_product", ob.uncertainty_product);
    kv("coupled_bins", r.coupled_bins);
    kv("converged", r.diagnostics.converged ? 1 : 0);
    kv("residual", r.diagnostics.residual_norm);
    kv("t_reached", r.diagnostics.t_reached);
    if (!spec.output.empty()) {
        SweepResult sr;
        SweepRow row;
        row.value = spec.model().pump;
        row.gamma_c = spec.model().gamma_c;
        row.pump = spec.model().pump;
        row.obs = ob;
        row.converged = r.diagnostics.converged;
        row.coupled_bins = r.coupled_bins;
        row.residual = r.diagnostics.residual_norm;
        row.audit.add(r);
        sr.rows.push_back(row);
        finish(to_table(sr), spec.output, spec, "steady", t0, err);
    }
    if (!r.diagnostics.converged) {
        err << "steady: not converged (residual " << r.diagnostics.residual_norm << ")\n";
        return exit_numerical;
    }
    return exit_ok;
}

int cmd_sweep(const Options& o, const char* cmd, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    RunSpec spec = load(o);
    const std::string c = cmd;
    Table table;
    const char* fallback = "";
    if (c == "sweep-pump") {
        require_parameter(spec, {SweepParameter::pump}, cmd);
        fallback = "sweep_pump.csv";
        table = to_table(sweep_pump(spec.sweep, reporter(err, cmd)));
    } else if (c == "sweep-injection") {
        require_parameter(spec, {SweepParameter::inj_power, SweepParameter::inj_rate}, cmd);
        fallback = "sweep_injection.csv";
        table = to_table(sweep_injection(spec.sweep, reporter(err, cmd)));
    } else if (c == "sweep-cavity") {
        require_parameter(spec, {SweepParameter::gamma_c}, cmd);
        fallback = "sweep_cavity.csv";
        table = to_table(sweep_cavity(spec.sweep, reporter(err, cmd)));
    } else {
        require_parameter(spec, {SweepParameter::fwhm}, cmd);
        fallback = "jitter.csv";
        table = to_table(linewidth_jitter(spec.sweep, reporter(err, cmd)));
    }
    finish(table, output_path(spec, fallback), spec, cmd, t0, err);
    return exit_ok;
}

int cmd_oracle(const Options& o, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunSpec spec = load(o);
    err << "oracle-check: " << spec.oracle.oracle.n_dots << " dot(s), Hilbert dimension "
        << spec.oracle.oracle.dimension() << "\n";
    const OracleCheckResult res = oracle_check(spec.oracle, spec.integration());
    const std::string text = res.report.to_text();
    out << text;
    const std::string path = output_path(spec, "oracle_check.csv");
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw io_error("cannot write '" + path + "'");
        f << text;
        if (!f) throw io_error("failed writing '" + path + "'");
    }
    ManifestInfo info;
    info.subcommand = "oracle-check";
    info.version = version;
    info.rows = res.report.fields.size();
    info.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(path, spec, info);
    err << "oracle-check: " << (res.report.pass ? "pass" : "FAIL") << ", wrote " << path << "\n";
    return res.report.pass ? exit_ok : exit_numerical;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Squeezed light from quantum-dot microcavities: steady states, sweeps and checks", "qdsq"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    Options opt;
    const char* names[][2] = {
        {"steady", "Steady state and observables for the [model] operating point"},
        {"sweep-pump", "Observables versus pump rate"},
        {"sweep-injection", "Pump-optimized squeeze factor versus injected power, per cavity linewidth"},
        {"sweep-cavity", "Output power at squeezing onset and target squeeze factors versus cavity linewidth"},
        {"jitter", "Squeeze factor versus injected laser linewidth"},
        {"oracle-check", "Compare the cluster equations with the exact master equation"},
    };
    for (const auto& [name, desc] : names) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", opt.config, "Configuration file")->required();
        sub->add_option("--out", opt.out, "Output table path");
        sub->add_option("--seed", opt.seed, "Master random seed");
        sub->add_option("--threads", opt.threads, "Concurrent sweep points")->check(CLI::PositiveNumber);
    }
    if (argc <= 1) {
        err << app.help();
        return exit_validation;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        if (dynamic_cast<const CLI::CallForVersion*>(&e))
            out << version << "\n";
        else
            out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_validation;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "steady") return cmd_steady(opt, out, err);
        if (cmd == "oracle-check") return cmd_oracle(opt, out, err);
        return cmd_sweep(opt, cmd.c_str(), err);
    } catch (const invalid_parameter& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const numerical_error& e) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const undefined_observable& e) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
}

}  // namespace qdsq
