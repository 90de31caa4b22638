// Acceptance gate: every criterion at its stated tolerance, one PASS/FAIL line each.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <thread>
#include <vector>

#include "qdsq/experiments.hpp"
#include "qdsq/oracle.hpp"
#include "qdsq/table.hpp"

using namespace qdsq;
namespace fs = std::filesystem;

namespace {

int failures = 0;
InvariantAudit audit_all;
int failed_points = 0;

void report(int id, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

void note(const std::string& s) {
    std::printf("  %s\n", s.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return v;
}

void collect(const SweepResult& r) {
    for (const auto& row : r.rows) {
        if (!row.error.empty()) ++failed_points;
        audit_all.merge(row.audit);
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

SweepSpec pump_sweep_spec(bool injected) {
    SweepSpec s;
    s.parameter = SweepParameter::pump;
    s.grid = log_grid(1e10, 5e12, 50);
    if (injected) s.model.inj_rate = 20e12;
    s.threads = threads();
    return s;
}

SweepSpec injection_sweep_spec() {
    SweepSpec s;
    s.parameter = SweepParameter::inj_power;
    s.grid = {0.5e-6, 1e-6, 2e-6, 4e-6, 6e-6, 8e-6, 10e-6};
    s.gamma_c_list = {1e10, 2e10, 3e10, 6e10};
    s.threads = threads();
    return s;
}

SweepSpec jitter_sweep_spec() {
    SweepSpec s;
    s.parameter = SweepParameter::fwhm;
    s.grid = {0.0, 1e8, 3e8, 1e9, 2e9, 5e9, 1e10};
    s.model.inj_rate = 20e12;
    s.jitter = JitterSpec{};
    s.optimize_pump = true;
    s.seed = 20240611;
    s.threads = threads();
    return s;
}

const SweepRow* find_row(const SweepResult& r, double gamma_c, double value) {
    for (const auto& row : r.rows)
        if (row.gamma_c == gamma_c && row.value == value) return &row;
    return nullptr;
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / "qdsq_acceptance";
    fs::create_directories(dir);
    std::printf("acceptance: 25 bins, %d thread(s), tables in %s\n", threads(), dir.string().c_str());

    // pump sweeps, free-running and injected
    Timer t2;
    const SweepResult free_run = sweep_pump(pump_sweep_spec(false));
    const SweepResult injected = sweep_pump(pump_sweep_spec(true));
    collect(free_run);
    collect(injected);
    write_table(to_table(free_run), (dir / "pump_free.csv").string());
    write_table(to_table(injected), (dir / "pump_injected.csv").string());
    note(fmt("pump sweeps: %.0f s", t2.seconds()));

    {
        double worst_dv = 0, worst_daa = 0;
        bool ok = !free_run.rows.empty();
        for (const auto& row : free_run.rows) {
            if (!row.error.empty()) ok = false;
            worst_dv = std::max(worst_dv, std::abs(row.obs.var_x - row.obs.var_y));
            worst_daa = std::max(worst_daa, std::abs(row.obs.daa));
        }
        ok = ok && worst_dv < 1e-12 && worst_daa == 0.0;
        report(1, ok, fmt("max |var_x - var_y| = %.3g, max |daa| = %.3g over %g pumps", worst_dv, worst_daa,
                          static_cast<double>(free_run.rows.size())));
    }

    {
        const Observables& top = free_run.rows.back().obs;
        const bool ok = std::abs(top.dn_rel - 1.0) <= 0.05 &&
                        std::abs(top.uncertainty_product - 1.0 / 16.0) <= 0.02 / 16.0;
        report(2, ok, fmt("pump %.3g /s: dn_rel = %.4g (1 +- 0.05), product = %.4g (0.0625 +- 2%%)",
                          free_run.rows.back().pump, top.dn_rel, top.uncertainty_product));
    }

    {
        const double lo = free_run.rows.front().obs.g2, hi = free_run.rows.back().obs.g2;
        const bool ok = lo >= 1.8 && lo <= 2.0 && hi >= 0.98 && hi <= 1.05;
        report(3, ok, fmt("g2 at lowest pump = %.4g [1.8, 2.0], at highest pump = %.4g [0.98, 1.05]", lo, hi));
    }

    {
        // threshold: first pump where the free-running mean photon number reaches 1
        double threshold = INFINITY;
        for (const auto& row : free_run.rows)
            if (row.obs.n_mean >= 1.0) {
                threshold = row.pump;
                break;
            }
        const SweepRow* hit = nullptr;
        double best_x = INFINITY;
        for (const auto& row : injected.rows) {
            if (row.pump >= threshold || !row.error.empty()) continue;
            best_x = std::min(best_x, row.obs.var_x);
            const Observables& o = row.obs;
            if (o.var_x < 0.25 && o.dn_rel < 1.0 && std::abs(o.uncertainty_product - 1.0 / 16.0) <= 0.02 / 16.0) {
                hit = &row;
                break;
            }
        }
        if (hit)
            report(4, true, fmt("pump %.3g /s below threshold %.3g /s: var_x = %.4g, dn_rel = %.4g", hit->pump,
                                threshold, hit->obs.var_x, hit->obs.dn_rel));
        else
            report(4, false, fmt("no pump below threshold %.3g /s qualifies; smallest var_x there = %.4g", threshold,
                                 best_x));
    }

    // injected-power sweeps at the squeezing-optimal pump
    Timer t4;
    const SweepResult inj = sweep_injection(injection_sweep_spec());
    collect(inj);
    write_table(to_table(inj), (dir / "injection.csv").string());
    note(fmt("injection sweeps: %.0f s", t4.seconds()));
    for (const auto& row : inj.rows)
        note(fmt("gamma_c %.3g, %.3g W: pump %.4g, squeeze %.4g dB", row.gamma_c, row.value, row.pump,
                 row.obs.squeeze_db));

    {
        const SweepRow* pt = find_row(inj, 3e10, 4e-6);
        const double sq = pt ? pt->obs.squeeze_db : NAN;
        double best = -INFINITY;
        for (const auto& row : inj.rows)
            if (row.gamma_c <= 2e10 && std::isfinite(row.obs.squeeze_db)) best = std::max(best, row.obs.squeeze_db);
        const bool ok = std::abs(sq - 4.0) <= 1.5 && std::abs(best - 5.0) <= 1.5;
        report(5, ok, fmt("gamma_c 3e10 at 4 uW: %.4g dB (4 +- 1.5); best with gamma_c <= 2e10: %.4g dB (5 +- 1.5)",
                          sq, best));
    }

    {
        double lo = INFINITY, hi = -INFINITY;
        bool ok = true;
        for (const auto& row : inj.rows) {
            if (row.gamma_c != 6e10) continue;
            if (!std::isfinite(row.obs.squeeze_db)) ok = false;
            lo = std::min(lo, row.obs.squeeze_db);
            hi = std::max(hi, row.obs.squeeze_db);
        }
        ok = ok && hi - lo < 0.5;
        report(6, ok, fmt("gamma_c 6e10: squeeze spans [%.4g, %.4g] dB, variation %.4g dB (< 0.5)", lo, hi, hi - lo));
    }

    // linewidth jitter at the optimal operating point
    Timer t3;
    const SweepResult jit = linewidth_jitter(jitter_sweep_spec());
    collect(jit);
    write_table(to_table(jit), (dir / "jitter.csv").string());
    note(fmt("jitter sweep: %.0f s", t3.seconds()));

    {
        const double s0 = jit.rows[0].obs.squeeze_db;
        double s1 = NAN;
        double knee = NAN;
        for (const auto& row : jit.rows) {
            note(fmt("fwhm %.3g Hz: squeeze %.4g dB", row.value, row.obs.squeeze_db));
            if (row.value == 1e9) s1 = row.obs.squeeze_db;
            if (row.value > 1e9 && row.value <= 1e10 && std::isnan(knee) && s0 - row.obs.squeeze_db > 1.0)
                knee = row.value;
        }
        const bool ok = std::abs(s1 - s0) <= 0.5 && !std::isnan(knee);
        report(7, ok, fmt("squeeze %.4g dB at 0, %.4g dB at 1 GHz; first > 1 dB drop in (1, 10] GHz at %.3g Hz", s0,
                          s1, knee));
    }

    {
        Timer to;
        OracleCheckSpec one;
        one.oracle.g = 1e10;
        one.oracle.fock_cutoff = 8;
        const OracleCheckResult r1 = oracle_check(one, IntegrationConfig{});
        OracleCheckSpec two = one;
        two.oracle.n_dots = 2;
        two.oracle.detuning = {0.0, 5e10};
        const OracleCheckResult r2 = oracle_check(two, IntegrationConfig{});
        double worst1 = 0;
        for (const auto& f : r1.report.fields) worst1 = std::max(worst1, f.max_deviation);
        const double pdp = r2.report["d_pdp"].max_deviation;
        const bool ok = r1.report.pass && r2.report.pass && pdp <= 0.05;
        note(fmt("oracle: %.1f s", to.seconds()));
        report(8, ok, fmt("one dot: worst relative deviation %.3g; two dots: d_pdp %.3g (<= 0.05)", worst1, pdp));
    }

    {
        const InvariantAudit& a = audit_all;
        const bool ok = failed_points == 0 && a.states > 0 && a.population_excess <= 1e-9 &&
                        a.symmetry_residual < 1e-6 && a.min_product >= 1.0 / 16.0 - 1e-9 && a.min_n_mean >= 0.0;
        report(9, ok, fmt("%g states: population excess %.3g, symmetry residual %.3g, min product %.6g", a.states,
                          a.population_excess, a.symmetry_residual, a.min_product) +
                          fmt(", min n %.3g, failed points %g", a.min_n_mean, failed_points));
    }

    {
        // rerun with identical specifications and compare the written tables byte for byte
        Timer td;
        std::vector<std::string> differing;
        auto same = [&](const Table& t, const std::string& name) {
            const fs::path again = dir / ("again_" + name);
            write_table(t, again.string());
            if (slurp(again) != slurp(dir / name)) differing.push_back(name);
        };
        same(to_table(sweep_pump(pump_sweep_spec(false))), "pump_free.csv");
        same(to_table(sweep_pump(pump_sweep_spec(true))), "pump_injected.csv");
        same(to_table(linewidth_jitter(jitter_sweep_spec())), "jitter.csv");
        SweepSpec sub = injection_sweep_spec();
        sub.gamma_c_list = {3e10};
        sub.grid = {4e-6};
        write_table(to_table(sweep_injection(sub)),
                    (dir / "again_injection_point.csv").string());
        const SweepRow* ref = find_row(inj, 3e10, 4e-6);
        const Table point = read_table((dir / "again_injection_point.csv").string());
        SweepResult ref_only;
        ref_only.parameter = inj.parameter;
        if (ref) ref_only.rows.push_back(*ref);
        write_table(to_table(ref_only), (dir / "injection_point.csv").string());
        if (slurp(dir / "again_injection_point.csv") != slurp(dir / "injection_point.csv") || point.rows.size() != 1)
            differing.push_back("injection_point.csv");
        std::string detail = differing.empty() ? "4 tables identical on rerun" : "differing:";
        for (const auto& d : differing) detail += " " + d;
        note(fmt("determinism reruns: %.0f s", td.seconds()));
        report(10, differing.empty(), detail);
    }

    std::printf("acceptance: %d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
