#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qdsq/integrator.hpp"
#include "qdsq/model.hpp"
#include "qdsq/observables.hpp"

namespace qdsq {

enum class SweepParameter { pump, inj_power, inj_rate, gamma_c, fwhm };

const char* to_string(SweepParameter p);
SweepParameter parse_sweep_parameter(const std::string& s);

enum class JitterDistribution { lorentzian, gaussian };

struct JitterSpec {
    JitterDistribution distribution = JitterDistribution::lorentzian;
    int n_samples = 32;
    double cutoff = 20.0;          // frequency offsets limited to |f| <= cutoff * FWHM
    bool average_squeeze = false;  // average squeeze_db over samples instead of field moments

    bool operator==(const JitterSpec&) const = default;
};

// Pump range searched for maximum squeezing: a log-spaced scan, then golden section around
// the best scan point down to rel_tol of the range.
struct PumpSearch {
    double p_min = 2e11;   // 1/s
    double p_max = 5e12;   // 1/s
    int scan_points = 7;
    double rel_tol = 0.01;

    bool operator==(const PumpSearch&) const = default;
};

struct SweepSpec {
    SweepParameter parameter = SweepParameter::pump;
    std::vector<double> grid;             // SI: 1/s, W, photons/s, 1/s, Hz
    ModelParams model;
    EnsembleSpec ensemble;
    IntegrationConfig integration;
    std::optional<JitterSpec> jitter;
    std::vector<double> gamma_c_list;     // sweep_injection: one curve per entry
    PumpSearch pump_search;
    bool optimize_pump = false;           // linewidth_jitter: pump at the zero-linewidth optimum
    std::vector<double> targets;          // sweep_cavity: squeeze factors in dB, ascending
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
    bool operator==(const SweepSpec&) const = default;
};

struct PointResult;

// Worst case of the steady-state invariants over every state solved for one row, including
// the intermediate points of a pump search and all jitter samples. Residuals are those seen
// before the final symmetrization.
struct InvariantAudit {
    int states = 0;
    double population_excess = 0;   // distance of fe/fh outside [0, 1]
    double symmetry_residual = 0;
    double min_product = std::numeric_limits<double>::infinity();
    double min_n_mean = std::numeric_limits<double>::infinity();

    void add(const PointResult& r);
    void merge(const InvariantAudit& o);
};

struct SweepRow {
    double value = 0;
    double gamma_c = 0;
    double pump = 0;
    Observables obs;
    bool converged = false;
    int coupled_bins = 0;
    double residual = 0;
    InvariantAudit audit;
    std::string error;   // set when the point failed numerically
};

struct SweepResult {
    SweepParameter parameter = SweepParameter::pump;
    std::vector<SweepRow> rows;
};

struct PointResult {
    SystemState state;
    Observables obs;
    SteadyDiagnostics diagnostics;
    int coupled_bins = 0;
};

// Steady state in the frame of the injected laser (equal to the cavity frame when
// detuning_inj = 0), optionally starting from a nearby solution.
PointResult solve_point(const ModelParams& p, const Ensemble& ens, const IntegrationConfig& cfg,
                        const SystemState* warm = nullptr);

// Bins whose |pol| exceeds frac of the largest; falls back to |d_adpb| when the coherent
// polarization vanishes (free-running operation).
int coupled_bin_count(const SystemState& s, double frac = 0.01);

struct PumpOptimum {
    double pump = 0;
    PointResult point;
    int evaluations = 0;
    InvariantAudit audit;   // over every evaluation of the search
};

// Pump in [p_min, p_max] maximizing squeeze_db with every other parameter of p fixed.
PumpOptimum optimize_pump(const ModelParams& p, const EnsembleSpec& es, const IntegrationConfig& cfg,
                          const PumpSearch& search);

// Called after each finished grid point with (done, total); may run on worker threads but
// never concurrently.
using Progress = std::function<void(std::size_t done, std::size_t total)>;

SweepResult sweep_pump(const SweepSpec& spec, const Progress& progress = {});
SweepResult sweep_injection(const SweepSpec& spec, const Progress& progress = {});   // grouped by gamma_c
SweepResult linewidth_jitter(const SweepSpec& spec, const Progress& progress = {});

struct CavityRow {
    double gamma_c = 0;
    double onset_pump = 0, onset_p_out_w = 0;   // NaN when no squeezing was found
    std::vector<double> target_pump, target_p_out_w;
    double max_squeeze_db = 0, max_pump = 0;
    bool converged = false;
    InvariantAudit audit;
};

struct CavityResult {
    std::vector<double> targets;
    std::vector<CavityRow> rows;
};

// For each gamma_c of the grid: output power at the onset of squeezing and where each target
// squeeze factor is first reached as the pump increases.
CavityResult sweep_cavity(const SweepSpec& spec, const Progress& progress = {});

// Runs body(i) for i in [0, n) on up to `threads` threads. Exceptions are rethrown after join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body,
                  const Progress& progress = {});

// Frequency offsets (Hz) for one linewidth point, reproducible from (seed, index).
std::vector<double> jitter_samples(const JitterSpec& js, double fwhm_hz, std::uint64_t seed, std::uint64_t index);

}  // namespace qdsq
