#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qdsq/integrator.hpp"
#include "qdsq/model.hpp"

namespace qdsq {

// Exact master equation for one cavity mode and one or two dots, each dot in the basis
// {|0>, |e> = c^+|0>, |h> = b^+|0>, |eh> = c^+ b^+|0>}. Rates in 1/s.
struct OracleConfig {
    int n_dots = 1;
    int fock_cutoff = 8;
    double g = 1e10;
    double gamma_c = 2e10, gamma = 2e11, gamma_nr = 2e10, gamma_nl = 0.0, pump = 1e9;
    std::vector<double> detuning{0.0};   // nu - omega per dot, rad/s
    cplx a_inj{};                        // 1/s
    double delta_inj = 0.0;              // rad/s
    double t_end = 15e-12;               // s
    int n_samples = 31;

    int dimension() const;
    void validate() const;
    bool operator==(const OracleConfig&) const = default;
};

using DensityMatrix = Eigen::MatrixXcd;

class Generator {
public:
    explicit Generator(const OracleConfig& cfg);

    int dimension() const { return dim_; }
    int dots() const { return n_dots_; }

    // d rho / dt at time t (ps), in 1/ps.
    DensityMatrix apply(const DensityMatrix& rho, double t) const;

    // Every SystemState field restricted to the dots, with correlations as cumulants.
    SystemState moments(const DensityMatrix& rho) const;
    double fourth_moment(const DensityMatrix& rho) const;   // <a^+ a^+ a a>
    double top_fock_population(const DensityMatrix& rho) const;

    // Product state: coherent field amplitude alpha, each dot with independent
    // electron/hole occupations fe, fh (no interband coherence).
    DensityMatrix product_state(cplx alpha, double fe, double fh) const;
    DensityMatrix vacuum() const { return product_state(0.0, 0.0, 0.0); }

    const Eigen::SparseMatrix<cplx>& a() const { return a_; }

private:
    using Sp = Eigen::SparseMatrix<cplx>;
    int n_dots_, fock_, dim_;
    cplx a_inj_;
    double delta_inj_;
    Sp a_, ad_;
    std::vector<Sp> c_, b_, p_, ne_, nh_;
    Sp h_eff_;                    // H - i/2 sum L^+ L, drive excluded
    std::vector<Sp> jumps_, jumps_dag_;
};

struct OracleRun {
    std::vector<double> times;           // s
    std::vector<SystemState> moments;
    std::vector<double> fourth_moment;
    double max_trace_error = 0;
    double max_hermiticity_error = 0;
    double min_eigenvalue = 0;
    double max_top_fock = 0;
};

// Integrates rho0 over [0, cfg.t_end]. Throws truncation_error if rho loses positivity beyond 1e-6.
OracleRun evolve(const DensityMatrix& rho0, const OracleConfig& cfg, const IntegrationConfig& icfg = {});

// Cluster-model dynamics for the same physical system (unit-weight dots).
Dynamics cluster_dynamics(const OracleConfig& cfg);

struct FieldDeviation {
    std::string field;
    double max_deviation = 0;   // max_t |cluster - exact| / max_t |exact|
    double scale = 0;           // max_t |exact|
    bool pass = true;
};

struct CompareReport {
    std::vector<FieldDeviation> fields;
    bool pass = true;
    std::string to_text() const;
    const FieldDeviation& operator[](const std::string& name) const;
};

// Field names: a_mean, n_photon, pol, fe, fh, daa, dada, d_pba, d_fea, d_fha, d_adpb, d_exc,
// d_pp, d_pdp (off-diagonal part), d_epol, d_hpol, d_eh, d_ee, d_hh.
std::vector<cplx> field_values(const SystemState& s, const std::string& field);

CompareReport compare(const Trajectory& cluster, const Trajectory& exact, double tol_rel,
                      const std::vector<std::string>& fields, double floor = 1e-12);

// Fields with a direct counterpart in both descriptions that a comparison tracks by default:
// <a>, <a^+a>, <c^+c>, <cb>, daa, dada, d_pba, plus d_pdp when there are two dots.
std::vector<std::string> default_oracle_fields(int n_dots);

struct OracleCheckSpec {
    OracleConfig oracle;
    cplx alpha0{0.5, 0.0};     // initial coherent amplitude
    double fe0 = 0.8, fh0 = 0.8;
    double tolerance = 0.05;
    std::vector<std::string> fields;   // empty: default_oracle_fields

    void validate() const;
    bool operator==(const OracleCheckSpec&) const = default;
};

struct OracleCheckResult {
    CompareReport report;
    OracleRun exact;
    Trajectory cluster;
};

// Runs the master equation and the cluster equations from the same product state and
// compares the tracked fields sample by sample.
OracleCheckResult oracle_check(const OracleCheckSpec& spec, const IntegrationConfig& icfg);

}  // namespace qdsq
