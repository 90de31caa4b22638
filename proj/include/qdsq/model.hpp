#pragma once

#include <complex>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "qdsq/constants.hpp"

namespace qdsq {

using cplx = std::complex<double>;

// How the injected photon rate is turned into a drive amplitude.
//   picosecond: |A_inj| [1/ps] = sqrt(L_inj [1/ps] * T_out)
//   si:         |A_inj| [1/s]  = sqrt(L_inj [1/s]  * T_out)
// T_out = n_B L gamma_c / c is dimensionless, so the two readings differ by 1e6 in amplitude.
enum class InjectionUnits { picosecond, si };

struct ModelParams {
    double wavelength = 0.92e-6;       // m
    double cavity_diameter = 0.2e-6;   // m
    double cavity_length = 1.5e-6;     // m
    double gamma_c = 2e10;             // 1/s, half-width (linewidth is 2 gamma_c)
    double gamma = 2e11;               // 1/s
    double gamma_nr = 2e10;            // 1/s
    double gamma_nl = 3e12;            // 1/s
    double pump = 1e12;                // 1/s
    double dipole = phys::e_charge * 0.5e-9;  // C m
    double background_index = 3.5;
    std::optional<double> inj_rate;    // photons/s
    std::optional<double> inj_power;   // W
    double detuning_inj = 0.0;         // rad/s, nu - nu_inj

    InjectionUnits inj_units = InjectionUnits::picosecond;
    // Adds the c-number drive terms to the correlation equations (daa, dada, d_pba, d_fea,
    // d_fha, d_adpb). Off by default: a coherent drive displaces the field and drops out of
    // every cumulant equation.
    bool inj_doublet_terms = false;
    // Includes the pump rate in the decay of the population-type correlations (d_fea, d_fha,
    // d_epol, d_hpol, d_exc, d_eh, d_ee, d_hh) next to gamma_nr.
    bool pump_correlation_decay = false;

    void validate() const;
    bool operator==(const ModelParams&) const = default;
};

double mode_volume(const ModelParams& p);        // m^3
double cavity_frequency(const ModelParams& p);   // nu, rad/s
double photon_energy(const ModelParams& p);      // hbar nu, J
double coupling_constant(const ModelParams& p);  // g, 1/s
double injection_rate(const ModelParams& p);     // photons/s, 0 when free-running
double output_time_factor(const ModelParams& p); // T_out = n_B L gamma_c / c

struct EnsembleSpec {
    int n_bins = 25;
    double inhomogeneous_fwhm = 10e-3;     // eV
    std::optional<double> center_energy;   // eV, defaults to hbar nu
    double span_sigmas = 3.0;
    double qd_density = 2e14;              // 1/m^2

    void validate() const;
    bool operator==(const EnsembleSpec&) const = default;
};

struct Ensemble {
    Eigen::VectorXd omega;   // rad/s, strictly increasing
    Eigen::VectorXd weight;  // dots per bin
    int size() const { return static_cast<int>(omega.size()); }
};

Ensemble build_ensemble(const EnsembleSpec& spec, const ModelParams& p);

// Literal dots: unit weights at the given transition frequencies.
Ensemble literal_dots(const Eigen::VectorXd& omega);

// Singlets and doublets of the cluster expansion. All fields live in the frame rotating at
// the cavity frequency (or at the injection frequency, see Frame).
struct SystemState {
    cplx a_mean{};
    Eigen::VectorXcd pol;
    Eigen::VectorXd fe, fh;
    cplx daa{};
    double dada = 0.0;
    Eigen::VectorXcd d_pba, d_fea, d_fha, d_adpb;
    Eigen::MatrixXcd d_pp;    // <p_a p_b>, symmetric
    Eigen::MatrixXcd d_pdp;   // <p_b^+ p_a> at [a,b], Hermitian, diagonal mirrors d_exc
    Eigen::MatrixXcd d_epol;  // <n_e,a p_b> at [a,b]
    Eigen::MatrixXcd d_hpol;  // <n_h,a p_b> at [a,b]
    Eigen::VectorXd d_exc;
    Eigen::MatrixXd d_eh;     // <n_e,a n_h,b> at [a,b], diagonal unused (zero)
    Eigen::MatrixXd d_ee, d_hh;

    static SystemState zero(int bins);
    int bins() const { return static_cast<int>(pol.size()); }

    static Eigen::Index packed_size(int bins);
    Eigen::VectorXd pack() const;
    void pack_into(Eigen::Ref<Eigen::VectorXd> out) const;
    static SystemState unpack(const Eigen::Ref<const Eigen::VectorXd>& y, int bins);
    void unpack_from(const Eigen::Ref<const Eigen::VectorXd>& y);

    // Max of |x| over every field.
    double max_abs() const;
};

enum class Frame { cavity, injection };

// Everything the right-hand side needs, in units of 1/ps and rad/ps.
struct Dynamics {
    double g = 0, gamma_c = 0, gamma = 0, gamma_nr = 0, gamma_nl = 0, pump = 0;
    double gamma_pop = 0;          // decay of population-type correlations
    cplx a_inj{};
    double delta_inj = 0;          // nu - nu_inj
    Frame frame = Frame::cavity;
    bool inj_doublet_terms = false;
    Eigen::VectorXd detuning;      // nu - omega_alpha
    Eigen::VectorXd weight;

    int bins() const { return static_cast<int>(weight.size()); }
    bool autonomous() const { return frame == Frame::injection || delta_inj == 0.0 || a_inj == cplx{}; }
};

Dynamics make_dynamics(const ModelParams& p, const Ensemble& ens, Frame frame = Frame::cavity);

// Time derivative at time t (ps). Throws numerical_blowup naming the first non-finite field.
void rhs(const SystemState& s, const Dynamics& d, double t, SystemState& out);
SystemState rhs(const SystemState& s, const Dynamics& d, double t);

// SI convenience: t in s, derivative in 1/s.
SystemState rhs(const SystemState& s, const ModelParams& p, const Ensemble& ens, double t);

struct SymmetryReport {
    double pp_asym = 0, pdp_antiherm = 0, ee_asym = 0, hh_asym = 0, diag = 0, exc_mismatch = 0;
    double population_excess = 0;  // how far fe/fh stepped outside [0,1]
    double max_residual() const;
};

SymmetryReport symmetry_residuals(const SystemState& s);

// Symmetrizes the doublet matrices in place. Throws symmetry_drift if any residual exceeds
// tol, or if a population leaves [-1e-9, 1+1e-9] by more than tol.
SymmetryReport enforce_symmetries(SystemState& s, double tol = 1e-6);

}  // namespace qdsq
