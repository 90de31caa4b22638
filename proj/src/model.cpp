#include "qdsq/model.hpp"

#include <algorithm>
#include <cmath>

#include "qdsq/errors.hpp"
#include "qdsq/observables.hpp"

namespace qdsq {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw invalid_parameter(msg);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

void ModelParams::validate() const {
    require(std::isfinite(wavelength) && wavelength > 0, "wavelength must be > 0");
    require(finite_nonneg(cavity_diameter), "cavity_diameter must be >= 0");
    require(finite_nonneg(cavity_length), "cavity_length must be >= 0");
    require(finite_nonneg(gamma_c), "gamma_c must be >= 0");
    require(finite_nonneg(gamma), "gamma must be >= 0");
    require(finite_nonneg(gamma_nr), "gamma_nr must be >= 0");
    require(finite_nonneg(gamma_nl), "gamma_nl must be >= 0");
    require(finite_nonneg(pump), "pump must be >= 0");
    require(finite_nonneg(dipole), "dipole must be >= 0");
    require(std::isfinite(background_index) && background_index >= 1, "background_index must be >= 1");
    require(std::isfinite(detuning_inj), "detuning_inj must be finite");
    if (inj_rate && inj_power) throw config_error("inj_rate and inj_power are mutually exclusive");
    if (inj_rate) require(finite_nonneg(*inj_rate), "inj_rate must be >= 0");
    if (inj_power) require(finite_nonneg(*inj_power), "inj_power must be >= 0");
}

double mode_volume(const ModelParams& p) {
    const double r = 0.5 * p.cavity_diameter;
    return phys::pi * r * r * p.cavity_length;
}

double cavity_frequency(const ModelParams& p) { return 2.0 * phys::pi * phys::c0 / p.wavelength; }

double photon_energy(const ModelParams& p) { return phys::hbar * cavity_frequency(p); }

double coupling_constant(const ModelParams& p) {
    p.validate();
    const double v = mode_volume(p);
    if (!(v > 0)) throw invalid_parameter("zero mode volume");
    const double eps_b = p.background_index * p.background_index * phys::eps0;
    return p.dipole / phys::hbar * std::sqrt(phys::hbar * cavity_frequency(p) / (v * eps_b));
}

double injection_rate(const ModelParams& p) {
    if (p.inj_rate) return *p.inj_rate;
    if (p.inj_power) return *p.inj_power / photon_energy(p);
    return 0.0;
}

double output_time_factor(const ModelParams& p) {
    return p.background_index * p.cavity_length * p.gamma_c / phys::c0;
}

void EnsembleSpec::validate() const {
    require(n_bins >= 1, "n_bins must be >= 1");
    require(finite_nonneg(inhomogeneous_fwhm), "inhomogeneous_fwhm must be >= 0");
    require(std::isfinite(span_sigmas) && span_sigmas > 0, "span_sigmas must be > 0");
    require(finite_nonneg(qd_density), "qd_density must be >= 0");
    if (center_energy) require(std::isfinite(*center_energy) && *center_energy > 0, "center_energy must be > 0");
}

Ensemble build_ensemble(const EnsembleSpec& spec, const ModelParams& p) {
    spec.validate();
    p.validate();
    const int m = spec.n_bins;
    const double center_ev = spec.center_energy ? *spec.center_energy : photon_energy(p) / phys::e_charge;
    const double sigma = spec.inhomogeneous_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double r = 0.5 * p.cavity_diameter;
    const double total = spec.qd_density * phys::pi * r * r;

    Ensemble ens;
    ens.omega.resize(m);
    ens.weight.resize(m);
    if (m == 1 || sigma == 0.0) {
        if (m > 1) throw invalid_parameter("several bins need a nonzero inhomogeneous width");
        ens.omega[0] = center_ev * phys::e_charge / phys::hbar;
        ens.weight[0] = total;
        return ens;
    }
    const double half = spec.span_sigmas * sigma;
    double sum = 0;
    for (int i = 0; i < m; ++i) {
        const double de = -half + 2.0 * half * i / (m - 1);
        ens.omega[i] = (center_ev + de) * phys::e_charge / phys::hbar;
        ens.weight[i] = std::exp(-0.5 * de * de / (sigma * sigma));
        sum += ens.weight[i];
    }
    ens.weight *= total / sum;
    return ens;
}

Ensemble literal_dots(const Eigen::VectorXd& omega) {
    Ensemble ens;
    ens.omega = omega;
    ens.weight = Eigen::VectorXd::Ones(omega.size());
    return ens;
}

// ---------------------------------------------------------------------------------------------

SystemState SystemState::zero(int m) {
    SystemState s;
    s.pol = Eigen::VectorXcd::Zero(m);
    s.fe = Eigen::VectorXd::Zero(m);
    s.fh = Eigen::VectorXd::Zero(m);
    s.d_pba = Eigen::VectorXcd::Zero(m);
    s.d_fea = Eigen::VectorXcd::Zero(m);
    s.d_fha = Eigen::VectorXcd::Zero(m);
    s.d_adpb = Eigen::VectorXcd::Zero(m);
    s.d_pp = Eigen::MatrixXcd::Zero(m, m);
    s.d_pdp = Eigen::MatrixXcd::Zero(m, m);
    s.d_epol = Eigen::MatrixXcd::Zero(m, m);
    s.d_hpol = Eigen::MatrixXcd::Zero(m, m);
    s.d_exc = Eigen::VectorXd::Zero(m);
    s.d_eh = Eigen::MatrixXd::Zero(m, m);
    s.d_ee = Eigen::MatrixXd::Zero(m, m);
    s.d_hh = Eigen::MatrixXd::Zero(m, m);
    return s;
}

Eigen::Index SystemState::packed_size(int m) {
    const Eigen::Index mm = static_cast<Eigen::Index>(m) * m;
    return 5 + 13 * static_cast<Eigen::Index>(m) + 11 * mm;
}

namespace {

// Visits every field in pack order; V gets (name, pointer to doubles, count).
template <class S, class V>
void visit_fields(S& s, V&& v) {
    v("a_mean", &s.a_mean, 1);
    v("pol", s.pol.data(), s.pol.size());
    v("fe", s.fe.data(), s.fe.size());
    v("fh", s.fh.data(), s.fh.size());
    v("daa", &s.daa, 1);
    v("dada", &s.dada, 1);
    v("d_pba", s.d_pba.data(), s.d_pba.size());
    v("d_fea", s.d_fea.data(), s.d_fea.size());
    v("d_fha", s.d_fha.data(), s.d_fha.size());
    v("d_adpb", s.d_adpb.data(), s.d_adpb.size());
    v("d_pp", s.d_pp.data(), s.d_pp.size());
    v("d_pdp", s.d_pdp.data(), s.d_pdp.size());
    v("d_epol", s.d_epol.data(), s.d_epol.size());
    v("d_hpol", s.d_hpol.data(), s.d_hpol.size());
    v("d_exc", s.d_exc.data(), s.d_exc.size());
    v("d_eh", s.d_eh.data(), s.d_eh.size());
    v("d_ee", s.d_ee.data(), s.d_ee.size());
    v("d_hh", s.d_hh.data(), s.d_hh.size());
}

struct Packer {
    double* out;
    Eigen::Index pos = 0;
    void operator()(const char*, const cplx* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            out[pos++] = p[i].real();
            out[pos++] = p[i].imag();
        }
    }
    void operator()(const char*, const double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) out[pos++] = p[i];
    }
};

struct Unpacker {
    const double* in;
    Eigen::Index pos = 0;
    void operator()(const char*, cplx* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = cplx(in[pos], in[pos + 1]);
            pos += 2;
        }
    }
    void operator()(const char*, double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) p[i] = in[pos++];
    }
};

struct FiniteCheck {
    void operator()(const char* name, const cplx* p, Eigen::Index n) const {
        for (Eigen::Index i = 0; i < n; ++i)
            if (!std::isfinite(p[i].real()) || !std::isfinite(p[i].imag())) throw numerical_blowup(name);
    }
    void operator()(const char* name, const double* p, Eigen::Index n) const {
        for (Eigen::Index i = 0; i < n; ++i)
            if (!std::isfinite(p[i])) throw numerical_blowup(name);
    }
};

struct MaxAbs {
    double m = 0;
    void operator()(const char*, const cplx* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, std::abs(p[i]));
    }
    void operator()(const char*, const double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, std::abs(p[i]));
    }
};

}  // namespace

void SystemState::pack_into(Eigen::Ref<Eigen::VectorXd> out) const {
    if (out.size() != packed_size(bins())) throw grid_mismatch("packed vector has wrong size");
    Packer p{out.data()};
    visit_fields(*this, p);
}

Eigen::VectorXd SystemState::pack() const {
    Eigen::VectorXd y(packed_size(bins()));
    pack_into(y);
    return y;
}

void SystemState::unpack_from(const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (y.size() != packed_size(bins())) throw grid_mismatch("packed vector has wrong size");
    Unpacker u{y.data()};
    visit_fields(*this, u);
}

SystemState SystemState::unpack(const Eigen::Ref<const Eigen::VectorXd>& y, int m) {
    SystemState s = zero(m);
    s.unpack_from(y);
    return s;
}

double SystemState::max_abs() const {
    MaxAbs v;
    visit_fields(*this, v);
    return v.m;
}

// ---------------------------------------------------------------------------------------------

Dynamics make_dynamics(const ModelParams& p, const Ensemble& ens, Frame frame) {
    p.validate();
    Dynamics d;
    const double ps = phys::ps;
    d.g = coupling_constant(p) * ps;
    d.gamma_c = p.gamma_c * ps;
    d.gamma = p.gamma * ps;
    d.gamma_nr = p.gamma_nr * ps;
    d.gamma_nl = p.gamma_nl * ps;
    d.pump = p.pump * ps;
    d.gamma_pop = d.gamma_nr + (p.pump_correlation_decay ? d.pump : 0.0);
    d.a_inj = injection_amplitude(p) * ps;
    d.delta_inj = p.detuning_inj * ps;
    d.frame = frame;
    d.inj_doublet_terms = p.inj_doublet_terms;
    const double nu = cavity_frequency(p);
    d.detuning = (nu - ens.omega.array()) * ps;
    d.weight = ens.weight;
    return d;
}

void rhs(const SystemState& s, const Dynamics& d, double t, SystemState& r) {
    const int m = s.bins();
    if (d.bins() != m || d.detuning.size() != m) throw grid_mismatch("state and ensemble sizes differ");
    if (r.bins() != m) r = SystemState::zero(m);

    const cplx I(0.0, 1.0);
    const double g = d.g;
    const auto& w = d.weight;
    const auto& dt = d.detuning;
    const cplx A = s.a_mean;
    const cplx Ac = std::conj(A);

    cplx E = d.a_inj;
    double omega = 0.0;  // frame shift per unit of field charge
    if (d.frame == Frame::injection) {
        omega = d.delta_inj;
    } else if (d.delta_inj != 0.0) {
        E *= std::exp(I * (d.delta_inj * t));
    }
    const double k = d.inj_doublet_terms ? 1.0 : 0.0;
    const cplx shift1 = -I * omega;
    const cplx shift2 = -2.0 * I * omega;

    Eigen::VectorXd F = s.fe + s.fh - Eigen::VectorXd::Ones(m);

    cplx sum_p{}, sum_pba{};
    double sum_adpb = 0;
    for (int j = 0; j < m; ++j) {
        sum_p += w[j] * s.pol[j];
        sum_pba += w[j] * s.d_pba[j];
        sum_adpb += w[j] * s.d_adpb[j].real();
    }

    r.a_mean = -d.gamma_c * A + g * sum_p + E + shift1 * A;
    r.daa = -2.0 * d.gamma_c * s.daa + 2.0 * g * sum_pba - k * 2.0 * A * E + shift2 * s.daa;
    r.dada = -2.0 * d.gamma_c * s.dada + 2.0 * g * sum_adpb - k * 2.0 * std::real(A * std::conj(E));

    for (int j = 0; j < m; ++j) {
        const cplx P = s.pol[j];
        const cplx Pc = std::conj(P);
        const double fe = s.fe[j], fh = s.fh[j];
        const cplx rot(-d.gamma, dt[j]);

        r.pol[j] = (rot + shift1) * P + g * (A * F[j] + s.d_fea[j] + s.d_fha[j]);

        const double em = 2.0 * g * std::real(Ac * P + s.d_adpb[j]);
        r.fe[j] = -d.gamma_nr * fe - d.gamma_nl * fe * fh + d.pump * (1.0 - fe) - em;
        r.fh[j] = -d.gamma_nr * fh - d.gamma_nl * fe * fh + d.pump * (1.0 - fh) - em;

        cplx pp_sum{}, epol_sum{}, hpol_sum{}, pdp_sum{};
        for (int l = 0; l < m; ++l) {
            if (l == j) continue;
            pp_sum += w[l] * s.d_pp(j, l);
            epol_sum += w[l] * s.d_epol(j, l);
            hpol_sum += w[l] * s.d_hpol(j, l);
            pdp_sum += w[l] * s.d_pdp(j, l);
        }

        r.d_pba[j] = (cplx(-d.gamma_c - d.gamma, dt[j]) + shift2) * s.d_pba[j] - g * P * P +
                     g * A * (s.d_fea[j] + s.d_fha[j]) + g * F[j] * s.daa + g * pp_sum - k * g * P * E;

        const cplx common = -g * (Pc * s.daa + P * s.dada) - g * (A * std::conj(s.d_adpb[j]) + Ac * s.d_pba[j]);
        r.d_fea[j] = (-(d.gamma_c + d.gamma_pop) + shift1) * s.d_fea[j] - g * fe * P + common + g * epol_sum -
                     k * g * fe * E;
        r.d_fha[j] = (-(d.gamma_c + d.gamma_pop) + shift1) * s.d_fha[j] - g * fh * P + common + g * hpol_sum -
                     k * g * fh * E;

        r.d_adpb[j] = cplx(-d.gamma_c - d.gamma, dt[j]) * s.d_adpb[j] + g * (fe * fh + s.d_exc[j]) +
                      g * A * std::conj(s.d_fea[j] + s.d_fha[j]) + g * s.dada * F[j] + g * pdp_sum -
                      k * g * P * std::conj(E);

        r.d_exc[j] = -2.0 * d.gamma_pop * s.d_exc[j] + 2.0 * g * F[j] * s.d_adpb[j].real() -
                     2.0 * g * std::real(Pc * (s.d_fea[j] + s.d_fha[j]));
    }

    for (int j = 0; j < m; ++j) {
        const cplx Pj = s.pol[j], Pjc = std::conj(Pj);
        for (int l = 0; l < m; ++l) {
            if (l == j) {
                r.d_pp(j, j) = 0;
                r.d_epol(j, j) = 0;
                r.d_hpol(j, j) = 0;
                r.d_pdp(j, j) = r.d_exc[j];
                r.d_eh(j, j) = 0;
                r.d_ee(j, j) = 0;
                r.d_hh(j, j) = 0;
                continue;
            }
            const cplx Pl = s.pol[l], Plc = std::conj(Pl);
            const cplx epol_jl = s.d_epol(j, l), epol_lj = s.d_epol(l, j);
            const cplx hpol_jl = s.d_hpol(j, l), hpol_lj = s.d_hpol(l, j);

            r.d_pp(j, l) = (cplx(-2.0 * d.gamma, dt[j] + dt[l]) + shift2) * s.d_pp(j, l) +
                           g * (F[j] * s.d_pba[l] + F[l] * s.d_pba[j]) + g * A * (epol_jl + hpol_jl + epol_lj + hpol_lj);

            const cplx pol_src = -g * (Pjc * s.d_pba[l] + Pj * s.d_adpb[l]) - g * Ac * s.d_pp(j, l);
            const cplx pol_rot = cplx(-(d.gamma_pop + d.gamma), dt[l]) + shift1;
            r.d_epol(j, l) = pol_rot * epol_jl + g * F[l] * s.d_fea[j] + pol_src +
                             g * A * (s.d_ee(j, l) + s.d_eh(j, l) - s.d_pdp(l, j));
            r.d_hpol(j, l) = pol_rot * hpol_jl + g * F[l] * s.d_fha[j] + pol_src +
                             g * A * (s.d_hh(j, l) + s.d_eh(l, j) - s.d_pdp(l, j));

            r.d_pdp(j, l) = cplx(-2.0 * d.gamma, dt[j] - dt[l]) * s.d_pdp(j, l) + g * F[l] * s.d_adpb[j] +
                            g * F[j] * std::conj(s.d_adpb[l]) + g * Ac * (epol_lj + hpol_lj) +
                            g * A * std::conj(epol_jl + hpol_jl);

            r.d_eh(j, l) = -2.0 * d.gamma_pop * s.d_eh(j, l) -
                           2.0 * g * std::real(Pjc * s.d_fha[l] + Plc * s.d_fea[j]) -
                           2.0 * g * std::real(Ac * (epol_jl + hpol_lj));
            r.d_ee(j, l) = -2.0 * d.gamma_pop * s.d_ee(j, l) -
                           2.0 * g * std::real(Pjc * s.d_fea[l] + Plc * s.d_fea[j]) -
                           2.0 * g * std::real(Ac * (epol_jl + epol_lj));
            r.d_hh(j, l) = -2.0 * d.gamma_pop * s.d_hh(j, l) -
                           2.0 * g * std::real(Pjc * s.d_fha[l] + Plc * s.d_fha[j]) -
                           2.0 * g * std::real(Ac * (hpol_jl + hpol_lj));
        }
    }

    visit_fields(r, FiniteCheck{});
}

SystemState rhs(const SystemState& s, const Dynamics& d, double t) {
    SystemState r = SystemState::zero(s.bins());
    rhs(s, d, t, r);
    return r;
}

SystemState rhs(const SystemState& s, const ModelParams& p, const Ensemble& ens, double t) {
    const Dynamics d = make_dynamics(p, ens, Frame::cavity);
    SystemState r = rhs(s, d, t / phys::ps);
    Eigen::VectorXd y = r.pack() / phys::ps;
    r.unpack_from(y);
    return r;
}

// ---------------------------------------------------------------------------------------------

double SymmetryReport::max_residual() const {
    return std::max({pp_asym, pdp_antiherm, ee_asym, hh_asym, diag, exc_mismatch});
}

SymmetryReport symmetry_residuals(const SystemState& s) {
    SymmetryReport rep;
    const int m = s.bins();
    for (int j = 0; j < m; ++j) {
        for (int l = 0; l < m; ++l) {
            rep.pp_asym = std::max(rep.pp_asym, std::abs(s.d_pp(j, l) - s.d_pp(l, j)));
            rep.pdp_antiherm = std::max(rep.pdp_antiherm, std::abs(s.d_pdp(j, l) - std::conj(s.d_pdp(l, j))));
            rep.ee_asym = std::max(rep.ee_asym, std::abs(s.d_ee(j, l) - s.d_ee(l, j)));
            rep.hh_asym = std::max(rep.hh_asym, std::abs(s.d_hh(j, l) - s.d_hh(l, j)));
        }
        rep.diag = std::max({rep.diag, std::abs(s.d_pp(j, j)), std::abs(s.d_epol(j, j)), std::abs(s.d_hpol(j, j)),
                             std::abs(s.d_ee(j, j)), std::abs(s.d_hh(j, j)), std::abs(s.d_eh(j, j))});
        rep.exc_mismatch = std::max(rep.exc_mismatch, std::abs(s.d_pdp(j, j) - cplx(s.d_exc[j], 0.0)));
        for (double f : {s.fe[j], s.fh[j]})
            rep.population_excess = std::max({rep.population_excess, -f, f - 1.0});
    }
    return rep;
}

SymmetryReport enforce_symmetries(SystemState& s, double tol) {
    const SymmetryReport rep = symmetry_residuals(s);
    constexpr double pop_eps = 1e-9;
    if (rep.population_excess > pop_eps)
        throw symmetry_drift("population outside [0,1] by " + std::to_string(rep.population_excess));
    if (rep.max_residual() > tol)
        throw symmetry_drift("symmetry residual " + std::to_string(rep.max_residual()) + " exceeds tolerance");

    const int m = s.bins();
    s.fe = s.fe.cwiseMax(0.0).cwiseMin(1.0);
    s.fh = s.fh.cwiseMax(0.0).cwiseMin(1.0);
    Eigen::MatrixXcd pp = 0.5 * (s.d_pp + s.d_pp.transpose());
    Eigen::MatrixXcd pdp = 0.5 * (s.d_pdp + s.d_pdp.adjoint());
    Eigen::MatrixXd ee = 0.5 * (s.d_ee + s.d_ee.transpose());
    Eigen::MatrixXd hh = 0.5 * (s.d_hh + s.d_hh.transpose());
    s.d_pp = pp;
    s.d_pdp = pdp;
    s.d_ee = ee;
    s.d_hh = hh;
    for (int j = 0; j < m; ++j) {
        s.d_pp(j, j) = 0;
        s.d_epol(j, j) = 0;
        s.d_hpol(j, j) = 0;
        s.d_ee(j, j) = 0;
        s.d_hh(j, j) = 0;
        s.d_eh(j, j) = 0;
        s.d_pdp(j, j) = s.d_exc[j];
    }
    return rep;
}

}  // namespace qdsq
