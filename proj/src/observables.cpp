#include "qdsq/observables.hpp"

#include <cmath>
#include <limits>

#include "qdsq/errors.hpp"

namespace qdsq {

namespace {
constexpr double nan = std::numeric_limits<double>::quiet_NaN();
}

std::pair<double, double> quadrature_variances(const SystemState& s) {
    const double base = 1.0 + 2.0 * s.dada;
    const double sq = 2.0 * s.daa.real();
    return {0.25 * (base + sq), 0.25 * (base - sq)};
}

PhotonStats photon_stats(const SystemState& s) {
    const double a2 = std::norm(s.a_mean);
    const double nth = s.dada;
    PhotonStats ps;
    ps.n_mean = a2 + nth;
    ps.dn2 = ps.n_mean + nth * nth + std::norm(s.daa) + 2.0 * a2 * nth +
             2.0 * std::real(std::conj(s.a_mean) * std::conj(s.a_mean) * s.daa);
    ps.dn_rel = ps.n_mean > 0 ? std::sqrt(ps.dn2 / ps.n_mean) : nan;
    return ps;
}

double fourth_moment(const SystemState& s) {
    const double a2 = std::norm(s.a_mean);
    const double nth = s.dada;
    return a2 * a2 + 4.0 * a2 * nth + 2.0 * std::real(std::conj(s.a_mean) * std::conj(s.a_mean) * s.daa) +
           2.0 * nth * nth + std::norm(s.daa);
}

double g2_zero(const SystemState& s) {
    const double n = std::norm(s.a_mean) + s.dada;
    if (!(n > 0)) throw undefined_observable("g2(0) needs a nonzero photon number");
    return fourth_moment(s) / (n * n);
}

OutputPower output_power(const SystemState& s, const ModelParams& p) {
    const double n = std::norm(s.a_mean) + s.dada;
    OutputPower o;
    o.photons_per_s = 2.0 * p.gamma_c * n;
    o.watts = o.photons_per_s * photon_energy(p);
    return o;
}

double squeeze_factor(const SystemState& s) {
    const PhotonStats ps = photon_stats(s);
    if (!(ps.n_mean > 0)) throw undefined_observable("squeeze factor needs a nonzero photon number");
    return -10.0 * std::log10(ps.dn2 / ps.n_mean);
}

cplx injection_amplitude(const ModelParams& p) {
    p.validate();
    const double rate = injection_rate(p);
    const double t_out = output_time_factor(p);
    if (p.inj_units == InjectionUnits::si) return {std::sqrt(rate * t_out), 0.0};
    const double amp_ps = std::sqrt(rate * phys::ps * t_out);
    return {amp_ps / phys::ps, 0.0};
}

Observables compute_observables(const SystemState& s, const ModelParams& p) {
    Observables o;
    std::tie(o.var_x, o.var_y) = quadrature_variances(s);
    o.uncertainty_product = o.var_x * o.var_y;
    const PhotonStats ps = photon_stats(s);
    o.n_mean = ps.n_mean;
    o.dn2 = ps.dn2;
    o.dn_rel = ps.dn_rel;
    if (ps.n_mean > 0) {
        o.g2 = fourth_moment(s) / (ps.n_mean * ps.n_mean);
        o.squeeze_db = -10.0 * std::log10(ps.dn2 / ps.n_mean);
    } else {
        o.g2 = nan;
        o.squeeze_db = nan;
    }
    const OutputPower op = output_power(s, p);
    o.p_out_photons = op.photons_per_s;
    o.p_out_watts = op.watts;
    o.a_mean = s.a_mean;
    o.daa = s.daa;
    return o;
}

FieldMoments& FieldMoments::operator+=(const FieldMoments& o) {
    a += o.a;
    n += o.n;
    aa += o.aa;
    g4 += o.g4;
    return *this;
}

FieldMoments& FieldMoments::operator*=(double w) {
    a *= w;
    n *= w;
    aa *= w;
    g4 *= w;
    return *this;
}

FieldMoments field_moments(const SystemState& s) {
    FieldMoments m;
    m.a = s.a_mean;
    m.n = std::norm(s.a_mean) + s.dada;
    m.aa = s.a_mean * s.a_mean + s.daa;
    m.g4 = fourth_moment(s);
    return m;
}

Observables compute_observables(const FieldMoments& m, const ModelParams& p) {
    Observables o;
    const double x2 = 0.25 * (1.0 + 2.0 * m.n + 2.0 * m.aa.real());
    const double y2 = 0.25 * (1.0 + 2.0 * m.n - 2.0 * m.aa.real());
    o.var_x = x2 - m.a.real() * m.a.real();
    o.var_y = y2 - m.a.imag() * m.a.imag();
    o.uncertainty_product = o.var_x * o.var_y;
    o.n_mean = m.n;
    o.dn2 = m.g4 + m.n - m.n * m.n;
    if (m.n > 0) {
        o.dn_rel = std::sqrt(o.dn2 / m.n);
        o.g2 = m.g4 / (m.n * m.n);
        o.squeeze_db = -10.0 * std::log10(o.dn2 / m.n);
    } else {
        o.dn_rel = nan;
        o.g2 = nan;
        o.squeeze_db = nan;
    }
    o.p_out_photons = 2.0 * p.gamma_c * m.n;
    o.p_out_watts = o.p_out_photons * photon_energy(p);
    o.a_mean = m.a;
    o.daa = m.aa - m.a * m.a;
    return o;
}

}  // namespace qdsq
