#include <doctest.h>

#include <cmath>

#include "qdsq/errors.hpp"
#include "qdsq/observables.hpp"

using namespace qdsq;

namespace {

SystemState field_state(cplx a, double dada, cplx daa) {
    SystemState s = SystemState::zero(1);
    s.a_mean = a;
    s.dada = dada;
    s.daa = daa;
    return s;
}

}  // namespace

TEST_CASE("quadrature variances") {
    auto [x0, y0] = quadrature_variances(field_state(0, 0, 0));
    CHECK(x0 == 0.25);
    CHECK(y0 == 0.25);
    auto [x1, y1] = quadrature_variances(field_state(0, 0.1, 0));
    CHECK(x1 == doctest::Approx(0.3));
    CHECK(y1 == doctest::Approx(0.3));
    auto [x2, y2] = quadrature_variances(field_state(2.0, 0.1, -0.08));
    CHECK(x2 == doctest::Approx(0.26));
    CHECK(y2 == doctest::Approx(0.34));
}

TEST_CASE("uncertainty bound over squeezed Gaussian states") {
    // Physical Gaussian states have |daa|^2 <= dada (dada + 1).
    for (double n = 0; n <= 3.0; n += 0.05) {
        const double m_max = std::sqrt(n * (n + 1));
        for (double f = -1.0; f <= 1.0; f += 0.1) {
            auto [x, y] = quadrature_variances(field_state(0, n, f * m_max));
            CHECK(x * y >= 1.0 / 16.0 - 1e-12);
            if (f < -0.95 && n > 0.1) CHECK(x < 0.25);
        }
    }
}

TEST_CASE("coherent and thermal limits") {
    const SystemState coh = field_state(cplx(1.3, -0.4), 0, 0);
    const PhotonStats pc = photon_stats(coh);
    CHECK(pc.n_mean == doctest::Approx(1.85));
    CHECK(pc.dn2 == doctest::Approx(1.85).epsilon(1e-15));
    CHECK(pc.dn_rel == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g2_zero(coh) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(squeeze_factor(coh) == doctest::Approx(0.0).epsilon(1e-14));

    const SystemState th = field_state(0, 2.5, 0);
    const PhotonStats pt = photon_stats(th);
    CHECK(pt.dn2 == doctest::Approx(2.5 * 3.5).epsilon(1e-15));
    CHECK(g2_zero(th) == doctest::Approx(2.0).epsilon(1e-15));

    const PhotonStats pv = photon_stats(SystemState::zero(1));
    CHECK(pv.n_mean == 0);
    CHECK(pv.dn2 == 0);
    CHECK(std::isnan(pv.dn_rel));
    CHECK_THROWS_AS(g2_zero(SystemState::zero(1)), undefined_observable);
    CHECK_THROWS_AS(squeeze_factor(SystemState::zero(1)), undefined_observable);
}

TEST_CASE("squeeze factor") {
    // amplitude-squeezed: dn2 = 0.4 n
    const double a = 3.0;
    const double n = a * a;
    // dn2 = n + dada^2 + daa^2 + 2 a^2 dada + 2 a^2 daa with dada = 0, daa real
    const double daa = (0.4 * n - n) / (2 * a * a);
    const double dada = 0.0;
    SystemState s = field_state(a, dada, daa);
    const PhotonStats p = photon_stats(s);
    const double expected = -10 * std::log10(p.dn2 / p.n_mean);
    CHECK(squeeze_factor(s) == doctest::Approx(expected));
    CHECK(-10 * std::log10(0.4) == doctest::Approx(3.9794).epsilon(1e-4));
    CHECK((squeeze_factor(s) > 0) == (p.dn_rel < 1));
}

TEST_CASE("output power") {
    ModelParams p;
    const OutputPower zero = output_power(SystemState::zero(1), p);
    CHECK(zero.photons_per_s == 0);
    const OutputPower one = output_power(field_state(0, 1.0, 0), p);
    CHECK(one.photons_per_s == doctest::Approx(4e10));
    CHECK(photon_energy(p) == doctest::Approx(2.1591802782e-19).epsilon(1e-9));
    CHECK(one.watts == doctest::Approx(8.636721113e-9).epsilon(1e-9));
}

TEST_CASE("injection amplitude") {
    ModelParams p;
    CHECK(injection_amplitude(p) == cplx{});
    p.inj_rate = 0.0;
    CHECK(injection_amplitude(p) == cplx{});
    p.inj_rate = 20e12;
    CHECK(output_time_factor(p) == doctest::Approx(3.5024229996e-4).epsilon(1e-9));
    // |A_inj| in 1/ps is sqrt(20 * T_out)
    CHECK(injection_amplitude(p).real() == doctest::Approx(8.3694958027e10).epsilon(1e-9));
    CHECK(injection_amplitude(p).imag() == 0.0);
    p.inj_units = InjectionUnits::si;
    CHECK(injection_amplitude(p).real() == doctest::Approx(8.3694958027e4).epsilon(1e-9));

    ModelParams q;
    q.inj_power = 4e-6;
    CHECK(injection_rate(q) == doctest::Approx(1.852554898e13).epsilon(1e-9));
}

TEST_CASE("moment observables agree with the Gaussian formulas") {
    const SystemState s = field_state(cplx(1.1, 0.3), 0.4, cplx(-0.2, 0.05));
    ModelParams p;
    const Observables a = compute_observables(s, p);
    const Observables b = compute_observables(field_moments(s), p);
    CHECK(b.var_x == doctest::Approx(a.var_x).epsilon(1e-13));
    CHECK(b.var_y == doctest::Approx(a.var_y).epsilon(1e-13));
    CHECK(b.n_mean == doctest::Approx(a.n_mean).epsilon(1e-13));
    CHECK(b.dn2 == doctest::Approx(a.dn2).epsilon(1e-13));
    CHECK(b.g2 == doctest::Approx(a.g2).epsilon(1e-13));
    CHECK(b.squeeze_db == doctest::Approx(a.squeeze_db).epsilon(1e-12));
    CHECK(a.uncertainty_product == doctest::Approx(a.var_x * a.var_y));
    CHECK(std::abs(b.daa - a.daa) < 1e-15);
    CHECK(b.a_mean == a.a_mean);

    FieldMoments m = field_moments(s);
    FieldMoments twice = m;
    twice += m;
    twice *= 0.5;
    CHECK(twice.n == doctest::Approx(m.n));
    CHECK(std::abs(twice.aa - m.aa) < 1e-15);
}

TEST_CASE("averaging moments over a phase spread is not averaging squeeze factors") {
    ModelParams p;
    FieldMoments mix;
    for (int k = 0; k < 2; ++k) {
        const double phi = k == 0 ? 0.3 : -0.3;
        const cplx rot = std::polar(1.0, phi);
        SystemState s = field_state(2.0 * rot, 0.1, -0.15 * rot * rot);
        FieldMoments m = field_moments(s);
        m *= 0.5;
        mix += m;
    }
    const Observables o = compute_observables(mix, p);
    CHECK(o.n_mean == doctest::Approx(4.1));
    CHECK(o.var_y > 0.25);
    CHECK(o.uncertainty_product >= 1.0 / 16.0);
}
