#include <doctest.h>

#include <cmath>
#include <random>

#include "qdsq/errors.hpp"
#include "qdsq/model.hpp"
#include "qdsq/observables.hpp"

using namespace qdsq;

namespace {

SystemState random_state(int m, std::uint64_t seed, double scale = 0.1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    SystemState s = SystemState::zero(m);
    Eigen::VectorXd y = s.pack();
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = u(rng);
    s.unpack_from(y);
    for (int j = 0; j < m; ++j) {
        s.fe[j] = 0.3 + std::abs(s.fe[j]);
        s.fh[j] = 0.4 + std::abs(s.fh[j]);
    }
    return s;
}

Dynamics small_dynamics(int m) {
    ModelParams p;
    EnsembleSpec es;
    es.n_bins = m;
    return make_dynamics(p, build_ensemble(es, p));
}

}  // namespace

TEST_CASE("coupling constant at the default operating point") {
    ModelParams p;
    CHECK(coupling_constant(p) == doctest::Approx(1.5612976803e11).epsilon(1e-9));
    CHECK(coupling_constant(p) == doctest::Approx(1.5e11).epsilon(0.05));

    ModelParams dark = p;
    dark.dipole = 0;
    CHECK(coupling_constant(dark) == 0.0);

    ModelParams longer = p;
    longer.cavity_length *= 2;
    CHECK(coupling_constant(longer) == doctest::Approx(coupling_constant(p) / std::sqrt(2.0)).epsilon(1e-12));

    ModelParams flat = p;
    flat.cavity_length = 0;
    CHECK_THROWS_AS(coupling_constant(flat), invalid_parameter);
}

TEST_CASE("parameter validation") {
    ModelParams p;
    p.gamma_c = -1;
    CHECK_THROWS_AS(p.validate(), invalid_parameter);
    p = {};
    p.background_index = 0.5;
    CHECK_THROWS_AS(p.validate(), invalid_parameter);
    p = {};
    p.inj_rate = 1e13;
    p.inj_power = 1e-6;
    CHECK_THROWS_AS(p.validate(), config_error);
    p = {};
    p.inj_rate = 1e13;
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("ensemble discretization") {
    ModelParams p;
    EnsembleSpec es;
    const Ensemble ens = build_ensemble(es, p);
    REQUIRE(ens.size() == 25);
    CHECK(ens.weight.sum() == doctest::Approx(6.283185307179586).epsilon(1e-12));
    Eigen::Index imax = 0;
    ens.weight.maxCoeff(&imax);
    CHECK(imax == 12);
    for (int i = 0; i < 12; ++i) CHECK(ens.weight[i] == doctest::Approx(ens.weight[24 - i]).epsilon(1e-12));
    for (int i = 1; i < 25; ++i) CHECK(ens.omega[i] > ens.omega[i - 1]);
    // center at hbar nu, span +-3 sigma with sigma = FWHM / 2.3548
    CHECK(ens.omega[12] == doctest::Approx(cavity_frequency(p)).epsilon(1e-12));
    const double sigma_ev = 10e-3 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    CHECK((ens.omega[24] - ens.omega[0]) * phys::hbar / phys::e_charge == doctest::Approx(6 * sigma_ev).epsilon(1e-9));

    es.n_bins = 1;
    const Ensemble one = build_ensemble(es, p);
    REQUIRE(one.size() == 1);
    CHECK(one.weight[0] == doctest::Approx(6.283185307179586).epsilon(1e-12));

    es.n_bins = 0;
    CHECK_THROWS_AS(build_ensemble(es, p), invalid_parameter);
}

TEST_CASE("pack and unpack are inverse") {
    const SystemState s = random_state(4, 7);
    const Eigen::VectorXd y = s.pack();
    CHECK(y.size() == SystemState::packed_size(4));
    const SystemState back = SystemState::unpack(y, 4);
    CHECK(back.pack() == y);
}

TEST_CASE("empty decoupled system does not move") {
    Dynamics d = small_dynamics(3);
    d.g = 0;
    d.pump = 0;
    d.a_inj = 0;
    const SystemState r = rhs(SystemState::zero(3), d, 0.0);
    CHECK(r.max_abs() == 0.0);
}

TEST_CASE("pump sector reduces to rate equations") {
    ModelParams p;
    p.pump = 3e11;
    EnsembleSpec es;
    es.n_bins = 3;
    const Ensemble ens = build_ensemble(es, p);
    SystemState s = SystemState::zero(3);
    s.fe << 0.1, 0.2, 0.3;
    s.fh << 0.3, 0.1, 0.5;
    const SystemState r = rhs(s, p, ens, 0.0);
    for (int j = 0; j < 3; ++j) {
        const double fe = s.fe[j], fh = s.fh[j];
        CHECK(r.fe[j] == doctest::Approx(-p.gamma_nr * fe - p.gamma_nl * fe * fh + p.pump * (1 - fe)).epsilon(1e-12));
        CHECK(r.fh[j] == doctest::Approx(-p.gamma_nr * fh - p.gamma_nl * fe * fh + p.pump * (1 - fh)).epsilon(1e-12));
    }
    CHECK(r.a_mean == cplx{});
    CHECK(r.pol.norm() == 0.0);
    CHECK(r.daa == cplx{});
    CHECK(r.d_pba.norm() == 0.0);
}

TEST_CASE("photon correlation decays at twice the cavity rate without sources") {
    Dynamics d = small_dynamics(2);
    SystemState s = SystemState::zero(2);
    s.dada = 0.7;
    s.fe << 0.5, 0.5;
    s.fh << 0.5, 0.5;
    const SystemState r = rhs(s, d, 0.0);
    CHECK(r.dada == doctest::Approx(-2 * d.gamma_c * 0.7).epsilon(1e-14));
}

TEST_CASE("coherence sector stays zero without injection") {
    Dynamics d = small_dynamics(4);
    SystemState s = random_state(4, 11);
    s.a_mean = 0;
    s.pol.setZero();
    s.daa = 0;
    s.d_pba.setZero();
    s.d_fea.setZero();
    s.d_fha.setZero();
    s.d_pp.setZero();
    s.d_epol.setZero();
    s.d_hpol.setZero();
    const SystemState r = rhs(s, d, 0.0);
    CHECK(r.a_mean == cplx{});
    CHECK(r.pol.norm() == 0.0);
    CHECK(r.daa == cplx{});
    CHECK(r.d_pba.norm() == 0.0);
    CHECK(r.d_fea.norm() == 0.0);
    CHECK(r.d_pp.norm() == 0.0);
}

TEST_CASE("electron-hole exchange symmetry") {
    Dynamics d = small_dynamics(3);
    SystemState s = random_state(3, 5);
    s.fh = s.fe;
    s.d_fha = s.d_fea;
    s.d_hpol = s.d_epol;
    s.d_hh = s.d_ee;
    s.d_eh = 0.5 * (s.d_eh + s.d_eh.transpose()).eval();
    const SystemState r = rhs(s, d, 0.0);
    CHECK((r.fe - r.fh).norm() == 0.0);
    CHECK((r.d_fea - r.d_fha).norm() <= 1e-15 * r.d_fea.norm());
}

TEST_CASE("right-hand side is affine in the drive") {
    Dynamics d = small_dynamics(3);
    d.inj_doublet_terms = true;
    const SystemState s = random_state(3, 3);
    d.a_inj = 0;
    const Eigen::VectorXd f0 = rhs(s, d, 0.0).pack();
    d.a_inj = 0.08;
    const Eigen::VectorXd f1 = rhs(s, d, 0.0).pack();
    d.a_inj = 0.16;
    const Eigen::VectorXd f2 = rhs(s, d, 0.0).pack();
    CHECK((f2 - f0 - 2.0 * (f1 - f0)).norm() <= 1e-14 * f0.norm());
}

TEST_CASE("non-finite derivative names the field") {
    Dynamics d = small_dynamics(2);
    SystemState s = SystemState::zero(2);
    s.dada = std::numeric_limits<double>::infinity();
    try {
        rhs(s, d, 0.0);
        FAIL("expected numerical_blowup");
    } catch (const numerical_blowup& e) {
        CHECK(e.field == "dada");
    }
}

TEST_CASE("derivative keeps the doublet symmetries") {
    Dynamics d = small_dynamics(4);
    SystemState s = random_state(4, 9);
    enforce_symmetries(s, 1.0);
    const SystemState r = rhs(s, d, 0.0);
    const SymmetryReport rep = symmetry_residuals(r);
    CHECK(rep.pp_asym < 1e-15);
    CHECK(rep.pdp_antiherm < 1e-15);
    CHECK(rep.ee_asym < 1e-15);
    CHECK(rep.hh_asym < 1e-15);
    CHECK(rep.exc_mismatch == 0.0);
}

TEST_CASE("symmetry enforcement") {
    SystemState s = random_state(3, 21);
    enforce_symmetries(s, 1.0);
    const Eigen::VectorXd once = s.pack();
    enforce_symmetries(s);
    CHECK(s.pack() == once);

    s.d_pp(0, 1) += 1e-12;
    enforce_symmetries(s);
    CHECK(s.d_pp(0, 1) == s.d_pp(1, 0));

    s.fe[1] = 1 + 1e-7;
    CHECK_THROWS_AS(enforce_symmetries(s), symmetry_drift);

    SystemState t = random_state(3, 22);
    enforce_symmetries(t, 1.0);
    t.d_ee(0, 2) += 1e-3;
    CHECK_THROWS_AS(enforce_symmetries(t), symmetry_drift);
}
