#pragma once

#include <utility>

#include "qdsq/model.hpp"

namespace qdsq {

struct PhotonStats {
    double n_mean = 0;
    double dn2 = 0;
    double dn_rel = 0;  // NaN when n_mean == 0
};

struct OutputPower {
    double photons_per_s = 0;
    double watts = 0;
};

struct Observables {
    double var_x = 0.25, var_y = 0.25;
    double n_mean = 0, dn2 = 0, dn_rel = 0;
    double g2 = 0;                 // NaN when n_mean == 0
    double p_out_photons = 0;      // photons/s
    double p_out_watts = 0;
    double squeeze_db = 0;         // NaN when n_mean == 0
    double uncertainty_product = 1.0 / 16.0;
    cplx a_mean{0, 0};             // <a>
    cplx daa{0, 0};                // <a a> - <a>^2
};

// (var_x, var_y) of X = (a + a^+)/2, Y = (a - a^+)/(2i).
std::pair<double, double> quadrature_variances(const SystemState& s);

// Photon number statistics of a Gaussian field with the state's first and second moments.
PhotonStats photon_stats(const SystemState& s);

// <a^+ a^+ a a> for the same Gaussian field.
double fourth_moment(const SystemState& s);

double g2_zero(const SystemState& s);
OutputPower output_power(const SystemState& s, const ModelParams& p);

// -10 log10(dn2 / n_mean); positive means sub-Poissonian.
double squeeze_factor(const SystemState& s);

// Drive amplitude in 1/s, real and positive.
cplx injection_amplitude(const ModelParams& p);

Observables compute_observables(const SystemState& s, const ModelParams& p);

// Raw (non-central) normally ordered field moments. Unlike cumulants these average linearly
// over a statistical mixture of states.
struct FieldMoments {
    cplx a{0, 0};        // <a>
    double n = 0;        // <a^+ a>
    cplx aa{0, 0};       // <a a>
    double g4 = 0;       // <a^+ a^+ a a>

    FieldMoments& operator+=(const FieldMoments& o);
    FieldMoments& operator*=(double w);
};

FieldMoments field_moments(const SystemState& s);

// Observables of a field known only through its moments (no Gaussian assumption).
Observables compute_observables(const FieldMoments& m, const ModelParams& p);

}  // namespace qdsq
