#include "qdsq/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "qdsq/errors.hpp"
#include "qdsq/newton.hpp"

namespace qdsq {

void IntegrationConfig::validate() const {
    auto pos = [](double x) { return std::isfinite(x) && x > 0; };
    if (!pos(rel_tol) || !pos(abs_tol)) throw invalid_parameter("tolerances must be > 0");
    if (!pos(dt_init) || !pos(dt_max)) throw invalid_parameter("dt_init and dt_max must be > 0");
    if (!pos(t_max)) throw invalid_parameter("t_max must be > 0");
    if (!pos(steady_tol)) throw invalid_parameter("steady_tol must be > 0");
    if (symmetry_interval < 0) throw invalid_parameter("symmetry_interval must be >= 0");
    if (!pos(newton_switch) || !pos(newton_interval))
        throw invalid_parameter("newton_switch and newton_interval must be > 0");
}

double stable_step(const Dynamics& d) {
    double dmax = 0;
    for (double x : d.detuning) dmax = std::max(dmax, std::abs(x));
    const double shift = d.frame == Frame::injection ? std::abs(d.delta_inj) : 0.0;
    const double w = 2 * dmax + 2 * shift;
    const double k = 2 * std::max({d.gamma, d.gamma_c + d.gamma, d.gamma_pop + d.gamma});
    const double lam = std::sqrt(w * w + k * k);
    return lam > 0 ? 0.75 / lam : std::numeric_limits<double>::infinity();
}

namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

DormandPrince::DormandPrince(OdeFunction f, double rel_tol, double abs_tol, double dt_min)
    : f_(std::move(f)), rtol_(rel_tol), atol_(abs_tol), dt_min_(dt_min) {}

DormandPrince::Step DormandPrince::step(double& t, Eigen::VectorXd& y, double dt) {
    using namespace dp;
    const Eigen::Index n = y.size();
    if (k1_.size() != n) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_}) v->resize(n);
        have_k1_ = false;
    }
    if (!have_k1_) {
        f_(t, y, k1_);
        ++n_eval_;
        have_k1_ = true;
    }

    Step out;
    for (;;) {
        if (!(dt >= dt_min_))
            throw stiffness_failure("step size underflow at t = " + std::to_string(t) + " ps");

        ytmp_ = y + dt * a21 * k1_;
        f_(t + c2 * dt, ytmp_, k2_);
        ytmp_ = y + dt * (a31 * k1_ + a32 * k2_);
        f_(t + c3 * dt, ytmp_, k3_);
        ytmp_ = y + dt * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        f_(t + c4 * dt, ytmp_, k4_);
        ytmp_ = y + dt * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        f_(t + c5 * dt, ytmp_, k5_);
        ytmp_ = y + dt * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        f_(t + dt, ytmp_, k6_);
        ynew_ = y + dt * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        f_(t + dt, ynew_, k7_);
        n_eval_ += 6;

        // scaled RMS error
        double acc = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double err = dt * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
            const double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(ynew_[i]));
            acc += (err / sc) * (err / sc);
        }
        const double err = n > 0 ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
        if (!std::isfinite(err)) {
            dt *= 0.2;
            ++out.rejections;
            continue;
        }

        if (err <= 1.0) {
            const double e = std::max(err, 1e-10);
            double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_old_, 0.4 / 5.0);
            fac = std::clamp(fac, 0.2, 5.0);
            if (out.rejections > 0) fac = std::min(fac, 1.0);
            err_old_ = std::max(err, 1e-4);
            t += dt;
            y.swap(ynew_);
            k1_.swap(k7_);
            out.dt_used = dt;
            out.dt_next = dt * fac;
            out.error = err;
            return out;
        }
        const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
        dt *= fac;
        ++out.rejections;
    }
}

double integrate_interval(DormandPrince& rk, double& t, double t1, Eigen::VectorXd& y, double dt, double dt_max,
                          const std::function<void(Eigen::VectorXd&)>& post_step, int hook_interval) {
    long count = 0;
    while (t < t1) {
        const double remaining = t1 - t;
        const bool last = dt >= remaining;
        const double h = std::min({dt, dt_max, remaining});
        auto st = rk.step(t, y, h);
        if (last && st.dt_used == h) t = t1;  // absorb rounding
        if (st.dt_used == h && h < dt) {
            // clipped step, keep the proposal made before clipping
        } else {
            dt = st.dt_next;
        }
        ++count;
        if (post_step && hook_interval > 0 && count % hook_interval == 0) {
            post_step(y);
            rk.reset();
        }
    }
    return dt;
}

namespace {

OdeFunction state_function(const Dynamics& d) {
    const int m = d.bins();
    auto scratch_in = std::make_shared<SystemState>(SystemState::zero(m));
    auto scratch_out = std::make_shared<SystemState>(SystemState::zero(m));
    return [d, scratch_in, scratch_out](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
        scratch_in->unpack_from(y);
        rhs(*scratch_in, d, t, *scratch_out);
        if (dydt.size() != y.size()) dydt.resize(y.size());
        scratch_out->pack_into(dydt);
    };
}

double symmetry_tolerance(const IntegrationConfig& cfg, const SystemState& s) {
    return cfg.abs_tol + cfg.rel_tol * s.max_abs();
}

std::function<void(Eigen::VectorXd&)> symmetry_hook(const IntegrationConfig& cfg, int m) {
    return [cfg, m](Eigen::VectorXd& y) {
        SystemState s = SystemState::unpack(y, m);
        enforce_symmetries(s, symmetry_tolerance(cfg, s));
        s.pack_into(y);
    };
}

}  // namespace

StateStep step(const SystemState& s, double t, double dt, const Dynamics& d, const IntegrationConfig& cfg) {
    cfg.validate();
    if (!(dt > 0)) throw invalid_parameter("dt must be > 0");
    DormandPrince rk(state_function(d), cfg.rel_tol, cfg.abs_tol, 1e-22 / phys::ps);
    Eigen::VectorXd y = s.pack();
    double tp = t / phys::ps;
    const auto st = rk.step(tp, y, dt / phys::ps);
    StateStep out;
    out.state = SystemState::unpack(y, s.bins());
    out.dt_used = st.dt_used * phys::ps;
    out.dt_next = st.dt_next * phys::ps;
    out.error_estimate = st.error;
    return out;
}

SteadyResult evolve_to_steady(const SystemState& s0, const Dynamics& d, const IntegrationConfig& cfg) {
    cfg.validate();
    if (!d.autonomous())
        throw invalid_parameter("steady state needs detuning_inj = 0 or the injection frame");
    const int m = s0.bins();
    DormandPrince rk(state_function(d), cfg.rel_tol, cfg.abs_tol, 1e-22 / phys::ps);
    auto hook = symmetry_hook(cfg, m);

    Eigen::VectorXd y = s0.pack();
    double t = 0;
    double dt = cfg.dt_init / phys::ps;
    // without Newton the residual only settles when steps stay clear of the stability edge
    const double dt_max =
        cfg.newton_polish ? cfg.dt_max / phys::ps : std::min(cfg.dt_max / phys::ps, stable_step(d));
    const double t_max = cfg.t_max / phys::ps;
    const double interval = cfg.newton_interval / phys::ps;

    SteadyResult res;
    Eigen::VectorXd f0(y.size());
    state_function(d)(0.0, y, f0);
    res.diagnostics.residual_norm = steady_residual(y, f0, d);
    std::size_t steps = 0;
    double next_newton = 0;
    auto try_newton = [&]() {
        next_newton = t + interval;
        NewtonResult nr = newton_polish(y, d, cfg.steady_tol);
        res.diagnostics.newton_iterations += nr.iterations;
        if (!nr.converged) return false;
        SystemState s = SystemState::unpack(nr.y, m);
        try {
            enforce_symmetries(s, symmetry_tolerance(cfg, s));
        } catch (const numerical_error&) {
            return false;
        }
        y = nr.y;
        res.diagnostics.residual_norm = nr.residual;
        return true;
    };
    while (res.diagnostics.residual_norm >= cfg.steady_tol && t < t_max && steps < cfg.max_steps) {
        if (cfg.newton_polish && t >= next_newton && res.diagnostics.residual_norm < cfg.newton_switch &&
            try_newton())
            break;
        const double h = std::min({dt, dt_max, t_max - t});
        const auto st = rk.step(t, y, h);
        if (!(st.dt_used == h && h < dt)) dt = st.dt_next;
        ++steps;
        if (cfg.symmetry_interval > 0 && steps % static_cast<std::size_t>(cfg.symmetry_interval) == 0) {
            hook(y);
            rk.reset();
            state_function(d)(t, y, f0);
            res.diagnostics.residual_norm = steady_residual(y, f0, d);
        } else {
            res.diagnostics.residual_norm = steady_residual(y, rk.derivative(), d);
        }
    }
    res.state = SystemState::unpack(y, m);
    res.diagnostics.symmetry = enforce_symmetries(res.state, symmetry_tolerance(cfg, res.state));
    res.diagnostics.t_reached = t * phys::ps;
    res.diagnostics.converged = res.diagnostics.residual_norm < cfg.steady_tol;
    res.diagnostics.steps = steps;
    return res;
}

SteadyResult evolve_to_steady(const SystemState& s0, const ModelParams& p, const Ensemble& ens,
                              const IntegrationConfig& cfg) {
    if (p.detuning_inj != 0.0 && injection_rate(p) > 0)
        throw invalid_parameter("steady state with detuning_inj != 0 needs the injection frame");
    return evolve_to_steady(s0, make_dynamics(p, ens, Frame::cavity), cfg);
}

Trajectory integrate_transient(const SystemState& s0, double t_end, int n_samples, const Dynamics& d,
                               const IntegrationConfig& cfg) {
    cfg.validate();
    if (!(t_end > 0)) throw invalid_parameter("t_end must be > 0");
    if (n_samples < 2) throw invalid_parameter("n_samples must be >= 2");
    const int m = s0.bins();
    DormandPrince rk(state_function(d), cfg.rel_tol, cfg.abs_tol, 1e-22 / phys::ps);
    auto hook = symmetry_hook(cfg, m);

    Trajectory tr;
    Eigen::VectorXd y = s0.pack();
    double t = 0;
    double dt = cfg.dt_init / phys::ps;
    const double t_end_ps = t_end / phys::ps;
    tr.times.push_back(0.0);
    tr.states.push_back(s0);
    for (int i = 1; i < n_samples; ++i) {
        const double t1 = t_end_ps * i / (n_samples - 1);
        dt = integrate_interval(rk, t, t1, y, dt, cfg.dt_max / phys::ps, hook, cfg.symmetry_interval);
        tr.times.push_back(t_end * i / (n_samples - 1));
        tr.states.push_back(SystemState::unpack(y, m));
    }
    return tr;
}

}  // namespace qdsq
