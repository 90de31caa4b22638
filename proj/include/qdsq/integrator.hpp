#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "qdsq/model.hpp"

namespace qdsq {

struct IntegrationConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double dt_init = 1e-15;     // s
    double dt_max = 1e-11;      // s
    double t_max = 50e-9;       // s
    double steady_tol = 1e-9;   // relative change per cavity lifetime
    int symmetry_interval = 100;
    std::size_t max_steps = 50'000'000;
    // Newton refinement of the fixed point once forward integration has brought the residual
    // below newton_switch; retried every newton_interval of simulated time on failure.
    bool newton_polish = true;
    double newton_switch = 2e-2;
    double newton_interval = 50e-12;   // s

    void validate() const;
    bool operator==(const IntegrationConfig&) const = default;
};

// Generic first-order system y' = f(t, y) on a real vector, time in ps.
using OdeFunction = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

// Embedded Dormand-Prince 5(4) pair with PI step-size control and FSAL reuse.
class DormandPrince {
public:
    DormandPrince(OdeFunction f, double rel_tol, double abs_tol, double dt_min = 1e-10);

    struct Step {
        double dt_used = 0;
        double dt_next = 0;
        double error = 0;       // scaled error norm of the accepted step (<= 1)
        int rejections = 0;
    };

    // Resets the FSAL cache, e.g. after y was modified outside step().
    void reset() { have_k1_ = false; }

    // Advances (t, y) by one accepted step of at most dt. Throws stiffness_failure when dt
    // drops below dt_min.
    Step step(double& t, Eigen::VectorXd& y, double dt);

    // Derivative at the current point (valid after a step).
    const Eigen::VectorXd& derivative() const { return k1_; }

    long evaluations() const { return n_eval_; }

private:
    OdeFunction f_;
    double rtol_, atol_, dt_min_;
    double err_old_ = 1e-4;
    bool have_k1_ = false;
    long n_eval_ = 0;
    Eigen::VectorXd k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_;
};

// Integrates from t0 to t1 (ps) in place. post_step(y) runs every `hook_interval` accepted steps.
// Returns the step size to use next.
double integrate_interval(DormandPrince& rk, double& t, double t1, Eigen::VectorXd& y, double dt, double dt_max,
                          const std::function<void(Eigen::VectorXd&)>& post_step = {}, int hook_interval = 0);

struct SteadyDiagnostics {
    double t_reached = 0;       // s
    double residual_norm = 0;   // |rhs| / (gamma_c |y|)
    bool converged = false;
    std::size_t steps = 0;
    int newton_iterations = 0;
    SymmetryReport symmetry;    // residuals removed by the final symmetrization
};

struct SteadyResult {
    SystemState state;
    SteadyDiagnostics diagnostics;
};

// Largest explicit step (ps) that keeps the fastest decaying oscillation of d inside the
// Dormand-Prince stability region.
double stable_step(const Dynamics& d);

// Forward integration until the relative rate of change per cavity lifetime drops below
// steady_tol, optionally finished by Newton. Needs an autonomous right-hand side.
SteadyResult evolve_to_steady(const SystemState& s0, const Dynamics& d, const IntegrationConfig& cfg);
SteadyResult evolve_to_steady(const SystemState& s0, const ModelParams& p, const Ensemble& ens,
                              const IntegrationConfig& cfg);

struct Trajectory {
    std::vector<double> times;   // s
    std::vector<SystemState> states;
};

// Uniform samples on [0, t_end] (t_end in s), n_samples >= 2 including both ends.
Trajectory integrate_transient(const SystemState& s0, double t_end, int n_samples, const Dynamics& d,
                               const IntegrationConfig& cfg);

// Single adaptive step on a SystemState (times in s).
struct StateStep {
    SystemState state;
    double dt_used = 0, dt_next = 0, error_estimate = 0;
};
StateStep step(const SystemState& s, double t, double dt, const Dynamics& d, const IntegrationConfig& cfg);

}  // namespace qdsq
