#include "qdsq/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "qdsq/errors.hpp"

namespace qdsq {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double golden = 0.6180339887498949;

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double objective(const PointResult& r) {
    if (!r.diagnostics.converged || !std::isfinite(r.obs.squeeze_db)) return -std::numeric_limits<double>::infinity();
    return r.obs.squeeze_db;
}

void set_injection(ModelParams& p, SweepParameter kind, double v) {
    p.inj_rate.reset();
    p.inj_power.reset();
    if (v == 0.0) return;
    if (kind == SweepParameter::inj_power)
        p.inj_power = v;
    else
        p.inj_rate = v;
}

SweepRow make_row(double value, const ModelParams& p, const PointResult& r) {
    SweepRow row;
    row.value = value;
    row.gamma_c = p.gamma_c;
    row.pump = p.pump;
    row.obs = r.obs;
    row.converged = r.diagnostics.converged;
    row.coupled_bins = r.coupled_bins;
    row.residual = r.diagnostics.residual_norm;
    row.audit.add(r);
    return row;
}

SweepRow failed_row(double value, const ModelParams& p, const std::exception& e) {
    SweepRow row;
    row.value = value;
    row.gamma_c = p.gamma_c;
    row.pump = p.pump;
    Observables& o = row.obs;
    o.var_x = o.var_y = o.n_mean = o.dn2 = o.dn_rel = o.g2 = nan;
    o.p_out_photons = o.p_out_watts = o.squeeze_db = o.uncertainty_product = nan;
    row.residual = nan;
    row.error = e.what();
    return row;
}

// Evaluations along the pump axis with everything else fixed. Points off the initial scan
// start from the closest solution already known.
class PumpLine {
public:
    PumpLine(const ModelParams& p, const EnsembleSpec& es, const IntegrationConfig& cfg)
        : p_(p), ens_(build_ensemble(es, p)), cfg_(cfg) {}

    const PointResult& at(double pump, bool cold = false) {
        auto it = cache_.find(pump);
        if (it != cache_.end()) return it->second;
        const SystemState* warm = nullptr;
        if (!cold && !cache_.empty()) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [q, r] : cache_) {
                const double dist = std::abs(std::log((q + 1.0) / (pump + 1.0)));
                if (r.diagnostics.converged && dist < best) {
                    best = dist;
                    warm = &r.state;
                }
            }
        }
        ModelParams p = p_;
        p.pump = pump;
        PointResult r = solve_point(p, ens_, cfg_, warm);
        if (warm && !r.diagnostics.converged) r = solve_point(p, ens_, cfg_);
        ++evaluations_;
        return cache_.emplace(pump, std::move(r)).first->second;
    }

    const std::map<double, PointResult>& points() const { return cache_; }
    InvariantAudit audit() const {
        InvariantAudit a;
        for (const auto& [q, r] : cache_) a.add(r);
        return a;
    }
    int evaluations() const { return evaluations_; }
    const ModelParams& params() const { return p_; }

private:
    ModelParams p_;
    Ensemble ens_;
    IntegrationConfig cfg_;
    std::map<double, PointResult> cache_;
    int evaluations_ = 0;
};

std::vector<double> log_scan(const PumpSearch& s) {
    std::vector<double> v;
    const double lo = std::log(std::max(s.p_min, 1e-300)), hi = std::log(s.p_max);
    for (int i = 0; i < s.scan_points; ++i) {
        const double x = i == 0 ? s.p_min : i == s.scan_points - 1 ? s.p_max
                                                                    : std::exp(lo + (hi - lo) * i / (s.scan_points - 1));
        v.push_back(x);
    }
    return v;
}

PumpOptimum maximize(PumpLine& line, const PumpSearch& s) {
    const std::vector<double> scan = log_scan(s);
    std::size_t k = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scan.size(); ++i) {
        const double f = objective(line.at(scan[i], true));
        if (f > best) {
            best = f;
            k = i;
        }
    }
    double a = scan[k == 0 ? 0 : k - 1];
    double b = scan[std::min(k + 1, scan.size() - 1)];
    const double tol = s.rel_tol * (s.p_max - s.p_min);
    double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
    double f1 = objective(line.at(x1)), f2 = objective(line.at(x2));
    while (b - a > tol) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = objective(line.at(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = objective(line.at(x2));
        }
    }
    PumpOptimum opt;
    double fbest = -std::numeric_limits<double>::infinity();
    for (const auto& [q, r] : line.points()) {
        const double f = objective(r);
        if (f > fbest) {
            fbest = f;
            opt.pump = q;
            opt.point = r;
        }
    }
    if (!std::isfinite(fbest)) {
        opt.pump = scan[k];
        opt.point = line.at(scan[k]);
    }
    opt.evaluations = line.evaluations();
    opt.audit = line.audit();
    return opt;
}

// First pump (ascending) at which squeeze_db >= level, refined by bisection between the
// bracketing evaluations. Returns NaN when the level is never reached.
double first_crossing(PumpLine& line, double level, double tol) {
    auto reached = [&](const PointResult& r) { return objective(r) >= level; };
    double lo = nan, hi = nan;
    double prev = nan;
    for (const auto& [q, r] : line.points()) {
        if (reached(r)) {
            hi = q;
            lo = prev;
            break;
        }
        prev = q;
    }
    if (std::isnan(hi)) return nan;
    if (std::isnan(lo)) return hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (reached(line.at(mid)))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace

void InvariantAudit::add(const PointResult& r) {
    ++states;
    const SymmetryReport& rep = r.diagnostics.symmetry;
    double pop = rep.population_excess;
    for (const Eigen::VectorXd* f : {&r.state.fe, &r.state.fh})
        pop = std::max({pop, -f->minCoeff(), f->maxCoeff() - 1.0});
    population_excess = std::max(population_excess, pop);
    symmetry_residual = std::max(symmetry_residual, std::max(rep.max_residual(), symmetry_residuals(r.state).max_residual()));
    min_product = std::min(min_product, r.obs.uncertainty_product);
    min_n_mean = std::min(min_n_mean, r.obs.n_mean);
}

void InvariantAudit::merge(const InvariantAudit& o) {
    states += o.states;
    population_excess = std::max(population_excess, o.population_excess);
    symmetry_residual = std::max(symmetry_residual, o.symmetry_residual);
    min_product = std::min(min_product, o.min_product);
    min_n_mean = std::min(min_n_mean, o.min_n_mean);
}

const char* to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::pump: return "pump";
        case SweepParameter::inj_power: return "inj_power";
        case SweepParameter::inj_rate: return "inj_rate";
        case SweepParameter::gamma_c: return "gamma_c";
        case SweepParameter::fwhm: return "fwhm";
    }
    return "?";
}

SweepParameter parse_sweep_parameter(const std::string& s) {
    for (auto p : {SweepParameter::pump, SweepParameter::inj_power, SweepParameter::inj_rate, SweepParameter::gamma_c,
                   SweepParameter::fwhm})
        if (s == to_string(p)) return p;
    throw invalid_parameter("unknown sweep parameter '" + s + "'");
}

void SweepSpec::validate() const {
    model.validate();
    ensemble.validate();
    integration.validate();
    if (grid.empty()) throw invalid_parameter("sweep grid is empty");
    if (!finite_all(grid)) throw invalid_parameter("sweep grid has non-finite values");
    if (std::any_of(grid.begin(), grid.end(), [](double x) { return x < 0; }))
        throw invalid_parameter("sweep grid values must be >= 0");
    if (!finite_all(gamma_c_list) ||
        std::any_of(gamma_c_list.begin(), gamma_c_list.end(), [](double x) { return x <= 0; }))
        throw invalid_parameter("gamma_c list must hold positive values");
    if (!finite_all(targets) || !std::is_sorted(targets.begin(), targets.end()))
        throw invalid_parameter("squeeze targets must be finite and ascending");
    const auto& s = pump_search;
    if (!(s.p_min >= 0 && s.p_max > s.p_min && std::isfinite(s.p_max)))
        throw invalid_parameter("pump search needs 0 <= p_min < p_max");
    if (s.scan_points < 3) throw invalid_parameter("pump search needs at least 3 scan points");
    if (!(s.rel_tol > 0 && s.rel_tol < 1)) throw invalid_parameter("pump search tolerance must lie in (0, 1)");
    if (jitter) {
        if (jitter->n_samples < 1) throw invalid_parameter("jitter n_samples must be >= 1");
        if (!(jitter->cutoff > 0)) throw invalid_parameter("jitter cutoff must be > 0");
    }
    if (threads < 1) throw invalid_parameter("threads must be >= 1");
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body,
                  const Progress& progress) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    std::mutex mu;
    std::size_t done = 0;
    auto finished = [&] {
        std::lock_guard<std::mutex> lock(mu);
        ++done;
        if (progress) progress(done, n);
    };
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
            finished();
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    body(i);
                    finished();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

int coupled_bin_count(const SystemState& s, double frac) {
    const int m = s.bins();
    auto count = [&](const Eigen::VectorXcd& v) {
        const double mx = v.cwiseAbs().maxCoeff();
        if (!(mx > 0)) return -1;
        int c = 0;
        for (int j = 0; j < m; ++j) c += std::abs(v[j]) > frac * mx;
        return c;
    };
    if (m == 0) return 0;
    int c = count(s.pol);
    if (c < 0) c = count(s.d_adpb);
    return std::max(c, 0);
}

PointResult solve_point(const ModelParams& p, const Ensemble& ens, const IntegrationConfig& cfg,
                        const SystemState* warm) {
    const Dynamics d = make_dynamics(p, ens, Frame::injection);
    const SystemState s0 = warm ? *warm : SystemState::zero(ens.size());
    SteadyResult sr = evolve_to_steady(s0, d, cfg);
    PointResult r;
    r.obs = compute_observables(sr.state, p);
    r.coupled_bins = coupled_bin_count(sr.state);
    r.diagnostics = sr.diagnostics;
    r.state = std::move(sr.state);
    return r;
}

PumpOptimum optimize_pump(const ModelParams& p, const EnsembleSpec& es, const IntegrationConfig& cfg,
                          const PumpSearch& search) {
    PumpLine line(p, es, cfg);
    return maximize(line, search);
}

SweepResult sweep_pump(const SweepSpec& spec, const Progress& progress) {
    spec.validate();
    SweepResult res;
    res.parameter = SweepParameter::pump;
    res.rows.resize(spec.grid.size());
    const Ensemble ens = build_ensemble(spec.ensemble, spec.model);
    parallel_for(spec.grid.size(), spec.threads, [&](std::size_t i) {
        ModelParams p = spec.model;
        p.pump = spec.grid[i];
        try {
            res.rows[i] = make_row(spec.grid[i], p, solve_point(p, ens, spec.integration));
        } catch (const numerical_error& e) {
            res.rows[i] = failed_row(spec.grid[i], p, e);
        }
    }, progress);
    return res;
}

SweepResult sweep_injection(const SweepSpec& spec, const Progress& progress) {
    spec.validate();
    if (spec.parameter != SweepParameter::inj_power && spec.parameter != SweepParameter::inj_rate)
        throw invalid_parameter("injection sweep needs parameter inj_power or inj_rate");
    const std::vector<double> gcs = spec.gamma_c_list.empty() ? std::vector<double>{spec.model.gamma_c}
                                                              : spec.gamma_c_list;
    const std::size_t ng = spec.grid.size();
    SweepResult res;
    res.parameter = spec.parameter;
    res.rows.resize(gcs.size() * ng);
    parallel_for(res.rows.size(), spec.threads, [&](std::size_t i) {
        ModelParams p = spec.model;
        p.gamma_c = gcs[i / ng];
        const double v = spec.grid[i % ng];
        set_injection(p, spec.parameter, v);
        try {
            const PumpOptimum opt = optimize_pump(p, spec.ensemble, spec.integration, spec.pump_search);
            p.pump = opt.pump;
            res.rows[i] = make_row(v, p, opt.point);
            res.rows[i].audit = opt.audit;
        } catch (const numerical_error& e) {
            res.rows[i] = failed_row(v, p, e);
        }
    }, progress);
    return res;
}

std::vector<double> jitter_samples(const JitterSpec& js, double fwhm_hz, std::uint64_t seed, std::uint64_t index) {
    std::vector<double> out(static_cast<std::size_t>(js.n_samples), 0.0);
    if (fwhm_hz == 0.0) return out;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    const double limit = js.cutoff * fwhm_hz;
    std::cauchy_distribution<double> lorentz(0.0, 0.5 * fwhm_hz);
    std::normal_distribution<double> gauss(0.0, fwhm_hz / (2.0 * std::sqrt(2.0 * std::log(2.0))));
    for (double& f : out) {
        do {
            f = js.distribution == JitterDistribution::lorentzian ? lorentz(rng) : gauss(rng);
        } while (std::abs(f) > limit);
    }
    return out;
}

SweepResult linewidth_jitter(const SweepSpec& spec, const Progress& progress) {
    spec.validate();
    if (!spec.jitter) throw invalid_parameter("linewidth sweep needs a jitter specification");
    const JitterSpec js = *spec.jitter;
    ModelParams base = spec.model;
    if (base.detuning_inj != 0.0) throw invalid_parameter("linewidth sweep is centred on detuning_inj = 0");
    const Ensemble ens = build_ensemble(spec.ensemble, base);

    PointResult centre;
    InvariantAudit centre_audit;
    if (spec.optimize_pump) {
        const PumpOptimum opt = optimize_pump(base, spec.ensemble, spec.integration, spec.pump_search);
        base.pump = opt.pump;
        centre = opt.point;
        centre_audit = opt.audit;
    } else {
        centre = solve_point(base, ens, spec.integration);
        centre_audit.add(centre);
    }

    SweepResult res;
    res.parameter = SweepParameter::fwhm;
    res.rows.resize(spec.grid.size());
    parallel_for(spec.grid.size(), spec.threads, [&](std::size_t i) {
        const double fwhm = spec.grid[i];
        if (fwhm == 0.0) {
            res.rows[i] = make_row(fwhm, base, centre);
            res.rows[i].audit = centre_audit;
            return;
        }
        try {
            const std::vector<double> offsets = jitter_samples(js, fwhm, spec.seed, i);
            FieldMoments avg;
            double sq_sum = 0;
            bool converged = centre.diagnostics.converged;
            double residual = 0;
            InvariantAudit audit = centre_audit;
            for (double f : offsets) {
                ModelParams p = base;
                p.detuning_inj = 2.0 * phys::pi * f;
                const PointResult r = solve_point(p, ens, spec.integration, &centre.state);
                FieldMoments fm = field_moments(r.state);
                avg += fm;
                sq_sum += r.obs.squeeze_db;
                converged = converged && r.diagnostics.converged;
                residual = std::max(residual, r.diagnostics.residual_norm);
                audit.add(r);
            }
            const double w = 1.0 / static_cast<double>(offsets.size());
            avg *= w;
            SweepRow row = make_row(fwhm, base, centre);
            row.obs = compute_observables(avg, base);
            if (js.average_squeeze) row.obs.squeeze_db = sq_sum * w;
            row.converged = converged;
            row.residual = residual;
            row.audit = audit;
            res.rows[i] = row;
        } catch (const numerical_error& e) {
            res.rows[i] = failed_row(fwhm, base, e);
        }
    }, progress);
    return res;
}

CavityResult sweep_cavity(const SweepSpec& spec, const Progress& progress) {
    spec.validate();
    CavityResult res;
    res.targets = spec.targets;
    res.rows.resize(spec.grid.size());
    parallel_for(spec.grid.size(), spec.threads, [&](std::size_t i) {
        ModelParams p = spec.model;
        p.gamma_c = spec.grid[i];
        CavityRow row;
        row.gamma_c = p.gamma_c;
        try {
            PumpLine line(p, spec.ensemble, spec.integration);
            const PumpOptimum opt = maximize(line, spec.pump_search);
            row.max_pump = opt.pump;
            row.max_squeeze_db = opt.point.obs.squeeze_db;
            const double tol = spec.pump_search.rel_tol * (spec.pump_search.p_max - spec.pump_search.p_min);
            auto p_out = [&](double pump) { return std::isnan(pump) ? nan : line.at(pump).obs.p_out_watts; };
            row.onset_pump = first_crossing(line, 0.0, tol);
            row.onset_p_out_w = p_out(row.onset_pump);
            for (double t : spec.targets) {
                const double q = first_crossing(line, t, tol);
                row.target_pump.push_back(q);
                row.target_p_out_w.push_back(p_out(q));
            }
            row.converged = std::all_of(line.points().begin(), line.points().end(),
                                        [](const auto& kv) { return kv.second.diagnostics.converged; });
            row.audit = line.audit();
        } catch (const numerical_error&) {
            row.onset_pump = row.onset_p_out_w = row.max_squeeze_db = row.max_pump = nan;
            row.target_pump.assign(spec.targets.size(), nan);
            row.target_p_out_w.assign(spec.targets.size(), nan);
            row.converged = false;
        }
        res.rows[i] = row;
    }, progress);
    return res;
}

}  // namespace qdsq
