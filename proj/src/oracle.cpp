#include "qdsq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qdsq/errors.hpp"

namespace qdsq {

namespace {

using Sp = Eigen::SparseMatrix<cplx>;
using Dense = Eigen::MatrixXcd;

Sp kron(const Sp& x, const Sp& y) {
    Sp out(x.rows() * y.rows(), x.cols() * y.cols());
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(x.nonZeros() * y.nonZeros()));
    for (int kx = 0; kx < x.outerSize(); ++kx)
        for (Sp::InnerIterator ix(x, kx); ix; ++ix)
            for (int ky = 0; ky < y.outerSize(); ++ky)
                for (Sp::InnerIterator iy(y, ky); iy; ++iy)
                    trip.emplace_back(ix.row() * y.rows() + iy.row(), ix.col() * y.cols() + iy.col(),
                                      ix.value() * iy.value());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

Sp identity(int n) {
    Sp i(n, n);
    i.setIdentity();
    return i;
}

// slot 0 is the photon mode, slot 1.. the dots
Sp embed(const Sp& op, int slot, int fock, int n_dots) {
    Sp out = slot == 0 ? op : identity(fock);
    for (int d = 1; d <= n_dots; ++d) out = kron(out, slot == d ? op : identity(4));
    return out;
}

cplx expect(const Sp& op, const Dense& rho) {
    cplx acc{};
    for (int k = 0; k < op.outerSize(); ++k)
        for (Sp::InnerIterator it(op, k); it; ++it) acc += it.value() * rho(it.col(), it.row());
    return acc;
}

Sp adjoint(const Sp& x) { return Sp(x.adjoint()); }

}  // namespace

int OracleConfig::dimension() const {
    int d = fock_cutoff;
    for (int i = 0; i < n_dots; ++i) d *= 4;
    return d;
}

void OracleConfig::validate() const {
    if (n_dots < 1 || n_dots > 2) throw config_error("oracle n_dots must be 1 or 2");
    if (fock_cutoff < 2) throw config_error("oracle fock_cutoff must be >= 2");
    if (dimension() > 256) throw config_error("oracle Hilbert dimension " + std::to_string(dimension()) + " exceeds 256");
    if (static_cast<int>(detuning.size()) != n_dots) throw config_error("oracle needs one detuning per dot");
    for (double r : {g, gamma_c, gamma, gamma_nr, gamma_nl, pump})
        if (!std::isfinite(r) || r < 0) throw config_error("oracle rates must be finite and >= 0");
    const double pure = gamma - pump - gamma_nr - 0.5 * gamma_nl;
    if (pure < -1e-12 * std::max(gamma, 1.0))
        throw config_error("gamma is smaller than the coherence decay implied by pump, gamma_nr and gamma_nl/2");
    if (!(t_end > 0) || n_samples < 2) throw config_error("oracle needs t_end > 0 and n_samples >= 2");
}

Generator::Generator(const OracleConfig& cfg)
    : n_dots_(cfg.n_dots), fock_(cfg.fock_cutoff), dim_(cfg.dimension()) {
    cfg.validate();
    const double ps = phys::ps;
    a_inj_ = cfg.a_inj * ps;
    delta_inj_ = cfg.delta_inj * ps;

    Sp a1(fock_, fock_);
    for (int n = 1; n < fock_; ++n) a1.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
    Sp cd1(4, 4), bd1(4, 4);
    cd1.insert(1, 0) = 1.0;
    cd1.insert(3, 2) = 1.0;
    bd1.insert(2, 0) = 1.0;
    bd1.insert(3, 1) = -1.0;

    a_ = embed(a1, 0, fock_, n_dots_);
    ad_ = adjoint(a_);
    for (int j = 0; j < n_dots_; ++j) {
        Sp c = embed(adjoint(cd1), j + 1, fock_, n_dots_);
        Sp b = embed(adjoint(bd1), j + 1, fock_, n_dots_);
        c_.push_back(c);
        b_.push_back(b);
        p_.push_back(Sp(c * b));
        ne_.push_back(Sp(adjoint(c) * c));
        nh_.push_back(Sp(adjoint(b) * b));
    }

    const cplx I(0, 1);
    const double g = cfg.g * ps;
    Sp h(dim_, dim_);
    for (int j = 0; j < n_dots_; ++j) {
        h += (-cfg.detuning[j] * ps) * ne_[j];
        h += (-I * g) * Sp(adjoint(p_[j]) * a_ - ad_ * p_[j]);
    }

    auto add = [&](double rate, const Sp& op) {
        if (rate <= 0) return;
        jumps_.push_back(std::sqrt(rate) * op);
    };
    add(2.0 * cfg.gamma_c * ps, a_);
    const double pure = std::max(0.0, cfg.gamma - cfg.pump - cfg.gamma_nr - 0.5 * cfg.gamma_nl) * ps;
    for (int j = 0; j < n_dots_; ++j) {
        add(cfg.pump * ps, adjoint(c_[j]));
        add(cfg.pump * ps, adjoint(b_[j]));
        add(cfg.gamma_nr * ps, c_[j]);
        add(cfg.gamma_nr * ps, b_[j]);
        add(cfg.gamma_nl * ps, Sp(b_[j] * c_[j]));
        add(2.0 * pure, ne_[j]);
    }
    h_eff_ = h;
    for (const auto& l : jumps_) {
        jumps_dag_.push_back(adjoint(l));
        h_eff_ -= (0.5 * I) * Sp(jumps_dag_.back() * l);
    }
    h_eff_.makeCompressed();
}

DensityMatrix Generator::apply(const DensityMatrix& rho, double t) const {
    const cplx I(0, 1);
    Dense x = h_eff_ * rho;
    if (a_inj_ != cplx{}) {
        const cplx e = a_inj_ * std::exp(I * (delta_inj_ * t));
        x += I * (e * (ad_ * rho) - std::conj(e) * (a_ * rho));
    }
    Dense out = -I * x + I * x.adjoint();
    for (const auto& l : jumps_) {
        Dense z = l * rho.adjoint();
        out += l * z.adjoint();
    }
    return out;
}

SystemState Generator::moments(const DensityMatrix& rho) const {
    const int m = n_dots_;
    SystemState s = SystemState::zero(m);
    const cplx a = expect(a_, rho);
    s.a_mean = a;
    s.daa = expect(Sp(a_ * a_), rho) - a * a;
    s.dada = (expect(Sp(ad_ * a_), rho) - std::norm(a)).real();
    for (int j = 0; j < m; ++j) {
        s.pol[j] = expect(p_[j], rho);
        s.fe[j] = expect(ne_[j], rho).real();
        s.fh[j] = expect(nh_[j], rho).real();
    }
    for (int j = 0; j < m; ++j) {
        const cplx P = s.pol[j];
        s.d_pba[j] = expect(Sp(p_[j] * a_), rho) - P * a;
        s.d_fea[j] = expect(Sp(ne_[j] * a_), rho) - s.fe[j] * a;
        s.d_fha[j] = expect(Sp(nh_[j] * a_), rho) - s.fh[j] * a;
        s.d_adpb[j] = expect(Sp(ad_ * p_[j]), rho) - std::conj(a) * P;
        s.d_exc[j] = (expect(Sp(ne_[j] * nh_[j]), rho) - s.fe[j] * s.fh[j] - std::norm(P)).real();
        s.d_pdp(j, j) = s.d_exc[j];
        for (int l = 0; l < m; ++l) {
            if (l == j) continue;
            const cplx Pl = s.pol[l];
            s.d_pp(j, l) = expect(Sp(p_[j] * p_[l]), rho) - P * Pl;
            s.d_pdp(j, l) = expect(Sp(adjoint(p_[l]) * p_[j]), rho) - std::conj(Pl) * P;
            s.d_epol(j, l) = expect(Sp(ne_[j] * p_[l]), rho) - s.fe[j] * Pl;
            s.d_hpol(j, l) = expect(Sp(nh_[j] * p_[l]), rho) - s.fh[j] * Pl;
            s.d_eh(j, l) = (expect(Sp(ne_[j] * nh_[l]), rho) - s.fe[j] * s.fh[l]).real();
            s.d_ee(j, l) = (expect(Sp(ne_[j] * ne_[l]), rho) - s.fe[j] * s.fe[l]).real();
            s.d_hh(j, l) = (expect(Sp(nh_[j] * nh_[l]), rho) - s.fh[j] * s.fh[l]).real();
        }
    }
    return s;
}

double Generator::fourth_moment(const DensityMatrix& rho) const {
    return expect(Sp(ad_ * ad_ * a_ * a_), rho).real();
}

double Generator::top_fock_population(const DensityMatrix& rho) const {
    const int block = dim_ / fock_;
    double acc = 0;
    for (int i = 0; i < block; ++i) acc += rho((fock_ - 1) * block + i, (fock_ - 1) * block + i).real();
    return acc;
}

DensityMatrix Generator::product_state(cplx alpha, double fe, double fh) const {
    Eigen::VectorXcd v(fock_);
    double lf = 0;  // log n!
    for (int n = 0; n < fock_; ++n) {
        if (n > 0) lf += std::log(static_cast<double>(n));
        const cplx pw = n == 0 ? cplx(1.0) : std::pow(alpha, n);
        v[n] = std::exp(-0.5 * std::norm(alpha) - 0.5 * lf) * pw;
    }
    v /= v.norm();
    Dense rho = v * v.adjoint();
    Dense dot = Dense::Zero(4, 4);
    dot(0, 0) = (1 - fe) * (1 - fh);
    dot(1, 1) = fe * (1 - fh);
    dot(2, 2) = (1 - fe) * fh;
    dot(3, 3) = fe * fh;
    for (int j = 0; j < n_dots_; ++j) {
        Dense next(rho.rows() * 4, rho.cols() * 4);
        for (int r = 0; r < rho.rows(); ++r)
            for (int c = 0; c < rho.cols(); ++c) next.block(4 * r, 4 * c, 4, 4) = rho(r, c) * dot;
        rho = next;
    }
    return rho;
}

OracleRun evolve(const DensityMatrix& rho0, const OracleConfig& cfg, const IntegrationConfig& icfg) {
    cfg.validate();
    icfg.validate();
    Generator gen(cfg);
    const int n = gen.dimension();
    if (rho0.rows() != n || rho0.cols() != n) throw grid_mismatch("initial density matrix has wrong dimension");

    auto to_vec = [n](const Dense& r, Eigen::VectorXd& y) {
        y.resize(2 * static_cast<Eigen::Index>(n) * n);
        Eigen::Map<Eigen::MatrixXd>(y.data(), n, n) = r.real();
        Eigen::Map<Eigen::MatrixXd>(y.data() + static_cast<Eigen::Index>(n) * n, n, n) = r.imag();
    };
    auto to_mat = [n](const Eigen::VectorXd& y) {
        Dense r(n, n);
        r.real() = Eigen::Map<const Eigen::MatrixXd>(y.data(), n, n);
        r.imag() = Eigen::Map<const Eigen::MatrixXd>(y.data() + static_cast<Eigen::Index>(n) * n, n, n);
        return r;
    };
    OdeFunction f = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { to_vec(gen.apply(to_mat(y), t), dy); };

    DormandPrince rk(f, icfg.rel_tol, icfg.abs_tol, 1e-22 / phys::ps);
    OracleRun run;
    run.min_eigenvalue = 1.0;
    auto record = [&](double t_s, const Dense& rho) {
        run.times.push_back(t_s);
        run.moments.push_back(gen.moments(rho));
        run.fourth_moment.push_back(gen.fourth_moment(rho));
        run.max_trace_error = std::max(run.max_trace_error, std::abs(rho.trace() - 1.0));
        run.max_hermiticity_error = std::max(run.max_hermiticity_error, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        run.min_eigenvalue = std::min(run.min_eigenvalue, lo);
        run.max_top_fock = std::max(run.max_top_fock, gen.top_fock_population(rho));
        if (lo < -1e-6)
            throw truncation_error("density matrix lost positivity (" + std::to_string(lo) +
                                   "); increase fock_cutoff");
    };

    Eigen::VectorXd y;
    to_vec(rho0, y);
    record(0.0, rho0);
    double t = 0, dt = icfg.dt_init / phys::ps;
    const double t_end = cfg.t_end / phys::ps;
    for (int i = 1; i < cfg.n_samples; ++i) {
        const double t1 = t_end * i / (cfg.n_samples - 1);
        dt = integrate_interval(rk, t, t1, y, dt, icfg.dt_max / phys::ps);
        record(cfg.t_end * i / (cfg.n_samples - 1), to_mat(y));
    }
    return run;
}

Dynamics cluster_dynamics(const OracleConfig& cfg) {
    cfg.validate();
    const double ps = phys::ps;
    Dynamics d;
    d.g = cfg.g * ps;
    d.gamma_c = cfg.gamma_c * ps;
    d.gamma = cfg.gamma * ps;
    d.gamma_nr = cfg.gamma_nr * ps;
    d.gamma_nl = cfg.gamma_nl * ps;
    d.pump = cfg.pump * ps;
    d.gamma_pop = d.gamma_nr;
    d.a_inj = cfg.a_inj * ps;
    d.delta_inj = cfg.delta_inj * ps;
    d.frame = Frame::cavity;
    d.detuning = Eigen::Map<const Eigen::VectorXd>(cfg.detuning.data(), cfg.n_dots) * ps;
    d.weight = Eigen::VectorXd::Ones(cfg.n_dots);
    return d;
}

// ---------------------------------------------------------------------------------------------

std::vector<cplx> field_values(const SystemState& s, const std::string& f) {
    auto vec = [](const auto& v) {
        std::vector<cplx> out;
        for (Eigen::Index i = 0; i < v.size(); ++i) out.emplace_back(v[i]);
        return out;
    };
    auto offdiag = [](const auto& mat) {
        std::vector<cplx> out;
        for (Eigen::Index j = 0; j < mat.rows(); ++j)
            for (Eigen::Index l = 0; l < mat.cols(); ++l)
                if (j != l) out.emplace_back(mat(j, l));
        return out;
    };
    if (f == "a_mean") return {s.a_mean};
    if (f == "n_photon") return {cplx(std::norm(s.a_mean) + s.dada)};
    if (f == "pol") return vec(s.pol);
    if (f == "fe") return vec(s.fe);
    if (f == "fh") return vec(s.fh);
    if (f == "daa") return {s.daa};
    if (f == "dada") return {cplx(s.dada)};
    if (f == "d_pba") return vec(s.d_pba);
    if (f == "d_fea") return vec(s.d_fea);
    if (f == "d_fha") return vec(s.d_fha);
    if (f == "d_adpb") return vec(s.d_adpb);
    if (f == "d_exc") return vec(s.d_exc);
    if (f == "d_pp") return offdiag(s.d_pp);
    if (f == "d_pdp") return offdiag(s.d_pdp);
    if (f == "d_epol") return offdiag(s.d_epol);
    if (f == "d_hpol") return offdiag(s.d_hpol);
    if (f == "d_eh") return offdiag(s.d_eh);
    if (f == "d_ee") return offdiag(s.d_ee);
    if (f == "d_hh") return offdiag(s.d_hh);
    throw invalid_parameter("unknown field '" + f + "'");
}

CompareReport compare(const Trajectory& cluster, const Trajectory& exact, double tol_rel,
                      const std::vector<std::string>& fields, double floor) {
    if (cluster.times.size() != exact.times.size() || cluster.states.size() != exact.states.size() ||
        cluster.states.size() != cluster.times.size())
        throw grid_mismatch("trajectories have different sample counts");
    for (std::size_t i = 0; i < cluster.times.size(); ++i) {
        const double tol = 1e-9 * std::max(std::abs(exact.times[i]), std::abs(exact.times.back()));
        if (std::abs(cluster.times[i] - exact.times[i]) > tol) throw grid_mismatch("sample times differ");
    }
    CompareReport rep;
    for (const auto& f : fields) {
        FieldDeviation fd;
        fd.field = f;
        double dev = 0;
        for (std::size_t i = 0; i < exact.states.size(); ++i) {
            const auto e = field_values(exact.states[i], f);
            const auto c = field_values(cluster.states[i], f);
            if (e.size() != c.size()) throw grid_mismatch("field '" + f + "' has different sizes");
            for (std::size_t k = 0; k < e.size(); ++k) {
                fd.scale = std::max(fd.scale, std::abs(e[k]));
                dev = std::max(dev, std::abs(c[k] - e[k]));
            }
        }
        if (fd.scale > floor) {
            fd.max_deviation = dev / fd.scale;
            fd.pass = fd.max_deviation <= tol_rel;
        } else {
            fd.max_deviation = 0;
            fd.pass = true;
        }
        rep.pass = rep.pass && fd.pass;
        rep.fields.push_back(fd);
    }
    return rep;
}

std::string CompareReport::to_text() const {
    std::ostringstream os;
    os << "field,max_rel_deviation,scale,status\n";
    os << std::setprecision(6);
    for (const auto& f : fields)
        os << f.field << ',' << f.max_deviation << ',' << f.scale << ',' << (f.pass ? "pass" : "FAIL") << '\n';
    os << "overall," << (pass ? "pass" : "FAIL") << '\n';
    return os.str();
}

const FieldDeviation& CompareReport::operator[](const std::string& name) const {
    for (const auto& f : fields)
        if (f.field == name) return f;
    throw invalid_parameter("no field '" + name + "' in report");
}

std::vector<std::string> default_oracle_fields(int n_dots) {
    std::vector<std::string> f{"a_mean", "n_photon", "fe", "pol", "daa", "dada", "d_pba"};
    if (n_dots > 1) f.push_back("d_pdp");
    return f;
}

void OracleCheckSpec::validate() const {
    oracle.validate();
    if (!(tolerance > 0)) throw config_error("oracle tolerance must be > 0");
    if (!(fe0 >= 0 && fe0 <= 1 && fh0 >= 0 && fh0 <= 1)) throw config_error("initial occupations must lie in [0, 1]");
    if (!std::isfinite(std::abs(alpha0))) throw config_error("initial amplitude must be finite");
}

OracleCheckResult oracle_check(const OracleCheckSpec& spec, const IntegrationConfig& icfg) {
    spec.validate();
    const OracleConfig& c = spec.oracle;
    Generator gen(c);
    OracleCheckResult res;
    res.exact = evolve(gen.product_state(spec.alpha0, spec.fe0, spec.fh0), c, icfg);
    res.cluster = integrate_transient(res.exact.moments.front(), c.t_end, c.n_samples, cluster_dynamics(c), icfg);
    const Trajectory exact{res.exact.times, res.exact.moments};
    res.report = compare(res.cluster, exact, spec.tolerance,
                         spec.fields.empty() ? default_oracle_fields(c.n_dots) : spec.fields);
    return res;
}

}  // namespace qdsq
