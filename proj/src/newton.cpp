#include "qdsq/newton.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>

#include <Eigen/SparseLU>

namespace qdsq {

namespace {

std::vector<char> inactive_mask(int m) {
    SystemState mk = SystemState::zero(m);
    for (int j = 0; j < m; ++j) {
        mk.d_pp(j, j) = {1, 1};
        mk.d_pdp(j, j) = {1, 1};
        mk.d_epol(j, j) = {1, 1};
        mk.d_hpol(j, j) = {1, 1};
        mk.d_eh(j, j) = 1;
        mk.d_ee(j, j) = 1;
        mk.d_hh(j, j) = 1;
    }
    const Eigen::VectorXd v = mk.pack();
    std::vector<char> mask(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) mask[static_cast<std::size_t>(i)] = v[i] != 0.0;
    return mask;
}

// Generic point where every coupling is active, so the detected pattern is a superset.
void generic_point(int m, Eigen::VectorXd& y, Dynamics& d) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    y.resize(SystemState::packed_size(m));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = u(rng);
    d.g = u(rng);
    d.gamma_c = u(rng);
    d.gamma = u(rng);
    d.gamma_nr = u(rng);
    d.gamma_nl = u(rng);
    d.pump = u(rng);
    d.gamma_pop = u(rng);
    d.a_inj = {u(rng), u(rng)};
    d.delta_inj = u(rng);
    d.frame = Frame::injection;
    d.inj_doublet_terms = true;
    d.detuning.resize(m);
    d.weight.resize(m);
    for (int j = 0; j < m; ++j) {
        d.detuning[j] = u(rng);
        d.weight[j] = u(rng);
    }
}

Eigen::VectorXd eval(const Eigen::VectorXd& y, const Dynamics& d, SystemState& in, SystemState& out) {
    in.unpack_from(y);
    rhs(in, d, 0.0, out);
    return out.pack();
}

std::unique_ptr<JacobianPattern> build_pattern(int m) {
    auto pat = std::make_unique<JacobianPattern>();
    pat->bins = m;
    pat->inactive = inactive_mask(m);
    const auto& mask = pat->inactive;

    Eigen::VectorXd y;
    Dynamics d;
    generic_point(m, y, d);
    SystemState in = SystemState::zero(m), out = SystemState::zero(m);
    const Eigen::VectorXd f = eval(y, d, in, out);
    const Eigen::Index n = y.size();

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<std::vector<int>> rows_of_col(static_cast<std::size_t>(n));
    Eigen::VectorXd yp = y;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            trip.emplace_back(i, i, 1.0);
            continue;
        }
        yp[i] = y[i] + 1e-3;
        const Eigen::VectorXd fp = eval(yp, d, in, out);
        yp[i] = y[i];
        for (Eigen::Index r = 0; r < n; ++r) {
            if (mask[static_cast<std::size_t>(r)] || fp[r] == f[r]) continue;
            trip.emplace_back(r, i, 1.0);
            rows_of_col[static_cast<std::size_t>(i)].push_back(static_cast<int>(r));
        }
    }
    pat->pattern.resize(n, n);
    pat->pattern.setFromTriplets(trip.begin(), trip.end());
    pat->pattern.makeCompressed();

    // greedy colouring of the column intersection graph
    std::vector<std::vector<int>> cols_of_row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (int r : rows_of_col[static_cast<std::size_t>(i)]) cols_of_row[static_cast<std::size_t>(r)].push_back(static_cast<int>(i));
    std::vector<int> colour(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> seen;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(i)] || rows_of_col[static_cast<std::size_t>(i)].empty()) continue;
        seen.assign(pat->colour_groups.size() + 1, -1);
        for (int r : rows_of_col[static_cast<std::size_t>(i)])
            for (int k : cols_of_row[static_cast<std::size_t>(r)]) {
                const int c = colour[static_cast<std::size_t>(k)];
                if (c >= 0) seen[static_cast<std::size_t>(c)] = i;
            }
        int c = 0;
        while (seen[static_cast<std::size_t>(c)] == i) ++c;
        colour[static_cast<std::size_t>(i)] = c;
        if (c == static_cast<int>(pat->colour_groups.size())) pat->colour_groups.emplace_back();
        pat->colour_groups[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }
    return pat;
}

}  // namespace

const JacobianPattern& jacobian_pattern(int m) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<JacobianPattern>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[m];
    if (!slot) slot = build_pattern(m);
    return *slot;
}

double steady_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& f, const Dynamics& d) {
    const double lifetime = d.gamma_c > 0 ? 1.0 / d.gamma_c : 1.0;
    const double fn = f.norm() * lifetime;
    if (fn == 0.0) return 0.0;
    const double yn = y.norm();
    return yn > 0 ? fn / yn : std::numeric_limits<double>::infinity();
}

Eigen::SparseMatrix<double> numerical_jacobian(const Eigen::VectorXd& y, const Eigen::VectorXd& f, const Dynamics& d,
                                               const JacobianPattern& pat) {
    const int m = pat.bins;
    SystemState in = SystemState::zero(m), out = SystemState::zero(m);
    Eigen::SparseMatrix<double> jac = pat.pattern;
    Eigen::VectorXd yp = y;
    Eigen::VectorXd h(y.size());
    for (const auto& group : pat.colour_groups) {
        for (int i : group) {
            h[i] = 1e-7 * std::max(std::abs(y[i]), 1e-4);
            yp[i] = y[i] + h[i];
        }
        const Eigen::VectorXd fp = eval(yp, d, in, out);
        for (int i : group) {
            yp[i] = y[i];
            for (Eigen::SparseMatrix<double>::InnerIterator it(jac, i); it; ++it)
                it.valueRef() = (fp[it.row()] - f[it.row()]) / h[i];
        }
    }
    return jac;
}

NewtonResult newton_polish(const Eigen::VectorXd& y0, const Dynamics& d, double tol, int max_iter,
                           double max_rel_change) {
    const int m = d.bins();
    const JacobianPattern& pat = jacobian_pattern(m);
    SystemState in = SystemState::zero(m), out = SystemState::zero(m);

    NewtonResult res;
    res.y = y0;
    Eigen::VectorXd f = eval(res.y, d, in, out);
    res.residual = steady_residual(res.y, f, d);
    if (res.residual < tol) {
        res.converged = true;
        return res;
    }
    const double y0n = y0.norm();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(pat.pattern);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd fm = f;
        for (std::size_t i = 0; i < pat.inactive.size(); ++i)
            if (pat.inactive[i]) fm[static_cast<Eigen::Index>(i)] = 0.0;
        lu.factorize(numerical_jacobian(res.y, fm, d, pat));
        if (lu.info() != Eigen::Success) return res;
        const Eigen::VectorXd dy = lu.solve(fm);
        if (!dy.allFinite()) return res;
        // backtracking on the residual
        Eigen::VectorXd y_new, f_new;
        double r_new = std::numeric_limits<double>::infinity();
        for (double lambda = 1.0; lambda >= 1.0 / 64; lambda *= 0.5) {
            y_new = res.y - lambda * dy;
            SystemState s = SystemState::unpack(y_new, m);
            for (int j = 0; j < m; ++j) s.d_pdp(j, j) = s.d_exc[j];
            y_new = s.pack();
            f_new = eval(y_new, d, in, out);
            r_new = steady_residual(y_new, f_new, d);
            if (r_new < res.residual) break;
        }
        ++res.iterations;
        if (!(r_new < res.residual) || (y_new - y0).norm() > max_rel_change * y0n) return res;
        res.y = y_new;
        f = f_new;
        res.residual = r_new;
        if (res.residual < tol) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

}  // namespace qdsq
