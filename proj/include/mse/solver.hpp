#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mse/banded.hpp"
#include "mse/boundary.hpp"
#include "mse/coefficients.hpp"
#include "mse/grid.hpp"
#include "mse/norms.hpp"

namespace mse {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Direction { forward, backward };

struct SolveRequest {
    const CoefficientSet* coeffs = nullptr;
    const BoundaryTrace* trace = nullptr;                  // Dirichlet data f; null = 0
    std::function<cplx(double, const Vec&)> source;        // F; null = 0
    std::function<cplx(const Vec&)> initial_state;         // state at the starting end; null = 0
    Direction direction = Direction::forward;
    bool nonlinear = false;
    double picard_tol = 1e-10;
    int picard_max = 50;
    double delta_max = 0.0;  // small-data guard on ||f||_sup; 0 disables
    double compat_tol = 1e-8;
};

struct SolveStats {
    int max_picard = 0;
    int refactor_count = 0;
};

namespace detail {

/// Spatial operator H = c(t) (Laplacian + i[A.D + D.(A .)] - |A|^2) + q with
/// centered second-order stencils. The magnetic first-order block is
/// discretized in the symmetric average form, which keeps H Hermitian on the
/// grid for real A, q and zero Dirichlet data.
class SpatialOperator {
  public:
    void build(const SpaceTimeGrid& g, const CoefficientSet& cs, double t) {
        grid_ = &g;
        cmid_ = cs.c_at(t);
        cs.q.slice(t, g, q_);
        has_qim_ = !cs.q_im.is_zero();
        if (has_qim_) cs.q_im.slice(t, g, qim_);
        for (int d = 0; d < g.n; ++d) cs.A.comp[d].slice(t, g, a_[d]);
        has_A_ = !cs.A.is_zero();
    }

    double c_mid() const { return cmid_; }

    cplx center(int s) const {
        const SpaceTimeGrid& g = *grid_;
        double lap = 0.0, asq = 0.0;
        for (int d = 0; d < g.n; ++d) {
            lap -= 2.0 / (g.dx[d] * g.dx[d]);
            if (has_A_) asq += a_[d][s] * a_[d][s];
        }
        return cplx(cmid_ * (lap - asq) + q_[s], has_qim_ ? qim_[s] : 0.0);
    }

    cplx neighbor(int s, int d, int dir) const {  // dir = +1 or -1
        const SpaceTimeGrid& g = *grid_;
        double inv2 = 1.0 / (g.dx[d] * g.dx[d]);
        if (!has_A_) return cplx(cmid_ * inv2, 0.0);
        auto idx = g.unflat(s);
        idx[d] += dir;
        int sn = g.flat(idx);
        double amid = a_[d][s] + a_[d][sn];
        return cmid_ * cplx(inv2, dir * amid / (2.0 * g.dx[d]));
    }

    /// y = H u on interior nodes; u is a full-grid slice (boundary included).
    void apply(const cplx* u, cplx* y) const {
        const SpaceTimeGrid& g = *grid_;
        for (int s = 0; s < g.num_space(); ++s) {
            if (g.on_boundary(s)) {
                y[s] = 0.0;
                continue;
            }
            cplx acc = center(s) * u[s];
            auto idx = g.unflat(s);
            for (int d = 0; d < g.n; ++d) {
                auto ip = idx, im = idx;
                ip[d]++;
                im[d]--;
                acc += neighbor(s, d, +1) * u[g.flat(ip)];
                acc += neighbor(s, d, -1) * u[g.flat(im)];
            }
            y[s] = acc;
        }
    }

  private:
    const SpaceTimeGrid* grid_ = nullptr;
    double cmid_ = 1.0;
    bool has_A_ = false, has_qim_ = false;
    std::vector<double> q_, qim_;
    std::vector<double> a_[3];
};

}  // namespace detail

/// Crank-Nicolson stepper for i du/dt + H(t) u = N(u) + F with Dirichlet
/// data. Marches forward from u(0)=0 or backward from u(T)=0; each step
/// solves a banded system, with the factorization cached when c, A, q do not
/// depend on t. The visitor sees every time slice exactly once (in march
/// order) including the prescribed end slice.
class Stepper {
  public:
    using Visitor = std::function<void(int, const cplx*)>;

    Stepper(const SpaceTimeGrid& g, const SolveRequest& req) : g_(g), req_(req), cs_(*req.coeffs) {
        if (g_.n > 2) throw SolverError("solver: n > 2 not supported");
        validate();
        ni_ = 1;
        for (int d = 0; d < g_.n; ++d) ni_ *= g_.nx[d] - 2;
        band_ = g_.n == 1 ? 1 : g_.nx[1] - 2;
        interior_of_node_.assign(g_.num_space(), -1);
        node_of_interior_.reserve(ni_);
        for (int s = 0; s < g_.num_space(); ++s)
            if (!g_.on_boundary(s)) {
                interior_of_node_[s] = static_cast<int>(node_of_interior_.size());
                node_of_interior_.push_back(s);
            }
    }

    void run(const Visitor& visit) {
        const int nsp = g_.num_space();
        std::vector<cplx> cur(nsp, 0.0), next(nsp, 0.0), prev(nsp, 0.0), work(nsp), hbuf(nsp), rhs(ni_);
        std::vector<cplx> ncur, nnext;
        bool fwd = req_.direction == Direction::forward;

        // initial slice: prescribed state (default zero) with trace boundary
        int k0 = fwd ? 0 : g_.nt;
        if (req_.initial_state)
            for (int s = 0; s < nsp; ++s) cur[s] = req_.initial_state(g_.coords(s));
        set_boundary(cur.data(), k0);
        visit(k0, cur.data());

        // nonlinear B slices (time-independent fast path)
        bool b_tdep = false;
        for (const auto& [sb, b] : cs_.B) b_tdep = b_tdep || b.time_dep;

        for (int step = 0; step < g_.nt; ++step) {
            int kfrom = fwd ? step : g_.nt - step;
            int kto = fwd ? step + 1 : g_.nt - step - 1;
            double tmid = 0.5 * (g_.time_at(kfrom) + g_.time_at(kto));

            ensure_factor(tmid, fwd);

            // rhs = (i/dt) u_from - s (1/2) H(u_from + boundary lift of f_to)
            // with s = +1 forward, -1 backward; source and nonlinearity at the
            // trapezoid midpoint/ends.
            double sgn = fwd ? 1.0 : -1.0;
            std::copy(cur.begin(), cur.end(), work.begin());
            add_boundary(work.data(), kto);  // boundary becomes f_from + f_to
            op_.apply(work.data(), hbuf.data());
            cplx idt(0.0, 1.0 / g_.dt);
            for (int i = 0; i < ni_; ++i) {
                int s = node_of_interior_[i];
                rhs[i] = idt * cur[s] - sgn * 0.5 * hbuf[s];
            }
            if (req_.source) {
                for (int i = 0; i < ni_; ++i) {
                    int s = node_of_interior_[i];
                    rhs[i] += sgn * req_.source(tmid, g_.coords(s));
                }
            }

            // seed next with predictor (helps the fixed point), boundary from trace
            for (int i = 0; i < ni_; ++i) {
                int s = node_of_interior_[i];
                next[s] = step == 0 ? cur[s] : 2.0 * cur[s] - prev[s];
            }
            set_boundary(next.data(), kto);

            if (!req_.nonlinear || cs_.B.empty()) {
                for (int i = 0; i < ni_; ++i) work[i] = rhs[i];
                lu_.solve(work.data());
                scatter(work.data(), next.data());
            } else {
                if (ncur.empty() || b_tdep) eval_nonlinearity(cur.data(), g_.time_at(kfrom), ncur);
                int it = 0;
                double diff = 0.0;
                for (it = 0; it < req_.picard_max; ++it) {
                    eval_nonlinearity(next.data(), g_.time_at(kto), nnext);
                    for (int i = 0; i < ni_; ++i) {
                        int s = node_of_interior_[i];
                        work[i] = rhs[i] + sgn * 0.5 * (ncur[s] + nnext[s]);
                    }
                    lu_.solve(work.data());
                    diff = 0.0;
                    for (int i = 0; i < ni_; ++i) {
                        int s = node_of_interior_[i];
                        diff = std::max(diff, std::abs(work[i] - next[s]));
                        next[s] = work[i];
                    }
                    if (!std::isfinite(diff)) throw SolverError("solver: NaN in fixed-point iteration (data too large?)");
                    if (diff < req_.picard_tol) break;
                }
                if (diff >= req_.picard_tol)
                    throw SolverError("solver: fixed point did not converge in " + std::to_string(req_.picard_max) +
                                      " iterations (last delta " + std::to_string(diff) + "); data too large?");
                stats_.max_picard = std::max(stats_.max_picard, it + 1);
                std::swap(ncur, nnext);  // N(u_to) becomes N(u_from) of the next step
                if (b_tdep) ncur.clear();
            }

            visit(kto, next.data());
            std::swap(prev, cur);
            std::swap(cur, next);
        }
    }

  private:
  public:
    const SolveStats& stats() const { return stats_; }

  private:
    const SpaceTimeGrid& g_;
    const SolveRequest& req_;
    const CoefficientSet& cs_;
    SolveStats stats_;
    int ni_ = 0, band_ = 0;
    std::vector<int> interior_of_node_, node_of_interior_;
    detail::SpatialOperator op_;
    BandedLU lu_;
    bool factored_static_ = false;
    mutable std::vector<cplx> bstage_;

    void validate() const {
        if (req_.nonlinear) {
            if (cs_.c_time_dep) throw SolverError("solver: nonlinear path requires c == 1");
            if (cs_.c && std::abs(cs_.c_at(0.0) - 1.0) > 1e-12) throw SolverError("solver: nonlinear path requires c == 1");
        }
        if (req_.trace) {
            bool fwd = req_.direction == Direction::forward;
            if (!req_.initial_state) {
                if (req_.trace->vanish_order(!fwd) < 1)
                    throw SolverError("solver: incompatible trace (must vanish at the initial end)");
            } else {
                // trace must agree with the prescribed state on the boundary
                int k0 = fwd ? 0 : g_.nt;
                double scale = std::max(req_.trace->max_abs(), 1e-30);
                for (std::size_t fi = 0; fi < g_.faces.size(); ++fi) {
                    const Face& face = g_.faces[fi];
                    for (std::size_t j = 0; j < face.nodes.size(); ++j) {
                        cplx diff = req_.trace->at(static_cast<int>(fi), k0, static_cast<int>(j)) -
                                    req_.initial_state(g_.coords(face.nodes[j]));
                        if (std::abs(diff) > req_.compat_tol * scale)
                            throw SolverError("solver: incompatible trace (disagrees with the initial state)");
                    }
                }
            }
            if (req_.delta_max > 0.0 && req_.trace->max_abs() > req_.delta_max)
                throw SolverError("solver: trace exceeds the small-data radius delta");
        }
    }

    void ensure_factor(double tmid, bool fwd) {
        if (factored_static_ && !cs_.matrix_time_dep()) return;
        stats_.refactor_count++;
        op_.build(g_, cs_, tmid);
        lu_.reset(ni_, band_, band_);
        cplx idt(0.0, 1.0 / g_.dt);
        double sgn = fwd ? 1.0 : -1.0;
        for (int i = 0; i < ni_; ++i) {
            int s = node_of_interior_[i];
            lu_.at(i, i) = idt + sgn * 0.5 * op_.center(s);
            auto idx = g_.unflat(s);
            for (int d = 0; d < g_.n; ++d) {
                auto ip = idx, im = idx;
                ip[d]++;
                im[d]--;
                int jp = interior_of_node_[g_.flat(ip)];
                int jm = interior_of_node_[g_.flat(im)];
                if (jp >= 0) lu_.at(i, jp) = sgn * 0.5 * op_.neighbor(s, d, +1);
                if (jm >= 0) lu_.at(i, jm) = sgn * 0.5 * op_.neighbor(s, d, -1);
            }
        }
        lu_.factor();
        factored_static_ = true;
    }

    void set_boundary(cplx* slice, int k) const {
        if (!req_.trace) {
            for (int s : g_.boundary_nodes) slice[s] = 0.0;
            return;
        }
        for (std::size_t fi = 0; fi < g_.faces.size(); ++fi) {
            const Face& face = g_.faces[fi];
            for (std::size_t j = 0; j < face.nodes.size(); ++j)
                slice[face.nodes[j]] = req_.trace->at(static_cast<int>(fi), k, static_cast<int>(j));
        }
    }

    /// Add f(k) to the boundary values already present in the slice.
    /// Corner nodes repeat across faces, so stage the values first.
    void add_boundary(cplx* slice, int k) const {
        if (!req_.trace) return;
        bstage_.assign(g_.num_space(), 0.0);
        for (std::size_t fi = 0; fi < g_.faces.size(); ++fi) {
            const Face& face = g_.faces[fi];
            for (std::size_t j = 0; j < face.nodes.size(); ++j)
                bstage_[face.nodes[j]] = req_.trace->at(static_cast<int>(fi), k, static_cast<int>(j));
        }
        for (int s : g_.boundary_nodes) slice[s] += bstage_[s];
    }

    void scatter(const cplx* interior, cplx* slice) const {
        for (int i = 0; i < ni_; ++i) slice[node_of_interior_[i]] = interior[i];
    }

    void eval_nonlinearity(const cplx* u, double t, std::vector<cplx>& out) {
        out.assign(g_.num_space(), 0.0);
        std::vector<double> bslice;
        for (const auto& [sb, b] : cs_.B) {
            if (b.is_zero()) continue;
            b.slice(t, g_, bslice);
            int sigma = sb.first, beta = sb.second;
            for (int i = 0; i < ni_; ++i) {
                int s = node_of_interior_[i];
                if (bslice[s] == 0.0) continue;
                cplx us = u[s], term = 1.0;
                for (int p = 0; p < sigma; ++p) term *= us;
                cplx ubar = std::conj(us);
                for (int p = 0; p < beta; ++p) term *= ubar;
                out[s] += bslice[s] * term;
            }
        }
    }
};

inline void solve_with_visitor(const SolveRequest& req, const Stepper::Visitor& visit, SolveStats* stats = nullptr) {
    Stepper st(*req.coeffs->grid, req);
    st.run(visit);
    if (stats) *stats = st.stats();
}

inline ComplexField solve_linear(const SolveRequest& req) {
    if (req.nonlinear) throw SolverError("solve_linear: nonlinear flag set");
    const SpaceTimeGrid& g = *req.coeffs->grid;
    ComplexField out(g);
    solve_with_visitor(req, [&](int k, const cplx* slice) {
        std::copy(slice, slice + g.num_space(), out.slice(k));
    });
    if (!out.all_finite()) throw SolverError("solve_linear: non-finite solution");
    return out;
}

inline ComplexField solve_nonlinear(SolveRequest req, SolveStats* stats = nullptr) {
    req.nonlinear = true;
    const SpaceTimeGrid& g = *req.coeffs->grid;
    ComplexField out(g);
    solve_with_visitor(req, [&](int k, const cplx* slice) {
        std::copy(slice, slice + g.num_space(), out.slice(k));
    }, stats);
    if (!out.all_finite()) throw SolverError("solve_nonlinear: non-finite solution");
    return out;
}

/// Known carrier oscillation of a field near the boundary; lets dn extraction
/// difference the slowly varying envelope instead of the raw samples.
struct CarrierSpec {
    double rho = 0.0;
    Vec omega = {0, 0, 0};
    const CoefficientSet* coeffs = nullptr;  // for sqrt(c(t)) phases; null means c == 1

    double phase(double t, const Vec& x, int n) const {
        double sc = coeffs ? std::sqrt(coeffs->c_at(t)) : 1.0;
        return rho * (dot(x, omega, n) / sc - rho * dot(omega, omega, n) * t);
    }
    double normal_derivative(double t, const Vec& nu, int n) const {
        double sc = coeffs ? std::sqrt(coeffs->c_at(t)) : 1.0;
        return rho * dot(nu, omega, n) / sc;
    }
};

struct DNOptions {
    bool c_scaled = false;                  // record c(t) nu.(grad+iA)u
    std::optional<CarrierSpec> carrier;
};

/// Streaming extraction of nu.(grad + iA)u on Gamma with a one-sided 3-point
/// second-order stencil. Feed slices in any order.
class DNAccumulator {
  public:
    DNAccumulator(const SpaceTimeGrid& g, const CoefficientSet& cs, DNOptions opts = {})
        : g_(g), cs_(cs), opts_(opts), rec_(g) {
        rec_.coeff_id = cs.id;
        rec_.c_scaled = opts.c_scaled;
    }

    void feed(int k, const cplx* slice) {
        double t = g_.time_at(k);
        double cscale = opts_.c_scaled ? cs_.c_at(t) : 1.0;
        for (std::size_t b = 0; b < rec_.face_ids.size(); ++b) {
            int fi = rec_.face_ids[b];
            const Face& face = g_.faces[fi];
            Vec nu = g_.face_normal(face);
            int inward = face.side == 0 ? +1 : -1;
            double h = g_.dx[face.axis];
            for (std::size_t j = 0; j < face.nodes.size(); ++j) {
                int s0 = face.nodes[j];
                auto idx = g_.unflat(s0);
                auto i1 = idx, i2 = idx;
                i1[face.axis] += inward;
                i2[face.axis] += 2 * inward;
                int s1 = g_.flat(i1), s2 = g_.flat(i2);
                cplx u0 = slice[s0], u1 = slice[s1], u2 = slice[s2];
                cplx dn;
                if (opts_.carrier) {
                    // demodulate the carrier, difference the envelope, remodulate
                    Vec x0 = g_.coords(s0), x1 = g_.coords(s1), x2 = g_.coords(s2);
                    double p0 = opts_.carrier->phase(t, x0, g_.n);
                    cplx e0 = std::polar(1.0, -p0);
                    cplx g0 = u0 * e0;
                    cplx g1 = u1 * std::polar(1.0, -opts_.carrier->phase(t, x1, g_.n));
                    cplx g2 = u2 * std::polar(1.0, -opts_.carrier->phase(t, x2, g_.n));
                    cplx dng = (3.0 * g0 - 4.0 * g1 + g2) / (2.0 * h);
                    double dnphi = opts_.carrier->normal_derivative(t, nu, g_.n);
                    dn = std::conj(e0) * (dng + cplx(0.0, dnphi) * g0);
                } else {
                    dn = (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h);
                }
                // magnetic term i (nu.A) u; vanishes when A has collar support
                Vec a = cs_.A.value(t, g_.coords(s0), g_);
                dn += cplx(0.0, dot(nu, a, g_.n)) * u0;
                rec_.face_vals[b].at2(k, j) = cscale * dn;
            }
        }
    }

    DNRecord take() { return std::move(rec_); }

  private:
    const SpaceTimeGrid& g_;
    const CoefficientSet& cs_;
    DNOptions opts_;
    DNRecord rec_;
};

inline DNRecord dn_extract(const ComplexField& u, const CoefficientSet& cs, DNOptions opts = {}) {
    const SpaceTimeGrid& g = *u.grid;
    DNAccumulator acc(g, cs, opts);
    for (int k = 0; k <= g.nt; ++k) acc.feed(k, u.slice(k));
    return acc.take();
}

/// Solve and return only the DN record (full fields never materialized).
inline DNRecord solve_dn(const SolveRequest& req, DNOptions opts = {}) {
    const SpaceTimeGrid& g = *req.coeffs->grid;
    DNAccumulator acc(g, *req.coeffs, opts);
    solve_with_visitor(req, [&](int k, const cplx* slice) { acc.feed(k, slice); });
    return acc.take();
}

/// Time series of L2(Omega) slice norms.
inline std::vector<double> conservation_audit(const ComplexField& u) {
    const SpaceTimeGrid& g = *u.grid;
    std::vector<double> series(g.num_time());
    for (int k = 0; k <= g.nt; ++k) series[k] = slice_l2(u, k);
    return series;
}

/// Max relative drift of the series over k in [k_from, nt].
inline double norm_drift_after(const std::vector<double>& series, int k_from) {
    double ref = series[k_from];
    if (ref == 0.0) {
        double m = 0.0;
        for (std::size_t k = k_from; k < series.size(); ++k) m = std::max(m, series[k]);
        return m;
    }
    double drift = 0.0;
    for (std::size_t k = k_from; k < series.size(); ++k) drift = std::max(drift, std::abs(series[k] - ref) / ref);
    return drift;
}

}  // namespace mse
