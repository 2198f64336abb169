#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mse/boundary.hpp"
#include "mse/coefficients.hpp"
#include "mse/cutoffs.hpp"
#include "mse/grid.hpp"
#include "mse/norms.hpp"
#include "mse/solver.hpp"

namespace mse::go {

struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Oscillation guard: rho |omega| dx and rho^2 |omega|^2 dt must stay below
/// 2*pi/10. The error names the largest admissible rho on this grid.
inline void check_resolution(const SpaceTimeGrid& g, double rho, const Vec& omega) {
    if (rho == 0.0) return;
    double bound = 2.0 * M_PI / 10.0;
    double wn = norm2(omega, g.n);
    double dxmax = 0.0;
    for (int d = 0; d < g.n; ++d) dxmax = std::max(dxmax, g.dx[d]);
    double rho_space = bound / (wn * dxmax);
    double rho_time = std::sqrt(bound / (wn * wn * g.dt));
    double rho_max = std::min(rho_space, rho_time);
    if (rho > rho_max)
        throw ResolutionError("probe frequency rho=" + std::to_string(rho) +
                              " unresolved on this grid; max admissible rho=" + std::to_string(rho_max));
}

/// Phase rho (x.omega / sqrt(c(t)) - rho |omega|^2 t).
inline double phase_at(double rho, const Vec& omega, const CoefficientSet& cs, double t, const Vec& x, int n) {
    double sc = std::sqrt(cs.c_at(t));
    return rho * (dot(x, omega, n) / sc - rho * dot(omega, omega, n) * t);
}

inline ComplexField build_phase(const SpaceTimeGrid& g, double rho, const Vec& omega, const CoefficientSet& cs) {
    check_resolution(g, rho, omega);
    ComplexField out(g);
    for (int k = 0; k <= g.nt; ++k) {
        double t = g.time_at(k);
        for (int s = 0; s < g.num_space(); ++s)
            out.at(k, s) = std::polar(1.0, phase_at(rho, omega, cs, t, g.coords(s), g.n));
    }
    return out;
}

namespace detail {

/// Entry/exit parameters of the segment {x + u*dir : u in [0,inf)} inside the
/// box padded by `pad` in every axis direction.
inline std::pair<double, double> ray_box_span(const SpaceTimeGrid& g, const Vec& x, const Vec& dir, double pad,
                                              bool both_sides) {
    double lo = both_sides ? -1e300 : 0.0, hi = 1e300;
    for (int d = 0; d < g.n; ++d) {
        double a = -pad - x[d], b = g.box[d] + pad - x[d];
        if (std::abs(dir[d]) < 1e-14) {
            if (x[d] < -pad || x[d] > g.box[d] + pad) return {0.0, 0.0};
            continue;
        }
        double u0 = a / dir[d], u1 = b / dir[d];
        if (u0 > u1) std::swap(u0, u1);
        lo = std::max(lo, u0);
        hi = std::min(hi, u1);
    }
    if (hi <= lo) return {0.0, 0.0};
    return {lo, hi};
}

/// Composite Simpson over [a,b], step ~ target_h.
template <typename F>
double simpson(F&& f, double a, double b, double target_h) {
    if (b <= a) return 0.0;
    int m = std::max(2, static_cast<int>(std::ceil((b - a) / target_h)));
    if (m % 2) m++;
    double h = (b - a) / m;
    double acc = f(a) + f(b);
    for (int i = 1; i < m; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace detail

/// Unit-modulus transport factor
///   W(t,x) = exp(i c'(t)(x.omega)^2 / (8 c^2)) exp(i int_0^inf A(t, x+s omega).omega ds),
/// with A extended by zero outside the box. Ray quadrature is composite
/// Simpson at step dx/2.
inline cplx W_at(const SpaceTimeGrid& g, const CoefficientSet& cs, const Vec& omega, double t, const Vec& x) {
    double sigma = 0.0;
    if (!cs.A.is_zero()) {
        auto [lo, hi] = detail::ray_box_span(g, x, omega, 0.0, false);
        if (hi > lo) {
            sigma = detail::simpson(
                [&](double s) {
                    Vec p = x;
                    for (int d = 0; d < g.n; ++d) p[d] += s * omega[d];
                    Vec a = cs.A.value(t, p, g);
                    return dot(a, omega, g.n);
                },
                lo, hi, 0.5 * g.min_dx() / std::max(1.0, norm2(omega, g.n)));
        }
    }
    double curv = 0.0;
    if (cs.c_time_dep) {
        double c = cs.c_at(t);
        curv = cs.c_prime(t) * std::pow(dot(x, omega, g.n), 2) / (8.0 * c * c);
    }
    return std::polar(1.0, curv + sigma);
}

/// Transverse modulation of the leading amplitude. Constant and pure
/// exponential variants both satisfy the transport condition
/// omega . grad Theta = 0 as long as xi . omega = 0; the directional
/// derivative form additionally carries the line integral of a supplied
/// vector field theta.
struct ThetaSpec {
    enum Kind { Constant, Modulation, DirectionalDeriv } kind = Constant;
    cplx constant = 1.0;
    double tau = 0.0;
    Vec xi = {0, 0, 0};
    Vec eta = {0, 0, 0};
    std::function<Vec(double, const Vec&)> theta_field;  // DirectionalDeriv only
};

struct LocalizedSpec {
    Vec x0 = {0.5, 0.5, 0};
    double delta = 0.1;
    TimeBump iota{0.5, 0.2};
};

struct AmplitudeSpec {
    enum Kind { NonLocalized, Localized } kind = NonLocalized;
    ThetaSpec theta;     // NonLocalized
    double zeta_h = 0.1;  // time plateau margin; 0 disables the cutoff
    LocalizedSpec loc;   // Localized
};

struct ProbeSpec {
    double rho = 16.0;
    Vec omega = {1, 0, 0};
    AmplitudeSpec amp;
    int order = 1;  // N: correction terms V_1..V_N
    Direction direction = Direction::forward;
};

/// Slice-based amplitude computations on a padded grid (2 halo nodes per
/// side) with memoized time slices. V_0 is evaluated in closed form; V_k for
/// k >= 1 integrates L V_{k-1} along characteristics from an anchor plane
/// upstream of the domain.
class AmplitudeEngine {
  public:
    static constexpr int pad = 2;

    AmplitudeEngine(const SpaceTimeGrid& g, const CoefficientSet& cs, const ProbeSpec& spec)
        : g_(g), cs_(cs), spec_(spec) {
        if (g.n != 2) throw std::runtime_error("go: amplitude machinery needs n=2");
        wnorm_ = norm2(spec.omega, g.n);
        if (wnorm_ == 0.0) throw std::invalid_argument("go: omega must be nonzero");
        for (int d = 0; d < g.n; ++d) what_[d] = spec.omega[d] / wnorm_;
        // deterministic transverse frame: rotate +90 degrees
        alpha_ = {-what_[1], what_[0], 0.0};
        px_ = g.nx[0] + 2 * pad;
        py_ = g.nx[1] + 2 * pad;
        double cx = 0.5 * g.box[0], cy = 0.5 * g.box[1];
        radius_ = std::hypot(cx, cy) + pad * g.min_dx() + g.min_dx();
        anchor_ = {cx - radius_ * what_[0], cy - radius_ * what_[1], 0.0};
        dstep_ = 0.5 * g.min_dx();
        if (spec.amp.kind == AmplitudeSpec::NonLocalized) {
            double wo = std::abs(dot(spec.amp.theta.xi, spec.omega, g.n));
            if (wo > 1e-10 * std::max(1.0, norm2(spec.amp.theta.xi, g.n)))
                throw std::invalid_argument("go: xi must be orthogonal to omega");
        }
    }

    int padded_count() const { return px_ * py_; }
    int pidx(int i, int j) const { return (i + pad) * py_ + (j + pad); }
    Vec pcoord(int i, int j) const { return {i * g_.dx[0], j * g_.dx[1], 0.0}; }

    const SpaceTimeGrid& grid() const { return g_; }
    const ProbeSpec& spec() const { return spec_; }

    /// V_k slice at time t on the padded grid.
    std::shared_ptr<const std::vector<cplx>> amplitude(int k, double t) {
        long key = quantize(t) * 8 + k;
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        auto slice = std::make_shared<std::vector<cplx>>();
        if (k == 0) *slice = eval_V0(t);
        else *slice = transport(k, t);
        if (cache_.size() > 96) cache_.clear();
        cache_[key] = slice;
        return slice;
    }

    /// L_{c,A,q} V_k at time t on the padded grid (interior of the pad;
    /// outermost halo ring is zeroed). 4th-order spatial stencils keep the
    /// differentiation error below the transport quadrature error.
    std::vector<cplx> apply_L(int k, double t) {
        double dt_fd = fd_dt();
        auto vm = amplitude(k, t - dt_fd);
        auto v0 = amplitude(k, t);
        auto vp = amplitude(k, t + dt_fd);
        std::vector<cplx> out(padded_count(), 0.0);
        double c = cs_.c_at(t);
        std::vector<double> qv(padded_count()), divv(padded_count(), 0.0);
        std::vector<double> av[2];
        fill_coeff_slices(t, qv, av, divv);
        const double idx2[2] = {1.0 / (g_.dx[0] * g_.dx[0]), 1.0 / (g_.dx[1] * g_.dx[1])};
        const double idx1[2] = {1.0 / g_.dx[0], 1.0 / g_.dx[1]};
        for (int i = -pad + 2; i < g_.nx[0] + pad - 2; ++i) {
            for (int j = -pad + 2; j < g_.nx[1] + pad - 2; ++j) {
                int s = pidx(i, j);
                const auto& v = *v0;
                cplx lap = (-v[pidx(i + 2, j)] + 16.0 * v[pidx(i + 1, j)] - 30.0 * v[s] + 16.0 * v[pidx(i - 1, j)] -
                            v[pidx(i - 2, j)]) *
                               (idx2[0] / 12.0) +
                           (-v[pidx(i, j + 2)] + 16.0 * v[pidx(i, j + 1)] - 30.0 * v[s] + 16.0 * v[pidx(i, j - 1)] -
                            v[pidx(i, j - 2)]) *
                               (idx2[1] / 12.0);
                cplx gx = (-v[pidx(i + 2, j)] + 8.0 * v[pidx(i + 1, j)] - 8.0 * v[pidx(i - 1, j)] + v[pidx(i - 2, j)]) *
                          (idx1[0] / 12.0);
                cplx gy = (-v[pidx(i, j + 2)] + 8.0 * v[pidx(i, j + 1)] - 8.0 * v[pidx(i, j - 1)] + v[pidx(i, j - 2)]) *
                          (idx1[1] / 12.0);
                cplx ut = ((*vp)[s] - (*vm)[s]) / (2.0 * dt_fd);
                cplx val = cplx(0, 1) * ut + c * lap + qv[s] * v[s];
                if (has_A_) {
                    double a1 = av[0][s], a2 = av[1][s];
                    val += c * (cplx(0, 2) * (a1 * gx + a2 * gy) + cplx(0, 1) * divv[s] * v[s] -
                                (a1 * a1 + a2 * a2) * v[s]);
                }
                out[s] = val;
            }
        }
        return out;
    }

    /// Transport source term for the residual audit:
    ///   G(V) = 2 i sqrt(c) omega.grad_A V + c'(t)(x.omega)/(2 c^{3/2}) V.
    std::vector<cplx> apply_G(int k, double t) {
        auto v0 = amplitude(k, t);
        std::vector<cplx> out(padded_count(), 0.0);
        double c = cs_.c_at(t);
        double cp = cs_.c_prime(t);
        std::vector<double> qv(padded_count()), divv(padded_count(), 0.0);
        std::vector<double> av[2];
        fill_coeff_slices(t, qv, av, divv);
        const double idx1[2] = {1.0 / g_.dx[0], 1.0 / g_.dx[1]};
        for (int i = -pad + 2; i < g_.nx[0] + pad - 2; ++i) {
            for (int j = -pad + 2; j < g_.nx[1] + pad - 2; ++j) {
                int s = pidx(i, j);
                const auto& v = *v0;
                cplx gx = (-v[pidx(i + 2, j)] + 8.0 * v[pidx(i + 1, j)] - 8.0 * v[pidx(i - 1, j)] + v[pidx(i - 2, j)]) *
                          (idx1[0] / 12.0);
                cplx gy = (-v[pidx(i, j + 2)] + 8.0 * v[pidx(i, j + 1)] - 8.0 * v[pidx(i, j - 1)] + v[pidx(i, j - 2)]) *
                          (idx1[1] / 12.0);
                cplx wgrad = spec_.omega[0] * gx + spec_.omega[1] * gy;
                if (has_A_) wgrad += cplx(0, 1) * (spec_.omega[0] * av[0][s] + spec_.omega[1] * av[1][s]) * v[s];
                Vec x = pcoord(i, j);
                cplx val = cplx(0, 2) * std::sqrt(c) * wgrad;
                if (cs_.c_time_dep) val += cp * dot(x, spec_.omega, g_.n) / (2.0 * std::pow(c, 1.5)) * v[s];
                out[s] = val;
            }
        }
        return out;
    }

    /// Pointwise V_0 (closed form; used for traces when no corrections are
    /// requested).
    cplx v0_at(double t, const Vec& x) const {
        double cutoff = time_cutoff(t);
        if (cutoff == 0.0) return 0.0;
        cplx w = W_at(g_, cs_, spec_.omega, t, x);
        if (spec_.amp.kind == AmplitudeSpec::Localized) {
            const auto& L = spec_.amp.loc;
            double p = (x[0] - L.x0[0]) * alpha_[0] + (x[1] - L.x0[1]) * alpha_[1];
            return cutoff * bump_chi(p / L.delta) * w;
        }
        return cutoff * theta_at(t, x) * w;
    }

    double time_cutoff(double t) const {
        if (spec_.amp.kind == AmplitudeSpec::Localized) return spec_.amp.loc.iota(t);
        return TimePlateau{g_.T, spec_.amp.zeta_h}(t);
    }

    /// True when every amplitude vanishes at time t (outside the cutoff
    /// support, with a small slack for time differencing).
    bool quiet_at(double t) const {
        double slack = 2.5 * fd_dt();
        if (spec_.amp.kind == AmplitudeSpec::Localized) {
            const auto& io = spec_.amp.loc.iota;
            return t < io.center - io.width - slack || t > io.center + io.width + slack;
        }
        double h = spec_.amp.zeta_h;
        if (h <= 0.0) return false;
        return t < h - slack || t > g_.T - h + slack;
    }

  private:
    const SpaceTimeGrid& g_;
    const CoefficientSet& cs_;
    ProbeSpec spec_;
    double wnorm_ = 1.0;
    Vec what_ = {1, 0, 0}, alpha_ = {0, 1, 0}, anchor_ = {0, 0, 0};
    double radius_ = 1.0, dstep_ = 0.01;
    int px_ = 0, py_ = 0;
    bool has_A_ = true;
    std::map<long, std::shared_ptr<const std::vector<cplx>>> cache_;
    std::optional<std::vector<cplx>> w_static_;  // W slice when A and c are static
    std::optional<std::vector<double>> j_static_;

    double fd_dt() const { return std::min(g_.dt, g_.T / 2048.0); }
    long quantize(double t) const { return std::lround(t / (0.25 * fd_dt())); }

    void fill_coeff_slices(double t, std::vector<double>& qv, std::vector<double> av[2], std::vector<double>& divv) {
        has_A_ = !cs_.A.is_zero();
        for (int i = -pad; i < g_.nx[0] + pad; ++i)
            for (int j = -pad; j < g_.nx[1] + pad; ++j) {
                int s = pidx(i, j);
                Vec x = pcoord(i, j);
                qv[s] = cs_.q.value(t, x, g_);
            }
        if (!has_A_) return;
        av[0].assign(padded_count(), 0.0);
        av[1].assign(padded_count(), 0.0);
        for (int i = -pad; i < g_.nx[0] + pad; ++i)
            for (int j = -pad; j < g_.nx[1] + pad; ++j) {
                int s = pidx(i, j);
                Vec x = pcoord(i, j);
                av[0][s] = cs_.A.comp[0].value(t, x, g_);
                av[1][s] = cs_.A.comp[1].value(t, x, g_);
                if (cs_.div_given) divv[s] = cs_.div_A.value(t, x, g_);
            }
        if (!cs_.div_given) {
            // centered divergence of the sampled slices
            for (int i = -pad + 1; i < g_.nx[0] + pad - 1; ++i)
                for (int j = -pad + 1; j < g_.nx[1] + pad - 1; ++j)
                    divv[pidx(i, j)] = (av[0][pidx(i + 1, j)] - av[0][pidx(i - 1, j)]) / (2 * g_.dx[0]) +
                                       (av[1][pidx(i, j + 1)] - av[1][pidx(i, j - 1)]) / (2 * g_.dx[1]);
        }
    }

    cplx theta_at(double t, const Vec& x) const {
        const ThetaSpec& th = spec_.amp.theta;
        switch (th.kind) {
            case ThetaSpec::Constant: return th.constant;
            case ThetaSpec::Modulation:
                return std::polar(1.0, -(t * th.tau + dot(x, th.xi, g_.n)));
            case ThetaSpec::DirectionalDeriv: {
                double J = th.theta_field ? line_integral_theta(t, x) : 0.0;
                double etaJ = 0.0;
                if (th.theta_field) {
                    double hh = 0.5 * g_.min_dx();
                    for (int d = 0; d < g_.n; ++d) {
                        if (th.eta[d] == 0.0) continue;
                        Vec xp = x, xm = x;
                        xp[d] += hh;
                        xm[d] -= hh;
                        etaJ += th.eta[d] * (line_integral_theta(t, xp) - line_integral_theta(t, xm)) / (2 * hh);
                    }
                }
                cplx mod = std::polar(1.0, -(t * th.tau + dot(x, th.xi, g_.n) + J));
                return mod * cplx(0, -1) * (dot(th.eta, th.xi, g_.n) + etaJ);
            }
        }
        return 0.0;
    }

    double line_integral_theta(double t, const Vec& x) const {
        auto [lo, hi] = detail::ray_box_span(g_, x, spec_.omega, 0.0, true);
        if (hi <= lo) return 0.0;
        return detail::simpson(
            [&](double s) {
                Vec p = x;
                for (int d = 0; d < g_.n; ++d) p[d] += s * spec_.omega[d];
                Vec th = spec_.amp.theta.theta_field(t, p);
                return dot(th, spec_.omega, g_.n);
            },
            lo, hi, 0.5 * g_.min_dx() / wnorm_);
    }

    std::vector<cplx> eval_V0(double t) {
        std::vector<cplx> out(padded_count(), 0.0);
        if (time_cutoff(t) == 0.0) return out;
        for (int i = -pad; i < g_.nx[0] + pad; ++i)
            for (int j = -pad; j < g_.nx[1] + pad; ++j) out[pidx(i, j)] = v0_at(t, pcoord(i, j));
        return out;
    }

    /// Integrate the transport relation along characteristics x = y + s omega
    /// from the anchor plane (where V_k = 0). A parallel ray family at half
    /// the grid step carries cumulative phase and source integrals; values
    /// are gathered onto grid nodes by cubic interpolation in the rotated
    /// (offset, arclength) frame.
    std::vector<cplx> transport(int k, double t) {
        std::vector<cplx> out(padded_count(), 0.0);
        if (quiet_at(t)) return out;
        auto src = apply_L(k - 1, t);

        double c = cs_.c_at(t);
        double cp = cs_.c_prime(t);
        int nrays = static_cast<int>(std::ceil(2 * radius_ / dstep_)) + 1;
        int nsteps = static_cast<int>(std::ceil(2 * radius_ / dstep_)) + 1;
        // cumulative integrals per ray: phi (transport weight phase, arclength
        // measure) and G = int e^{i phi} S du
        std::vector<std::vector<cplx>> vals(nrays, std::vector<cplx>(nsteps));
        std::vector<double> offs(nrays);
        for (int r = 0; r < nrays; ++r) {
            double p = -radius_ + r * dstep_;
            offs[r] = p;
            Vec y = {anchor_[0] + p * alpha_[0], anchor_[1] + p * alpha_[1], 0.0};
            double phi = 0.0;
            cplx G = 0.0;
            double prev_h = hfield_dot(t, y, c, cp);
            cplx prev_e_s = std::polar(1.0, phi) * sample_src(src, y);
            vals[r][0] = 0.0;
            for (int m = 1; m < nsteps; ++m) {
                Vec xm = {y[0] + (m - 0.5) * dstep_ * what_[0], y[1] + (m - 0.5) * dstep_ * what_[1], 0.0};
                Vec xe = {y[0] + m * dstep_ * what_[0], y[1] + m * dstep_ * what_[1], 0.0};
                double h_mid = hfield_dot(t, xm, c, cp);
                double h_end = hfield_dot(t, xe, c, cp);
                // Simpson increment of phi; midpoint phase to second order
                double dphi = dstep_ / 6.0 * (prev_h + 4.0 * h_mid + h_end);
                double phi_mid = phi + 0.5 * dphi;
                cplx e_mid = std::polar(1.0, phi_mid) * sample_src(src, xm);
                phi += dphi;
                cplx e_end = std::polar(1.0, phi) * sample_src(src, xe);
                G += dstep_ / 6.0 * (prev_e_s + 4.0 * e_mid + e_end);
                vals[r][m] = std::polar(1.0, -phi) * G;
                prev_h = h_end;
                prev_e_s = e_end;
            }
        }
        cplx scale = cplx(0, 1) / (2.0 * std::sqrt(c) * wnorm_);
        for (int i = -pad; i < g_.nx[0] + pad; ++i) {
            for (int j = -pad; j < g_.nx[1] + pad; ++j) {
                Vec x = pcoord(i, j);
                double p = (x[0] - anchor_[0]) * alpha_[0] + (x[1] - anchor_[1]) * alpha_[1];
                double u = (x[0] - anchor_[0]) * what_[0] + (x[1] - anchor_[1]) * what_[1];
                out[pidx(i, j)] = scale * interp_rays(vals, p, u, nrays, nsteps);
            }
        }
        return out;
    }

    /// (A - c'/(4c^2) x) . omega-hat: the transport weight integrand per unit
    /// arclength (the omega-parameter measure cancels one |omega| factor).
    double hfield_dot(double t, const Vec& x, double c, double cp) const {
        double acc = 0.0;
        if (!cs_.A.is_zero()) {
            Vec a = cs_.A.value(t, x, g_);
            acc += dot(a, what_, g_.n);
        }
        if (cs_.c_time_dep) acc -= cp / (4.0 * c * c) * dot(x, what_, g_.n);
        return acc;
    }

    cplx sample_src(const std::vector<cplx>& src, const Vec& x) const {
        // bilinear on the padded grid, zero beyond it
        double ui = x[0] / g_.dx[0], uj = x[1] / g_.dx[1];
        if (ui < -pad + 2 || ui > g_.nx[0] - 1 + pad - 2 || uj < -pad + 2 || uj > g_.nx[1] - 1 + pad - 2) return 0.0;
        int i0 = static_cast<int>(std::floor(ui)), j0 = static_cast<int>(std::floor(uj));
        double fi = ui - i0, fj = uj - j0;
        return (1 - fi) * (1 - fj) * src[pidx(i0, j0)] + fi * (1 - fj) * src[pidx(i0 + 1, j0)] +
               (1 - fi) * fj * src[pidx(i0, j0 + 1)] + fi * fj * src[pidx(i0 + 1, j0 + 1)];
    }

    cplx interp_rays(const std::vector<std::vector<cplx>>& vals, double p, double u, int nrays, int nsteps) const {
        double rf = (p + radius_) / dstep_;
        double uf = u / dstep_;
        auto cubic = [](cplx m1, cplx z0, cplx z1, cplx z2, double f) {
            // Catmull-Rom
            return z0 + 0.5 * f * (z1 - m1 + f * (2.0 * m1 - 5.0 * z0 + 4.0 * z1 - z2 + f * (3.0 * (z0 - z1) + z2 - m1)));
        };
        int r0 = static_cast<int>(std::floor(rf)), u0 = static_cast<int>(std::floor(uf));
        if (r0 < 1 || r0 > nrays - 3 || u0 < 1 || u0 > nsteps - 3) {
            // clamp to bilinear near the edges of the family
            int rc = std::clamp(r0, 0, nrays - 2), uc = std::clamp(u0, 0, nsteps - 2);
            double fr = std::clamp(rf - rc, 0.0, 1.0), fu = std::clamp(uf - uc, 0.0, 1.0);
            return (1 - fr) * (1 - fu) * vals[rc][uc] + fr * (1 - fu) * vals[rc + 1][uc] +
                   (1 - fr) * fu * vals[rc][uc + 1] + fr * fu * vals[rc + 1][uc + 1];
        }
        double fr = rf - r0, fu = uf - u0;
        cplx rows[4];
        for (int rr = 0; rr < 4; ++rr) {
            const auto& ray = vals[r0 - 1 + rr];
            rows[rr] = cubic(ray[u0 - 1], ray[u0], ray[u0 + 1], ray[u0 + 2], fu);
        }
        return cubic(rows[0], rows[1], rows[2], rows[3], fr);
    }
};

/// Geometric-optics probe: phase spec + amplitude hierarchy bound to a grid
/// and coefficient set. Realizes boundary traces and (on small grids) the
/// full ansatz field.
class Probe {
  public:
    Probe(const SpaceTimeGrid& g, const CoefficientSet& cs, ProbeSpec spec)
        : g_(g), cs_(cs), spec_(std::move(spec)), engine_(g, cs, spec_) {
        check_resolution(g, spec_.rho, spec_.omega);
        if (spec_.amp.kind == AmplitudeSpec::Localized) {
            const auto& L = spec_.amp.loc;
            double dist = g.dist_to_boundary(L.x0);
            if (dist <= L.delta + cs.support_margin)
                throw std::invalid_argument("go: localized probe too close to the boundary collar");
        }
    }

    const ProbeSpec& spec() const { return spec_; }
    AmplitudeEngine& engine() { return engine_; }

    cplx phase_factor(double t, const Vec& x) const {
        return std::polar(1.0, phase_at(spec_.rho, spec_.omega, cs_, t, x, g_.n));
    }

    CarrierSpec carrier() const { return CarrierSpec{spec_.rho, spec_.omega, &cs_}; }

    /// Boundary trace of e^{i Phi} sum_k rho^{-k} V_k.
    BoundaryTrace trace() {
        BoundaryTrace tr(g_);
        for (int k = 0; k <= g_.nt; ++k) {
            double t = g_.time_at(k);
            if (engine_.quiet_at(t)) continue;
            if (spec_.order == 0) {
                for (std::size_t fi = 0; fi < g_.faces.size(); ++fi) {
                    const Face& face = g_.faces[fi];
                    for (std::size_t j = 0; j < face.nodes.size(); ++j) {
                        Vec x = g_.coords(face.nodes[j]);
                        tr.at(static_cast<int>(fi), k, static_cast<int>(j)) = phase_factor(t, x) * engine_.v0_at(t, x);
                    }
                }
            } else {
                std::vector<std::shared_ptr<const std::vector<cplx>>> amps;
                for (int ord = 0; ord <= spec_.order; ++ord) amps.push_back(engine_.amplitude(ord, t));
                for (std::size_t fi = 0; fi < g_.faces.size(); ++fi) {
                    const Face& face = g_.faces[fi];
                    for (std::size_t j = 0; j < face.nodes.size(); ++j) {
                        int node = face.nodes[j];
                        auto idx = g_.unflat(node);
                        cplx amp = 0.0;
                        double rp = 1.0;
                        for (int ord = 0; ord <= spec_.order; ++ord) {
                            amp += (*amps[ord])[engine_.pidx(idx[0], idx[1])] * rp;
                            rp /= spec_.rho;
                        }
                        Vec x = g_.coords(node);
                        tr.at(static_cast<int>(fi), k, static_cast<int>(j)) = phase_factor(t, x) * amp;
                    }
                }
            }
        }
        return tr;
    }

    /// Full ansatz on the grid. Intended for small grids and tests.
    ComplexField materialize() {
        ComplexField out(g_);
        for (int k = 0; k <= g_.nt; ++k) {
            double t = g_.time_at(k);
            if (engine_.quiet_at(t)) continue;
            std::vector<std::shared_ptr<const std::vector<cplx>>> amps;
            for (int ord = 0; ord <= spec_.order; ++ord) amps.push_back(engine_.amplitude(ord, t));
            for (int s = 0; s < g_.num_space(); ++s) {
                auto idx = g_.unflat(s);
                cplx amp = 0.0;
                double rp = 1.0;
                for (int ord = 0; ord <= spec_.order; ++ord) {
                    amp += (*amps[ord])[engine_.pidx(idx[0], idx[1])] * rp;
                    rp /= spec_.rho;
                }
                out.at(k, s) = phase_factor(t, g_.coords(s)) * amp;
            }
        }
        return out;
    }
};

inline BoundaryTrace probe_trace(Probe& probe) { return probe.trace(); }

/// Materialized amplitude fields for the individual construction stages.

inline ComplexField build_W(const SpaceTimeGrid& g, const CoefficientSet& cs, const Vec& omega) {
    ComplexField out(g);
    for (int k = 0; k <= g.nt; ++k)
        for (int s = 0; s < g.num_space(); ++s) out.at(k, s) = W_at(g, cs, omega, g.time_at(k), g.coords(s));
    return out;
}

inline ComplexField build_nonlocalized_V0(const SpaceTimeGrid& g, const CoefficientSet& cs, const Vec& omega,
                                          const ThetaSpec& theta, double zeta_h) {
    ProbeSpec spec;
    spec.rho = 0.0;
    spec.omega = omega;
    spec.amp.kind = AmplitudeSpec::NonLocalized;
    spec.amp.theta = theta;
    spec.amp.zeta_h = zeta_h;
    spec.order = 0;
    AmplitudeEngine eng(g, cs, spec);
    ComplexField out(g);
    for (int k = 0; k <= g.nt; ++k) {
        double t = g.time_at(k);
        for (int s = 0; s < g.num_space(); ++s) out.at(k, s) = eng.v0_at(t, g.coords(s));
    }
    return out;
}

inline ComplexField build_localized_V0(const SpaceTimeGrid& g, const CoefficientSet& cs, const Vec& omega,
                                       const LocalizedSpec& loc) {
    ProbeSpec spec;
    spec.rho = 0.0;
    spec.omega = omega;
    spec.amp.kind = AmplitudeSpec::Localized;
    spec.amp.loc = loc;
    spec.order = 0;
    AmplitudeEngine eng(g, cs, spec);
    ComplexField out(g);
    for (int k = 0; k <= g.nt; ++k) {
        double t = g.time_at(k);
        for (int s = 0; s < g.num_space(); ++s) out.at(k, s) = eng.v0_at(t, g.coords(s));
    }
    return out;
}

/// V_k from V_{k-1} through the characteristic integral; returns the
/// correction sampled on the grid.
inline ComplexField transport_correction(const SpaceTimeGrid& g, const CoefficientSet& cs, const ProbeSpec& spec,
                                         int korder) {
    AmplitudeEngine eng(g, cs, spec);
    ComplexField out(g);
    for (int k = 0; k <= g.nt; ++k) {
        double t = g.time_at(k);
        auto slice = eng.amplitude(korder, t);
        for (int s = 0; s < g.num_space(); ++s) {
            auto idx = g.unflat(s);
            out.at(k, s) = (*slice)[eng.pidx(idx[0], idx[1])];
        }
    }
    return out;
}

struct ResidualReport {
    std::vector<double> rhos;
    std::vector<double> residuals;  // ||L(e^{i Phi} sum rho^{-k} V_k)||_{L2(Q)}
    double slope = 0.0;             // log-log fit
};

inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ys[i] <= 0.0) continue;
        double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        n++;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Residual of the ansatz against the full operator, swept over rho. The
/// unit-modulus phase is peeled analytically:
///   L(e^{i Phi} V) = e^{i Phi} (L V + rho G(V)),
/// so the quadrature differences only the smooth amplitudes.
inline ResidualReport residual_audit(const SpaceTimeGrid& g, const CoefficientSet& cs, ProbeSpec spec,
                                     const std::vector<double>& rho_list) {
    ResidualReport rep;
    for (double rho : rho_list) check_resolution(g, rho, spec.omega);
    AmplitudeEngine eng(g, cs, spec);
    int N = spec.order;
    // accumulate per-slice L2 of  sum_k rho^{-k} L V_k + rho^{1-k} G(V_k)
    std::vector<double> acc(rho_list.size(), 0.0);
    for (int k = 0; k <= g.nt; ++k) {
        double t = g.time_at(k);
        if (eng.quiet_at(t)) continue;
        std::vector<std::vector<cplx>> LV, GV;
        for (int ord = 0; ord <= N; ++ord) {
            LV.push_back(eng.apply_L(ord, t));
            GV.push_back(eng.apply_G(ord, t));
        }
        double wt = g.time_weight(k);
        for (std::size_t r = 0; r < rho_list.size(); ++r) {
            double rho = rho_list[r];
            double sum = 0.0;
            for (int s = 0; s < g.num_space(); ++s) {
                auto idx = g.unflat(s);
                int ps = eng.pidx(idx[0], idx[1]);
                cplx e = 0.0;
                double rp = 1.0;
                for (int ord = 0; ord <= N; ++ord) {
                    e += rp * (LV[ord][ps] + rho * GV[ord][ps]);
                    rp /= rho;
                }
                sum += g.space_weight(s) * std::norm(e);
            }
            acc[r] += wt * sum;
        }
    }
    rep.rhos = rho_list;
    for (double a : acc) rep.residuals.push_back(std::sqrt(a));
    rep.slope = loglog_slope(rep.rhos, rep.residuals);
    return rep;
}

}  // namespace mse::go
