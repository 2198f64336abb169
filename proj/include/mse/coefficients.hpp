#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mse/cutoffs.hpp"
#include "mse/grid.hpp"

namespace mse {

/// Real scalar coefficient on the space-time cylinder. Holds an analytic
/// callable when available (exact off-grid evaluation for ray quadratures)
/// and/or a spatial sample array with an optional separable time profile.
struct ScalarCoeff {
    std::function<double(double, const Vec&)> fn;  // full (t,x) callable
    RealField samples;                             // spatial samples (time-independent part)
    std::function<double(double)> tprofile;        // multiplies samples; default 1
    bool time_dep = false;

    bool is_zero() const { return !fn && samples.data.empty(); }

    static ScalarCoeff zero() { return {}; }

    static ScalarCoeff analytic(std::function<double(double, const Vec&)> f, bool tdep) {
        ScalarCoeff c;
        c.fn = std::move(f);
        c.time_dep = tdep;
        return c;
    }

    static ScalarCoeff sampled(RealField f, std::function<double(double)> tp = nullptr) {
        ScalarCoeff c;
        c.samples = std::move(f);
        c.tprofile = std::move(tp);
        c.time_dep = static_cast<bool>(c.tprofile);
        return c;
    }

    double value(double t, const Vec& x, const SpaceTimeGrid& g) const {
        if (fn) return fn(t, x);
        if (samples.data.empty()) return 0.0;
        double v = interp(x, g);
        return tprofile ? v * tprofile(t) : v;
    }

    /// Evaluate on the spatial grid at time t.
    void slice(double t, const SpaceTimeGrid& g, std::vector<double>& out) const {
        out.assign(g.num_space(), 0.0);
        if (fn) {
            for (int s = 0; s < g.num_space(); ++s) out[s] = fn(t, g.coords(s));
            return;
        }
        if (samples.data.empty()) return;
        double scale = tprofile ? tprofile(t) : 1.0;
        for (int s = 0; s < g.num_space(); ++s) out[s] = samples.data[s] * scale;
    }

    double interp(const Vec& x, const SpaceTimeGrid& g) const {
        // multilinear interpolation, zero outside the box
        std::array<int, 3> i0 = {0, 0, 0};
        Vec frac = {0, 0, 0};
        for (int d = 0; d < g.n; ++d) {
            double u = x[d] / g.dx[d];
            if (u < 0.0 || u > g.nx[d] - 1.0) return 0.0;
            i0[d] = std::min(static_cast<int>(u), g.nx[d] - 2);
            frac[d] = u - i0[d];
        }
        double acc = 0.0;
        int corners = 1 << g.n;
        for (int c = 0; c < corners; ++c) {
            std::array<int, 3> idx = i0;
            double w = 1.0;
            for (int d = 0; d < g.n; ++d) {
                if (c & (1 << d)) {
                    idx[d] += 1;
                    w *= frac[d];
                } else
                    w *= 1.0 - frac[d];
            }
            acc += w * samples.data[g.flat(idx)];
        }
        return acc;
    }
};

struct VectorCoeff {
    std::array<ScalarCoeff, 3> comp;

    bool is_zero() const {
        for (const auto& c : comp)
            if (!c.is_zero()) return false;
        return true;
    }
    bool time_dep() const {
        for (const auto& c : comp)
            if (c.time_dep) return true;
        return false;
    }
    Vec value(double t, const Vec& x, const SpaceTimeGrid& g) const {
        return {comp[0].value(t, x, g), comp[1].value(t, x, g), comp[2].value(t, x, g)};
    }
};

/// Leading coefficient c(t), magnetic potential A, electric potential q, and
/// the nonlinear coefficient family B_{sigma,beta} (sigma >= 1,
/// 2 <= sigma+beta <= max_order). A and q vanish on the boundary collar.
struct CoefficientSet {
    std::string id = "unnamed";
    const SpaceTimeGrid* grid = nullptr;

    std::function<double(double)> c;  // null means c == 1
    bool c_time_dep = false;
    VectorCoeff A;
    ScalarCoeff q;
    ScalarCoeff q_im;  // imaginary part of q; diagnostic knob, breaks self-adjointness
    std::map<std::pair<int, int>, ScalarCoeff> B;
    ScalarCoeff div_A;
    bool div_given = false;
    double support_margin = 0.15;

    static constexpr int max_order = 5;

    double c_at(double t) const { return c ? c(t) : 1.0; }
    double c_prime(double t) const {
        if (!c_time_dep || !c) return 0.0;
        double h = 1e-5 * std::max(1.0, grid ? grid->T : 1.0);
        return (c(t + h) - c(t - h)) / (2 * h);
    }

    bool matrix_time_dep() const { return c_time_dep || A.time_dep() || q.time_dep; }
    bool has_nonlinearity() const {
        for (const auto& [k, b] : B)
            if (!b.is_zero()) return true;
        return false;
    }
};

struct CoeffValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Closed-form inputs for sample_coefficients. Every spatial spec is
/// multiplied by the collar cutoff so A, q, B vanish identically near the
/// boundary. A can instead be given as a stream function (n=2): the masked
/// stream function is differenced discretely, which makes the discrete
/// divergence vanish to round-off.
struct CoefficientSpecs {
    std::string id = "set";
    std::function<double(double)> c;  // default 1
    bool c_time_dep = false;
    std::function<double(double, const Vec&)> A1, A2;  // components (already collar-supported or masked below)
    std::function<double(double, const Vec&)> q;
    std::map<std::pair<int, int>, std::function<double(double, const Vec&)>> B;
    std::function<double(double, const Vec&)> stream_psi;  // alternative to A1/A2
    bool mask_with_collar = true;
    bool time_dep_Aq = false;
    double support_margin = 0.15;
    double c0 = 1e-6;
};

inline double collar_factor(const SpaceTimeGrid& g, const Vec& x, double margin) {
    return CollarCutoff{margin}(g.dist_to_boundary(x));
}

inline CoefficientSet sample_coefficients(const SpaceTimeGrid& g, const CoefficientSpecs& spec) {
    if (spec.support_margin <= 0) throw CoeffValidationError("sample_coefficients: support_margin must be positive");
    CoefficientSet set;
    set.id = spec.id;
    set.grid = &g;
    set.support_margin = spec.support_margin;
    set.c = spec.c;
    set.c_time_dep = spec.c_time_dep;

    if (spec.c) {
        for (int k = 0; k <= g.nt; ++k) {
            double v = spec.c(g.time_at(k));
            if (!(v > spec.c0) || !std::isfinite(v))
                throw CoeffValidationError("sample_coefficients: c(t) must stay above c0 > 0");
        }
    }

    double margin = spec.support_margin;
    auto masked = [&g, margin, &spec](std::function<double(double, const Vec&)> f) {
        if (!f) return std::function<double(double, const Vec&)>();
        if (!spec.mask_with_collar) return f;
        return std::function<double(double, const Vec&)>([&g, margin, f](double t, const Vec& x) {
            return f(t, x) * collar_factor(g, x, margin);
        });
    };

    if (spec.stream_psi) {
        if (g.n != 2) throw CoeffValidationError("sample_coefficients: stream function needs n=2");
        // discrete curl of the masked stream function; centered differences
        // commute, so the discrete divergence cancels exactly. Differencing
        // widens support by one node, so mask one cell deeper.
        double psi_margin = margin + std::max(g.dx[0], g.dx[1]);
        RealField psi(g);
        for (int s = 0; s < g.num_space(); ++s) {
            Vec x = g.coords(s);
            psi.data[s] = spec.stream_psi(0.0, x) *
                          (spec.mask_with_collar ? collar_factor(g, x, psi_margin) : 1.0);
        }
        RealField a1(g), a2(g);
        auto D = [&](const RealField& f, int s, int axis) {
            auto idx = g.unflat(s);
            auto ip = idx, im = idx;
            ip[axis] = std::min(idx[axis] + 1, g.nx[axis] - 1);
            im[axis] = std::max(idx[axis] - 1, 0);
            double span = (ip[axis] - im[axis]) * g.dx[axis];
            return span > 0 ? (f.data[g.flat(ip)] - f.data[g.flat(im)]) / span : 0.0;
        };
        for (int s = 0; s < g.num_space(); ++s) {
            a1.data[s] = D(psi, s, 1);
            a2.data[s] = -D(psi, s, 0);
        }
        set.A.comp[0] = ScalarCoeff::sampled(std::move(a1));
        set.A.comp[1] = ScalarCoeff::sampled(std::move(a2));
        set.div_A = ScalarCoeff::zero();
        set.div_given = true;
    } else {
        if (spec.A1) set.A.comp[0] = ScalarCoeff::analytic(masked(spec.A1), spec.time_dep_Aq);
        if (spec.A2) set.A.comp[1] = ScalarCoeff::analytic(masked(spec.A2), spec.time_dep_Aq);
    }
    if (spec.q) set.q = ScalarCoeff::analytic(masked(spec.q), spec.time_dep_Aq);
    for (const auto& [sb, f] : spec.B) {
        if (sb.first < 1) throw CoeffValidationError("sample_coefficients: sigma >= 1 required");
        int order = sb.first + sb.second;
        if (order < 2 || order > CoefficientSet::max_order)
            throw CoeffValidationError("sample_coefficients: need 2 <= sigma+beta <= 5");
        set.B[sb] = ScalarCoeff::analytic(masked(f), spec.time_dep_Aq);
    }

    // collar support check on grid samples
    double amax = 0.0;
    for (int s = 0; s < g.num_space(); ++s) {
        Vec x = g.coords(s);
        for (int d = 0; d < g.n; ++d) amax = std::max(amax, std::abs(set.A.comp[d].value(0.0, x, g)));
        amax = std::max(amax, std::abs(set.q.value(0.0, x, g)));
    }
    double tol = 1e-12 * std::max(1.0, amax);
    for (int s = 0; s < g.num_space(); ++s) {
        Vec x = g.coords(s);
        if (g.dist_to_boundary(x) < margin) {
            for (int d = 0; d < g.n; ++d)
                if (std::abs(set.A.comp[d].value(0.0, x, g)) > tol)
                    throw CoeffValidationError("sample_coefficients: A does not vanish on the collar");
            if (std::abs(set.q.value(0.0, x, g)) > tol)
                throw CoeffValidationError("sample_coefficients: q does not vanish on the collar");
        }
    }
    return set;
}

/// Discrete divergence of A (centered differences) sampled at time t.
inline std::vector<double> discrete_divergence(const CoefficientSet& set, double t) {
    const SpaceTimeGrid& g = *set.grid;
    std::vector<double> div(g.num_space(), 0.0);
    std::vector<double> ad;
    for (int d = 0; d < g.n; ++d) {
        set.A.comp[d].slice(t, g, ad);
        for (int s = 0; s < g.num_space(); ++s) {
            auto idx = g.unflat(s);
            auto ip = idx, im = idx;
            ip[d] = std::min(idx[d] + 1, g.nx[d] - 1);
            im[d] = std::max(idx[d] - 1, 0);
            double span = (ip[d] - im[d]) * g.dx[d];
            if (span > 0) div[s] += (ad[g.flat(ip)] - ad[g.flat(im)]) / span;
        }
    }
    return div;
}

}  // namespace mse
