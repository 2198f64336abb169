#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "mse/boundary.hpp"
#include "mse/grid.hpp"

namespace mse {

enum class NormKind { L2Q, L2H1, H1Q, Sup };

inline NormKind norm_kind_from(const std::string& s) {
    if (s == "L2(Q)" || s == "l2") return NormKind::L2Q;
    if (s == "L2(0,T;H1)" || s == "l2h1") return NormKind::L2H1;
    if (s == "H1(Q)" || s == "h1") return NormKind::H1Q;
    if (s == "sup") return NormKind::Sup;
    throw std::invalid_argument("unknown norm kind " + s);
}

namespace detail {

/// Centered spatial gradient component (one-sided at the box faces).
inline cplx grad_comp(const ComplexField& u, int k, int s, int d) {
    const SpaceTimeGrid& g = *u.grid;
    auto idx = g.unflat(s);
    auto ip = idx, im = idx;
    ip[d] = std::min(idx[d] + 1, g.nx[d] - 1);
    im[d] = std::max(idx[d] - 1, 0);
    double span = (ip[d] - im[d]) * g.dx[d];
    return (u.at(k, g.flat(ip)) - u.at(k, g.flat(im))) / span;
}

inline cplx dt_comp(const ComplexField& u, int k, int s) {
    const SpaceTimeGrid& g = *u.grid;
    int kp = std::min(k + 1, g.nt), km = std::max(k - 1, 0);
    return (u.at(kp, s) - u.at(km, s)) / ((kp - km) * g.dt);
}

}  // namespace detail

/// Space-time quadrature norms (trapezoidal weights; H1 pieces use centered
/// differences).
inline double discrete_norm(const ComplexField& u, NormKind kind) {
    const SpaceTimeGrid& g = *u.grid;
    if (kind == NormKind::Sup) {
        double m = 0.0;
        for (const auto& v : u.data) m = std::max(m, std::abs(v));
        return m;
    }
    double acc = 0.0;
    for (int k = 0; k <= g.nt; ++k) {
        double wt = g.time_weight(k);
        double row = 0.0;
        for (int s = 0; s < g.num_space(); ++s) {
            double ws = g.space_weight(s);
            double val = std::norm(u.at(k, s));
            if (kind == NormKind::L2H1 || kind == NormKind::H1Q)
                for (int d = 0; d < g.n; ++d) val += std::norm(detail::grad_comp(u, k, s, d));
            if (kind == NormKind::H1Q) val += std::norm(detail::dt_comp(u, k, s));
            row += ws * val;
        }
        acc += wt * row;
    }
    return std::sqrt(acc);
}

/// L2(Omega) norm of one time slice.
inline double slice_l2(const ComplexField& u, int k) {
    const SpaceTimeGrid& g = *u.grid;
    double acc = 0.0;
    for (int s = 0; s < g.num_space(); ++s) acc += g.space_weight(s) * std::norm(u.at(k, s));
    return std::sqrt(acc);
}

inline double slice_l2(const SpaceTimeGrid& g, const cplx* slice) {
    double acc = 0.0;
    for (int s = 0; s < g.num_space(); ++s) acc += g.space_weight(s) * std::norm(slice[s]);
    return std::sqrt(acc);
}

enum class PairRegion { Q, OmegaSlice, Sigma };

/// L2 pairing <u, v> = integral of u * conj(v); antilinear in v.
inline cplx pairing(const ComplexField& u, const ComplexField& v, PairRegion region, int slice_k = 0) {
    const SpaceTimeGrid& g = *u.grid;
    if (u.grid != v.grid || u.data.size() != v.data.size())
        throw std::invalid_argument("pairing: fields on different grids");
    cplx acc = 0.0;
    switch (region) {
        case PairRegion::OmegaSlice: {
            for (int s = 0; s < g.num_space(); ++s)
                acc += g.space_weight(s) * u.at(slice_k, s) * std::conj(v.at(slice_k, s));
            return acc;
        }
        case PairRegion::Q: {
            for (int k = 0; k <= g.nt; ++k) {
                double wt = g.time_weight(k);
                cplx row = 0.0;
                for (int s = 0; s < g.num_space(); ++s)
                    row += g.space_weight(s) * u.at(k, s) * std::conj(v.at(k, s));
                acc += wt * row;
            }
            return acc;
        }
        case PairRegion::Sigma: {
            for (const auto& face : g.faces) {
                for (int k = 0; k <= g.nt; ++k) {
                    double wt = g.time_weight(k);
                    cplx row = 0.0;
                    for (int node : face.nodes)
                        row += g.face_weight(face, node) * u.at(k, node) * std::conj(v.at(k, node));
                    acc += wt * row;
                }
            }
            return acc;
        }
    }
    return acc;
}

}  // namespace mse
