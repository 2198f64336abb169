#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mse/array.hpp"
#include "mse/grid.hpp"

namespace mse {

/// Complex data on the lateral boundary: one [time x nodes] block per face.
/// Corner nodes are stored on every face they belong to; boundary quadrature
/// is face-wise trapezoid, matching the surface measure of the box.
struct BoundaryTrace {
    const SpaceTimeGrid* grid = nullptr;
    std::vector<ComplexArray> face_vals;

    BoundaryTrace() = default;
    explicit BoundaryTrace(const SpaceTimeGrid& g) : grid(&g) {
        for (const auto& f : g.faces)
            face_vals.emplace_back(std::vector<std::size_t>{static_cast<std::size_t>(g.num_time()), f.nodes.size()});
    }

    cplx& at(int face, int k, int j) { return face_vals[face].at2(k, j); }
    cplx at(int face, int k, int j) const { return face_vals[face].at2(k, j); }

    /// Number of leading time samples that vanish (relative to the max), at
    /// t=0 or t=T.
    int vanish_order(bool at_T, double rel_tol = 1e-9) const {
        double scale = 0.0;
        for (const auto& fv : face_vals)
            for (const auto& v : fv.data) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) return grid->num_time();
        int order = 0;
        for (int step = 0; step < grid->num_time(); ++step) {
            int k = at_T ? grid->nt - step : step;
            double m = 0.0;
            for (const auto& fv : face_vals)
                for (std::size_t j = 0; j < fv.shape[1]; ++j) m = std::max(m, std::abs(fv.at2(k, j)));
            if (m > rel_tol * scale) break;
            order++;
        }
        return order;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& fv : face_vals)
            for (const auto& v : fv.data) m = std::max(m, std::abs(v));
        return m;
    }
};

inline BoundaryTrace sample_trace(const SpaceTimeGrid& g, const std::function<cplx(double, const Vec&)>& f) {
    BoundaryTrace tr(g);
    for (std::size_t fi = 0; fi < g.faces.size(); ++fi) {
        const Face& face = g.faces[fi];
        for (int k = 0; k <= g.nt; ++k) {
            double t = g.time_at(k);
            for (std::size_t j = 0; j < face.nodes.size(); ++j)
                tr.at(static_cast<int>(fi), k, static_cast<int>(j)) = f(t, g.coords(face.nodes[j]));
        }
    }
    return tr;
}

inline BoundaryTrace restrict_to_boundary(const ComplexField& u) {
    const SpaceTimeGrid& g = *u.grid;
    BoundaryTrace tr(g);
    for (std::size_t fi = 0; fi < g.faces.size(); ++fi) {
        const Face& face = g.faces[fi];
        for (int k = 0; k <= g.nt; ++k)
            for (std::size_t j = 0; j < face.nodes.size(); ++j)
                tr.at(static_cast<int>(fi), k, static_cast<int>(j)) = u.at(k, face.nodes[j]);
    }
    return tr;
}

/// Magnetic normal derivative nu.(grad + iA)u restricted to Gamma, one block
/// per Gamma face. `c_scaled` marks records of c(t) nu.(grad+iA)u.
struct DNRecord {
    const SpaceTimeGrid* grid = nullptr;
    std::vector<int> face_ids;              // faces in Gamma
    std::vector<ComplexArray> face_vals;    // aligned with face_ids
    std::string coeff_id, trace_id;
    std::vector<double> eps;
    bool c_scaled = false;

    DNRecord() = default;
    explicit DNRecord(const SpaceTimeGrid& g) : grid(&g) {
        for (std::size_t fi = 0; fi < g.faces.size(); ++fi) {
            if (!g.gamma_face[fi]) continue;
            face_ids.push_back(static_cast<int>(fi));
            face_vals.emplace_back(
                std::vector<std::size_t>{static_cast<std::size_t>(g.num_time()), g.faces[fi].nodes.size()});
        }
    }

    DNRecord& operator+=(const DNRecord& o) {
        for (std::size_t b = 0; b < face_vals.size(); ++b)
            for (std::size_t i = 0; i < face_vals[b].data.size(); ++i) face_vals[b].data[i] += o.face_vals[b].data[i];
        return *this;
    }
    DNRecord& operator-=(const DNRecord& o) {
        for (std::size_t b = 0; b < face_vals.size(); ++b)
            for (std::size_t i = 0; i < face_vals[b].data.size(); ++i) face_vals[b].data[i] -= o.face_vals[b].data[i];
        return *this;
    }
    DNRecord& operator*=(double s) {
        for (auto& fv : face_vals)
            for (auto& v : fv.data) v *= s;
        return *this;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& fv : face_vals)
            for (const auto& v : fv.data) m = std::max(m, std::abs(v));
        return m;
    }
};

/// L2(Sigma-sharp) pairing of a DN record against a boundary trace:
/// integral of rec * conj(tr) over Gamma x (0,T). Antilinear in `tr`.
inline cplx pair_dn_trace(const DNRecord& rec, const BoundaryTrace& tr) {
    const SpaceTimeGrid& g = *rec.grid;
    cplx acc = 0.0;
    for (std::size_t b = 0; b < rec.face_ids.size(); ++b) {
        const Face& face = g.faces[rec.face_ids[b]];
        const ComplexArray& vals = rec.face_vals[b];
        for (int k = 0; k <= g.nt; ++k) {
            double wt = g.time_weight(k);
            cplx row = 0.0;
            for (std::size_t j = 0; j < face.nodes.size(); ++j)
                row += vals.at2(k, j) * std::conj(tr.at(rec.face_ids[b], k, static_cast<int>(j))) *
                       g.face_weight(face, face.nodes[j]);
            acc += wt * row;
        }
    }
    return acc;
}

/// L2(Sigma) norm of a DN record (Gamma faces only).
inline double dn_norm(const DNRecord& rec) {
    const SpaceTimeGrid& g = *rec.grid;
    double acc = 0.0;
    for (std::size_t b = 0; b < rec.face_ids.size(); ++b) {
        const Face& face = g.faces[rec.face_ids[b]];
        const ComplexArray& vals = rec.face_vals[b];
        for (int k = 0; k <= g.nt; ++k) {
            double wt = g.time_weight(k);
            double row = 0.0;
            for (std::size_t j = 0; j < face.nodes.size(); ++j)
                row += std::norm(vals.at2(k, j)) * g.face_weight(face, face.nodes[j]);
            acc += wt * row;
        }
    }
    return std::sqrt(acc);
}

}  // namespace mse
