#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mse/array.hpp"

namespace mse {

using Vec = std::array<double, 3>;

inline double dot(const Vec& a, const Vec& b, int n) {
    double s = 0;
    for (int d = 0; d < n; ++d) s += a[d] * b[d];
    return s;
}
inline double norm2(const Vec& a, int n) { return std::sqrt(dot(a, a, n)); }

/// One axis-aligned boundary face of the box: axis d, side 0 (x_d = 0) or
/// side 1 (x_d = L_d). Face nodes include the box edges/corners, so corner
/// nodes appear on every face they touch; boundary quadrature is face-wise.
struct Face {
    int axis = 0;
    int side = 0;  // 0: lower, 1: upper
    std::vector<int> nodes;  // flat spatial indices, lexicographic over the face
};

/// Uniform tensor grid over [0,L1]x...x[0,Ln] x [0,T].
/// Spatial nodes are flat row-major indices; time samples k = 0..nt.
struct SpaceTimeGrid {
    int n = 2;
    Vec box = {1.0, 1.0, 1.0};
    double T = 1.0;
    std::array<int, 3> nx = {65, 65, 1};
    int nt = 256;

    Vec dx = {0, 0, 0};
    double dt = 0;

    std::vector<Face> faces;             // 2n faces
    std::vector<int> boundary_nodes;     // deduplicated flat indices
    std::vector<std::uint8_t> gamma_face;  // per face: 1 if in Gamma
    std::string gamma_spec = "full";

    int num_space() const {
        int s = 1;
        for (int d = 0; d < n; ++d) s *= nx[d];
        return s;
    }
    int num_time() const { return nt + 1; }

    int flat(const std::array<int, 3>& idx) const {
        int f = 0;
        for (int d = 0; d < n; ++d) f = f * nx[d] + idx[d];
        return f;
    }
    std::array<int, 3> unflat(int f) const {
        std::array<int, 3> idx = {0, 0, 0};
        for (int d = n - 1; d >= 0; --d) {
            idx[d] = f % nx[d];
            f /= nx[d];
        }
        return idx;
    }
    Vec coords(int f) const {
        auto idx = unflat(f);
        Vec x = {0, 0, 0};
        for (int d = 0; d < n; ++d) x[d] = idx[d] * dx[d];
        return x;
    }
    double time_at(int k) const { return k * dt; }

    bool on_boundary(int f) const {
        auto idx = unflat(f);
        for (int d = 0; d < n; ++d)
            if (idx[d] == 0 || idx[d] == nx[d] - 1) return true;
        return false;
    }

    double dist_to_boundary(const Vec& x) const {
        double m = 1e300;
        for (int d = 0; d < n; ++d) m = std::min({m, x[d], box[d] - x[d]});
        return m;
    }

    double min_dx() const {
        double m = dx[0];
        for (int d = 1; d < n; ++d) m = std::min(m, dx[d]);
        return m;
    }

    /// Trapezoidal quadrature weight of a spatial node (product of per-axis
    /// weights, halved at the ends).
    double space_weight(int f) const {
        auto idx = unflat(f);
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            double wd = dx[d];
            if (idx[d] == 0 || idx[d] == nx[d] - 1) wd *= 0.5;
            w *= wd;
        }
        return w;
    }
    double time_weight(int k) const { return (k == 0 || k == nt) ? 0.5 * dt : dt; }

    /// Surface weight of a node within a face (trapezoid over the n-1
    /// transverse axes).
    double face_weight(const Face& face, int node) const {
        auto idx = unflat(node);
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            if (d == face.axis) continue;
            double wd = dx[d];
            if (idx[d] == 0 || idx[d] == nx[d] - 1) wd *= 0.5;
            w *= wd;
        }
        return w;
    }

    /// Outward normal of a face.
    Vec face_normal(const Face& face) const {
        Vec nu = {0, 0, 0};
        nu[face.axis] = face.side == 0 ? -1.0 : 1.0;
        return nu;
    }
};

/// gamma_spec: "full" or "faces:<name>[,<name>...]" with names among
/// x0,x1,y0,y1,z0,z1 (axis letter + side).
inline SpaceTimeGrid make_grid(int n, const Vec& box_lengths, double T, const std::array<int, 3>& nx, int nt,
                               const std::string& gamma_spec = "full") {
    if (n < 1 || n > 3) throw std::invalid_argument("make_grid: n must be 1, 2, or 3");
    if (T <= 0) throw std::invalid_argument("make_grid: T must be positive");
    if (nt < 16) throw std::invalid_argument("make_grid: nt must be >= 16");
    for (int d = 0; d < n; ++d) {
        if (box_lengths[d] <= 0) throw std::invalid_argument("make_grid: box lengths must be positive");
        if (nx[d] < 16) throw std::invalid_argument("make_grid: nx must be >= 16 per axis");
    }

    SpaceTimeGrid g;
    g.n = n;
    g.box = box_lengths;
    g.T = T;
    g.nx = nx;
    for (int d = n; d < 3; ++d) g.nx[d] = 1;
    g.nt = nt;
    for (int d = 0; d < n; ++d) g.dx[d] = box_lengths[d] / (nx[d] - 1);
    g.dt = T / nt;
    g.gamma_spec = gamma_spec;

    // enumerate faces
    for (int axis = 0; axis < n; ++axis) {
        for (int side = 0; side < 2; ++side) {
            Face face;
            face.axis = axis;
            face.side = side;
            std::array<int, 3> idx = {0, 0, 0};
            // iterate lexicographically over the other axes
            std::vector<int> other;
            for (int d = 0; d < n; ++d)
                if (d != axis) other.push_back(d);
            int count = 1;
            for (int d : other) count *= g.nx[d];
            for (int c = 0; c < count; ++c) {
                int rem = c;
                for (int j = static_cast<int>(other.size()) - 1; j >= 0; --j) {
                    idx[other[j]] = rem % g.nx[other[j]];
                    rem /= g.nx[other[j]];
                }
                idx[axis] = side == 0 ? 0 : g.nx[axis] - 1;
                face.nodes.push_back(g.flat(idx));
            }
            g.faces.push_back(std::move(face));
        }
    }

    std::vector<std::uint8_t> seen(g.num_space(), 0);
    for (const auto& f : g.faces)
        for (int node : f.nodes)
            if (!seen[node]) {
                seen[node] = 1;
                g.boundary_nodes.push_back(node);
            }

    g.gamma_face.assign(g.faces.size(), 1);
    if (gamma_spec != "full") {
        if (gamma_spec.rfind("faces:", 0) != 0)
            throw std::invalid_argument("make_grid: gamma_spec must be 'full' or 'faces:...'");
        g.gamma_face.assign(g.faces.size(), 0);
        std::string list = gamma_spec.substr(6);
        std::size_t pos = 0;
        while (pos < list.size()) {
            auto comma = list.find(',', pos);
            std::string name = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (name.size() != 2) throw std::invalid_argument("make_grid: bad face name " + name);
            int axis = name[0] == 'x' ? 0 : name[0] == 'y' ? 1 : name[0] == 'z' ? 2 : -1;
            int side = name[1] == '0' ? 0 : name[1] == '1' ? 1 : -1;
            if (axis < 0 || axis >= n || side < 0) throw std::invalid_argument("make_grid: bad face name " + name);
            g.gamma_face[2 * axis + side] = 1;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return g;
}

/// Count of Gamma boundary nodes (per time slice, faces counted with
/// multiplicity at shared corners removed).
inline int gamma_node_count(const SpaceTimeGrid& g) {
    std::vector<std::uint8_t> seen(g.num_space(), 0);
    int count = 0;
    for (std::size_t fi = 0; fi < g.faces.size(); ++fi) {
        if (!g.gamma_face[fi]) continue;
        for (int node : g.faces[fi].nodes)
            if (!seen[node]) {
                seen[node] = 1;
                count++;
            }
    }
    return count;
}

/// Complex space-time field sampled on a grid: data[k * num_space + s].
struct ComplexField {
    const SpaceTimeGrid* grid = nullptr;
    std::vector<cplx> data;

    ComplexField() = default;
    explicit ComplexField(const SpaceTimeGrid& g) : grid(&g), data(static_cast<std::size_t>(g.num_time()) * g.num_space()) {}

    cplx* slice(int k) { return data.data() + static_cast<std::size_t>(k) * grid->num_space(); }
    const cplx* slice(int k) const { return data.data() + static_cast<std::size_t>(k) * grid->num_space(); }
    cplx& at(int k, int s) { return data[static_cast<std::size_t>(k) * grid->num_space() + s]; }
    cplx at(int k, int s) const { return data[static_cast<std::size_t>(k) * grid->num_space() + s]; }

    bool all_finite() const {
        for (const auto& v : data)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
};

/// Real field on the spatial grid only.
struct RealField {
    const SpaceTimeGrid* grid = nullptr;
    std::vector<double> data;

    RealField() = default;
    explicit RealField(const SpaceTimeGrid& g) : grid(&g), data(g.num_space(), 0.0) {}
};

}  // namespace mse
