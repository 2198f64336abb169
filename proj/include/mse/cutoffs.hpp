#pragma once

#include <cmath>
#include <stdexcept>

namespace mse {

// Smooth cutoffs built from the standard mollifier profile exp(-1/u).
// All are C^inf with values in [0,1].

namespace detail {
inline double mollifier_half(double u) { return u <= 0.0 ? 0.0 : std::exp(-1.0 / u); }
}

/// C^inf step: 0 for z <= 0, 1 for z >= 1.
inline double smoothstep(double z) {
    double a = detail::mollifier_half(z);
    double b = detail::mollifier_half(1.0 - z);
    return a / (a + b);
}

/// Time plateau: 0 outside (h, T-h), 1 on [2h, T-2h].
struct TimePlateau {
    double T = 1.0;
    double h = 0.1;

    double operator()(double t) const {
        if (h <= 0.0) return 1.0;  // degenerate: no cutoff
        return smoothstep((t - h) / h) * smoothstep((T - h - t) / h);
    }
};

/// Time bump supported in (center-width, center+width), equal to 1 on
/// [center-width/2, center+width/2].
struct TimeBump {
    double center = 0.5;
    double width = 0.2;

    double operator()(double t) const {
        double z = std::abs(t - center) / width;
        return smoothstep(2.0 * (1.0 - z));
    }
};

/// Radial plateau bump: 1 for |z| <= 1/2, 0 for |z| >= 1.
inline double bump_chi(double z) { return smoothstep(2.0 * (1.0 - std::abs(z))); }

/// Collar factor for a box [0,L1]x...x[0,Ln]: 0 within distance `margin` of the
/// boundary, 1 once the distance exceeds 1.5*margin.
struct CollarCutoff {
    double margin = 0.15;

    double operator()(double dist_to_boundary) const {
        if (margin <= 0.0) return 1.0;
        return smoothstep((dist_to_boundary / margin - 1.0) * 2.0);
    }
};

struct CutoffSpec {
    enum Kind { time_plateau, time_bump, spatial_bump } kind = time_plateau;
    double T = 1.0, h = 0.1;            // time_plateau
    double center = 0.5, width = 0.2;   // time_bump

    double operator()(double z) const {
        switch (kind) {
            case time_plateau: return TimePlateau{T, h}(z);
            case time_bump: return TimeBump{center, width}(z);
            case spatial_bump: return bump_chi(z);
        }
        return 0.0;
    }
};

}  // namespace mse
