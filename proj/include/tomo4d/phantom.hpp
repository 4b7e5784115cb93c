#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomo4d/common.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

struct Ellipsoid {
    Vec3<double> center;   // [-1,1]^3
    Vec3<double> semi;     // semi-axes
    double rot_z_deg = 0;  // rotation about z
    double value = 0;      // additive LAC contribution
};

enum class MotionKind { Static, Translate, Sinusoid, Squeeze };

/// Analytic motion law shared by all ellipsoids of a spec. Laws are defined
/// through closed-form inverse maps so a frame at any t rasterizes exactly.
struct MotionLaw {
    MotionKind kind = MotionKind::Static;
    // translate: displacement v * t
    Vec3<double> velocity{0, 0, 0};
    // sinusoid: displacement amplitude * sin(2*pi*t/period) along axis
    int axis = 0;  // 0=x, 1=y, 2=z
    double amplitude = 0;
    double period = 1;
    // squeeze: coordinate along axis scaled by 1 - peak*t*exp(-d^2/width^2),
    // d = distance from the axis line; support only ever shrinks
    double peak = 0;
    double width = 0.5;
};

/// Dynamic phantom: ellipsoid set plus one motion law. The spec is validated
/// at construction; rendering assumes validity.
struct PhantomSpec {
    int dim = 2;  // 2 renders a single z-slice, 3 a full cube
    std::vector<Ellipsoid> ellipsoids;
    MotionLaw motion;
    double fit_margin = 0.05;

    /// Worst-case in-plane support over t in [0,1] must stay inside the
    /// inscribed circle of radius 1 - fit_margin.
    void validate() const {
        if (dim != 2 && dim != 3) throw std::invalid_argument("PhantomSpec: dim must be 2 or 3");
        if (fit_margin < 0 || fit_margin >= 1)
            throw std::invalid_argument("PhantomSpec: fit_margin out of range");
        if (motion.kind == MotionKind::Squeeze && (motion.peak < 0 || motion.peak >= 1))
            throw std::invalid_argument("PhantomSpec: squeeze peak must be in [0,1)");
        const double limit = 1.0 - fit_margin;
        for (const auto& e : ellipsoids) {
            const double semi_xy = std::max(e.semi.x, e.semi.y);
            double worst = 0;
            for (int i = 0; i <= 100; ++i) {
                const double t = i / 100.0;
                const Vec3<double> d = displacement(t);
                const double cx = e.center.x + d.x, cy = e.center.y + d.y;
                worst = std::max(worst, std::sqrt(cx * cx + cy * cy) + semi_xy);
            }
            if (worst > limit)
                throw std::invalid_argument(
                    "PhantomSpec: motion leaves the inscribed circle (extent " +
                    std::to_string(worst) + " > " + std::to_string(limit) + ")");
        }
    }

    /// Rigid displacement at time t (zero for squeeze, which is handled as a
    /// coordinate scaling instead).
    Vec3<double> displacement(double t) const {
        switch (motion.kind) {
            case MotionKind::Translate:
                return {motion.velocity.x * t, motion.velocity.y * t, motion.velocity.z * t};
            case MotionKind::Sinusoid: {
                const double two_pi = 6.283185307179586476925286766559;
                const double s = motion.amplitude * std::sin(two_pi * t / motion.period);
                Vec3<double> d{0, 0, 0};
                if (motion.axis == 0) d.x = s;
                else if (motion.axis == 1) d.y = s;
                else d.z = s;
                return d;
            }
            default:
                return {0, 0, 0};
        }
    }

    /// LAC value of the deformed phantom at point p and time t.
    double value_at(double x, double y, double z, double t) const {
        // Map the query point back to material coordinates.
        if (motion.kind == MotionKind::Squeeze && motion.peak > 0) {
            double d2;
            if (motion.axis == 0) d2 = y * y + z * z;
            else if (motion.axis == 1) d2 = x * x + z * z;
            else d2 = x * x + y * y;
            const double f = 1.0 - motion.peak * t * std::exp(-d2 / (motion.width * motion.width));
            if (motion.axis == 0) x /= f;
            else if (motion.axis == 1) y /= f;
            else z /= f;
        } else {
            const Vec3<double> d = displacement(t);
            x -= d.x;
            y -= d.y;
            z -= d.z;
        }
        double acc = 0;
        for (const auto& e : ellipsoids) {
            const double dx = x - e.center.x, dy = y - e.center.y, dz = z - e.center.z;
            const double phi = e.rot_z_deg * 0.017453292519943295;
            const double c = std::cos(phi), s = std::sin(phi);
            const double xr = dx * c + dy * s, yr = -dx * s + dy * c;
            double q = (xr / e.semi.x) * (xr / e.semi.x) + (yr / e.semi.y) * (yr / e.semi.y);
            if (dim == 3) q += (dz / e.semi.z) * (dz / e.semi.z);
            if (q <= 1.0) acc += e.value;
        }
        return acc;
    }
};

/// Rasterize the deformed phantom at time t on a side^dim cell-centered
/// grid. Point sampling at cell centers by default; with supersample, each
/// cell averages 2 samples per non-degenerate axis placed at center +- h/4,
/// which coincide with the cell centers of the doubled grid.
template <typename T = float>
Volume3<T> render_phantom(const PhantomSpec& spec, int side, double t,
                          bool supersample = false) {
    if (side < 2) throw std::invalid_argument("render_phantom: side too small");
    if (t < 0 || t > 1) throw std::invalid_argument("render_phantom: t outside [0,1]");
    spec.validate();
    const int nz = spec.dim == 2 ? 1 : side;
    Volume3<T> out(nz, side, side);
    const double off = 0.5 / side;  // h/4 in physical units
    for (int iz = 0; iz < nz; ++iz) {
        const double z = nz == 1 ? 0.0 : cell_center(iz, side);
        for (int iy = 0; iy < side; ++iy) {
            const double y = cell_center(iy, side);
            for (int ix = 0; ix < side; ++ix) {
                const double x = cell_center(ix, side);
                double v;
                if (!supersample) {
                    v = spec.value_at(x, y, z, t);
                } else {
                    v = 0;
                    int n = 0;
                    for (int sz = 0; sz < (nz == 1 ? 1 : 2); ++sz)
                        for (int sy = 0; sy < 2; ++sy)
                            for (int sx = 0; sx < 2; ++sx) {
                                const double zz = nz == 1 ? 0.0 : z + (sz ? off : -off);
                                v += spec.value_at(x + (sx ? off : -off), y + (sy ? off : -off),
                                                   zz, t);
                                ++n;
                            }
                    v /= n;
                }
                out.at(iz, iy, ix) = static_cast<T>(v);
            }
        }
    }
    return out;
}

namespace detail {

// Classic head phantom, original intensities. Columns: value, semi-axes,
// center, rotation about z (degrees).
inline std::vector<Ellipsoid> shepp_logan_2d_table(double scale) {
    struct Row {
        double v, a, b, x0, y0, phi;
    };
    static const Row rows[] = {
        {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0},
        {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0},
        {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18},
        {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18},
        {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0},
        {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0},
        {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0},
        {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0},
        {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0},
        {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0},
    };
    std::vector<Ellipsoid> out;
    for (const Row& r : rows)
        out.push_back({{r.x0 * scale, r.y0 * scale, 0.0},
                       {r.a * scale, r.b * scale, 1.0},
                       r.phi,
                       r.v});
    return out;
}

// 3D extension with the usual z semi-axes and offsets.
inline std::vector<Ellipsoid> shepp_logan_3d_table(double scale) {
    struct Row {
        double v, a, b, c, x0, y0, z0, phi;
    };
    static const Row rows[] = {
        {2.00, 0.6900, 0.9200, 0.810, 0.00, 0.0000, 0.00, 0},
        {-0.98, 0.6624, 0.8740, 0.780, 0.00, -0.0184, 0.00, 0},
        {-0.02, 0.1100, 0.3100, 0.220, 0.22, 0.0000, 0.00, -18},
        {-0.02, 0.1600, 0.4100, 0.280, -0.22, 0.0000, 0.00, 18},
        {0.01, 0.2100, 0.2500, 0.410, 0.00, 0.3500, -0.15, 0},
        {0.01, 0.0460, 0.0460, 0.050, 0.00, 0.1000, 0.25, 0},
        {0.01, 0.0460, 0.0460, 0.050, 0.00, -0.1000, 0.25, 0},
        {0.01, 0.0460, 0.0230, 0.050, -0.08, -0.6050, 0.00, 0},
        {0.01, 0.0230, 0.0230, 0.020, 0.00, -0.6060, 0.00, 0},
        {0.01, 0.0230, 0.0460, 0.020, 0.06, -0.6050, 0.00, 0},
    };
    std::vector<Ellipsoid> out;
    for (const Row& r : rows)
        out.push_back({{r.x0 * scale, r.y0 * scale, r.z0 * scale},
                       {r.a * scale, r.b * scale, r.c * scale},
                       r.phi,
                       r.v});
    return out;
}

} // namespace detail

/// Static Shepp-Logan spec; scale < 1 shrinks the phantom so a motion law
/// can be attached without leaving the inscribed circle.
inline PhantomSpec shepp_logan_spec(int dim, double scale = 1.0) {
    PhantomSpec spec;
    spec.dim = dim;
    spec.fit_margin = 0.05;
    spec.ellipsoids =
        dim == 2 ? detail::shepp_logan_2d_table(scale) : detail::shepp_logan_3d_table(scale);
    spec.validate();
    return spec;
}

/// Classical phantom rasterized on the [-1,1] grid; dim == 2 gives Z = 1.
template <typename T = float>
Volume3<T> shepp_logan(int dim, int side) {
    if (side < 8) throw std::invalid_argument("shepp_logan: side must be >= 8");
    return render_phantom<T>(shepp_logan_spec(dim), side, 0.0);
}

} // namespace tomo4d
