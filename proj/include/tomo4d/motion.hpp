#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tomo4d/common.hpp"
#include "tomo4d/rng.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

/// Per-voxel polynomial displacement coefficients on a node-centered
/// alpha^3 lattice (nodes at -1 + 2i/(alpha-1), endpoints included, so a
/// coarse grid's nodes reappear exactly in any refinement that keeps the
/// corners). Layout (z, y, x, order, axis) with orders 0..k; displacements
/// are normalized coordinates (a value of 2/beta moves one voxel of a
/// side-beta volume).
template <typename T>
struct MotionCoeffs {
    int alpha = 0;
    int degree = 0;  // k; k+1 coefficient orders are stored
    std::vector<T> c;

    MotionCoeffs() = default;
    MotionCoeffs(int alpha_, int degree_)
        : alpha(alpha_), degree(degree_),
          c(static_cast<std::size_t>(alpha_) * alpha_ * alpha_ * (degree_ + 1) * 3, T(0)) {}

    std::size_t node_stride() const { return static_cast<std::size_t>(degree + 1) * 3; }

    T& at(int z, int y, int x, int order, int axis) {
        return c[(((static_cast<std::size_t>(z) * alpha + y) * alpha + x) * (degree + 1) + order) *
                     3 +
                 axis];
    }
    T at(int z, int y, int x, int order, int axis) const {
        return c[(((static_cast<std::size_t>(z) * alpha + y) * alpha + x) * (degree + 1) + order) *
                     3 +
                 axis];
    }
};

/// Displacement vectors on the template grid at one time instant,
/// layout (z, y, x, axis).
template <typename T>
struct DisplacementField {
    int nz = 0, ny = 0, nx = 0;
    std::vector<T> d;

    DisplacementField() = default;
    DisplacementField(int nz_, int ny_, int nx_)
        : nz(nz_), ny(ny_), nx(nx_), d(static_cast<std::size_t>(nz_) * ny_ * nx_ * 3, T(0)) {}

    std::size_t voxel(int z, int y, int x) const {
        return ((static_cast<std::size_t>(z) * ny + y) * nx + x) * 3;
    }
};

/// Zero coefficients by default (identity warp at the start of a run);
/// init_scale > 0 draws from N(0, init_scale^2) for experiments.
template <typename T>
MotionCoeffs<T> init_motion(int alpha0, int degree, double init_scale = 0.0,
                            std::uint64_t seed = 0) {
    if (alpha0 < 1) throw std::invalid_argument("init_motion: alpha must be >= 1");
    if (degree < 1) throw std::invalid_argument("init_motion: degree must be >= 1");
    MotionCoeffs<T> mc(alpha0, degree);
    if (init_scale > 0) {
        Rng rng(seed);
        for (auto& v : mc.c) v = static_cast<T>(rng.normal() * init_scale);
    }
    return mc;
}

namespace detail {

// Linear interpolation taps on a node-centered axis: nodes span [-1,1]
// inclusive. alpha == 1 degenerates to a constant.
struct NodeTaps {
    int i0;
    double f;
};

inline NodeTaps node_taps(double pos, int alpha) {
    if (alpha == 1) return {0, 0.0};
    double u = (pos + 1.0) * 0.5 * (alpha - 1);
    int i0 = static_cast<int>(std::floor(u));
    if (i0 < 0) i0 = 0;
    if (i0 > alpha - 2) i0 = alpha - 2;
    return {i0, u - i0};
}

} // namespace detail

/// Evaluate the polynomial in t at every coarse node (Horner over the
/// order axis), then interpolate the three displacement channels onto the
/// cell centers of an (nz, ny, nx) template grid.
template <typename T>
DisplacementField<T> eval_warp(const MotionCoeffs<T>& mc, double t, int nz, int ny, int nx) {
    if (t < 0 || t > 1) throw std::invalid_argument("eval_warp: t outside [0,1]");
    const int a = mc.alpha, k = mc.degree;

    // Coarse displacement at each node: (a^3, 3).
    std::vector<double> coarse(static_cast<std::size_t>(a) * a * a * 3);
    for (int z = 0; z < a; ++z)
        for (int y = 0; y < a; ++y)
            for (int x = 0; x < a; ++x)
                for (int d = 0; d < 3; ++d) {
                    double v = mc.at(z, y, x, k, d);
                    for (int j = k - 1; j >= 0; --j) v = v * t + mc.at(z, y, x, j, d);
                    coarse[((static_cast<std::size_t>(z) * a + y) * a + x) * 3 + d] = v;
                }

    DisplacementField<T> out(nz, ny, nx);
    for (int z = 0; z < nz; ++z) {
        const double pz = nz == 1 ? 0.0 : cell_center(z, nz);
        const auto tz = detail::node_taps(pz, a);
        for (int y = 0; y < ny; ++y) {
            const auto ty = detail::node_taps(cell_center(y, ny), a);
            for (int x = 0; x < nx; ++x) {
                const auto tx = detail::node_taps(cell_center(x, nx), a);
                const std::size_t o = out.voxel(z, y, x);
                for (int d = 0; d < 3; ++d) {
                    double v = 0;
                    for (int cz = 0; cz < (a == 1 ? 1 : 2); ++cz) {
                        const double wz = a == 1 ? 1.0 : (cz ? tz.f : 1.0 - tz.f);
                        for (int cy = 0; cy < (a == 1 ? 1 : 2); ++cy) {
                            const double wy = a == 1 ? 1.0 : (cy ? ty.f : 1.0 - ty.f);
                            for (int cx = 0; cx < (a == 1 ? 1 : 2); ++cx) {
                                const double wx = a == 1 ? 1.0 : (cx ? tx.f : 1.0 - tx.f);
                                v += wz * wy * wx *
                                     coarse[((static_cast<std::size_t>(tz.i0 + cz) * a +
                                              (ty.i0 + cy)) *
                                                 a +
                                             (tx.i0 + cx)) *
                                                3 +
                                            d];
                            }
                        }
                    }
                    out.d[o + d] = static_cast<T>(v);
                }
            }
        }
    }
    return out;
}

/// VJP of eval_warp with respect to the coefficients: the upsampling
/// weights scatter back to the coarse nodes, then each order picks up its
/// t^j factor.
template <typename T>
MotionCoeffs<T> eval_warp_vjp(const MotionCoeffs<T>& mc, double t,
                              const DisplacementField<T>& cot) {
    const int a = mc.alpha, k = mc.degree;
    std::vector<double> coarse_cot(static_cast<std::size_t>(a) * a * a * 3, 0.0);
    for (int z = 0; z < cot.nz; ++z) {
        const double pz = cot.nz == 1 ? 0.0 : cell_center(z, cot.nz);
        const auto tz = detail::node_taps(pz, a);
        for (int y = 0; y < cot.ny; ++y) {
            const auto ty = detail::node_taps(cell_center(y, cot.ny), a);
            for (int x = 0; x < cot.nx; ++x) {
                const auto tx = detail::node_taps(cell_center(x, cot.nx), a);
                const std::size_t o = cot.voxel(z, y, x);
                for (int cz = 0; cz < (a == 1 ? 1 : 2); ++cz) {
                    const double wz = a == 1 ? 1.0 : (cz ? tz.f : 1.0 - tz.f);
                    for (int cy = 0; cy < (a == 1 ? 1 : 2); ++cy) {
                        const double wy = a == 1 ? 1.0 : (cy ? ty.f : 1.0 - ty.f);
                        for (int cx = 0; cx < (a == 1 ? 1 : 2); ++cx) {
                            const double wx = a == 1 ? 1.0 : (cx ? tx.f : 1.0 - tx.f);
                            const double w = wz * wy * wx;
                            const std::size_t n =
                                ((static_cast<std::size_t>(tz.i0 + cz) * a + (ty.i0 + cy)) * a +
                                 (tx.i0 + cx)) *
                                3;
                            for (int d = 0; d < 3; ++d)
                                coarse_cot[n + d] += w * static_cast<double>(cot.d[o + d]);
                        }
                    }
                }
            }
        }
    }

    MotionCoeffs<T> grad(a, k);
    for (int z = 0; z < a; ++z)
        for (int y = 0; y < a; ++y)
            for (int x = 0; x < a; ++x) {
                const std::size_t n = ((static_cast<std::size_t>(z) * a + y) * a + x) * 3;
                double tj = 1.0;
                for (int j = 0; j <= k; ++j) {
                    for (int d = 0; d < 3; ++d)
                        grad.at(z, y, x, j, d) = static_cast<T>(coarse_cot[n + d] * tj);
                    tj *= t;
                }
            }
    return grad;
}

namespace detail {

// Cell-centered trilinear taps with zero padding; degenerate axes use a
// single unit-weight tap and contribute no spatial gradient.
struct CellTaps {
    int i0;
    double f;
    bool degenerate;
};

inline CellTaps cell_taps(double pos, int n) {
    if (n == 1) return {0, 0.0, true};
    const double u = cont_index(pos, n);
    const int i0 = static_cast<int>(std::floor(u));
    return {i0, u - i0, false};
}

} // namespace detail

/// Backward warp: output voxel at grid position p samples the template at
/// p + W(p) with trilinear interpolation; positions outside [-1,1]^3 read
/// zero. Linear in the template for a fixed field.
template <typename T>
Volume3<T> warp_volume(const Volume3<T>& tpl, const DisplacementField<T>& w) {
    if (tpl.nz != w.nz || tpl.ny != w.ny || tpl.nx != w.nx)
        throw std::invalid_argument("warp_volume: shape mismatch");
    Volume3<T> out(tpl.nz, tpl.ny, tpl.nx);
    for (int z = 0; z < tpl.nz; ++z) {
        const double pz = tpl.nz == 1 ? 0.0 : cell_center(z, tpl.nz);
        for (int y = 0; y < tpl.ny; ++y) {
            const double py = cell_center(y, tpl.ny);
            for (int x = 0; x < tpl.nx; ++x) {
                const double px = cell_center(x, tpl.nx);
                const std::size_t o = w.voxel(z, y, x);
                const auto tz = detail::cell_taps(pz + w.d[o + 2], tpl.nz);
                const auto ty = detail::cell_taps(py + w.d[o + 1], tpl.ny);
                const auto tx = detail::cell_taps(px + w.d[o + 0], tpl.nx);
                double v = 0;
                for (int cz = 0; cz < (tz.degenerate ? 1 : 2); ++cz) {
                    const int iz = tz.i0 + cz;
                    if (!tz.degenerate && (iz < 0 || iz >= tpl.nz)) continue;
                    const double wz = tz.degenerate ? 1.0 : (cz ? tz.f : 1.0 - tz.f);
                    for (int cy = 0; cy < (ty.degenerate ? 1 : 2); ++cy) {
                        const int iy = ty.i0 + cy;
                        if (!ty.degenerate && (iy < 0 || iy >= tpl.ny)) continue;
                        const double wy = ty.degenerate ? 1.0 : (cy ? ty.f : 1.0 - ty.f);
                        for (int cx = 0; cx < (tx.degenerate ? 1 : 2); ++cx) {
                            const int ix = tx.i0 + cx;
                            if (!tx.degenerate && (ix < 0 || ix >= tpl.nx)) continue;
                            const double wx = tx.degenerate ? 1.0 : (cx ? tx.f : 1.0 - tx.f);
                            v += wz * wy * wx * static_cast<double>(tpl.at(iz, iy, ix));
                        }
                    }
                }
                out.at(z, y, x) = static_cast<T>(v);
            }
        }
    }
    return out;
}

/// Exact VJP of warp_volume. The template gradient is the scatter
/// transpose of the interpolation weights; the field gradient uses the
/// analytic spatial derivative of trilinear interpolation (piecewise
/// constant per cell, in normalized units via the n/2 index Jacobian).
template <typename T>
std::pair<Volume3<T>, DisplacementField<T>> warp_vjp(const Volume3<T>& tpl,
                                                     const DisplacementField<T>& w,
                                                     const Volume3<T>& cot) {
    if (tpl.nz != w.nz || tpl.ny != w.ny || tpl.nx != w.nx || !tpl.same_shape(cot))
        throw std::invalid_argument("warp_vjp: shape mismatch");
    Volume3<T> gtpl(tpl.nz, tpl.ny, tpl.nx);
    DisplacementField<T> gw(w.nz, w.ny, w.nx);

    auto tap_value = [&](int iz, int iy, int ix) -> double {
        if (iz < 0 || iz >= tpl.nz || iy < 0 || iy >= tpl.ny || ix < 0 || ix >= tpl.nx) return 0.0;
        return static_cast<double>(tpl.at(iz, iy, ix));
    };

    for (int z = 0; z < tpl.nz; ++z) {
        const double pz = tpl.nz == 1 ? 0.0 : cell_center(z, tpl.nz);
        for (int y = 0; y < tpl.ny; ++y) {
            const double py = cell_center(y, tpl.ny);
            for (int x = 0; x < tpl.nx; ++x) {
                const double px = cell_center(x, tpl.nx);
                const std::size_t o = w.voxel(z, y, x);
                const double g = static_cast<double>(cot.at(z, y, x));
                if (g == 0.0) continue;
                const auto tz = detail::cell_taps(pz + w.d[o + 2], tpl.nz);
                const auto ty = detail::cell_taps(py + w.d[o + 1], tpl.ny);
                const auto tx = detail::cell_taps(px + w.d[o + 0], tpl.nx);

                // Out-of-range taps read zero but still enter the spatial
                // derivative, matching the zero-padded sampling exactly.
                double dvx = 0, dvy = 0, dvz = 0;
                for (int cz = 0; cz < (tz.degenerate ? 1 : 2); ++cz) {
                    const int iz = tz.i0 + cz;
                    const double wz = tz.degenerate ? 1.0 : (cz ? tz.f : 1.0 - tz.f);
                    const double dwz = tz.degenerate ? 0.0 : (cz ? 1.0 : -1.0);
                    for (int cy = 0; cy < (ty.degenerate ? 1 : 2); ++cy) {
                        const int iy = ty.i0 + cy;
                        const double wy = ty.degenerate ? 1.0 : (cy ? ty.f : 1.0 - ty.f);
                        const double dwy = ty.degenerate ? 0.0 : (cy ? 1.0 : -1.0);
                        for (int cx = 0; cx < (tx.degenerate ? 1 : 2); ++cx) {
                            const int ix = tx.i0 + cx;
                            const double wx = tx.degenerate ? 1.0 : (cx ? tx.f : 1.0 - tx.f);
                            const double dwx = tx.degenerate ? 0.0 : (cx ? 1.0 : -1.0);
                            const double tv = tap_value(iz, iy, ix);
                            dvx += dwx * wy * wz * tv;
                            dvy += wx * dwy * wz * tv;
                            dvz += wx * wy * dwz * tv;
                            if (iz >= 0 && iz < tpl.nz && iy >= 0 && iy < tpl.ny && ix >= 0 &&
                                ix < tpl.nx)
                                gtpl.at(iz, iy, ix) += static_cast<T>(g * wz * wy * wx);
                        }
                    }
                }
                gw.d[o + 0] = static_cast<T>(g * dvx * (tpl.nx * 0.5));
                gw.d[o + 1] = static_cast<T>(g * dvy * (tpl.ny * 0.5));
                gw.d[o + 2] = static_cast<T>(g * dvz * (tpl.nz * 0.5));
            }
        }
    }
    return {std::move(gtpl), std::move(gw)};
}

/// Refine the coefficient lattice: each channel is interpolated onto the
/// finer node set. Coarse node values are reproduced exactly wherever the
/// node positions coincide (always at the corners).
template <typename T>
MotionCoeffs<T> upsample_coeffs(const MotionCoeffs<T>& mc, int new_alpha) {
    if (new_alpha < mc.alpha) throw std::invalid_argument("upsample_coeffs: cannot shrink");
    if (new_alpha == mc.alpha) return mc;
    const int a = mc.alpha, b = new_alpha, k = mc.degree;
    MotionCoeffs<T> out(b, k);
    for (int z = 0; z < b; ++z) {
        const auto tz = detail::node_taps(-1.0 + 2.0 * z / (b - 1), a);
        for (int y = 0; y < b; ++y) {
            const auto ty = detail::node_taps(-1.0 + 2.0 * y / (b - 1), a);
            for (int x = 0; x < b; ++x) {
                const auto tx = detail::node_taps(-1.0 + 2.0 * x / (b - 1), a);
                for (int j = 0; j <= k; ++j)
                    for (int d = 0; d < 3; ++d) {
                        double v = 0;
                        for (int cz = 0; cz < (a == 1 ? 1 : 2); ++cz) {
                            const double wz = a == 1 ? 1.0 : (cz ? tz.f : 1.0 - tz.f);
                            for (int cy = 0; cy < (a == 1 ? 1 : 2); ++cy) {
                                const double wy = a == 1 ? 1.0 : (cy ? ty.f : 1.0 - ty.f);
                                for (int cx = 0; cx < (a == 1 ? 1 : 2); ++cx) {
                                    const double wx = a == 1 ? 1.0 : (cx ? tx.f : 1.0 - tx.f);
                                    v += wz * wy * wx *
                                         static_cast<double>(
                                             mc.at(tz.i0 + cz, ty.i0 + cy, tx.i0 + cx, j, d));
                                }
                            }
                        }
                        out.at(z, y, x, j, d) = static_cast<T>(v);
                    }
            }
        }
    }
    return out;
}

/// Anisotropic L1 total variation over the coefficient lattice: the mean
/// of |forward difference| over every (axis, site, order, channel) term.
/// alpha == 1 has no neighbors and scores 0. The subgradient uses sign
/// with 0 at ties.
template <typename T>
std::pair<double, MotionCoeffs<T>> tv_spatial(const MotionCoeffs<T>& mc) {
    const int a = mc.alpha, k = mc.degree;
    MotionCoeffs<T> grad(a, k);
    if (a < 2) return {0.0, std::move(grad)};

    const std::size_t count =
        static_cast<std::size_t>(3) * (a - 1) * a * a * (k + 1) * 3;
    const double inv = 1.0 / static_cast<double>(count);
    double total = 0;

    const int steps[3][3] = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}};  // x, y, z neighbors
    for (const auto& s : steps)
        for (int z = 0; z + s[0] < a; ++z)
            for (int y = 0; y + s[1] < a; ++y)
                for (int x = 0; x + s[2] < a; ++x)
                    for (int j = 0; j <= k; ++j)
                        for (int d = 0; d < 3; ++d) {
                            const double diff =
                                static_cast<double>(mc.at(z + s[0], y + s[1], x + s[2], j, d)) -
                                static_cast<double>(mc.at(z, y, x, j, d));
                            total += std::abs(diff);
                            const double sg = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                            grad.at(z + s[0], y + s[1], x + s[2], j, d) +=
                                static_cast<T>(sg * inv);
                            grad.at(z, y, x, j, d) -= static_cast<T>(sg * inv);
                        }
    return {total * inv, std::move(grad)};
}

} // namespace tomo4d
