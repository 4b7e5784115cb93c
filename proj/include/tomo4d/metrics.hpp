#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "tomo4d/artifact.hpp"
#include "tomo4d/common.hpp"
#include "tomo4d/inr.hpp"
#include "tomo4d/motion.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

/// 10 log10(peak^2 / MSE). peak <= 0 means auto (max of gt). Identical
/// inputs return +infinity.
template <typename T>
double psnr(const Volume3<T>& est, const Volume3<T>& gt, double peak = 0.0) {
    if (!est.same_shape(gt)) throw std::invalid_argument("psnr: shape mismatch");
    if (peak <= 0.0) {
        peak = 0.0;
        for (T v : gt.data) peak = std::max(peak, static_cast<double>(v));
    }
    double mse = 0;
    for (std::size_t i = 0; i < est.data.size(); ++i) {
        const double d = static_cast<double>(est.data[i]) - static_cast<double>(gt.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(est.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

inline std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> k(window);
    const int half = window / 2;
    double sum = 0;
    for (int i = 0; i < window; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2 * sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable 2D filtering restricted to the region where the window fits.
inline void filter_valid(const std::vector<double>& img, int ny, int nx,
                         const std::vector<double>& k, std::vector<double>& out) {
    const int w = static_cast<int>(k.size());
    const int half = w / 2;
    std::vector<double> tmp(static_cast<std::size_t>(ny) * nx, 0.0);
    for (int y = 0; y < ny; ++y)
        for (int x = half; x < nx - half; ++x) {
            double s = 0;
            for (int i = 0; i < w; ++i) s += k[i] * img[static_cast<std::size_t>(y) * nx + x - half + i];
            tmp[static_cast<std::size_t>(y) * nx + x] = s;
        }
    out.assign(static_cast<std::size_t>(ny) * nx, 0.0);
    for (int y = half; y < ny - half; ++y)
        for (int x = half; x < nx - half; ++x) {
            double s = 0;
            for (int i = 0; i < w; ++i) s += k[i] * tmp[static_cast<std::size_t>(y - half + i) * nx + x];
            out[static_cast<std::size_t>(y) * nx + x] = s;
        }
}

} // namespace detail

/// Standard SSIM with a Gaussian window (default 11x11, sigma 1.5),
/// computed per z-slice over the valid interior and averaged over slices.
/// data_range <= 0 means auto (max - min of gt).
template <typename T>
double ssim(const Volume3<T>& est, const Volume3<T>& gt, int window = 11, double k1 = 0.01,
            double k2 = 0.03, double data_range = 0.0) {
    if (!est.same_shape(gt)) throw std::invalid_argument("ssim: shape mismatch");
    if (est.ny < window || est.nx < window)
        throw std::invalid_argument("ssim: side smaller than window");
    if (window % 2 == 0) throw std::invalid_argument("ssim: window must be odd");
    if (data_range <= 0.0) {
        double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
        for (T v : gt.data) {
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
        data_range = hi - lo;
        if (data_range <= 0.0) data_range = 1.0;
    }
    const double c1 = (k1 * data_range) * (k1 * data_range);
    const double c2 = (k2 * data_range) * (k2 * data_range);
    const auto kernel = detail::gaussian_kernel(window, 1.5);
    const int half = window / 2;

    const std::size_t slice_sz = static_cast<std::size_t>(est.ny) * est.nx;
    std::vector<double> x(slice_sz), y(slice_sz), xx(slice_sz), yy(slice_sz), xy(slice_sz);
    std::vector<double> mx, my, mxx, myy, mxy;
    double total = 0;
    for (int z = 0; z < est.nz; ++z) {
        for (std::size_t i = 0; i < slice_sz; ++i) {
            x[i] = static_cast<double>(est.data[z * slice_sz + i]);
            y[i] = static_cast<double>(gt.data[z * slice_sz + i]);
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        detail::filter_valid(x, est.ny, est.nx, kernel, mx);
        detail::filter_valid(y, est.ny, est.nx, kernel, my);
        detail::filter_valid(xx, est.ny, est.nx, kernel, mxx);
        detail::filter_valid(yy, est.ny, est.nx, kernel, myy);
        detail::filter_valid(xy, est.ny, est.nx, kernel, mxy);

        double acc = 0;
        long count = 0;
        for (int yy_ = half; yy_ < est.ny - half; ++yy_)
            for (int xx_ = half; xx_ < est.nx - half; ++xx_) {
                const std::size_t i = static_cast<std::size_t>(yy_) * est.nx + xx_;
                const double ux = mx[i], uy = my[i];
                const double vx = mxx[i] - ux * ux, vy = myy[i] - uy * uy;
                const double cxy = mxy[i] - ux * uy;
                const double num = (2 * ux * uy + c1) * (2 * cxy + c2);
                const double den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
                acc += num / den;
                ++count;
            }
        total += acc / static_cast<double>(count);
    }
    return total / est.nz;
}

/// Cell-centered trilinear interpolation onto a finer grid. The boundary
/// cells extrapolate linearly from the two nearest samples, so affine
/// fields are reproduced exactly. Degenerate axes (size 1) are kept.
template <typename T>
Volume3<T> trilinear_upsample(const Volume3<T>& vol, int new_side) {
    const int base = std::max(vol.ny, vol.nx);
    if (new_side < base) throw std::invalid_argument("trilinear_upsample: cannot downsample");
    const int nz = vol.nz == 1 ? 1 : new_side;
    Volume3<T> out(nz, new_side, new_side);

    auto taps = [](double pos, int n) {
        // clamp to the last interior cell pair; the weight may leave [0,1],
        // which is exactly the linear extrapolation at the border
        if (n == 1) return std::pair<int, double>(0, 0.0);
        double u = cont_index(pos, n);
        int i0 = static_cast<int>(std::floor(u));
        i0 = std::clamp(i0, 0, n - 2);
        return std::pair<int, double>(i0, u - i0);
    };

    for (int z = 0; z < out.nz; ++z) {
        const auto [iz, fz] = taps(out.nz == 1 ? 0.0 : cell_center(z, out.nz), vol.nz);
        for (int y = 0; y < out.ny; ++y) {
            const auto [iy, fy] = taps(cell_center(y, out.ny), vol.ny);
            for (int x = 0; x < out.nx; ++x) {
                const auto [ix, fx] = taps(cell_center(x, out.nx), vol.nx);
                double v = 0;
                for (int cz = 0; cz < (vol.nz == 1 ? 1 : 2); ++cz) {
                    const double wz = vol.nz == 1 ? 1.0 : (cz ? fz : 1.0 - fz);
                    for (int cy = 0; cy < 2; ++cy) {
                        const double wy = cy ? fy : 1.0 - fy;
                        for (int cx = 0; cx < 2; ++cx) {
                            const double wx = cx ? fx : 1.0 - fx;
                            v += wz * wy * wx *
                                 static_cast<double>(vol.at(iz + cz, iy + cy, ix + cx));
                        }
                    }
                }
                out.at(z, y, x) = static_cast<T>(v);
            }
        }
    }
    return out;
}

/// Render n_frames uniformly spanning [0,1] from an optimized artifact at
/// an arbitrary resolution: raw template query at exact centers, warp with
/// the coefficients mapped to the requested grid, clamp at export.
template <typename T>
Volume4<T> render_sequence(const ReconArtifact<T>& art, int side, int n_frames) {
    if (side < 2) throw std::invalid_argument("render_sequence: side must be >= 2");
    if (n_frames < 1) throw std::invalid_argument("render_sequence: need >= 1 frame");
    const int nz = art.scene_nz == 1 ? 1 : side;
    const Volume3<T> tpl =
        query_template(art.model, nz, side, side, /*jitter=*/false, 0, nullptr,
                       /*clamp=*/false);
    Volume4<T> out;
    for (int f = 0; f < n_frames; ++f) {
        const double t = n_frames == 1 ? 0.0 : static_cast<double>(f) / (n_frames - 1);
        const DisplacementField<T> w = eval_warp(art.motion, t, nz, side, side);
        Volume3<T> frame = warp_volume(tpl, w);
        for (auto& v : frame.data) v = std::max(v, T(0));
        out.frames.push_back(std::move(frame));
        out.times.push_back(t);
    }
    return out;
}

struct FrameMetric {
    std::string method;
    int frame = 0;
    double t = 0, psnr_db = 0, ssim_score = 0;
};

/// Per-frame metrics for each method against the ground-truth sequence,
/// plus per-method means. The same numbers feed the CSV and the printed
/// table.
struct MetricsReport {
    std::string scene_label;
    std::string config_digest;
    std::vector<FrameMetric> rows;
    std::vector<std::pair<std::string, std::pair<double, double>>> means;  // label -> (psnr, ssim)
};

template <typename T>
MetricsReport compare(const std::vector<std::pair<std::string, Volume4<T>>>& methods,
                      const Volume4<T>& gt, bool nearest_match = false,
                      const std::string& scene_label = "") {
    gt.validate();
    MetricsReport rep;
    rep.scene_label = scene_label;

    double peak = 0;
    for (const auto& f : gt.frames)
        for (T v : f.data) peak = std::max(peak, static_cast<double>(v));

    for (const auto& [label, seq] : methods) {
        seq.validate();
        double sum_p = 0, sum_s = 0;
        for (std::size_t i = 0; i < gt.frames.size(); ++i) {
            // pick the method frame for this ground-truth time
            std::size_t mi = i;
            if (seq.times.size() != gt.times.size() ||
                std::abs(seq.times[i] - gt.times[i]) > 1e-9) {
                if (!nearest_match)
                    throw std::invalid_argument(
                        "compare: frame times differ (pass nearest_match to snap)");
                double best = 1e300;
                for (std::size_t j = 0; j < seq.times.size(); ++j)
                    if (std::abs(seq.times[j] - gt.times[i]) < best) {
                        best = std::abs(seq.times[j] - gt.times[i]);
                        mi = j;
                    }
            }
            FrameMetric fm;
            fm.method = label;
            fm.frame = static_cast<int>(i);
            fm.t = gt.times[i];
            fm.psnr_db = psnr(seq.frames[mi], gt.frames[i], peak);
            fm.ssim_score = ssim(seq.frames[mi], gt.frames[i]);
            sum_p += fm.psnr_db;
            sum_s += fm.ssim_score;
            rep.rows.push_back(fm);
        }
        rep.means.push_back(
            {label, {sum_p / gt.frames.size(), sum_s / gt.frames.size()}});
    }
    return rep;
}

namespace detail {

inline std::string metric_str(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace detail

inline void write_report_csv(const MetricsReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write " + path);
    out << "method,frame,t,psnr_db,ssim\n";
    for (const auto& r : rep.rows)
        out << r.method << "," << r.frame << "," << detail::metric_str(r.t) << ","
            << detail::metric_str(r.psnr_db) << "," << detail::metric_str(r.ssim_score) << "\n";
}

inline std::string format_report(const MetricsReport& rep) {
    std::string s;
    if (!rep.scene_label.empty()) s += "scene: " + rep.scene_label + "\n";
    if (!rep.config_digest.empty()) s += "config: " + rep.config_digest + "\n";
    s += "method  frame  t  psnr_db  ssim\n";
    for (const auto& r : rep.rows)
        s += r.method + "  " + std::to_string(r.frame) + "  " + detail::metric_str(r.t) + "  " +
             detail::metric_str(r.psnr_db) + "  " + detail::metric_str(r.ssim_score) + "\n";
    for (const auto& [label, ms] : rep.means)
        s += label + "  mean  -  " + detail::metric_str(ms.first) + "  " +
             detail::metric_str(ms.second) + "\n";
    return s;
}

} // namespace tomo4d
