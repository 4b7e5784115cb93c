#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "tomo4d/fft.hpp"
#include "tomo4d/radon.hpp"
#include "tomo4d/sinogram.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

enum class FilterWindow { None, Hann };

inline FilterWindow parse_window(const std::string& name) {
    if (name == "none") return FilterWindow::None;
    if (name == "hann") return FilterWindow::Hann;
    throw std::invalid_argument("unknown filter window: " + name);
}

/// Frequency response of the band-limited ramp on the padded grid of
/// length m for bin width tau: the DFT of the standard discrete ramp
/// kernel h(0) = 1/(4 tau^2), h(n) = -1/(pi n tau)^2 for odd n, 0 for even
/// n, scaled by tau so that filtering equals tau * conv(row, h). This
/// matches |f| away from DC; the residual DC gain is the window truncation
/// tail (< 1/(2 pi^2), never zeroed out: forcing it to zero biases the
/// reconstruction's low frequencies).
inline std::vector<double> ramp_response(int n_bins, FilterWindow window = FilterWindow::None) {
    const std::size_t m = next_pow2(static_cast<std::size_t>(2) * n_bins);
    const double tau = 2.0 / n_bins;
    const double pi = 3.14159265358979323846;
    std::vector<std::complex<double>> kernel(m, 0.0);
    kernel[0] = 1.0 / (4.0 * tau * tau);
    for (std::size_t n = 1; n < m / 2; ++n) {
        const double v = (n % 2 == 1) ? -1.0 / (pi * n * tau) / (pi * n * tau) : 0.0;
        kernel[n] = v;
        kernel[m - n] = v;
    }
    fft_pow2(kernel, false);
    std::vector<double> mult(m);
    for (std::size_t k = 0; k < m; ++k) {
        double h = kernel[k].real() * tau;
        if (window == FilterWindow::Hann) {
            const std::size_t ks = std::min(k, m - k);
            const double frac = static_cast<double>(ks) / (static_cast<double>(m) / 2.0);
            h *= 0.5 * (1.0 + std::cos(pi * frac));
        }
        mult[k] = h;
    }
    return mult;
}

/// Ramp-filter every detector row: zero-pad to the next power of two
/// >= 2R, multiply by the band-limited ramp response, transform back. The
/// impulse response is the discrete ramp kernel with center tap 1/(4 tau).
template <typename T>
Sinogram<T> ramp_filter(const Sinogram<T>& sino, FilterWindow window = FilterWindow::None) {
    if (sino.n_bins < 4) throw std::invalid_argument("ramp_filter: need >= 4 detector bins");
    const int r = sino.n_bins;
    const std::size_t m = next_pow2(static_cast<std::size_t>(2) * r);
    const std::vector<double> mult = ramp_response(r, window);

    Sinogram<T> out(sino.n_proj, sino.nz, sino.n_bins);
    out.schedule = sino.schedule;
    std::vector<std::complex<double>> buf(m);
    for (int v = 0; v < sino.n_proj; ++v)
        for (int z = 0; z < sino.nz; ++z) {
            const T* row = sino.row(v, z);
            std::fill(buf.begin(), buf.end(), std::complex<double>(0, 0));
            for (int b = 0; b < r; ++b) buf[b] = static_cast<double>(row[b]);
            fft_pow2(buf, false);
            for (std::size_t k = 0; k < m; ++k) buf[k] *= mult[k];
            fft_pow2(buf, true);
            T* orow = out.row(v, z);
            for (int b = 0; b < r; ++b) orow[b] = static_cast<T>(buf[b].real());
        }
    return out;
}

/// Filtered backprojection: ramp filter, exact-adjoint backprojection,
/// pi/(2N) angular normalization, masked to the inscribed circle. The extra
/// 2*tau/h^2 factor converts the adjoint's ray/detector measure (step
/// length times bin spacing) to the plain backprojection sum the classical
/// formula assumes.
template <typename T>
Volume3<T> fbp(const RadonOperator<T>& op, const Sinogram<T>& sino,
               FilterWindow window = FilterWindow::None) {
    if (sino.n_proj != op.n_angles())
        throw std::invalid_argument("fbp: sinogram/operator angle count mismatch");
    const Sinogram<T> filtered = ramp_filter(sino, window);
    Volume3<T> vol = radon_adjoint(op, filtered);

    const double tau = 2.0 / op.n_bins;
    const double h = cell_spacing(op.side);
    const double scale =
        3.14159265358979323846 / (2.0 * op.n_angles()) * (2.0 * tau / (h * h));
    for (int z = 0; z < vol.nz; ++z)
        for (int y = 0; y < vol.ny; ++y)
            for (int x = 0; x < vol.nx; ++x) {
                const double px = cell_center(x, vol.nx), py = cell_center(y, vol.ny);
                if (px * px + py * py > 1.0)
                    vol.at(z, y, x) = T(0);
                else
                    vol.at(z, y, x) = static_cast<T>(vol.at(z, y, x) * scale);
            }
    return vol;
}

/// Simultaneous algebraic reconstruction. Each sweep backprojects the
/// row-normalized residual and scales by the column weights; both weight
/// sets come from forward/adjoint applied to ones and are floored at 1e-8
/// to stay defined outside the support. Volumes are clamped nonnegative
/// after every sweep.
template <typename T>
Volume3<T> sart(const RadonOperator<T>& op, const Sinogram<T>& sino, int iters, double relax,
                const Volume3<T>* init = nullptr) {
    if (iters < 1) throw std::invalid_argument("sart: iters must be >= 1");
    if (!(relax > 0.0 && relax <= 1.0)) throw std::invalid_argument("sart: relax in (0,1]");
    if (sino.n_proj != op.n_angles())
        throw std::invalid_argument("sart: sinogram/operator angle count mismatch");

    const double eps = 1e-8;
    Volume3<T> ones_vol(sino.nz, op.side, op.side);
    std::fill(ones_vol.data.begin(), ones_vol.data.end(), T(1));
    const Sinogram<T> row_w = radon_forward(op, ones_vol);
    Sinogram<T> ones_sino(sino.n_proj, sino.nz, sino.n_bins);
    std::fill(ones_sino.data.begin(), ones_sino.data.end(), T(1));
    const Volume3<T> col_w = radon_adjoint(op, ones_sino);

    Volume3<T> x = init ? *init : Volume3<T>(sino.nz, op.side, op.side);
    if (init && !(init->nz == sino.nz && init->ny == op.side && init->nx == op.side))
        throw std::invalid_argument("sart: init shape mismatch");

    for (int it = 0; it < iters; ++it) {
        Sinogram<T> resid = radon_forward(op, x);
        for (std::size_t i = 0; i < resid.data.size(); ++i) {
            const double rw = std::max(static_cast<double>(row_w.data[i]), eps);
            resid.data[i] = static_cast<T>((sino.data[i] - resid.data[i]) / rw);
        }
        const Volume3<T> update = radon_adjoint(op, resid);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double cw = std::max(static_cast<double>(col_w.data[i]), eps);
            double v = x.data[i] + relax * update.data[i] / cw;
            x.data[i] = static_cast<T>(std::max(v, 0.0));
        }
    }
    return x;
}

} // namespace tomo4d
