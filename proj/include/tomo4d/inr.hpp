#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tomo4d/common.hpp"
#include "tomo4d/rng.hpp"
#include "tomo4d/volume.hpp"

namespace tomo4d {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Gaussian random Fourier features: frequencies drawn once from N(0, I)
/// and never optimized; the bandwidth kappa scales them inside the
/// encoding, gamma(v) = [cos(2 pi kappa B v), sin(2 pi kappa B v)].
template <typename T>
struct GrffParams {
    Mat<T> freq;  // m x 3
    T kappa = T(1);

    int m() const { return static_cast<int>(freq.rows()); }
    int encoding_dim() const { return 2 * m(); }
};

/// Four weight layers, rectifier on the hidden ones, identity output.
/// Widths are [2m, h, h, h, 1].
template <typename T>
struct MlpParams {
    std::vector<Mat<T>> weights;
    std::vector<ColVec<T>> biases;

    int hidden_width() const { return static_cast<int>(weights[0].rows()); }
};

template <typename T>
struct InrModel {
    GrffParams<T> grff;
    MlpParams<T> mlp;
    std::uint64_t seed = 0;
};

/// Encode one coordinate; first m entries are cosines, last m sines.
template <typename T>
std::vector<T> grff_encode(const GrffParams<T>& g, const Vec3<T>& v) {
    std::vector<T> out(static_cast<std::size_t>(2) * g.m());
    for (int i = 0; i < g.m(); ++i) {
        const double phase = kTwoPi * static_cast<double>(g.kappa) *
                             (static_cast<double>(g.freq(i, 0)) * v.x +
                              static_cast<double>(g.freq(i, 1)) * v.y +
                              static_cast<double>(g.freq(i, 2)) * v.z);
        out[i] = static_cast<T>(std::cos(phase));
        out[i + g.m()] = static_cast<T>(std::sin(phase));
    }
    return out;
}

/// Deterministic per seed: B from the seeded normal stream, then weights
/// and biases layer by layer with fan-in-scaled uniform entries.
template <typename T>
InrModel<T> init_inr(std::uint64_t seed, int m, int hidden_width, double kappa) {
    if (m < 1 || hidden_width < 1) throw std::invalid_argument("init_inr: m and width must be >= 1");
    if (!(kappa > 0)) throw std::invalid_argument("init_inr: kappa must be positive");
    Rng rng(seed);
    InrModel<T> model;
    model.seed = seed;
    model.grff.kappa = static_cast<T>(kappa);
    model.grff.freq.resize(m, 3);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < 3; ++j) model.grff.freq(i, j) = static_cast<T>(rng.normal());

    const int widths[5] = {2 * m, hidden_width, hidden_width, hidden_width, 1};
    for (int l = 0; l < 4; ++l) {
        const int fan_in = widths[l], fan_out = widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Mat<T> w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c)
                w(r, c) = static_cast<T>(rng.uniform(-bound, bound));
        ColVec<T> b(fan_out);
        for (int r = 0; r < fan_out; ++r) b(r) = static_cast<T>(rng.uniform(-bound, bound));
        model.mlp.weights.push_back(std::move(w));
        model.mlp.biases.push_back(std::move(b));
    }
    return model;
}

/// Cell-centered evaluation lattice; with jitter every point is perturbed
/// uniformly within half a voxel per axis (degenerate axes stay fixed).
template <typename T>
struct CoordGrid {
    int nz = 0, ny = 0, nx = 0;
    std::vector<Vec3<T>> points;
    bool jittered = false;
};

template <typename T>
CoordGrid<T> make_coord_grid(int nz, int ny, int nx, bool jitter, Rng* rng = nullptr) {
    if (jitter && !rng) throw std::invalid_argument("make_coord_grid: jitter needs an rng");
    CoordGrid<T> g;
    g.nz = nz;
    g.ny = ny;
    g.nx = nx;
    g.jittered = jitter;
    g.points.reserve(static_cast<std::size_t>(nz) * ny * nx);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                Vec3<T> p;
                p.z = static_cast<T>(nz == 1 ? 0.0 : cell_center(z, nz));
                p.y = static_cast<T>(cell_center(y, ny));
                p.x = static_cast<T>(cell_center(x, nx));
                if (jitter) {
                    if (nz > 1) p.z += static_cast<T>((rng->uniform() - 0.5) * cell_spacing(nz));
                    if (ny > 1) p.y += static_cast<T>((rng->uniform() - 0.5) * cell_spacing(ny));
                    if (nx > 1) p.x += static_cast<T>((rng->uniform() - 0.5) * cell_spacing(nx));
                }
                g.points.push_back(p);
            }
    return g;
}

/// Forward pass record. Activations are regenerated chunk-by-chunk in the
/// backward pass from the stored points, so the tape stays small at export
/// resolutions; it is valid only while the model parameters are unchanged.
template <typename T>
struct InrTape {
    std::vector<Vec3<T>> points;
    int m = 0, hidden = 0;
};

namespace detail {

inline constexpr int kInrChunk = 4096;

template <typename T>
void load_chunk(const std::vector<Vec3<T>>& pts, std::size_t begin, std::size_t count,
                Mat<T>& v) {
    v.resize(3, static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        v(0, static_cast<Eigen::Index>(i)) = pts[begin + i].x;
        v(1, static_cast<Eigen::Index>(i)) = pts[begin + i].y;
        v(2, static_cast<Eigen::Index>(i)) = pts[begin + i].z;
    }
}

template <typename T>
struct ChunkActivations {
    Mat<T> v, theta, enc, z1, a1, z2, a2, z3, a3, out;
};

template <typename T>
void forward_chunk(const InrModel<T>& model, const std::vector<Vec3<T>>& pts, std::size_t begin,
                   std::size_t count, ChunkActivations<T>& c) {
    load_chunk(pts, begin, count, c.v);
    const T scale = static_cast<T>(kTwoPi) * model.grff.kappa;
    c.theta.noalias() = scale * (model.grff.freq * c.v);
    c.enc.resize(2 * model.grff.m(), c.theta.cols());
    c.enc.topRows(model.grff.m()) = c.theta.array().cos().matrix();
    c.enc.bottomRows(model.grff.m()) = c.theta.array().sin().matrix();
    const auto& w = model.mlp.weights;
    const auto& b = model.mlp.biases;
    c.z1.noalias() = w[0] * c.enc;
    c.z1.colwise() += b[0];
    c.a1 = c.z1.cwiseMax(T(0));
    c.z2.noalias() = w[1] * c.a1;
    c.z2.colwise() += b[1];
    c.a2 = c.z2.cwiseMax(T(0));
    c.z3.noalias() = w[2] * c.a2;
    c.z3.colwise() += b[2];
    c.a3 = c.z3.cwiseMax(T(0));
    c.out.noalias() = w[3] * c.a3;
    c.out.colwise() += b[3];
}

} // namespace detail

/// Evaluate the template at each point (raw linear output). Returns the
/// values and the tape needed by inr_backward.
template <typename T>
std::pair<std::vector<T>, InrTape<T>> inr_forward(const InrModel<T>& model,
                                                  const std::vector<Vec3<T>>& points) {
    std::vector<T> values(points.size());
    detail::ChunkActivations<T> c;
    for (std::size_t begin = 0; begin < points.size(); begin += detail::kInrChunk) {
        const std::size_t count = std::min<std::size_t>(detail::kInrChunk, points.size() - begin);
        detail::forward_chunk(model, points, begin, count, c);
        for (std::size_t i = 0; i < count; ++i)
            values[begin + i] = c.out(0, static_cast<Eigen::Index>(i));
    }
    if (!all_finite(values)) throw numeric_error("inr_forward produced non-finite values");
    InrTape<T> tape{points, model.grff.m(), model.mlp.hidden_width()};
    return {std::move(values), std::move(tape)};
}

/// Gradients of a scalar loss with respect to every MLP parameter and to
/// the input coordinates (the latter flow through the cos/sin encoding).
template <typename T>
struct InrGrads {
    std::vector<Mat<T>> weights;
    std::vector<ColVec<T>> biases;
    std::vector<Vec3<T>> points;
};

template <typename T>
InrGrads<T> inr_backward(const InrModel<T>& model, const InrTape<T>& tape,
                         const std::vector<T>& cotangent) {
    if (tape.m != model.grff.m() || tape.hidden != model.mlp.hidden_width())
        throw std::invalid_argument("inr_backward: tape does not match model");
    if (cotangent.size() != tape.points.size())
        throw std::invalid_argument("inr_backward: cotangent size mismatch");

    InrGrads<T> g;
    for (int l = 0; l < 4; ++l) {
        g.weights.emplace_back(Mat<T>::Zero(model.mlp.weights[l].rows(),
                                            model.mlp.weights[l].cols()));
        g.biases.emplace_back(ColVec<T>::Zero(model.mlp.biases[l].rows()));
    }
    g.points.resize(tape.points.size());

    const auto& w = model.mlp.weights;
    const T scale = static_cast<T>(kTwoPi) * model.grff.kappa;
    detail::ChunkActivations<T> c;
    const int m = model.grff.m();
    for (std::size_t begin = 0; begin < tape.points.size(); begin += detail::kInrChunk) {
        const std::size_t count =
            std::min<std::size_t>(detail::kInrChunk, tape.points.size() - begin);
        detail::forward_chunk(model, tape.points, begin, count, c);

        Mat<T> g4(1, static_cast<Eigen::Index>(count));
        for (std::size_t i = 0; i < count; ++i)
            g4(0, static_cast<Eigen::Index>(i)) = cotangent[begin + i];

        g.weights[3].noalias() += g4 * c.a3.transpose();
        g.biases[3] += g4.rowwise().sum();
        Mat<T> g3 = (w[3].transpose() * g4).cwiseProduct(
            (c.z3.array() > T(0)).template cast<T>().matrix());
        g.weights[2].noalias() += g3 * c.a2.transpose();
        g.biases[2] += g3.rowwise().sum();
        Mat<T> g2 = (w[2].transpose() * g3).cwiseProduct(
            (c.z2.array() > T(0)).template cast<T>().matrix());
        g.weights[1].noalias() += g2 * c.a1.transpose();
        g.biases[1] += g2.rowwise().sum();
        Mat<T> g1 = (w[1].transpose() * g2).cwiseProduct(
            (c.z1.array() > T(0)).template cast<T>().matrix());
        g.weights[0].noalias() += g1 * c.enc.transpose();
        g.biases[0] += g1.rowwise().sum();

        Mat<T> genc = w[0].transpose() * g1;  // 2m x P
        Mat<T> gtheta = (-c.theta.array().sin() * genc.topRows(m).array() +
                         c.theta.array().cos() * genc.bottomRows(m).array())
                            .matrix();
        Mat<T> gv = scale * (model.grff.freq.transpose() * gtheta);  // 3 x P
        for (std::size_t i = 0; i < count; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            g.points[begin + i] = {gv(0, col), gv(1, col), gv(2, col)};
        }
    }
    return g;
}

/// Sample the template on an (nz, ny, nx) lattice. Training samples with
/// jitter to keep the representation continuous; exports sample exact
/// centers and clamp negatives to zero, reporting the clipped L1 mass if
/// asked. Pass clamp = false to read the raw linear output (the warp stage
/// wants the unclamped template).
template <typename T>
Volume3<T> query_template(const InrModel<T>& model, int nz, int ny, int nx, bool jitter,
                          std::uint64_t seed, double* clipped_l1 = nullptr, bool clamp = true) {
    if (ny < 2 || nx < 2) throw std::invalid_argument("query_template: side must be >= 2");
    Rng rng(seed);
    const CoordGrid<T> grid = make_coord_grid<T>(nz, ny, nx, jitter, &rng);
    auto [values, tape] = inr_forward(model, grid.points);
    (void)tape;
    Volume3<T> out(nz, ny, nx);
    double clipped = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        T v = values[i];
        if (clamp && v < T(0)) {
            clipped += -static_cast<double>(v);
            v = T(0);
        }
        out.data[i] = v;
    }
    if (clipped_l1) *clipped_l1 = clipped;
    return out;
}

template <typename T>
Volume3<T> query_template(const InrModel<T>& model, int side, bool jitter, std::uint64_t seed,
                          double* clipped_l1 = nullptr) {
    return query_template(model, side, side, side, jitter, seed, clipped_l1);
}

} // namespace tomo4d
