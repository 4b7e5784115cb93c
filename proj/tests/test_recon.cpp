#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tomo4d/metrics.hpp"
#include "tomo4d/phantom.hpp"
#include "tomo4d/radon.hpp"
#include "tomo4d/recon.hpp"
#include "tomo4d/rng.hpp"

using namespace tomo4d;

namespace {

double masked_psnr(const Volume3<float>& est, const Volume3<float>& gt) {
    double peak = 0;
    for (float v : gt.data) peak = std::max(peak, static_cast<double>(v));
    double mse = 0;
    long n = 0;
    for (int z = 0; z < est.nz; ++z)
        for (int y = 0; y < est.ny; ++y)
            for (int x = 0; x < est.nx; ++x) {
                const double px = cell_center(x, est.nx), py = cell_center(y, est.ny);
                if (px * px + py * py > 1.0) continue;
                const double d = est.at(z, y, x) - gt.at(z, y, x);
                mse += d * d;
                ++n;
            }
    return 10 * std::log10(peak * peak / (mse / n));
}

double l2(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

TEST_CASE("ramp filter impulse response is the discrete ramp kernel") {
    const int r = 64;
    const double tau = 2.0 / r;
    Sinogram<double> sino(1, 1, r);
    const int center = r / 2;
    sino.data[center] = 1.0;
    const auto out = ramp_filter(sino);

    // Closed-form kernel, evaluated independently of the FFT path.
    auto kernel = [&](int n) {
        if (n == 0) return 1.0 / (4.0 * tau);
        if (n % 2 == 0) return 0.0;
        const double pi = 3.14159265358979323846;
        return -1.0 / (pi * n) / (pi * n) / tau;
    };
    CHECK(out.data[center] == Catch::Approx(0.25 / tau).margin(1e-9));
    for (int b = 0; b < r; ++b)
        CHECK(out.data[b] == Catch::Approx(kernel(b - center)).margin(1e-9));
}

TEST_CASE("ramp filter DC gain equals the truncation tail") {
    // The band-limited kernel over a finite window is not exactly
    // zero-sum; its DC gain is the tail of the odd harmonic series,
    // bounded by 1/(2 pi^2).
    for (int r : {16, 64, 256}) {
        const auto resp = ramp_response(r);
        CHECK(resp[0] >= 0.0);
        CHECK(resp[0] < 1.0 / (2 * 3.14159 * 3.14159) + 1e-9);
    }
}

TEST_CASE("ramp filter is linear") {
    Rng rng(3);
    Sinogram<double> a(2, 1, 32), b(2, 1, 32);
    for (auto& v : a.data) v = rng.uniform(-1, 1);
    for (auto& v : b.data) v = rng.uniform(-1, 1);
    Sinogram<double> sum = a;
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += b.data[i];
    const auto fa = ramp_filter(a), fb = ramp_filter(b), fs = ramp_filter(sum);
    for (std::size_t i = 0; i < fs.data.size(); ++i)
        CHECK(fs.data[i] == Catch::Approx(fa.data[i] + fb.data[i]).margin(1e-6));
}

TEST_CASE("hann apodization tapers the high frequencies") {
    const auto plain = ramp_response(64, FilterWindow::None);
    const auto hann = ramp_response(64, FilterWindow::Hann);
    const std::size_t nyquist = plain.size() / 2;
    CHECK(hann[nyquist] == Catch::Approx(0.0).margin(1e-12));
    CHECK(hann[nyquist / 2] < plain[nyquist / 2]);
    CHECK_THROWS_AS(parse_window("boxcar"), std::invalid_argument);
}

TEST_CASE("fbp of a zero sinogram is a zero volume") {
    RadonOperator<float> op(32, make_schedule(0, 180, 16, false).angles_deg);
    Sinogram<float> zero(16, 1, 32);
    const auto vol = fbp(op, zero);
    for (float v : vol.data) CHECK(v == 0.0f);
}

TEST_CASE("fbp reconstructs the static phantom from dense views") {
    const int side = 64;
    const auto gt = shepp_logan<float>(2, side);
    const auto sched = make_schedule(0, 180, 180, false);
    RadonOperator<float> op(side, sched.angles_deg);
    const auto rec = fbp(op, radon_forward(op, gt));
    CHECK(masked_psnr(rec, gt) > 21.5);
}

TEST_CASE("motion degrades motion-ignorant fbp") {
    const int side = 64, n = 90;
    PhantomSpec moving = shepp_logan_spec(2, 0.85);
    moving.motion.kind = MotionKind::Translate;
    moving.motion.velocity = {0.1, 0.0, 0.0};
    moving.validate();
    const PhantomSpec frozen = shepp_logan_spec(2, 0.85);

    const auto sched = make_schedule(0, 180, n);
    RadonOperator<float> op(side, sched.angles_deg);

    Volume4<float> dyn_scene, static_scene;
    for (int f = 0; f < 10; ++f) {
        const double t = f / 9.0;
        dyn_scene.frames.push_back(render_phantom<float>(moving, side, t));
        static_scene.frames.push_back(render_phantom<float>(frozen, side, 0.0));
        dyn_scene.times.push_back(t);
        static_scene.times.push_back(t);
    }
    const auto fbp_static = fbp(op, project_dynamic(op, static_scene, sched, true));
    const auto fbp_dyn = fbp(op, project_dynamic(op, dyn_scene, sched, true));
    const double p_static = masked_psnr(fbp_static, static_scene.frames[0]);
    const double p_dyn = masked_psnr(fbp_dyn, dyn_scene.frames[0]);
    CHECK(p_dyn < p_static);
}

TEST_CASE("fbp quality grows with angular coverage") {
    const int side = 64;
    const auto gt = shepp_logan<float>(2, side);
    auto run = [&](int views) {
        const auto sched = make_schedule(0, 180, views, false);
        RadonOperator<float> op(side, sched.angles_deg);
        return masked_psnr(fbp(op, radon_forward(op, gt)), gt);
    };
    const double p180 = run(180), p45 = run(45), p20 = run(20);
    CHECK(p180 > p45);
    CHECK(p45 > p20);
}

TEST_CASE("sart reduces the residual from a zero start") {
    const int side = 48;
    const auto gt = render_phantom<float>(shepp_logan_spec(2, 0.8), side, 0.0);
    const auto sched = make_schedule(0, 180, 30, false);
    RadonOperator<float> op(side, sched.angles_deg);
    const auto sino = radon_forward(op, gt);

    const auto rec = sart(op, sino, 10, 0.1);
    const auto resid = radon_forward(op, rec);
    const double final_r = l2(resid.data, sino.data);
    const double initial_r = l2(std::vector<float>(sino.data.size(), 0.0f), sino.data);
    CHECK(final_r < initial_r);
}

TEST_CASE("sparse views beat a contiguous 20-degree arc under sart") {
    const int side = 64;
    const auto gt = shepp_logan<float>(2, side);
    const auto sparse = make_schedule(0, 180, 20, false);
    const auto limited = make_schedule(0, 20, 20);
    RadonOperator<float> op_s(side, sparse.angles_deg), op_l(side, limited.angles_deg);
    const auto rec_s = sart(op_s, radon_forward(op_s, gt), 20, 0.5);
    const auto rec_l = sart(op_l, radon_forward(op_l, gt), 20, 0.5);
    CHECK(psnr(rec_s, gt) > psnr(rec_l, gt) + 3.0);
}

TEST_CASE("sart is a near fixed point at the exact solution") {
    const int side = 32;
    const auto gt = render_phantom<float>(shepp_logan_spec(2, 0.8), side, 0.0);
    const auto sched = make_schedule(0, 180, 60, false);
    RadonOperator<float> op(side, sched.angles_deg);
    const auto sino = radon_forward(op, gt);
    const auto rec = sart(op, sino, 1, 1.0, &gt);
    double linf = 0;
    for (std::size_t i = 0; i < rec.data.size(); ++i)
        linf = std::max(linf, std::abs(static_cast<double>(rec.data[i]) - gt.data[i]));
    CHECK(linf < 1e-3);
}

TEST_CASE("sart validates its arguments") {
    RadonOperator<float> op(16, {0.0, 90.0});
    Sinogram<float> sino(2, 1, 16);
    CHECK_THROWS_AS(sart(op, sino, 0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(sart(op, sino, 5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sart(op, sino, 5, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(ramp_filter(Sinogram<float>(1, 1, 3)), std::invalid_argument);
}
