#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tomo4d/io.hpp"
#include "tomo4d/phantom.hpp"
#include "tomo4d/rng.hpp"
#include "tomo4d/schedule.hpp"
#include "tomo4d/volume.hpp"

using namespace tomo4d;

namespace {

double sum_abs(const Volume3<float>& v) {
    double s = 0;
    for (float x : v.data) s += std::abs(static_cast<double>(x));
    return s;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "tomo4d_volumes_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("grid coordinates are cell-centered and symmetric") {
    CHECK(cell_center(0, 4) == Catch::Approx(-0.75));
    CHECK(cell_center(3, 4) == Catch::Approx(0.75));
    CHECK(cell_center(0, 4) == -cell_center(3, 4));
    CHECK(cont_index(cell_center(2, 8), 8) == Catch::Approx(2.0));
}

TEST_CASE("shepp_logan center value matches the analytic ellipse sum") {
    // At the origin only the outer ellipse (2.0) and the inner one (-0.98)
    // contain the point; every other ellipse of the classical table lies
    // away from it. Hand-computed sum: 1.02.
    const PhantomSpec spec = shepp_logan_spec(2);
    CHECK(spec.value_at(0, 0, 0, 0) == Catch::Approx(1.02));

    // The rasterized voxel nearest the center equals the analytic value at
    // its own cell center.
    const auto vol = shepp_logan<float>(2, 64);
    const double cy = cell_center(31, 64), cx = cell_center(31, 64);
    CHECK(vol.at(0, 31, 31) == Catch::Approx(spec.value_at(cx, cy, 0, 0)));
    CHECK(vol.nz == 1);
    CHECK(vol.ny == 64);
}

TEST_CASE("shepp_logan 3d values are bounded by the additive construction") {
    const auto vol = shepp_logan<float>(3, 8);
    double pos_sum = 0;
    for (const auto& e : shepp_logan_spec(3).ellipsoids)
        if (e.value > 0) pos_sum += e.value;
    for (float v : vol.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= pos_sum + 1e-6);
    }
}

TEST_CASE("zero-valued ellipses rasterize to a zero volume") {
    PhantomSpec spec = shepp_logan_spec(2);
    for (auto& e : spec.ellipsoids) e.value = 0;
    const auto vol = render_phantom<float>(spec, 64, 0.0);
    CHECK(sum_abs(vol) == 0.0);
}

TEST_CASE("shepp_logan rejects tiny grids") {
    CHECK_THROWS_AS(shepp_logan<float>(2, 7), std::invalid_argument);
}

TEST_CASE("static specs render identically at any time") {
    const PhantomSpec spec = shepp_logan_spec(2, 0.8);
    const auto a = render_phantom<float>(spec, 48, 0.0);
    const auto b = render_phantom<float>(spec, 48, 0.73);
    CHECK(a.data == b.data);
}

TEST_CASE("translation shifts the center of mass by the drift") {
    PhantomSpec spec;
    spec.dim = 2;
    spec.ellipsoids = {{{-0.1, 0.0, 0.0}, {0.3, 0.3, 1.0}, 0.0, 1.0}};
    spec.motion.kind = MotionKind::Translate;
    spec.motion.velocity = {0.1, 0.0, 0.0};
    const int side = 96;
    const auto v0 = render_phantom<float>(spec, side, 0.0);
    const auto v1 = render_phantom<float>(spec, side, 1.0);

    auto centroid_x = [&](const Volume3<float>& v) {
        double m = 0, mx = 0;
        for (int y = 0; y < v.ny; ++y)
            for (int x = 0; x < v.nx; ++x) {
                m += v.at(0, y, x);
                mx += v.at(0, y, x) * cell_center(x, v.nx);
            }
        return mx / m;
    };
    const double drift = centroid_x(v1) - centroid_x(v0);
    CHECK(drift == Catch::Approx(0.1).margin(cell_spacing(side)));
}

TEST_CASE("zero-peak squeeze is the identity motion") {
    PhantomSpec spec = shepp_logan_spec(2, 0.8);
    spec.motion.kind = MotionKind::Squeeze;
    spec.motion.axis = 1;
    spec.motion.peak = 0.0;
    const auto a = render_phantom<float>(spec, 48, 0.0);
    const auto b = render_phantom<float>(spec, 48, 1.0);
    CHECK(a.data == b.data);
}

TEST_CASE("motion leaving the inscribed circle is rejected at construction") {
    PhantomSpec spec;
    spec.dim = 2;
    spec.ellipsoids = {{{0.5, 0.0, 0.0}, {0.3, 0.3, 1.0}, 0.0, 1.0}};
    spec.motion.kind = MotionKind::Translate;
    spec.motion.velocity = {0.4, 0.0, 0.0};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("rendered phantoms carry no mass outside the inscribed circle") {
    PhantomSpec spec = shepp_logan_spec(2, 0.85);
    spec.motion.kind = MotionKind::Translate;
    spec.motion.velocity = {0.08, 0.02, 0.0};
    spec.validate();
    for (double t : {0.0, 0.5, 1.0}) {
        const auto vol = render_phantom<float>(spec, 64, t);
        const double limit = 1.0 - spec.fit_margin;
        double outside = 0;
        for (int y = 0; y < vol.ny; ++y)
            for (int x = 0; x < vol.nx; ++x) {
                const double px = cell_center(x, vol.nx), py = cell_center(y, vol.ny);
                if (px * px + py * py > limit * limit)
                    outside += std::abs(vol.at(0, y, x));
            }
        CHECK(outside == 0.0);
    }
}

TEST_CASE("rendering is resolution-consistent under block averaging") {
    const PhantomSpec spec = shepp_logan_spec(2);
    const auto fine = render_phantom<float>(spec, 256, 0.0);
    const auto coarse = render_phantom<float>(spec, 128, 0.0);
    const auto down = block_downsample2(fine);
    REQUIRE(down.same_shape(coarse));
    double diff = 0, norm = 0;
    for (std::size_t i = 0; i < coarse.data.size(); ++i) {
        diff += std::abs(static_cast<double>(down.data[i]) - coarse.data[i]);
        norm += std::abs(static_cast<double>(coarse.data[i]));
    }
    CHECK(diff / norm < 0.02);
}

TEST_CASE("supersampled rendering equals the block-averaged doubled grid") {
    // The 2x2 supersample offsets sit exactly on the doubled grid's cell
    // centers, so the two paths compute the same averages.
    PhantomSpec spec = shepp_logan_spec(2, 0.9);
    spec.motion.kind = MotionKind::Sinusoid;
    spec.motion.axis = 0;
    spec.motion.amplitude = 0.05;
    spec.motion.period = 1.0;
    spec.validate();
    const auto super = render_phantom<float>(spec, 64, 0.4, true);
    const auto down = block_downsample2(render_phantom<float>(spec, 128, 0.4));
    REQUIRE(super.same_shape(down));
    for (std::size_t i = 0; i < super.data.size(); ++i)
        CHECK(super.data[i] == Catch::Approx(down.data[i]).margin(1e-6));
}

TEST_CASE("make_schedule spaces angles and times per contract") {
    SECTION("90 views across 0..180 inclusive") {
        const auto s = make_schedule(0, 180, 90);
        CHECK(s.angles_deg[1] - s.angles_deg[0] == Catch::Approx(180.0 / 89));
        CHECK(s.angles_deg.back() == Catch::Approx(180.0));
        CHECK(s.times.front() == 0.0);
        CHECK(s.times.back() == 1.0);
        for (int i = 0; i < 90; ++i) CHECK(s.times[i] == static_cast<double>(i) / 89);
    }
    SECTION("four-revolution sparse sweep") {
        const auto s = make_schedule(0, 720, 90);
        CHECK(s.angles_deg.back() == Catch::Approx(720.0));
        CHECK(s.n_proj() == 90);
    }
    SECTION("two-point schedule") {
        const auto s = make_schedule(0, 180, 2);
        CHECK(s.angles_deg == std::vector<double>{0.0, 180.0});
        CHECK(s.times == std::vector<double>{0.0, 1.0});
    }
    SECTION("endpoint-exclusive spacing") {
        const auto s = make_schedule(0, 180, 20, false);
        CHECK(s.angles_deg[1] - s.angles_deg[0] == Catch::Approx(9.0));
        CHECK(s.angles_deg.back() == Catch::Approx(171.0));
    }
    SECTION("rejects degenerate inputs") {
        CHECK_THROWS_AS(make_schedule(0, 180, 1), std::invalid_argument);
        CHECK_THROWS_AS(make_schedule(10, 10, 5), std::invalid_argument);
    }
}

TEST_CASE("volume files round-trip bit-exactly") {
    const auto dir = temp_dir();
    Rng rng(17);
    Volume4<float> vol;
    for (int f = 0; f < 3; ++f) {
        Volume3<float> v(5, 5, 5);
        for (auto& x : v.data) x = static_cast<float>(rng.uniform(-1, 1));
        vol.frames.push_back(std::move(v));
    }
    vol.times = {0.0, 0.4, 1.0};

    const std::string base = (dir / "vol").string();
    write_volume(vol, base);
    const auto back = read_volume(base + ".f32");
    REQUIRE(back.frames.size() == 3);
    CHECK(back.times == vol.times);
    for (int f = 0; f < 3; ++f) CHECK(back.frames[f].data == vol.frames[f].data);
}

TEST_CASE("sinogram files round-trip bit-exactly") {
    const auto dir = temp_dir();
    Rng rng(18);
    Sinogram<float> sino(7, 2, 9);
    sino.schedule = make_schedule(0, 90, 7);
    for (auto& x : sino.data) x = static_cast<float>(rng.uniform(-1, 1));
    const std::string base = (dir / "sino").string();
    write_sinogram(sino, base);
    const auto back = read_sinogram(base);
    CHECK(back.data == sino.data);
    CHECK(back.schedule.angles_deg == sino.schedule.angles_deg);
    CHECK(back.schedule.arc_stop_deg == 90.0);
}

TEST_CASE("sidecar and payload disagreement is a format error") {
    const auto dir = temp_dir();
    Volume4<float> vol;
    for (int f = 0; f < 9; ++f) vol.frames.emplace_back(2, 2, 2);
    vol.times = {0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
    const std::string base = (dir / "short").string();
    write_volume(vol, base);

    // Claim ten frames over a nine-frame payload.
    nlohmann::json j;
    std::ifstream in(base + ".json");
    in >> j;
    in.close();
    j["shape"][0] = 10;
    j["times"].push_back(1.5);
    std::ofstream out(base + ".json");
    out << j.dump();
    out.close();
    CHECK_THROWS_AS(read_volume(base), format_error);
}

TEST_CASE("non-increasing times are rejected on read") {
    const auto dir = temp_dir();
    Volume4<float> vol;
    vol.frames.emplace_back(2, 2, 2);
    vol.frames.emplace_back(2, 2, 2);
    vol.times = {0.0, 1.0};
    const std::string base = (dir / "badtimes").string();
    write_volume(vol, base);

    nlohmann::json j;
    std::ifstream in(base + ".json");
    in >> j;
    in.close();
    j["times"] = {1.0, 0.0};
    std::ofstream out(base + ".json");
    out << j.dump();
    out.close();
    CHECK_THROWS(read_volume(base));
}
