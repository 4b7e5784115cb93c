#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tomo4d/inr.hpp"
#include "tomo4d/metrics.hpp"
#include "tomo4d/motion.hpp"
#include "tomo4d/phantom.hpp"
#include "tomo4d/rng.hpp"

using namespace tomo4d;

namespace {

Volume3<float> constant_volume(int side, float value) {
    Volume3<float> v(1, side, side);
    for (auto& x : v.data) x = value;
    return v;
}

ReconArtifact<float> identity_artifact(int seed = 3) {
    ReconArtifact<float> art;
    art.model = init_inr<float>(seed, 12, 24, 1.0);
    art.motion = init_motion<float>(2, 3);
    art.scene_nz = 1;
    art.config.beta = 16;
    return art;
}

} // namespace

TEST_CASE("psnr formula cases") {
    const auto gt = constant_volume(16, 1.0f);
    SECTION("identical inputs hit the infinity sentinel") {
        CHECK(std::isinf(psnr(gt, gt)));
    }
    SECTION("mse 0.01 at peak 1 is 20 dB") {
        auto est = gt;
        for (auto& v : est.data) v += 0.1f;
        CHECK(psnr(est, gt, 1.0) == Catch::Approx(20.0).margin(1e-4));
    }
    SECTION("uniform zero against uniform one is 0 dB") {
        CHECK(psnr(constant_volume(16, 0.0f), gt, 1.0) == Catch::Approx(0.0).margin(1e-6));
    }
    SECTION("shape mismatch is rejected") {
        CHECK_THROWS_AS(psnr(constant_volume(8, 0.0f), gt), std::invalid_argument);
    }
}

TEST_CASE("psnr strictly decreases with growing noise") {
    const auto gt = shepp_logan<float>(2, 32);
    double prev = std::numeric_limits<double>::infinity();
    for (double amp : {0.01, 0.03, 0.1, 0.3}) {
        Rng rng(7);
        auto est = gt;
        for (auto& v : est.data) v += static_cast<float>(rng.uniform(-amp, amp));
        const double p = psnr(est, gt);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim formula cases") {
    SECTION("identical inputs score exactly one") {
        const auto gt = shepp_logan<float>(2, 32);
        CHECK(ssim(gt, gt) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("constant zero against constant one matches the closed form") {
        const auto est = constant_volume(16, 0.0f);
        const auto gt = constant_volume(16, 1.0f);
        // mu_x = 0, mu_y = 1, all variances zero: C1/(1 + C1).
        const double c1 = 1e-4;
        CHECK(ssim(est, gt, 11, 0.01, 0.03, 1.0) == Catch::Approx(c1 / (1 + c1)).margin(1e-9));
    }
    SECTION("a small offset lands strictly between the extremes") {
        const auto gt = constant_volume(16, 1.0f);
        auto est = gt;
        for (auto& v : est.data) v += 0.05f;
        const double s = ssim(est, gt, 11, 0.01, 0.03, 1.0);
        CHECK(s > 1e-4 / (1 + 1e-4));
        CHECK(s < 1.0);
    }
    SECTION("window larger than the image is rejected") {
        CHECK_THROWS_AS(ssim(constant_volume(8, 0.f), constant_volume(8, 0.f)),
                        std::invalid_argument);
    }
    SECTION("score stays within [-1, 1] on random pairs") {
        Rng rng(11);
        Volume3<float> a(1, 24, 24), b(1, 24, 24);
        for (auto& v : a.data) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : b.data) v = static_cast<float>(rng.uniform(-1, 1));
        const double s = ssim(a, b);
        CHECK(s <= 1.0);
        CHECK(s >= -1.0);
    }
}

TEST_CASE("trilinear_upsample basics") {
    SECTION("equal sides copy exactly") {
        const auto v = shepp_logan<float>(2, 16);
        const auto u = trilinear_upsample(v, 16);
        CHECK(u.data == v.data);
    }
    SECTION("constants stay constant") {
        const auto u = trilinear_upsample(constant_volume(8, 0.7f), 23);
        for (float x : u.data) CHECK(x == Catch::Approx(0.7f).margin(1e-6));
    }
    SECTION("linear ramps are reproduced exactly") {
        const int side = 8, fine = 20;
        Volume3<float> v(1, side, side);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                v.at(0, y, x) = static_cast<float>(0.4 * cell_center(x, side) -
                                                   0.2 * cell_center(y, side) + 0.1);
        const auto u = trilinear_upsample(v, fine);
        for (int y = 0; y < fine; ++y)
            for (int x = 0; x < fine; ++x)
                CHECK(u.at(0, y, x) == Catch::Approx(0.4 * cell_center(x, fine) -
                                                     0.2 * cell_center(y, fine) + 0.1)
                                           .margin(1e-6));
    }
    SECTION("downsampling requests are rejected") {
        CHECK_THROWS_AS(trilinear_upsample(constant_volume(8, 0.f), 4), std::invalid_argument);
    }
}

TEST_CASE("render_sequence endpoints and identity motion") {
    const auto art = identity_artifact();
    SECTION("a single frame sits at t = 0") {
        const auto seq = render_sequence(art, 16, 1);
        REQUIRE(seq.frames.size() == 1);
        CHECK(seq.times[0] == 0.0);
    }
    SECTION("identity motion renders the clamped template everywhere") {
        const auto seq = render_sequence(art, 16, 4);
        const auto tpl = query_template(art.model, 1, 16, 16, false, 0);  // clamped export
        for (const auto& f : seq.frames) CHECK(f.data == tpl.data);
    }
    SECTION("doubling the resolution needs no re-optimization") {
        const auto seq = render_sequence(art, 32, 2);
        CHECK(seq.frames[0].nx == 32);
        CHECK(seq.frames[0].nz == 1);
    }
}

TEST_CASE("compare reports per-frame metrics and consistent means") {
    PhantomSpec spec = shepp_logan_spec(2, 0.8);
    spec.motion.kind = MotionKind::Translate;
    spec.motion.velocity = {0.05, 0.0, 0.0};
    spec.validate();
    Volume4<float> gt;
    for (int f = 0; f < 4; ++f) {
        gt.frames.push_back(render_phantom<float>(spec, 32, f / 3.0));
        gt.times.push_back(f / 3.0);
    }
    Volume4<float> zeros;
    for (int f = 0; f < 4; ++f) {
        zeros.frames.push_back(constant_volume(32, 0.0f));
        zeros.times.push_back(f / 3.0);
    }

    const auto rep = compare<float>({{"exact", gt}, {"empty", zeros}}, gt);
    REQUIRE(rep.rows.size() == 8);
    for (int f = 0; f < 4; ++f) {
        CHECK(std::isinf(rep.rows[f].psnr_db));
        CHECK(rep.rows[f].ssim_score == Catch::Approx(1.0).margin(1e-12));
    }
    CHECK(std::isinf(rep.means[0].second.first));
    CHECK(rep.means[0].second.first > rep.means[1].second.first);

    double mean_psnr = 0;
    for (int f = 4; f < 8; ++f) mean_psnr += rep.rows[f].psnr_db;
    CHECK(rep.means[1].second.first == Catch::Approx(mean_psnr / 4).margin(1e-12));
}

TEST_CASE("frame mismatches need the nearest flag") {
    Volume4<float> gt;
    gt.frames = {constant_volume(16, 1.f), constant_volume(16, 1.f)};
    gt.times = {0.0, 1.0};
    Volume4<float> est;
    est.frames = {constant_volume(16, 1.f)};
    est.times = {0.0};
    CHECK_THROWS_AS(compare<float>({{"m", est}}, gt, false), std::invalid_argument);
    CHECK_NOTHROW(compare<float>({{"m", est}}, gt, true));
}

TEST_CASE("csv and table carry the same numbers, with inf spelled out") {
    Volume4<float> gt;
    gt.frames = {shepp_logan<float>(2, 16)};
    gt.times = {0.0};
    const auto rep = compare<float>({{"exact", gt}}, gt);

    const auto path =
        (std::filesystem::temp_directory_path() / "tomo4d_report_test.csv").string();
    write_report_csv(rep, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string csv = ss.str();
    CHECK(csv.find("exact,0,0,inf,") != std::string::npos);

    const std::string table = format_report(rep);
    CHECK(table.find("inf") != std::string::npos);

    // Every numeric cell of the CSV appears verbatim in the table.
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');  // method label
        while (std::getline(cells, cell, ',')) CHECK(table.find(cell) != std::string::npos);
    }
}
