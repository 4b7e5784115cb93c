#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tomo4d/gradcheck.hpp"
#include "tomo4d/inr.hpp"
#include "tomo4d/rng.hpp"

using namespace tomo4d;

namespace {

// Minimal single-unit network with every pre-activation positive, so a
// closed-form gradient can be written down next to it.
InrModel<double> one_unit_model() {
    InrModel<double> m;
    m.grff.kappa = 1.0;
    m.grff.freq.resize(1, 3);
    m.grff.freq << 0.1, -0.2, 0.3;
    auto mat = [](double v) {
        Mat<double> w(1, 1);
        w << v;
        return w;
    };
    auto vec = [](double v) {
        ColVec<double> b(1);
        b << v;
        return b;
    };
    Mat<double> w1(1, 2);
    w1 << 0.7, -0.3;
    m.mlp.weights = {w1, mat(1.2), mat(0.8), mat(1.5)};
    m.mlp.biases = {vec(0.5), vec(0.1), vec(0.05), vec(-0.2)};
    return m;
}

} // namespace

TEST_CASE("grff encoding of the origin is all cosines") {
    GrffParams<double> g;
    g.kappa = 1.3;
    g.freq = Mat<double>::Random(5, 3);
    const auto enc = grff_encode(g, Vec3<double>{0, 0, 0});
    for (int i = 0; i < 5; ++i) {
        CHECK(enc[i] == 1.0);
        CHECK(enc[i + 5] == 0.0);
    }
}

TEST_CASE("kappa multiplies the frequency matrix") {
    GrffParams<double> a, b;
    a.kappa = 2.0;
    a.freq = Mat<double>::Random(4, 3);
    b.kappa = 1.0;
    b.freq = 2.0 * a.freq;
    const Vec3<double> v{0.3, -0.7, 0.2};
    const auto ea = grff_encode(a, v);
    const auto eb = grff_encode(b, v);
    for (std::size_t i = 0; i < ea.size(); ++i) CHECK(ea[i] == Catch::Approx(eb[i]).margin(1e-12));
}

TEST_CASE("grff outputs stay within the sinusoid range") {
    Rng rng(2);
    GrffParams<double> g;
    g.kappa = 3.0;
    g.freq.resize(16, 3);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 3; ++j) g.freq(i, j) = rng.normal();
    for (int t = 0; t < 10; ++t) {
        const auto enc =
            grff_encode(g, Vec3<double>{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        for (double e : enc) {
            CHECK(e <= 1.0);
            CHECK(e >= -1.0);
        }
    }
}

TEST_CASE("init_inr is deterministic per seed and reports its shapes") {
    const auto a = init_inr<float>(42, 128, 64, 1.5);
    const auto b = init_inr<float>(42, 128, 64, 1.5);
    CHECK(a.grff.freq == b.grff.freq);
    for (int l = 0; l < 4; ++l) {
        CHECK(a.mlp.weights[l] == b.mlp.weights[l]);
        CHECK(a.mlp.biases[l] == b.mlp.biases[l]);
    }
    CHECK(a.grff.kappa == 1.5f);
    CHECK(a.grff.encoding_dim() == 256);
    CHECK(a.mlp.weights[0].rows() == 64);
    CHECK(a.mlp.weights[0].cols() == 256);
    CHECK(a.mlp.weights[3].rows() == 1);

    const auto c = init_inr<float>(43, 128, 64, 1.5);
    CHECK(a.grff.freq != c.grff.freq);
}

TEST_CASE("zero weights with an output bias give a constant field") {
    InrModel<double> m = init_inr<double>(1, 8, 16, 1.0);
    for (auto& w : m.mlp.weights) w.setZero();
    for (auto& b : m.mlp.biases) b.setZero();
    m.mlp.biases[3](0) = 0.37;
    std::vector<Vec3<double>> pts{{0, 0, 0}, {0.5, -0.2, 0.9}, {-1, 1, -1}};
    const auto [vals, tape] = inr_forward(m, pts);
    (void)tape;
    for (double v : vals) CHECK(v == 0.37);
}

TEST_CASE("a repeated point maps to identical outputs") {
    const auto m = init_inr<double>(5, 8, 16, 1.0);
    std::vector<Vec3<double>> pts(7, Vec3<double>{0.3, 0.1, -0.4});
    const auto [vals, tape] = inr_forward(m, pts);
    (void)tape;
    for (double v : vals) CHECK(v == vals[0]);
}

TEST_CASE("forward evaluation is pure") {
    const auto m = init_inr<float>(9, 16, 32, 1.0);
    Rng rng(4);
    std::vector<Vec3<float>> pts(100);
    for (auto& p : pts)
        p = {static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1)),
             static_cast<float>(rng.uniform(-1, 1))};
    const auto [a, ta] = inr_forward(m, pts);
    const auto [b, tb] = inr_forward(m, pts);
    (void)ta;
    (void)tb;
    CHECK(a == b);
}

TEST_CASE("zero cotangent backpropagates to zero gradients") {
    const auto m = init_inr<double>(5, 8, 16, 1.0);
    std::vector<Vec3<double>> pts{{0.1, 0.2, 0.3}, {-0.5, 0.4, 0.0}};
    const auto [vals, tape] = inr_forward(m, pts);
    (void)vals;
    const auto g = inr_backward(m, tape, std::vector<double>{0.0, 0.0});
    for (int l = 0; l < 4; ++l) {
        CHECK(g.weights[l].cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.biases[l].cwiseAbs().maxCoeff() == 0.0);
    }
    for (const auto& p : g.points) {
        CHECK(p.x == 0.0);
        CHECK(p.y == 0.0);
        CHECK(p.z == 0.0);
    }
}

TEST_CASE("single-unit network matches the hand-derived gradient") {
    const InrModel<double> m = one_unit_model();
    const Vec3<double> v{0.2, 0.4, -0.1};
    const double phase = kTwoPi * (0.1 * v.x - 0.2 * v.y + 0.3 * v.z);
    const double c = std::cos(phase), s = std::sin(phase);
    const double z1 = 0.7 * c - 0.3 * s + 0.5;
    REQUIRE(z1 > 0);
    const double z2 = 1.2 * z1 + 0.1;
    const double z3 = 0.8 * z2 + 0.05;
    const double out = 1.5 * z3 - 0.2;

    const auto [vals, tape] = inr_forward(m, std::vector<Vec3<double>>{v});
    CHECK(vals[0] == Catch::Approx(out).margin(1e-12));

    const auto g = inr_backward(m, tape, std::vector<double>{1.0});
    const double up3 = 1.5, up2 = up3 * 0.8, up1 = up2 * 1.2;
    CHECK(g.weights[3](0, 0) == Catch::Approx(z3).margin(1e-12));
    CHECK(g.biases[3](0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(g.weights[2](0, 0) == Catch::Approx(up3 * z2).margin(1e-12));
    CHECK(g.biases[2](0) == Catch::Approx(up3).margin(1e-12));
    CHECK(g.weights[1](0, 0) == Catch::Approx(up2 * z1).margin(1e-12));
    CHECK(g.biases[1](0) == Catch::Approx(up2).margin(1e-12));
    CHECK(g.weights[0](0, 0) == Catch::Approx(up1 * c).margin(1e-12));
    CHECK(g.weights[0](0, 1) == Catch::Approx(up1 * s).margin(1e-12));
    CHECK(g.biases[0](0) == Catch::Approx(up1).margin(1e-12));

    // d enc / d v_j = 2 pi kappa B_j * [-sin, cos]
    for (int j = 0; j < 3; ++j) {
        const double bj = m.grff.freq(0, j);
        const double want = up1 * kTwoPi * bj * (0.7 * (-s) - 0.3 * c);
        const double got = j == 0 ? g.points[0].x : (j == 1 ? g.points[0].y : g.points[0].z);
        CHECK(got == Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("finite differences verify a first-layer weight") {
    InrModel<double> m = init_inr<double>(21, 8, 16, 1.0);
    std::vector<Vec3<double>> pts;
    Rng rng(22);
    for (int i = 0; i < 20; ++i)
        pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    std::vector<double> cot(pts.size(), 1.0);

    auto loss = [&]() {
        const auto [vals, tape] = inr_forward(m, pts);
        (void)tape;
        double s = 0;
        for (double v : vals) s += v;
        return s;
    };
    const auto [vals, tape] = inr_forward(m, pts);
    (void)vals;
    const auto g = inr_backward(m, tape, cot);

    const double h = 1e-4;
    double& w = m.mlp.weights[0](3, 5);
    const double orig = w;
    w = orig + h;
    const double up = loss();
    w = orig - h;
    const double down = loss();
    w = orig;
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - g.weights[0](3, 5)) / std::max(std::abs(fd), 1e-12) < 1e-5);
}

TEST_CASE("the full finite-difference sweep passes") {
    for (const auto& r : run_gradcheck(777)) {
        INFO(r.name << " max_rel_err " << r.max_rel_err << " tol " << r.tol);
        CHECK(r.pass);
    }
}

TEST_CASE("tape and model must match") {
    const auto m1 = init_inr<double>(1, 8, 16, 1.0);
    const auto m2 = init_inr<double>(1, 8, 32, 1.0);
    std::vector<Vec3<double>> pts{{0, 0, 0}};
    const auto [vals, tape] = inr_forward(m1, pts);
    (void)vals;
    CHECK_THROWS_AS(inr_backward(m2, tape, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(inr_backward(m1, tape, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("query_template is deterministic without jitter and clamps exports") {
    InrModel<float> m = init_inr<float>(3, 8, 16, 1.0);
    const auto a = query_template(m, 1, 16, 16, false, 0);
    const auto b = query_template(m, 1, 16, 16, false, 99);
    CHECK(a.data == b.data);

    // Constant negative field: the clamp zeroes it and reports the mass.
    for (auto& w : m.mlp.weights) w.setZero();
    for (auto& bias : m.mlp.biases) bias.setZero();
    m.mlp.biases[3](0) = -0.5f;
    double clipped = 0;
    const auto c = query_template(m, 1, 16, 16, false, 0, &clipped);
    for (float v : c.data) CHECK(v == 0.0f);
    CHECK(clipped == Catch::Approx(0.5 * 16 * 16));
    const auto raw = query_template(m, 1, 16, 16, false, 0, nullptr, false);
    for (float v : raw.data) CHECK(v == -0.5f);
}

TEST_CASE("query_template works at any export resolution") {
    const auto m = init_inr<float>(3, 8, 16, 1.0);
    const auto lo = query_template(m, 1, 20, 20, false, 0);
    const auto hi = query_template(m, 1, 64, 64, false, 0);
    CHECK(lo.nx == 20);
    CHECK(hi.nx == 64);
}

TEST_CASE("jittered coordinates stay within half a voxel of their centers") {
    Rng rng(5);
    const auto grid = make_coord_grid<double>(4, 8, 8, true, &rng);
    std::size_t i = 0;
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x, ++i) {
                CHECK(std::abs(grid.points[i].z - cell_center(z, 4)) <= 0.5 * cell_spacing(4));
                CHECK(std::abs(grid.points[i].y - cell_center(y, 8)) <= 0.5 * cell_spacing(8));
                CHECK(std::abs(grid.points[i].x - cell_center(x, 8)) <= 0.5 * cell_spacing(8));
            }
}
