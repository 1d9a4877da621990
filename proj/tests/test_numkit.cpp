#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lstmcnn/numkit.hpp"
#include "oracles.hpp"

using namespace lstmcnn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST_CASE("matmul: identity leaves any 3x3 matrix unchanged") {
    Rng rng(7);
    Matrix a = random_matrix(3, 3, rng);
    Matrix out = matmul(Matrix::identity(3), a);
    CHECK(max_abs_diff(out, a) == 0.0);
}

TEST_CASE("matmul: hand-checked 2x2 by 2x1") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    Matrix b(2, 1);
    b(0, 0) = 5; b(1, 0) = 6;
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(17).epsilon(1e-15));
    CHECK(c(1, 0) == doctest::Approx(39).epsilon(1e-15));
}

TEST_CASE("matmul: random 7x5 x 5x3 matches triple-loop oracle") {
    Rng rng(11);
    Matrix a = random_matrix(7, 5, rng);
    Matrix b = random_matrix(5, 3, rng);
    CHECK(max_abs_diff(matmul(a, b), oracles::matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul: dimension mismatch names both operands") {
    Matrix a(2, 3), b(4, 2);
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4x2") != std::string::npos);
    }
}

TEST_CASE("matmul: associativity on random conformable triples") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = random_matrix(4, 6, rng);
        Matrix b = random_matrix(6, 5, rng);
        Matrix c = random_matrix(5, 3, rng);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
    }
}

TEST_CASE("matmul: (AB)^T equals B^T A^T") {
    Rng rng(17);
    Matrix a = random_matrix(4, 6, rng);
    Matrix b = random_matrix(6, 5, rng);
    CHECK(max_abs_diff(transpose(matmul(a, b)), matmul(transpose(b), transpose(a))) < 1e-12);
}

TEST_CASE("rng: identical seeds produce identical sequences") {
    Rng a(42), b(42);
    auto va = a.uniform_vec(0.0, 1.0, 100);
    auto vb = b.uniform_vec(0.0, 1.0, 100);
    CHECK(va == vb);
}

TEST_CASE("rng: golden sequence for seed 1 is platform-stable") {
    // frozen from the documented update rule; any change to seeding or the
    // xorshift64* constants breaks this on purpose
    Rng rng(1);
    const std::uint64_t expected_u64[4] = {5424204624148110235ULL, 15555979849632202484ULL, 6851360858507811590ULL, 4263911567865507035ULL};
    for (int i = 0; i < 4; ++i) CHECK(rng.next_u64() == expected_u64[i]);
    Rng rng2(1);
    const double expected_d[4] = {0.29404672187536496, 0.84329135740559813, 0.37141301636381596, 0.23114710925829274};
    for (int i = 0; i < 4; ++i) CHECK(rng2.next_double() == doctest::Approx(expected_d[i]).epsilon(1e-15));
}

TEST_CASE("rng: uniform mean over 1e5 draws is near 0.5") {
    Rng rng(5);
    auto v = rng.uniform_vec(0.0, 1.0, 100000);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    CHECK(std::abs(mean - 0.5) < 0.01);
}

TEST_CASE("rng: n = 0 yields an empty sequence") {
    Rng rng(3);
    CHECK(rng.uniform_vec(0.0, 1.0, 0).empty());
}

TEST_CASE("rng: lo >= hi is rejected") {
    Rng rng(3);
    CHECK_THROWS_AS(rng.uniform(1.0, 1.0), UsageError);
    CHECK_THROWS_AS(rng.uniform_vec(2.0, 1.0, 5), UsageError);
}

TEST_CASE("rng: draws stay inside [lo, hi)") {
    Rng rng(9);
    for (double v : rng.uniform_vec(-2.5, 3.5, 10000)) {
        CHECK(v >= -2.5);
        CHECK(v < 3.5);
    }
}

TEST_CASE("rng: children with distinct streams differ, same stream replays") {
    Rng base(123);
    Rng c0 = base.child(0);
    Rng c1 = base.child(1);
    Rng c0_again = base.child(0);
    CHECK(c0.next_u64() != c1.next_u64());
    Rng c0_fresh = Rng(123).child(0);
    CHECK(c0_again.next_u64() == c0_fresh.next_u64());
}

TEST_CASE("parallel_for covers the whole range exactly once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) hits[i]++;
    });
    for (int h : hits) CHECK(h == 1);
}
