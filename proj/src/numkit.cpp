#include "lstmcnn/numkit.hpp"

#include <cmath>
#include <string>
#include <thread>

namespace lstmcnn {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: left operand is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", right operand is " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                         "; inner dimensions must agree");
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            axpy(crow, a(i, k), b.row(k), b.cols());
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;  // xorshift state must be nonzero
}

std::uint64_t Rng::next_u64() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi)) {
        throw UsageError("uniform: lo (" + std::to_string(lo) + ") must be < hi (" +
                         std::to_string(hi) + ")");
    }
    return lo + (hi - lo) * next_double();
}

std::vector<double> Rng::uniform_vec(double lo, double hi, std::size_t n) {
    if (!(lo < hi)) {
        throw UsageError("uniform_vec: lo (" + std::to_string(lo) + ") must be < hi (" +
                         std::to_string(hi) + ")");
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * next_double();
    return out;
}

double Rng::normal() {
    // Box-Muller; u is kept away from 0 so the log stays finite.
    double u = next_double();
    double v = next_double();
    if (u < 1e-300) u = 1e-300;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u)) * std::cos(two_pi * v);
}

Rng Rng::child(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        body(0, n);
        return;
    }
    if (threads > n) threads = n;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        std::size_t begin = t * chunk;
        std::size_t end = begin + chunk < n ? begin + chunk : n;
        if (begin >= end) break;
        pool.emplace_back(body, begin, end);
    }
    for (auto& th : pool) th.join();
}

}  // namespace lstmcnn
