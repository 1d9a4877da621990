#ifndef LSTMCNN_NUMKIT_HPP
#define LSTMCNN_NUMKIT_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "lstmcnn/errors.hpp"

namespace lstmcnn {

// ============================================================================
// Matrix — dense 2D, row-major, 64-bit reals
// ============================================================================

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// a.cols must equal b.rows; throws ShapeError naming both operands otherwise.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// ============================================================================
// Low-level kernels
//
// All kernels accumulate in a fixed order, so results are bit-reproducible
// for a given build. dot() uses eight independent partial sums; the lanes
// map onto SIMD registers without reassociating the source order.
// ============================================================================

inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

// y += alpha * x
inline void axpy(double* y, double alpha, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y += A x, A row-major (rows x cols)
inline void matvec_add(const Matrix& a, const double* x, double* y) {
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] += dot(a.row(r), x, a.cols());
}

// y += A^T x, accumulated row by row so memory access stays contiguous
inline void matvec_transpose_add(const Matrix& a, const double* x, double* y) {
    for (std::size_t r = 0; r < a.rows(); ++r) axpy(y, x[r], a.row(r), a.cols());
}

// ============================================================================
// Rng — explicit xorshift64* stream
//
// Update rule (64-bit state s, never zero):
//     s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;
//     output = s * 0x2545F4914F6CDD1D
// Seeding passes the user seed through one splitmix64 round so that small
// seeds (0, 1, 2, ...) start from well-mixed states. Identical seeds produce
// identical draw sequences on every platform; nothing here touches
// std::random_device or platform-default engines.
// ============================================================================

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform draw in [0, 1) with 53 bits of precision.
    double next_double();

    // Uniform draw in [lo, hi); throws UsageError when lo >= hi.
    double uniform(double lo, double hi);

    // n uniform draws in [lo, hi); advances state deterministically.
    std::vector<double> uniform_vec(double lo, double hi, std::size_t n);

    // Standard normal via Box-Muller (two uniform draws per value).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Independently seeded generator for parallel work item `stream`.
    // Children of the same parent and stream index replay exactly.
    Rng child(std::uint64_t stream) const;

    // Fisher-Yates in-place shuffle driven by this stream.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_ = 0;
};

// ============================================================================
// parallel_for — split [0, n) across `threads` workers
//
// Work items must be independent. With threads <= 1 the body runs inline on
// the calling thread with no thread machinery.
// ============================================================================

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace lstmcnn

#endif
