// Test-only reference implementations. Everything here is written as the
// most literal possible reading of the definitions, independent of the
// library's implementation paths, so the two can check each other.

#ifndef LSTMCNN_TESTS_ORACLES_HPP
#define LSTMCNN_TESTS_ORACLES_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "lstmcnn/metrics.hpp"
#include "lstmcnn/numkit.hpp"
#include "lstmcnn/signal.hpp"

namespace oracles {

// naive triple-loop matrix product
inline lstmcnn::Matrix matmul(const lstmcnn::Matrix& a, const lstmcnn::Matrix& b) {
    lstmcnn::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// brute-force enumeration of segmentation offsets
inline std::size_t patch_count(std::size_t L, std::size_t w, std::size_t s) {
    if (L < w) return 1;  // single zero-padded patch
    std::size_t n = 0;
    for (std::size_t off = 0; off + w <= L; off += s) ++n;
    return n;
}

// nested-loop valid cross-correlation + ReLU; kernels indexed [out][in][k]
inline lstmcnn::Matrix conv1d(const lstmcnn::Matrix& x, const std::vector<double>& kernels,
                              const std::vector<double>& bias, std::size_t out_ch,
                              std::size_t in_ch, std::size_t k, std::size_t stride) {
    const std::size_t out_len = (x.rows() - k) / stride + 1;
    lstmcnn::Matrix out(out_len, out_ch);
    for (std::size_t t = 0; t < out_len; ++t)
        for (std::size_t o = 0; o < out_ch; ++o) {
            double s = bias[o];
            for (std::size_t c = 0; c < in_ch; ++c)
                for (std::size_t j = 0; j < k; ++j)
                    s += x(t * stride + j, c) * kernels[(o * in_ch + c) * k + j];
            out(t, o) = s > 0 ? s : 0;
        }
    return out;
}

// nested-loop per-channel window max
inline lstmcnn::Matrix maxpool1d(const lstmcnn::Matrix& x, std::size_t k, std::size_t stride) {
    const std::size_t out_len = (x.rows() - k) / stride + 1;
    lstmcnn::Matrix out(out_len, x.cols());
    for (std::size_t t = 0; t < out_len; ++t)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double m = x(t * stride, c);
            for (std::size_t j = 1; j < k; ++j) m = std::max(m, x(t * stride + j, c));
            out(t, c) = m;
        }
    return out;
}

// literal recount of the voting rule
struct VoteRecount {
    double r;
    bool predicted_pd;
};

inline VoteRecount vote(const std::vector<lstmcnn::Label>& labels, double alpha) {
    std::size_t pd = 0;
    for (auto l : labels)
        if (l == lstmcnn::Label::PD) ++pd;
    const double r = static_cast<double>(pd) / static_cast<double>(labels.size());
    return {r, r >= alpha};
}

// metric formulas via an algebraically different route: MCC through the
// prevalence/bias form, F1 through the harmonic mean
struct MetricRecount {
    bool defined;
    double value;
};

inline MetricRecount mcc(const lstmcnn::ConfusionMatrix& cm) {
    const double n = static_cast<double>(cm.total());
    const double s = static_cast<double>(cm.tp + cm.fn) / n;  // prevalence
    const double p = static_cast<double>(cm.tp + cm.fp) / n;  // predicted-positive rate
    const double denom = s * p * (1 - s) * (1 - p);
    if (denom <= 0) return {false, 0};
    return {true, (static_cast<double>(cm.tp) / n - s * p) / std::sqrt(denom)};
}

inline MetricRecount f1(const lstmcnn::ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0 || cm.tp + cm.fn == 0) return {false, 0};
    const double prec = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    const double rec = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (prec + rec == 0) return {false, 0};
    return {true, 2.0 / (1.0 / prec + 1.0 / rec)};
}

inline MetricRecount accuracy(const lstmcnn::ConfusionMatrix& cm) {
    if (cm.total() == 0) return {false, 0};
    return {true, static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total())};
}

inline MetricRecount recall(const lstmcnn::ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) return {false, 0};
    return {true, static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn)};
}

}  // namespace oracles

#endif
