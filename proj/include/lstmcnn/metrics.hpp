#ifndef LSTMCNN_METRICS_HPP
#define LSTMCNN_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace lstmcnn {

// PD is the positive class throughout.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }

    void add(bool actual_pd, bool predicted_pd) {
        if (actual_pd && predicted_pd) ++tp;
        else if (actual_pd && !predicted_pd) ++fn;
        else if (!actual_pd && predicted_pd) ++fp;
        else ++tn;
    }
};

// A metric that may be undefined (zero denominator). Reports never turn an
// undefined score into 0; undefined_reason names the zero marginal.
struct MetricValue {
    std::optional<double> value;
    std::string undefined_reason;

    bool defined() const { return value.has_value(); }
    double get() const { return *value; }
};

MetricValue accuracy(const ConfusionMatrix& cm);
MetricValue recall(const ConfusionMatrix& cm);
MetricValue precision(const ConfusionMatrix& cm);
MetricValue f1(const ConfusionMatrix& cm);
MetricValue mcc(const ConfusionMatrix& cm);

// Table-style rendering: percentages to 1 decimal, MCC to 2 decimals,
// "undefined (<reason>)" when a denominator was zero.
std::string format_percent(const MetricValue& m);
std::string format_mcc(const MetricValue& m);

}  // namespace lstmcnn

#endif
