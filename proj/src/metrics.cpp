#include "lstmcnn/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace lstmcnn {

namespace {
MetricValue undefined(const std::string& reason) { return MetricValue{std::nullopt, reason}; }
MetricValue defined(double v) { return MetricValue{v, {}}; }
}  // namespace

MetricValue accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) return undefined("empty confusion matrix");
    return defined(static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total()));
}

MetricValue recall(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) return undefined("tp+fn is zero (no positive ground truth)");
    return defined(static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn));
}

MetricValue precision(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0) return undefined("tp+fp is zero (no positive predictions)");
    return defined(static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp));
}

MetricValue f1(const ConfusionMatrix& cm) {
    MetricValue p = precision(cm);
    MetricValue r = recall(cm);
    if (!p.defined()) return undefined(p.undefined_reason);
    if (!r.defined()) return undefined(r.undefined_reason);
    if (p.get() + r.get() == 0.0) return undefined("precision+recall is zero");
    return defined(2.0 * p.get() * r.get() / (p.get() + r.get()));
}

MetricValue mcc(const ConfusionMatrix& cm) {
    const double tp = static_cast<double>(cm.tp), tn = static_cast<double>(cm.tn);
    const double fp = static_cast<double>(cm.fp), fn = static_cast<double>(cm.fn);
    if (tp + fp == 0) return undefined("tp+fp is zero");
    if (tp + fn == 0) return undefined("tp+fn is zero");
    if (tn + fp == 0) return undefined("tn+fp is zero");
    if (tn + fn == 0) return undefined("tn+fn is zero");
    const double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    return defined((tp * tn - fp * fn) / denom);
}

std::string format_percent(const MetricValue& m) {
    if (!m.defined()) return "undefined (" + m.undefined_reason + ")";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * m.get());
    return buf;
}

std::string format_mcc(const MetricValue& m) {
    if (!m.defined()) return "undefined (" + m.undefined_reason + ")";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", m.get());
    return buf;
}

}  // namespace lstmcnn
