#include "lstmcnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>

#include <json.hpp>

#include "lstmcnn/infer.hpp"

namespace lstmcnn {

using ordered_json = nlohmann::ordered_json;

// ============================================================================
// Configuration
// ============================================================================

void TrainConfig::validate() const {
    if (epochs < 1) throw UsageError("train config: epochs must be >= 1");
    if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
    // learning_rate 0 is allowed as an explicit no-op baseline
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw UsageError("train config: learning_rate must be finite and >= 0");
    }
    if (folds < 2) throw UsageError("train config: folds must be >= 2");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw UsageError("train config: beta1/beta2 must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw UsageError("train config: eps must be positive");
}

// ============================================================================
// Loss
// ============================================================================

double cross_entropy(const std::vector<double>& probs, std::size_t target) {
    if (target >= probs.size()) {
        throw UsageError("cross_entropy: target " + std::to_string(target) +
                         " out of range for " + std::to_string(probs.size()) + " classes");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0 + 1e-9)) {
            throw DataError("cross_entropy: probability " + std::to_string(p) +
                            " outside [0, 1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw DataError("cross_entropy: probabilities sum to " + std::to_string(sum));
    }
    return -std::log(std::max(probs[target], 1e-12));
}

// ============================================================================
// Optimizer
// ============================================================================

void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const TrainConfig& cfg) {
    auto ptab = tensor_table(params);
    auto gtab = tensor_table(const_cast<ModelParams&>(grads));
    if (ptab.size() != gtab.size()) throw ShapeError("optimizer_step: tensor tables differ");
    for (std::size_t i = 0; i < ptab.size(); ++i) {
        if (ptab[i].size != gtab[i].size) {
            throw ShapeError("optimizer_step: tensor '" + ptab[i].name + "' has " +
                             std::to_string(ptab[i].size) + " parameters but gradient has " +
                             std::to_string(gtab[i].size));
        }
    }

    if (cfg.optimizer == TrainConfig::Optimizer::Sgd) {
        ++state.step;
        for (std::size_t i = 0; i < ptab.size(); ++i) {
            axpy(ptab[i].data, -cfg.learning_rate, gtab[i].data, ptab[i].size);
        }
        return;
    }

    if (state.m.empty()) {
        state.m.resize(ptab.size());
        state.v.resize(ptab.size());
        for (std::size_t i = 0; i < ptab.size(); ++i) {
            state.m[i].assign(ptab[i].size, 0.0);
            state.v[i].assign(ptab[i].size, 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < ptab.size(); ++i) {
        double* p = ptab[i].data;
        const double* g = gtab[i].data;
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (std::size_t j = 0; j < ptab[i].size; ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// ============================================================================
// Folds
// ============================================================================

std::vector<FoldSplit> make_subject_folds(
    const std::vector<std::pair<std::string, Label>>& subjects, std::size_t folds,
    std::uint64_t seed) {
    if (folds < 2) throw UsageError("make_subject_folds: folds must be >= 2");

    // unique subjects with consistent labels
    std::map<std::string, Label> by_id;
    for (const auto& [id, label] : subjects) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            by_id.emplace(id, label);
        } else if (it->second != label) {
            throw DataError("make_subject_folds: subject '" + id + "' appears with both labels");
        }
    }

    std::vector<std::string> hc, pd;
    for (const auto& [id, label] : by_id) (label == Label::PD ? pd : hc).push_back(id);
    for (const auto* cls : {&hc, &pd}) {
        const char* name = (cls == &pd) ? "PD" : "HC";
        if (cls->size() < folds) {
            throw DataError("make_subject_folds: class " + std::string(name) + " has " +
                            std::to_string(cls->size()) + " subjects but " +
                            std::to_string(folds) + " folds were requested");
        }
    }

    // std::map iteration gives a canonical base order; the shuffle is the
    // only source of randomness
    Rng rng(seed);
    rng.shuffle(hc);
    rng.shuffle(pd);

    std::vector<FoldSplit> splits(folds);
    for (std::size_t k = 0; k < folds; ++k) splits[k].fold_index = k;
    for (std::size_t i = 0; i < hc.size(); ++i) splits[i % folds].test_subjects.insert(hc[i]);
    for (std::size_t i = 0; i < pd.size(); ++i) splits[i % folds].test_subjects.insert(pd[i]);
    for (auto& split : splits) {
        for (const auto& [id, label] : by_id) {
            if (!split.test_subjects.count(id)) split.train_subjects.insert(id);
        }
    }
    return splits;
}

std::vector<FoldSplit> make_subject_folds(const std::vector<ManifestRow>& rows, std::size_t folds,
                                          std::uint64_t seed) {
    std::vector<std::pair<std::string, Label>> subjects;
    subjects.reserve(rows.size());
    for (const auto& r : rows) subjects.emplace_back(r.subject_id, r.label);
    return make_subject_folds(subjects, folds, seed);
}

std::string fold_splits_json(const std::vector<FoldSplit>& splits) {
    ordered_json arr = ordered_json::array();
    for (const auto& s : splits) {
        ordered_json j;
        j["fold_index"] = s.fold_index;
        j["train_subjects"] = s.train_subjects;
        j["test_subjects"] = s.test_subjects;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::vector<FoldSplit> parse_fold_splits(const std::string& json_text) {
    ordered_json arr;
    try {
        arr = ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("fold splits: ") + e.what());
    }
    if (!arr.is_array()) throw ParseError("fold splits: expected a JSON array");
    std::vector<FoldSplit> splits;
    for (const auto& j : arr) {
        FoldSplit s;
        s.fold_index = j.at("fold_index").get<std::size_t>();
        for (const auto& id : j.at("train_subjects")) s.train_subjects.insert(id.get<std::string>());
        for (const auto& id : j.at("test_subjects")) s.test_subjects.insert(id.get<std::string>());
        splits.push_back(std::move(s));
    }
    return splits;
}

// ============================================================================
// Dataset assembly
// ============================================================================

std::vector<SequencePatches> load_dataset(const std::vector<ManifestRow>& rows,
                                          const SegmentationConfig& seg) {
    std::vector<SequencePatches> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        const auto ext = std::filesystem::path(row.path).extension().string();
        const SequenceFormat fmt = ext == ".svc" ? SequenceFormat::Svc : SequenceFormat::Dwt;
        RawSequence seq = load_sequence(row.path, fmt);
        // manifest identity wins over whatever the file carries
        seq.subject_id = row.subject_id;
        seq.label = row.label;
        seq.task = row.task;
        SequencePatches sp;
        sp.subject_id = row.subject_id;
        sp.label = row.label;
        sp.task = row.task;
        sp.patches = preprocess_sequence(seq, seg);
        out.push_back(std::move(sp));
    }
    return out;
}

// ============================================================================
// Training
// ============================================================================

FoldResult train_fold(const std::vector<SequencePatches>& data, const FoldSplit& split,
                      const ModelConfig& mcfg, const TrainConfig& tcfg, double vote_alpha) {
    mcfg.validate();
    tcfg.validate();
    if (split.train_subjects.empty() || split.test_subjects.empty()) {
        throw DataError("train_fold: fold " + std::to_string(split.fold_index) +
                        " has an empty train or test subject set");
    }

    const auto t0 = std::chrono::steady_clock::now();

    std::vector<const Patch*> pool;
    std::size_t n_pd = 0, n_hc = 0;
    for (const auto& sp : data) {
        if (!split.train_subjects.count(sp.subject_id)) continue;
        for (const auto& p : sp.patches) {
            pool.push_back(&p);
            (p.parent_label == Label::PD ? n_pd : n_hc)++;
        }
    }
    if (n_pd == 0 || n_hc == 0) {
        throw DataError("train_fold: fold " + std::to_string(split.fold_index) +
                        " training set lacks class " + (n_pd == 0 ? "PD" : "HC"));
    }

    // per-class loss weights; 1.0 unless balancing is requested
    double w_pd = 1.0, w_hc = 1.0;
    if (tcfg.class_weighting) {
        const double total = static_cast<double>(n_pd + n_hc);
        w_pd = total / (2.0 * static_cast<double>(n_pd));
        w_hc = total / (2.0 * static_cast<double>(n_hc));
    }

    FoldResult result;
    result.fold_index = split.fold_index;
    result.mcfg = mcfg;

    Rng rng = Rng(tcfg.seed).child(split.fold_index);
    result.params = init_params(mcfg, rng);
    OptimizerState opt_state;
    ModelParams batch_grads = make_params_shell(mcfg);
    auto grad_tab = tensor_table(batch_grads);

    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    ForwardCache cache;
    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
            for (auto& t : grad_tab) std::fill(t.data, t.data + t.size, 0.0);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const Patch& patch = *pool[order[i]];
                const std::size_t target = patch.parent_label == Label::PD ? 1 : 0;
                auto probs = model_forward(patch, result.params, mcfg, true, rng, &cache);
                loss_sum += cross_entropy(probs, target);
                const double scale =
                    inv_batch * (patch.parent_label == Label::PD ? w_pd : w_hc);
                model_backward_into(cache, target, result.params, mcfg, batch_grads, scale);
                result.gradient_subjects.insert(patch.parent_subject);
            }
            optimizer_step(result.params, batch_grads, opt_state, tcfg);
        }
        result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(pool.size()));
    }

    // sequence-level evaluation on the held-out subjects
    for (const auto& sp : data) {
        if (!split.test_subjects.count(sp.subject_id)) continue;
        auto preds = predict_patches(sp.patches, result.params, mcfg, 1);
        std::vector<Label> labels(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) {
            labels[i] = preds[i].cls == 1 ? Label::PD : Label::HC;
        }
        VoteResult vote = majority_vote(labels, vote_alpha);
        result.confusion.add(sp.label == Label::PD, vote.predicted == Label::PD);
    }

    result.wall_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ============================================================================
// Cross-validation and reporting
// ============================================================================

CrossValResult run_cross_validation(const std::vector<SequencePatches>& data,
                                    const ModelConfig& mcfg, const TrainConfig& tcfg,
                                    const SegmentationConfig& seg, double vote_alpha) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::pair<std::string, Label>> subjects;
    for (const auto& sp : data) subjects.emplace_back(sp.subject_id, sp.label);
    auto splits = make_subject_folds(subjects, tcfg.folds, tcfg.seed);

    std::vector<FoldResult> folds(splits.size());
    std::exception_ptr first_error;
    std::mutex error_mutex;
    parallel_for(splits.size(), tcfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            try {
                folds[k] = train_fold(data, splits[k], mcfg, tcfg, vote_alpha);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    });
    if (first_error) std::rethrow_exception(first_error);

    CrossValResult out;
    out.splits = std::move(splits);
    out.report.mcfg = mcfg;
    out.report.seg = seg;
    out.report.tcfg = tcfg;
    out.report.vote_alpha = vote_alpha;
    for (const auto& fr : folds) {
        FoldReportEntry e;
        e.fold_index = fr.fold_index;
        e.test_subjects.assign(out.splits[fr.fold_index].test_subjects.begin(),
                               out.splits[fr.fold_index].test_subjects.end());
        e.epoch_mean_loss = fr.epoch_mean_loss;
        e.confusion = fr.confusion;
        e.gradient_subjects.assign(fr.gradient_subjects.begin(), fr.gradient_subjects.end());
        e.wall_sec = fr.wall_sec;
        out.report.pooled.tp += fr.confusion.tp;
        out.report.pooled.tn += fr.confusion.tn;
        out.report.pooled.fp += fr.confusion.fp;
        out.report.pooled.fn += fr.confusion.fn;
        out.report.folds.push_back(std::move(e));
    }
    out.folds = std::move(folds);
    out.report.wall_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

namespace {

ordered_json metric_json(const MetricValue& m) {
    if (!m.defined()) return ordered_json{{"undefined", m.undefined_reason}};
    return ordered_json(m.get());
}

ordered_json confusion_json(const ConfusionMatrix& cm) {
    ordered_json j;
    j["tp"] = cm.tp;
    j["tn"] = cm.tn;
    j["fp"] = cm.fp;
    j["fn"] = cm.fn;
    return j;
}

ordered_json metrics_block(const ConfusionMatrix& cm) {
    ordered_json j;
    j["accuracy"] = metric_json(accuracy(cm));
    j["recall"] = metric_json(recall(cm));
    j["f1"] = metric_json(f1(cm));
    j["mcc"] = metric_json(mcc(cm));
    return j;
}

}  // namespace

std::string train_report_json(const TrainReport& r, bool include_timing) {
    ordered_json j;
    j["seed"] = r.tcfg.seed;
    ordered_json model;
    model["input_dim"] = r.mcfg.input_dim;
    model["window"] = r.mcfg.window;
    model["lstm_hidden"] = r.mcfg.lstm_hidden;
    model["conv1_filters"] = r.mcfg.conv1_filters;
    model["conv2_filters"] = r.mcfg.conv2_filters;
    model["kernel"] = r.mcfg.kernel;
    model["conv_stride"] = r.mcfg.conv_stride;
    model["pool_kernel"] = r.mcfg.pool_kernel;
    model["pool_stride"] = r.mcfg.pool_stride;
    model["dropout_p"] = r.mcfg.dropout_p;
    model["num_classes"] = r.mcfg.num_classes;
    model["use_concat"] = r.mcfg.use_concat;
    j["model"] = model;
    ordered_json seg;
    seg["window_size"] = r.seg.window_size;
    seg["stride_size"] = r.seg.stride_size;
    seg["diff_mode"] = diff_mode_name(r.seg.diff_mode);
    j["segmentation"] = seg;
    ordered_json train;
    train["epochs"] = r.tcfg.epochs;
    train["batch_size"] = r.tcfg.batch_size;
    train["learning_rate"] = r.tcfg.learning_rate;
    train["optimizer"] = r.tcfg.optimizer == TrainConfig::Optimizer::Adam ? "adam" : "sgd";
    train["beta1"] = r.tcfg.beta1;
    train["beta2"] = r.tcfg.beta2;
    train["eps"] = r.tcfg.eps;
    train["folds"] = r.tcfg.folds;
    train["class_weighting"] = r.tcfg.class_weighting;
    j["train"] = train;
    j["vote_alpha"] = r.vote_alpha;

    ordered_json folds = ordered_json::array();
    for (const auto& f : r.folds) {
        ordered_json e;
        e["fold_index"] = f.fold_index;
        e["test_subjects"] = f.test_subjects;
        e["epoch_mean_loss"] = f.epoch_mean_loss;
        e["confusion"] = confusion_json(f.confusion);
        e["metrics"] = metrics_block(f.confusion);
        e["gradient_subjects"] = f.gradient_subjects;
        if (include_timing) e["wall_sec"] = f.wall_sec;
        folds.push_back(std::move(e));
    }
    j["folds"] = folds;
    j["pooled_confusion"] = confusion_json(r.pooled);
    j["pooled_metrics"] = metrics_block(r.pooled);
    j["mean_fold_accuracy"] = mean_fold_accuracy(r);
    if (include_timing) j["wall_sec"] = r.wall_sec;
    return j.dump(2) + "\n";
}

double mean_fold_accuracy(const TrainReport& report) {
    if (report.folds.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& f : report.folds) {
        MetricValue a = accuracy(f.confusion);
        sum += a.defined() ? a.get() : 0.0;
    }
    return sum / static_cast<double>(report.folds.size());
}

}  // namespace lstmcnn
