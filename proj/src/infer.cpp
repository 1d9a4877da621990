#include "lstmcnn/infer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <mutex>

#include <json.hpp>

namespace lstmcnn {

// ============================================================================
// Patch prediction
// ============================================================================

std::vector<PatchPrediction> predict_patches(const std::vector<Patch>& patches,
                                             const ModelParams& params, const ModelConfig& cfg,
                                             std::size_t threads) {
    std::vector<PatchPrediction> out(patches.size());
    parallel_for(patches.size(), threads, [&](std::size_t begin, std::size_t end) {
        Rng dummy(0);  // inference consumes no randomness
        for (std::size_t i = begin; i < end; ++i) {
            auto probs = model_forward(patches[i], params, cfg, false, dummy);
            std::size_t best = 0;
            for (std::size_t c = 1; c < probs.size(); ++c) {
                if (probs[c] > probs[best]) best = c;
            }
            out[i] = PatchPrediction{best, std::move(probs)};
        }
    });
    return out;
}

// ============================================================================
// Voting
// ============================================================================

VoteResult majority_vote(const std::vector<Label>& labels, double alpha) {
    if (labels.empty()) throw DataError("majority_vote: empty label list");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw UsageError("majority_vote: alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
    std::size_t pd = 0;
    for (Label l : labels) {
        if (l == Label::PD) ++pd;
    }
    VoteResult v;
    v.n_patches = labels.size();
    v.pd_fraction = static_cast<double>(pd) / static_cast<double>(labels.size());
    v.threshold = alpha;
    v.predicted = v.pd_fraction >= alpha ? Label::PD : Label::HC;  // tie resolves to PD
    return v;
}

// ============================================================================
// Diagnosis
// ============================================================================

namespace {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ParseError& e) {
        throw ParseError(std::string(stage) + " stage: " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(stage) + " stage: " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(std::string(stage) + " stage: " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(std::string(stage) + " stage: " + e.what());
    } catch (const UsageError& e) {
        throw UsageError(std::string(stage) + " stage: " + e.what());
    }
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

Diagnosis diagnose_sequence(const std::string& path, SequenceFormat format,
                            const ModelParams& params, const ModelConfig& mcfg,
                            const SegmentationConfig& seg, double alpha, std::size_t threads) {
    if (seg.window_size != mcfg.window) {
        throw UsageError("diagnose_sequence: segmentation window " +
                         std::to_string(seg.window_size) + " does not match checkpoint window " +
                         std::to_string(mcfg.window));
    }

    const auto t_start = std::chrono::steady_clock::now();
    Diagnosis d;

    auto t0 = std::chrono::steady_clock::now();
    RawSequence seq = run_stage("load", [&] { return load_sequence(path, format); });
    d.timings.load = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    std::vector<Patch> patches = run_stage("processing", [&] {
        return preprocess_sequence(seq, seg);
    });
    d.timings.processing = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    d.vote = run_stage("model", [&] {
        auto preds = predict_patches(patches, params, mcfg, threads);
        std::vector<Label> labels(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) {
            labels[i] = preds[i].cls == 1 ? Label::PD : Label::HC;
        }
        VoteResult v = majority_vote(labels, alpha);
        v.subject_id = seq.subject_id;
        return v;
    });
    d.timings.model = seconds_since(t0);

    d.timings.total = seconds_since(t_start);
    return d;
}

std::string diagnosis_json(const Diagnosis& d) {
    nlohmann::ordered_json j;
    j["subject_id"] = d.vote.subject_id;
    j["predicted"] = label_name(d.vote.predicted);
    j["r"] = d.vote.pd_fraction;
    j["n_patches"] = d.vote.n_patches;
    j["alpha"] = d.vote.threshold;
    nlohmann::ordered_json t;
    t["load"] = round6(d.timings.load);
    t["processing"] = round6(d.timings.processing);
    t["model"] = round6(d.timings.model);
    t["total"] = round6(d.timings.total);
    j["timings_sec"] = t;
    return j.dump();
}

// ============================================================================
// Dataset evaluation
// ============================================================================

ConfusionMatrix confusion_at(const std::vector<SequenceVote>& votes, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw UsageError("confusion_at: alpha must lie in (0, 1)");
    }
    ConfusionMatrix cm;
    for (const auto& v : votes) {
        cm.add(v.label == Label::PD, v.pd_fraction >= alpha);
    }
    return cm;
}

EvalResult evaluate_dataset(const std::vector<ManifestRow>& rows,
                            const std::vector<std::string>& fold_checkpoint_paths,
                            const std::vector<FoldSplit>& splits, const SegmentationConfig& seg,
                            double alpha, std::size_t threads) {
    if (fold_checkpoint_paths.size() != splits.size()) {
        throw ProtocolError("evaluate_dataset: " + std::to_string(splits.size()) +
                            " folds but " + std::to_string(fold_checkpoint_paths.size()) +
                            " checkpoints");
    }

    // subject -> fold that held it out
    std::map<std::string, std::size_t> test_fold;
    for (const auto& s : splits) {
        for (const auto& id : s.test_subjects) {
            if (test_fold.count(id)) {
                throw ProtocolError("evaluate_dataset: subject '" + id +
                                    "' appears in multiple test folds");
            }
            test_fold[id] = s.fold_index;
        }
    }
    for (const auto& row : rows) {
        if (!test_fold.count(row.subject_id)) {
            throw ProtocolError("evaluate_dataset: subject '" + row.subject_id +
                                "' is missing from every test fold");
        }
    }

    std::vector<std::pair<ModelParams, ModelConfig>> models;
    models.reserve(fold_checkpoint_paths.size());
    for (const auto& path : fold_checkpoint_paths) {
        models.push_back(load_checkpoint(path));
        const ModelConfig& mcfg = models.back().second;
        if (mcfg.window != seg.window_size) {
            throw UsageError("evaluate_dataset: checkpoint '" + path + "' was trained with window " +
                             std::to_string(mcfg.window) + " but segmentation uses " +
                             std::to_string(seg.window_size));
        }
    }

    EvalResult result;
    result.votes.resize(rows.size());
    std::exception_ptr first_error;
    std::mutex error_mutex;
    parallel_for(rows.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                const auto& row = rows[i];
                const auto& [params, mcfg] = models[test_fold.at(row.subject_id)];
                auto data = load_dataset({row}, seg);
                auto preds = predict_patches(data[0].patches, params, mcfg, 1);
                std::size_t pd = 0;
                for (const auto& p : preds) {
                    if (p.cls == 1) ++pd;
                }
                SequenceVote v;
                v.subject_id = row.subject_id;
                v.label = row.label;
                v.n_patches = preds.size();
                v.pd_fraction =
                    preds.empty() ? 0.0
                                  : static_cast<double>(pd) / static_cast<double>(preds.size());
                result.votes[i] = std::move(v);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    });
    if (first_error) std::rethrow_exception(first_error);

    result.confusion = confusion_at(result.votes, alpha);
    return result;
}

}  // namespace lstmcnn
