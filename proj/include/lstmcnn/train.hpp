#ifndef LSTMCNN_TRAIN_HPP
#define LSTMCNN_TRAIN_HPP

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lstmcnn/metrics.hpp"
#include "lstmcnn/model.hpp"
#include "lstmcnn/signal.hpp"

namespace lstmcnn {

// ============================================================================
// Configuration
// ============================================================================

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    enum class Optimizer { Adam, Sgd };
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    // Optional per-class patch weighting for imbalanced synthetic runs;
    // off by default (the evaluation protocol applies no correction).
    bool class_weighting = false;
    // Fold-level parallelism. Folds are independent with child RNG streams,
    // so results do not depend on this value.
    std::size_t threads = 1;

    void validate() const;
};

// ============================================================================
// Loss and optimizer
// ============================================================================

// -log p(target), clamped at p >= 1e-12. Throws DataError when probs is not
// a distribution (values outside [0,1] or sum away from 1).
double cross_entropy(const std::vector<double>& probs, std::size_t target);

// First/second moment buffers for the adaptive optimizer, laid out parallel
// to tensor_table order. SGD keeps only the step counter.
struct OptimizerState {
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// Applies one update: bias-corrected adaptive moments, or plain
// p -= lr * g for the SGD setting.
void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const TrainConfig& cfg);

// ============================================================================
// Subject-level folds
// ============================================================================

struct FoldSplit {
    std::size_t fold_index = 0;
    std::set<std::string> train_subjects;
    std::set<std::string> test_subjects;
};

// Deterministic, stratified, subject-disjoint assignment: per class the
// subjects are shuffled by the seed and dealt round-robin, so every fold's
// test set preserves the PD/HC ratio within one subject. A class with fewer
// subjects than folds raises DataError naming the class.
std::vector<FoldSplit> make_subject_folds(
    const std::vector<std::pair<std::string, Label>>& subjects, std::size_t folds,
    std::uint64_t seed);
std::vector<FoldSplit> make_subject_folds(const std::vector<ManifestRow>& rows, std::size_t folds,
                                          std::uint64_t seed);

std::string fold_splits_json(const std::vector<FoldSplit>& splits);
std::vector<FoldSplit> parse_fold_splits(const std::string& json_text);

// ============================================================================
// Dataset assembly
// ============================================================================

// All patches of one sequence, tagged with its identity.
struct SequencePatches {
    std::string subject_id;
    Label label = Label::HC;
    std::string task;
    std::vector<Patch> patches;
};

// Loads every manifest row (format detected from the file extension),
// stamps manifest identity onto the sequence, and runs the preprocessing
// chain.
std::vector<SequencePatches> load_dataset(const std::vector<ManifestRow>& rows,
                                          const SegmentationConfig& seg);

// ============================================================================
// Training
// ============================================================================

struct FoldResult {
    std::size_t fold_index = 0;
    ModelParams params;
    ModelConfig mcfg;
    std::vector<double> epoch_mean_loss;
    ConfusionMatrix confusion;                // sequence-level, test subjects only
    std::set<std::string> gradient_subjects;  // every subject that touched a gradient step
    double wall_sec = 0;
};

// Trains on the split's train subjects only and evaluates with majority
// voting on the test subjects. Deterministic given the seed; the fold's RNG
// stream is derived from tcfg.seed and the fold index.
FoldResult train_fold(const std::vector<SequencePatches>& data, const FoldSplit& split,
                      const ModelConfig& mcfg, const TrainConfig& tcfg, double vote_alpha);

struct FoldReportEntry {
    std::size_t fold_index = 0;
    std::vector<std::string> test_subjects;
    std::vector<double> epoch_mean_loss;
    ConfusionMatrix confusion;
    std::vector<std::string> gradient_subjects;
    double wall_sec = 0;
};

struct TrainReport {
    ModelConfig mcfg;
    SegmentationConfig seg;
    TrainConfig tcfg;
    double vote_alpha = 0.5;
    std::vector<FoldReportEntry> folds;
    ConfusionMatrix pooled;  // across all folds; every subject counted exactly once
    double wall_sec = 0;
};

// Deterministic JSON rendering (stable field order). Wall-clock fields are
// the one nondeterministic part of a report; include_timing=false omits
// them so byte-level comparisons of reruns are meaningful.
std::string train_report_json(const TrainReport& report, bool include_timing = true);

double mean_fold_accuracy(const TrainReport& report);

struct CrossValResult {
    TrainReport report;
    std::vector<FoldResult> folds;
    std::vector<FoldSplit> splits;
};

// Full protocol: make folds, train each (optionally in parallel), assemble
// the report with pooled sequence-level confusion counts.
CrossValResult run_cross_validation(const std::vector<SequencePatches>& data,
                                    const ModelConfig& mcfg, const TrainConfig& tcfg,
                                    const SegmentationConfig& seg, double vote_alpha);

}  // namespace lstmcnn

#endif
