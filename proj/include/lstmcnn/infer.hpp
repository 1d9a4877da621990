#ifndef LSTMCNN_INFER_HPP
#define LSTMCNN_INFER_HPP

#include <string>
#include <vector>

#include "lstmcnn/metrics.hpp"
#include "lstmcnn/model.hpp"
#include "lstmcnn/signal.hpp"
#include "lstmcnn/train.hpp"

namespace lstmcnn {

// ============================================================================
// Patch-level prediction
// ============================================================================

struct PatchPrediction {
    std::size_t cls = 0;  // argmax class index (0 = HC, 1 = PD)
    std::vector<double> probs;
};

// Inference-mode forward over every patch; deterministic, parameters are
// shared read-only across worker threads.
std::vector<PatchPrediction> predict_patches(const std::vector<Patch>& patches,
                                             const ModelParams& params, const ModelConfig& cfg,
                                             std::size_t threads = 1);

// ============================================================================
// Majority voting
//
// The published scheme counts patches matching the true label; at inference
// time the true label is unknown, so the vote is stated over the fraction r
// of patches predicted PD: predicted = PD iff r >= alpha. For binary labels
// at alpha = 0.5 the two statements accept exactly the same sequences, and
// the predicted-fraction form is well defined in deployment.
// ============================================================================

struct VoteResult {
    std::string subject_id;
    std::size_t n_patches = 0;
    double pd_fraction = 0;  // r
    double threshold = 0.5;  // alpha
    Label predicted = Label::HC;
};

// r = (#PD)/N; ties (r == alpha) resolve to PD. Empty label lists raise
// DataError; alpha must lie in (0,1).
VoteResult majority_vote(const std::vector<Label>& labels, double alpha);

// ============================================================================
// Sequence diagnosis
// ============================================================================

struct StageTimings {
    double load = 0;        // file -> RawSequence
    double processing = 0;  // normalize, difference, segment
    double model = 0;       // patch prediction + vote
    double total = 0;
};

struct Diagnosis {
    VoteResult vote;
    StageTimings timings;
};

// load -> preprocess -> segment -> predict -> vote, with per-stage wall
// clock. Stage failures propagate with the stage name prefixed.
Diagnosis diagnose_sequence(const std::string& path, SequenceFormat format,
                            const ModelParams& params, const ModelConfig& mcfg,
                            const SegmentationConfig& seg, double alpha,
                            std::size_t threads = 1);

// One JSON record per sequence; timings in seconds at 6 decimal places.
std::string diagnosis_json(const Diagnosis& d);

// ============================================================================
// Cross-validated dataset evaluation
// ============================================================================

struct SequenceVote {
    std::string subject_id;
    Label label = Label::HC;  // ground truth
    std::size_t n_patches = 0;
    double pd_fraction = 0;
};

struct EvalResult {
    std::vector<SequenceVote> votes;  // one per manifest row
    ConfusionMatrix confusion;        // at the alpha passed to evaluate_dataset
};

// Re-thresholds recorded votes without re-running the model (alpha sweeps).
ConfusionMatrix confusion_at(const std::vector<SequenceVote>& votes, double alpha);

// Each subject is evaluated by the fold model whose test set contains it;
// counts accumulate at sequence level. A subject missing from every test
// fold, or a fold/checkpoint mismatch, raises ProtocolError.
EvalResult evaluate_dataset(const std::vector<ManifestRow>& rows,
                            const std::vector<std::string>& fold_checkpoint_paths,
                            const std::vector<FoldSplit>& splits, const SegmentationConfig& seg,
                            double alpha, std::size_t threads = 1);

}  // namespace lstmcnn

#endif
