#ifndef LSTMCNN_SIGNAL_HPP
#define LSTMCNN_SIGNAL_HPP

#include <array>
#include <string>
#include <vector>

#include "lstmcnn/numkit.hpp"

namespace lstmcnn {

// ============================================================================
// Domain types
// ============================================================================

enum class Label { HC = 0, PD = 1 };

const char* label_name(Label l);
Label parse_label(const std::string& s);  // "PD" or "HC"; DataError otherwise

// One subject's multi-channel pen recording. All channel vectors share one
// length L >= 2; timestamps are nondecreasing.
struct RawSequence {
    std::string subject_id;
    Label label = Label::HC;
    std::string task;
    std::vector<double> t;          // seconds
    std::vector<double> x, y;       // mm
    std::vector<double> azimuth;    // rad
    std::vector<double> altitude;   // rad
    std::vector<double> pressure;   // device units
    std::vector<int> button;        // 0/1; empty when the source has no button channel

    std::size_t length() const { return t.size(); }
    void validate() const;  // length/timestamp invariants; throws DataError
};

// Model-input feature order. Timestamp and button status are dropped.
inline constexpr std::size_t kNumFeatures = 5;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "x", "y", "azimuth", "altitude", "pressure"};

// The five aligned feature sequences after normalization and differencing,
// stored as an L x 5 block in kFeatureNames order.
struct ChannelSet {
    std::string subject_id;
    Label label = Label::HC;
    Matrix features;  // L x 5

    std::size_t length() const { return features.rows(); }
};

// Fixed-length windowed slice of a ChannelSet; the model's input unit.
// Carries subject identity so fold assignment and voting never lose track
// of which recording a patch came from.
struct Patch {
    Matrix values;  // w x 5
    std::string parent_subject;
    Label parent_label = Label::HC;
};

// Which channels receive the forward difference. Geometric (x and y) is the
// operating point; the single-channel modes and None exist for the
// input-feature ablation.
enum class DiffMode { Geometric, None, Azimuth, Altitude, Pressure };

const char* diff_mode_name(DiffMode m);
DiffMode parse_diff_mode(const std::string& s);

struct SegmentationConfig {
    std::size_t window_size = 128;  // w >= 2
    std::size_t stride_size = 64;   // s >= 1
    DiffMode diff_mode = DiffMode::Geometric;
};

// ============================================================================
// File formats
// ============================================================================

enum class SequenceFormat { Svc, Dwt };

SequenceFormat parse_sequence_format(const std::string& s);  // "svc" | "dwt"

// svc: first line = integer point count N, then N lines
//   "y x timestamp button azimuth altitude pressure".
// Subject id / label / task are not part of the svc payload; svc loads get
// them from the manifest row (see read_manifest) or carry defaults.
// dwt (native): line 1 "DWT1 <subject_id> <label:PD|HC> <task>",
// line 2 "t x y azimuth altitude pressure", then one record per line.
RawSequence load_sequence(const std::string& path, SequenceFormat format);

// Writes the native dwt format with round-trip-exact reals.
void write_sequence_dwt(const RawSequence& seq, const std::string& path);

// Dataset manifest: CSV with header "subject_id,label,task,path".
// Relative paths resolve against the manifest's directory.
struct ManifestRow {
    std::string subject_id;
    Label label = Label::HC;
    std::string task;
    std::string path;  // resolved
};

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestRow>& rows, const std::string& path);

// ============================================================================
// Preprocessing chain (order: normalize -> difference -> segment)
// ============================================================================

// Rescales each of the five model channels independently to [0,1] over this
// sequence. A constant channel (max - min < 1e-12) maps to all zeros.
// Non-finite input values raise DataError.
RawSequence min_max_normalize(const RawSequence& seq);

// out[i] = c[i+1] - c[i] for the selected channels, with a trailing zero so
// every feature keeps length L; unselected channels pass through.
ChannelSet forward_difference(const RawSequence& seq, DiffMode mode);

// Patches start at offsets 0, s, 2s, ... while offset + w <= L. A sequence
// shorter than the window yields a single patch zero-padded on the right.
std::vector<Patch> segment(const ChannelSet& ch, const SegmentationConfig& cfg);

// normalize -> difference -> segment
std::vector<Patch> preprocess_sequence(const RawSequence& seq, const SegmentationConfig& cfg);

}  // namespace lstmcnn

#endif
