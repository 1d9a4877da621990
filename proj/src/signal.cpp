#include "lstmcnn/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lstmcnn {

const char* label_name(Label l) { return l == Label::PD ? "PD" : "HC"; }

Label parse_label(const std::string& s) {
    if (s == "PD") return Label::PD;
    if (s == "HC") return Label::HC;
    throw DataError("unknown label '" + s + "' (expected PD or HC)");
}

const char* diff_mode_name(DiffMode m) {
    switch (m) {
        case DiffMode::Geometric: return "geometric";
        case DiffMode::None: return "none";
        case DiffMode::Azimuth: return "azimuth";
        case DiffMode::Altitude: return "altitude";
        case DiffMode::Pressure: return "pressure";
    }
    return "geometric";
}

DiffMode parse_diff_mode(const std::string& s) {
    if (s == "geometric") return DiffMode::Geometric;
    if (s == "none") return DiffMode::None;
    if (s == "azimuth") return DiffMode::Azimuth;
    if (s == "altitude") return DiffMode::Altitude;
    if (s == "pressure") return DiffMode::Pressure;
    throw UsageError("unknown diff mode '" + s +
                     "' (expected geometric|none|azimuth|altitude|pressure)");
}

SequenceFormat parse_sequence_format(const std::string& s) {
    if (s == "svc") return SequenceFormat::Svc;
    if (s == "dwt") return SequenceFormat::Dwt;
    throw UsageError("unknown sequence format '" + s + "' (expected svc or dwt)");
}

void RawSequence::validate() const {
    const std::size_t n = t.size();
    if (n < 2) throw DataError("sequence '" + subject_id + "' has fewer than 2 points");
    if (x.size() != n || y.size() != n || azimuth.size() != n || altitude.size() != n ||
        pressure.size() != n) {
        throw DataError("sequence '" + subject_id + "' has channels of unequal length");
    }
    if (!button.empty() && button.size() != n) {
        throw DataError("sequence '" + subject_id + "' has a button channel of unequal length");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (t[i] < t[i - 1]) {
            throw DataError("sequence '" + subject_id + "' has decreasing timestamps at index " +
                            std::to_string(i));
        }
    }
}

// ============================================================================
// Loading / writing
// ============================================================================

namespace {

double parse_real(const std::string& tok, const std::string& path, std::size_t lineno) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad numeric field '" + tok + "'");
    }
    if (pos != tok.size()) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad numeric field '" + tok + "'");
    }
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream in(line);
    std::string t;
    while (in >> t) toks.push_back(t);
    return toks;
}

RawSequence load_svc(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing point-count header");
    ++lineno;
    auto head = split_ws(line);
    if (head.size() != 1) throw ParseError(path + ":1: header must be a single integer count");
    long declared = 0;
    try {
        declared = std::stol(head[0]);
    } catch (const std::exception&) {
        throw ParseError(path + ":1: bad point count '" + head[0] + "'");
    }
    if (declared < 0) throw ParseError(path + ":1: negative point count");

    RawSequence seq;
    seq.subject_id = std::filesystem::path(path).stem().string();
    seq.task = "svc";
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = split_ws(line);
        if (toks.empty()) continue;  // trailing blank lines are tolerated
        if (toks.size() != 7) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 7 columns, got " +
                             std::to_string(toks.size()));
        }
        // Column order: y x timestamp button azimuth altitude pressure
        seq.y.push_back(parse_real(toks[0], path, lineno));
        seq.x.push_back(parse_real(toks[1], path, lineno));
        seq.t.push_back(parse_real(toks[2], path, lineno));
        seq.button.push_back(static_cast<int>(parse_real(toks[3], path, lineno)));
        seq.azimuth.push_back(parse_real(toks[4], path, lineno));
        seq.altitude.push_back(parse_real(toks[5], path, lineno));
        seq.pressure.push_back(parse_real(toks[6], path, lineno));
    }
    if (static_cast<long>(seq.t.size()) != declared) {
        throw ParseError(path + ": header declares " + std::to_string(declared) +
                         " points but file has " + std::to_string(seq.t.size()));
    }
    seq.validate();
    return seq;
}

RawSequence load_dwt(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing DWT1 header");
    auto head = split_ws(line);
    if (head.size() != 4 || head[0] != "DWT1") {
        throw ParseError(path + ":1: expected 'DWT1 <subject_id> <label> <task>'");
    }
    RawSequence seq;
    seq.subject_id = head[1];
    try {
        seq.label = parse_label(head[2]);
    } catch (const DataError& e) {
        throw ParseError(path + ":1: " + e.what());
    }
    seq.task = head[3];

    if (!std::getline(in, line)) throw ParseError(path + ":2: missing column header");
    if (split_ws(line) != std::vector<std::string>{"t", "x", "y", "azimuth", "altitude", "pressure"}) {
        throw ParseError(path + ":2: column header must be 't x y azimuth altitude pressure'");
    }

    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 6) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 6 columns, got " +
                             std::to_string(toks.size()));
        }
        seq.t.push_back(parse_real(toks[0], path, lineno));
        seq.x.push_back(parse_real(toks[1], path, lineno));
        seq.y.push_back(parse_real(toks[2], path, lineno));
        seq.azimuth.push_back(parse_real(toks[3], path, lineno));
        seq.altitude.push_back(parse_real(toks[4], path, lineno));
        seq.pressure.push_back(parse_real(toks[5], path, lineno));
    }
    seq.validate();
    return seq;
}

}  // namespace

RawSequence load_sequence(const std::string& path, SequenceFormat format) {
    return format == SequenceFormat::Svc ? load_svc(path) : load_dwt(path);
}

void write_sequence_dwt(const RawSequence& seq, const std::string& path) {
    seq.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "DWT1 " << seq.subject_id << ' ' << label_name(seq.label) << ' ' << seq.task << '\n';
    out << "t x y azimuth altitude pressure\n";
    char buf[512];
    for (std::size_t i = 0; i < seq.length(); ++i) {
        // %.17g keeps doubles round-trip exact
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g\n", seq.t[i],
                      seq.x[i], seq.y[i], seq.azimuth[i], seq.altitude[i], seq.pressure[i]);
        out << buf;
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty manifest");
    // tolerate a trailing CR from CRLF files
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "subject_id,label,task,path") {
        throw ParseError(path + ":1: manifest header must be 'subject_id,label,task,path'");
    }
    const auto base = std::filesystem::path(path).parent_path();
    std::vector<ManifestRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 4 fields, got " +
                             std::to_string(fields.size()));
        }
        ManifestRow row;
        row.subject_id = fields[0];
        try {
            row.label = parse_label(fields[1]);
        } catch (const DataError& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        row.task = fields[2];
        std::filesystem::path p(fields[3]);
        row.path = p.is_absolute() ? p.string() : (base / p).string();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open manifest '" + path + "' for writing");
    out << "subject_id,label,task,path\n";
    for (const auto& r : rows) {
        out << r.subject_id << ',' << label_name(r.label) << ',' << r.task << ',' << r.path << '\n';
    }
    if (!out) throw DataError("write failed for manifest '" + path + "'");
}

// ============================================================================
// Preprocessing
// ============================================================================

namespace {

void normalize_channel(std::vector<double>& c, const std::string& id, const char* name) {
    double lo = c[0], hi = c[0];
    for (double v : c) {
        if (!std::isfinite(v)) {
            throw DataError("sequence '" + id + "': non-finite value in channel " + name);
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    if (range < 1e-12) {
        // degenerate range: [0,1] rescale is undefined, map to zeros
        std::fill(c.begin(), c.end(), 0.0);
        return;
    }
    for (double& v : c) v = (v - lo) / range;
}

void diff_in_place(std::vector<double>& c) {
    const std::size_t n = c.size();
    for (std::size_t i = 0; i + 1 < n; ++i) c[i] = c[i + 1] - c[i];
    c[n - 1] = 0.0;  // trailing zero pad keeps the length uniform
}

}  // namespace

RawSequence min_max_normalize(const RawSequence& seq) {
    seq.validate();
    RawSequence out = seq;
    normalize_channel(out.x, out.subject_id, "x");
    normalize_channel(out.y, out.subject_id, "y");
    normalize_channel(out.azimuth, out.subject_id, "azimuth");
    normalize_channel(out.altitude, out.subject_id, "altitude");
    normalize_channel(out.pressure, out.subject_id, "pressure");
    return out;
}

ChannelSet forward_difference(const RawSequence& seq, DiffMode mode) {
    seq.validate();
    std::array<std::vector<double>, kNumFeatures> chans = {seq.x, seq.y, seq.azimuth,
                                                           seq.altitude, seq.pressure};
    switch (mode) {
        case DiffMode::Geometric:
            diff_in_place(chans[0]);
            diff_in_place(chans[1]);
            break;
        case DiffMode::None:
            break;
        case DiffMode::Azimuth:
            diff_in_place(chans[2]);
            break;
        case DiffMode::Altitude:
            diff_in_place(chans[3]);
            break;
        case DiffMode::Pressure:
            diff_in_place(chans[4]);
            break;
    }
    ChannelSet out;
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    out.features = Matrix(seq.length(), kNumFeatures);
    for (std::size_t i = 0; i < seq.length(); ++i)
        for (std::size_t f = 0; f < kNumFeatures; ++f) out.features(i, f) = chans[f][i];
    return out;
}

std::vector<Patch> segment(const ChannelSet& ch, const SegmentationConfig& cfg) {
    if (cfg.window_size < 2) throw UsageError("segment: window size must be >= 2");
    if (cfg.stride_size < 1) throw UsageError("segment: stride size must be >= 1");
    const std::size_t L = ch.length();
    if (L < 2) throw DataError("segment: sequence '" + ch.subject_id + "' has fewer than 2 points");

    const std::size_t w = cfg.window_size;
    const std::size_t s = cfg.stride_size;
    std::vector<Patch> patches;

    if (L < w) {
        // short sequence: keep the subject, pad the single patch on the right
        Patch p;
        p.values = Matrix(w, kNumFeatures);
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t f = 0; f < kNumFeatures; ++f) p.values(i, f) = ch.features(i, f);
        p.parent_subject = ch.subject_id;
        p.parent_label = ch.label;
        patches.push_back(std::move(p));
        return patches;
    }

    for (std::size_t off = 0; off + w <= L; off += s) {
        Patch p;
        p.values = Matrix(w, kNumFeatures);
        for (std::size_t i = 0; i < w; ++i)
            for (std::size_t f = 0; f < kNumFeatures; ++f)
                p.values(i, f) = ch.features(off + i, f);
        p.parent_subject = ch.subject_id;
        p.parent_label = ch.label;
        patches.push_back(std::move(p));
    }
    return patches;
}

std::vector<Patch> preprocess_sequence(const RawSequence& seq, const SegmentationConfig& cfg) {
    return segment(forward_difference(min_max_normalize(seq), cfg.diff_mode), cfg);
}

}  // namespace lstmcnn
