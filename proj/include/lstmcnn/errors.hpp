#ifndef LSTMCNN_ERRORS_HPP
#define LSTMCNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lstmcnn {

// Tensor/layer dimension mismatches. Messages name the offending shapes.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files. Messages carry the file and line number.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Semantically invalid data (non-finite values, empty inputs, bad distributions).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint format violations (bad magic, version, shape table, truncation).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Cross-validation protocol violations (misaligned folds/checkpoints, orphan subjects).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameters or API misuse (bad ranges, missing caches).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lstmcnn

#endif
