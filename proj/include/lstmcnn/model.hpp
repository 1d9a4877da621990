#ifndef LSTMCNN_MODEL_HPP
#define LSTMCNN_MODEL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lstmcnn/numkit.hpp"
#include "lstmcnn/signal.hpp"

namespace lstmcnn {

// ============================================================================
// Configuration
// ============================================================================

struct ModelConfig {
    std::size_t input_dim = 5;
    std::size_t window = 128;
    std::size_t lstm_hidden = 128;
    std::size_t conv1_filters = 16;
    std::size_t conv2_filters = 32;
    std::size_t kernel = 3;
    std::size_t conv_stride = 2;
    std::size_t pool_kernel = 2;
    std::size_t pool_stride = 2;
    double dropout_p = 0.5;
    std::size_t num_classes = 2;  // class 0 = HC, class 1 = PD
    bool use_concat = true;       // skip connection feeding raw input into the conv block

    // Derived layer geometry. With defaults the time axis runs
    // 128 -> 63 -> 31 -> 15 -> 7 and the flattened width is 224.
    std::size_t concat_dim() const { return use_concat ? input_dim + lstm_hidden : input_dim; }
    std::size_t conv1_out_len() const { return (window - kernel) / conv_stride + 1; }
    std::size_t pool1_out_len() const { return (conv1_out_len() - pool_kernel) / pool_stride + 1; }
    std::size_t conv2_out_len() const { return (pool1_out_len() - kernel) / conv_stride + 1; }
    std::size_t pool2_out_len() const { return (conv2_out_len() - pool_kernel) / pool_stride + 1; }
    std::size_t flattened_dim() const { return conv2_filters * pool2_out_len(); }

    // Throws ShapeError when any derived length collapses below 1 or a
    // field is out of range (e.g. dropout_p outside [0,1)).
    void validate() const;
};

// ============================================================================
// Parameters
// ============================================================================

// Gate order is fixed as (input i, forget f, cell g, output o); the four
// h-sized slices of W, U and b follow that order. Checkpoints rely on it.
struct LstmParams {
    Matrix W;               // 4h x d, input weights
    Matrix U;               // 4h x h, recurrent weights
    std::vector<double> b;  // 4h
};

struct ConvParams {
    std::size_t out_ch = 0;
    std::size_t in_ch = 0;
    std::size_t k = 0;
    std::vector<double> kernels;  // [out][in][k]
    std::vector<double> bias;     // out

    double& at(std::size_t o, std::size_t c, std::size_t j) {
        return kernels[(o * in_ch + c) * k + j];
    }
    double at(std::size_t o, std::size_t c, std::size_t j) const {
        return kernels[(o * in_ch + c) * k + j];
    }
};

struct DenseParams {
    Matrix W;               // num_classes x flattened_dim
    std::vector<double> b;  // num_classes
};

struct ModelParams {
    LstmParams lstm;
    ConvParams conv1;
    ConvParams conv2;
    DenseParams dense;
};

// Uniform view over every trainable tensor in declaration order. Drives
// initialization, the optimizer, checkpoints and the parameter counter, so
// they can never disagree about what a "parameter" is.
struct TensorRef {
    std::string name;
    std::vector<std::size_t> dims;
    double* data;
    std::size_t size;
};

std::vector<TensorRef> tensor_table(ModelParams& p);

// Zero-filled parameters with the shapes implied by cfg.
ModelParams make_params_shell(const ModelConfig& cfg);

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor; biases
// zero except the LSTM forget-gate slice, which starts at 1.0.
ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// ============================================================================
// Layers
// ============================================================================

struct LstmCache {
    Matrix x;       // w x d
    Matrix gates;   // w x 4h, post-activation (i,f,g,o)
    Matrix c;       // w x h
    Matrix tanh_c;  // w x h
    Matrix h;       // w x h
};

// Standard LSTM recursion with h0 = c0 = 0, emitting the hidden state at
// every timestep. Returns w x h.
Matrix lstm_forward(const Matrix& x, const LstmParams& p, LstmCache* cache = nullptr);

// Feature-wise concatenation, input features first, then LSTM features.
Matrix concat_skip(const Matrix& x, const Matrix& hseq);

struct ConvCache {
    Matrix input;  // L x in_ch
    Matrix post;   // L' x out_ch, after ReLU
};

// Valid (no padding) cross-correlation followed by ReLU.
// Output length is floor((L - k) / stride) + 1.
Matrix conv1d_forward(const Matrix& x, const ConvParams& p, std::size_t stride,
                      ConvCache* cache = nullptr);

struct PoolCache {
    std::vector<std::size_t> argmax;  // input row index per (t, channel), t-major
    std::size_t in_len = 0;
};

// Per-channel window max. Output length is floor((L - k) / stride) + 1.
Matrix maxpool1d_forward(const Matrix& x, std::size_t kernel, std::size_t stride,
                         PoolCache* cache = nullptr);

// ============================================================================
// End-to-end forward / backward
// ============================================================================

struct ForwardCache {
    bool valid = false;
    bool training = false;
    LstmCache lstm;
    ConvCache conv1, conv2;
    PoolCache pool1, pool2;
    Matrix conv_input;                 // w x concat_dim
    std::vector<double> flat;          // flattened pool2 output, t-major
    std::vector<double> dropout_mask;  // scale per element; empty when not applied
    std::vector<double> flat_dropped;  // dense input
    std::vector<double> probs;
};

// Class probabilities over {HC, PD}, summing to 1. Dropout applies to the
// flattened features before the dense layer, only in training mode, with
// inverted scaling by 1/(1-p); inference consumes no randomness.
std::vector<double> model_forward(const Patch& patch, const ModelParams& p,
                                  const ModelConfig& cfg, bool training, Rng& rng,
                                  ForwardCache* cache = nullptr);

// Exact cross-entropy gradients for every parameter, accumulated (+=) into
// `grads` (shapes must match make_params_shell(cfg)). Full BPTT through all
// w steps, routed through the pooling argmaxes and the dropout mask.
// loss_scale multiplies the loss (per-class weighting, batch averaging).
void model_backward_into(const ForwardCache& cache, std::size_t target, const ModelParams& p,
                         const ModelConfig& cfg, ModelParams& grads, double loss_scale = 1.0);

// Convenience wrapper returning freshly allocated gradients.
ModelParams model_backward(const ForwardCache& cache, std::size_t target, const ModelParams& p,
                           const ModelConfig& cfg);

// ============================================================================
// Accounting
// ============================================================================

struct LayerParamCount {
    std::string layer;
    std::uint64_t params;
};

struct ParamCountReport {
    std::vector<LayerParamCount> layers;
    std::uint64_t total = 0;
    double paper_params_k = 83.89;  // published headline figure for this architecture
    std::string note;
};

ParamCountReport count_params(const ModelConfig& cfg);

struct LayerFlopCount {
    std::string layer;
    std::uint64_t macs;  // per patch
};

struct FlopCountReport {
    std::vector<LayerFlopCount> layers;
    std::uint64_t total_macs = 0;
    std::uint64_t total_flops = 0;  // MAC = 2 FLOPs
    std::uint64_t lstm_macs_per_step = 0;
    std::string convention;
    double paper_flops_k = 590.21;
};

FlopCountReport count_flops(const ModelConfig& cfg);

// Human-readable report with the published figures printed beside the
// derived ones.
std::string format_count_report(const ParamCountReport& pc, const FlopCountReport& fc);

// ============================================================================
// Checkpoints
//
// Binary layout (all integers little-endian):
//   magic "LCNN" | u16 version=1 | config block | u32 tensor count |
//   per tensor: u8 name_len, name, u8 ndim, u32 dims[] |
//   raw little-endian f64 tensor data in declaration order.
// Loading validates magic, version and the full shape table before
// accepting any data; a truncated or trailing-garbage file never yields a
// partial model.
// ============================================================================

void save_checkpoint(const ModelParams& p, const ModelConfig& cfg, const std::string& path);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace lstmcnn

#endif
