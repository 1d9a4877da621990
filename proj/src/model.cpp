#include "lstmcnn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lstmcnn {

// ============================================================================
// Configuration
// ============================================================================

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ShapeError(std::string("model config: ") + name + " must be positive");
    };
    positive(input_dim, "input_dim");
    positive(window, "window");
    positive(lstm_hidden, "lstm_hidden");
    positive(conv1_filters, "conv1_filters");
    positive(conv2_filters, "conv2_filters");
    positive(kernel, "kernel");
    positive(conv_stride, "conv_stride");
    positive(pool_kernel, "pool_kernel");
    positive(pool_stride, "pool_stride");
    if (num_classes < 2) throw ShapeError("model config: num_classes must be >= 2");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ShapeError("model config: dropout_p must lie in [0, 1)");
    }
    // Each stage needs at least one full window of its input.
    if (window < kernel) throw ShapeError("model config: window shorter than conv kernel");
    if (conv1_out_len() < pool_kernel) {
        throw ShapeError("model config: conv1 output shorter than pool kernel");
    }
    if (pool1_out_len() < kernel) {
        throw ShapeError("model config: pool1 output shorter than conv kernel");
    }
    if (conv2_out_len() < pool_kernel) {
        throw ShapeError("model config: conv2 output shorter than pool kernel");
    }
}

// ============================================================================
// Parameters
// ============================================================================

std::vector<TensorRef> tensor_table(ModelParams& p) {
    std::vector<TensorRef> t;
    t.push_back({"lstm.W", {p.lstm.W.rows(), p.lstm.W.cols()}, p.lstm.W.data(), p.lstm.W.size()});
    t.push_back({"lstm.U", {p.lstm.U.rows(), p.lstm.U.cols()}, p.lstm.U.data(), p.lstm.U.size()});
    t.push_back({"lstm.b", {p.lstm.b.size()}, p.lstm.b.data(), p.lstm.b.size()});
    t.push_back({"conv1.kernels",
                 {p.conv1.out_ch, p.conv1.in_ch, p.conv1.k},
                 p.conv1.kernels.data(),
                 p.conv1.kernels.size()});
    t.push_back({"conv1.bias", {p.conv1.bias.size()}, p.conv1.bias.data(), p.conv1.bias.size()});
    t.push_back({"conv2.kernels",
                 {p.conv2.out_ch, p.conv2.in_ch, p.conv2.k},
                 p.conv2.kernels.data(),
                 p.conv2.kernels.size()});
    t.push_back({"conv2.bias", {p.conv2.bias.size()}, p.conv2.bias.data(), p.conv2.bias.size()});
    t.push_back(
        {"dense.W", {p.dense.W.rows(), p.dense.W.cols()}, p.dense.W.data(), p.dense.W.size()});
    t.push_back({"dense.b", {p.dense.b.size()}, p.dense.b.data(), p.dense.b.size()});
    return t;
}

ModelParams make_params_shell(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    const std::size_t h = cfg.lstm_hidden, d = cfg.input_dim;
    p.lstm.W = Matrix(4 * h, d);
    p.lstm.U = Matrix(4 * h, h);
    p.lstm.b.assign(4 * h, 0.0);
    p.conv1.out_ch = cfg.conv1_filters;
    p.conv1.in_ch = cfg.concat_dim();
    p.conv1.k = cfg.kernel;
    p.conv1.kernels.assign(p.conv1.out_ch * p.conv1.in_ch * p.conv1.k, 0.0);
    p.conv1.bias.assign(p.conv1.out_ch, 0.0);
    p.conv2.out_ch = cfg.conv2_filters;
    p.conv2.in_ch = cfg.conv1_filters;
    p.conv2.k = cfg.kernel;
    p.conv2.kernels.assign(p.conv2.out_ch * p.conv2.in_ch * p.conv2.k, 0.0);
    p.conv2.bias.assign(p.conv2.out_ch, 0.0);
    p.dense.W = Matrix(cfg.num_classes, cfg.flattened_dim());
    p.dense.b.assign(cfg.num_classes, 0.0);
    return p;
}

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
    ModelParams p = make_params_shell(cfg);
    const std::size_t h = cfg.lstm_hidden;

    auto fill_uniform = [&rng](double* data, std::size_t n, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
    };

    fill_uniform(p.lstm.W.data(), p.lstm.W.size(), cfg.input_dim);
    fill_uniform(p.lstm.U.data(), p.lstm.U.size(), h);
    // forget-gate bias starts at 1 so early training does not flush the cell state
    std::fill(p.lstm.b.begin() + h, p.lstm.b.begin() + 2 * h, 1.0);
    fill_uniform(p.conv1.kernels.data(), p.conv1.kernels.size(), p.conv1.in_ch * p.conv1.k);
    fill_uniform(p.conv2.kernels.data(), p.conv2.kernels.size(), p.conv2.in_ch * p.conv2.k);
    fill_uniform(p.dense.W.data(), p.dense.W.size(), cfg.flattened_dim());
    return p;
}

// ============================================================================
// Layers
// ============================================================================

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix lstm_forward(const Matrix& x, const LstmParams& p, LstmCache* cache) {
    const std::size_t w = x.rows();
    const std::size_t d = x.cols();
    const std::size_t h4 = p.W.rows();
    const std::size_t h = h4 / 4;
    if (p.W.cols() != d) {
        throw ShapeError("lstm_forward: input width " + std::to_string(d) +
                         " does not match weight columns " + std::to_string(p.W.cols()));
    }
    if (p.U.rows() != h4 || p.U.cols() != h || p.b.size() != h4 || h4 % 4 != 0) {
        throw ShapeError("lstm_forward: inconsistent LSTM parameter shapes");
    }

    Matrix gates(w, h4);
    Matrix c(w, h);
    Matrix tanh_c(w, h);
    Matrix hs(w, h);
    std::vector<double> z(h4);

    for (std::size_t t = 0; t < w; ++t) {
        const double* xr = x.row(t);
        for (std::size_t r = 0; r < h4; ++r) z[r] = p.b[r] + dot(p.W.row(r), xr, d);
        if (t > 0) matvec_add(p.U, hs.row(t - 1), z.data());

        const double* cprev = t > 0 ? c.row(t - 1) : nullptr;
        double* gr = gates.row(t);
        for (std::size_t j = 0; j < h; ++j) {
            const double gi = sigmoid(z[j]);
            const double gf = sigmoid(z[h + j]);
            const double gg = std::tanh(z[2 * h + j]);
            const double go = sigmoid(z[3 * h + j]);
            const double cj = (cprev ? gf * cprev[j] : 0.0) + gi * gg;
            const double tc = std::tanh(cj);
            gr[j] = gi;
            gr[h + j] = gf;
            gr[2 * h + j] = gg;
            gr[3 * h + j] = go;
            c(t, j) = cj;
            tanh_c(t, j) = tc;
            hs(t, j) = go * tc;
        }
    }

    if (cache) {
        cache->x = x;
        cache->gates = std::move(gates);
        cache->c = std::move(c);
        cache->tanh_c = std::move(tanh_c);
        cache->h = hs;
    }
    return hs;
}

Matrix concat_skip(const Matrix& x, const Matrix& hseq) {
    if (x.rows() != hseq.rows()) {
        throw ShapeError("concat_skip: time lengths differ (" + std::to_string(x.rows()) + " vs " +
                         std::to_string(hseq.rows()) + ")");
    }
    Matrix out(x.rows(), x.cols() + hseq.cols());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        double* o = out.row(t);
        std::memcpy(o, x.row(t), x.cols() * sizeof(double));
        std::memcpy(o + x.cols(), hseq.row(t), hseq.cols() * sizeof(double));
    }
    return out;
}

Matrix conv1d_forward(const Matrix& x, const ConvParams& p, std::size_t stride, ConvCache* cache) {
    const std::size_t L = x.rows();
    if (x.cols() != p.in_ch) {
        throw ShapeError("conv1d_forward: input has " + std::to_string(x.cols()) +
                         " channels, kernels expect " + std::to_string(p.in_ch));
    }
    if (L < p.k) {
        throw ShapeError("conv1d_forward: input length " + std::to_string(L) +
                         " shorter than kernel " + std::to_string(p.k));
    }
    const std::size_t out_len = (L - p.k) / stride + 1;

    // kernels repacked to [c][j][o] so the accumulation runs contiguously
    // over output channels
    Matrix packed(p.in_ch * p.k, p.out_ch);
    for (std::size_t o = 0; o < p.out_ch; ++o)
        for (std::size_t c = 0; c < p.in_ch; ++c)
            for (std::size_t j = 0; j < p.k; ++j) packed(c * p.k + j, o) = p.at(o, c, j);

    Matrix post(out_len, p.out_ch);
    std::vector<double> acc(p.out_ch);
    for (std::size_t t = 0; t < out_len; ++t) {
        const std::size_t base = t * stride;
        std::memcpy(acc.data(), p.bias.data(), p.out_ch * sizeof(double));
        for (std::size_t c = 0; c < p.in_ch; ++c)
            for (std::size_t j = 0; j < p.k; ++j)
                axpy(acc.data(), x(base + j, c), packed.row(c * p.k + j), p.out_ch);
        for (std::size_t o = 0; o < p.out_ch; ++o) post(t, o) = acc[o] > 0.0 ? acc[o] : 0.0;
    }
    if (cache) {
        cache->input = x;
        cache->post = post;
    }
    return post;
}

Matrix maxpool1d_forward(const Matrix& x, std::size_t kernel, std::size_t stride,
                         PoolCache* cache) {
    const std::size_t L = x.rows();
    const std::size_t C = x.cols();
    if (L < kernel) {
        throw ShapeError("maxpool1d_forward: input length " + std::to_string(L) +
                         " shorter than pool kernel " + std::to_string(kernel));
    }
    const std::size_t out_len = (L - kernel) / stride + 1;
    Matrix out(out_len, C);
    std::vector<std::size_t> argmax(out_len * C);
    for (std::size_t t = 0; t < out_len; ++t) {
        const std::size_t base = t * stride;
        for (std::size_t c = 0; c < C; ++c) {
            double best = x(base, c);
            std::size_t best_row = base;
            for (std::size_t j = 1; j < kernel; ++j) {
                if (x(base + j, c) > best) {
                    best = x(base + j, c);
                    best_row = base + j;
                }
            }
            out(t, c) = best;
            argmax[t * C + c] = best_row;
        }
    }
    if (cache) {
        cache->argmax = std::move(argmax);
        cache->in_len = L;
    }
    return out;
}

// ============================================================================
// Forward
// ============================================================================

std::vector<double> model_forward(const Patch& patch, const ModelParams& p, const ModelConfig& cfg,
                                  bool training, Rng& rng, ForwardCache* cache) {
    cfg.validate();
    const Matrix& x = patch.values;
    if (x.rows() != cfg.window || x.cols() != cfg.input_dim) {
        throw ShapeError("model_forward: patch is " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + ", config expects " +
                         std::to_string(cfg.window) + "x" + std::to_string(cfg.input_dim));
    }

    if (cache) {
        cache->valid = false;
        cache->training = training;
    }

    Matrix conv_in;
    if (cfg.use_concat) {
        Matrix hseq = lstm_forward(x, p.lstm, cache ? &cache->lstm : nullptr);
        conv_in = concat_skip(x, hseq);
    } else {
        // ablation path: the conv block sees the raw input only
        conv_in = x;
    }

    Matrix c1 = conv1d_forward(conv_in, p.conv1, cfg.conv_stride, cache ? &cache->conv1 : nullptr);
    Matrix p1 = maxpool1d_forward(c1, cfg.pool_kernel, cfg.pool_stride,
                                  cache ? &cache->pool1 : nullptr);
    Matrix c2 = conv1d_forward(p1, p.conv2, cfg.conv_stride, cache ? &cache->conv2 : nullptr);
    Matrix p2 = maxpool1d_forward(c2, cfg.pool_kernel, cfg.pool_stride,
                                  cache ? &cache->pool2 : nullptr);

    const std::size_t flat_dim = cfg.flattened_dim();
    std::vector<double> flat(flat_dim);
    for (std::size_t t = 0; t < p2.rows(); ++t)
        for (std::size_t ch = 0; ch < p2.cols(); ++ch) flat[t * p2.cols() + ch] = p2(t, ch);

    std::vector<double> dropout_mask;
    std::vector<double> flat_dropped;
    if (training && cfg.dropout_p > 0.0) {
        const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
        dropout_mask.resize(flat_dim);
        flat_dropped.resize(flat_dim);
        for (std::size_t i = 0; i < flat_dim; ++i) {
            dropout_mask[i] = rng.next_double() >= cfg.dropout_p ? keep_scale : 0.0;
            flat_dropped[i] = flat[i] * dropout_mask[i];
        }
    } else {
        flat_dropped = flat;
    }

    // dense + softmax (max-shifted for stability)
    std::vector<double> logits(cfg.num_classes);
    for (std::size_t r = 0; r < cfg.num_classes; ++r) {
        logits[r] = p.dense.b[r] + dot(p.dense.W.row(r), flat_dropped.data(), flat_dim);
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    std::vector<double> probs(cfg.num_classes);
    for (std::size_t r = 0; r < cfg.num_classes; ++r) {
        probs[r] = std::exp(logits[r] - zmax);
        sum += probs[r];
    }
    for (double& v : probs) v /= sum;

    if (cache) {
        cache->conv_input = std::move(conv_in);
        cache->flat = std::move(flat);
        cache->dropout_mask = std::move(dropout_mask);
        cache->flat_dropped = std::move(flat_dropped);
        cache->probs = probs;
        cache->valid = true;
    }
    return probs;
}

// ============================================================================
// Backward
// ============================================================================

namespace {

// dL/d(conv input) plus kernel/bias gradients, given dL/d(pre-activation).
void conv1d_backward(const Matrix& input, const Matrix& dpre, const ConvParams& p,
                     std::size_t stride, ConvParams& dp, Matrix& dinput) {
    for (std::size_t t = 0; t < dpre.rows(); ++t) {
        const std::size_t base = t * stride;
        for (std::size_t o = 0; o < p.out_ch; ++o) {
            const double g = dpre(t, o);
            if (g == 0.0) continue;
            dp.bias[o] += g;
            const double* ko = &p.kernels[o * p.in_ch * p.k];
            double* dko = &dp.kernels[o * p.in_ch * p.k];
            for (std::size_t c = 0; c < p.in_ch; ++c) {
                const double* kc = ko + c * p.k;
                double* dkc = dko + c * p.k;
                for (std::size_t j = 0; j < p.k; ++j) {
                    dkc[j] += g * input(base + j, c);
                    dinput(base + j, c) += g * kc[j];
                }
            }
        }
    }
}

// Routes pooled gradients back to the argmax rows.
Matrix maxpool1d_backward(const Matrix& dout, const PoolCache& cache, std::size_t channels) {
    Matrix dinput(cache.in_len, channels);
    for (std::size_t t = 0; t < dout.rows(); ++t)
        for (std::size_t c = 0; c < channels; ++c)
            dinput(cache.argmax[t * channels + c], c) += dout(t, c);
    return dinput;
}

// Full backpropagation through time. dh_seq is dL/dh for every timestep
// (each hidden state feeds the concatenation, so all steps receive
// downstream gradient); parameter gradients accumulate into dp.
void lstm_backward(const LstmCache& cache, const LstmParams& p, const Matrix& dh_seq,
                   LstmParams& dp) {
    const std::size_t w = cache.x.rows();
    const std::size_t d = cache.x.cols();
    const std::size_t h = cache.h.cols();
    const std::size_t h4 = 4 * h;

    std::vector<double> dh(h), dc(h, 0.0), dz(h4);
    for (std::size_t t = w; t-- > 0;) {
        const double* gr = cache.gates.row(t);
        const double* tc = cache.tanh_c.row(t);
        const double* cprev = t > 0 ? cache.c.row(t - 1) : nullptr;

        if (t == w - 1) {
            std::memcpy(dh.data(), dh_seq.row(t), h * sizeof(double));
        } else {
            const double* ext = dh_seq.row(t);
            for (std::size_t j = 0; j < h; ++j) dh[j] += ext[j];
        }

        for (std::size_t j = 0; j < h; ++j) {
            const double gi = gr[j], gf = gr[h + j], gg = gr[2 * h + j], go = gr[3 * h + j];
            const double dcj = dc[j] + dh[j] * go * (1.0 - tc[j] * tc[j]);
            dz[j] = dcj * gg * gi * (1.0 - gi);                             // input gate
            dz[h + j] = cprev ? dcj * cprev[j] * gf * (1.0 - gf) : 0.0;     // forget gate
            dz[2 * h + j] = dcj * gi * (1.0 - gg * gg);                     // cell candidate
            dz[3 * h + j] = dh[j] * tc[j] * go * (1.0 - go);                // output gate
            dc[j] = dcj * gf;  // flows to c_{t-1}
        }

        const double* xr = cache.x.row(t);
        for (std::size_t r = 0; r < h4; ++r) {
            const double g = dz[r];
            dp.b[r] += g;
            axpy(dp.W.row(r), g, xr, d);
        }
        if (t > 0) {
            const double* hprev = cache.h.row(t - 1);
            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t r = 0; r < h4; ++r) {
                const double g = dz[r];
                axpy(dp.U.row(r), g, hprev, h);
                axpy(dh.data(), g, p.U.row(r), h);  // dh_{t-1} += U^T dz
            }
        }
    }
}

}  // namespace

void model_backward_into(const ForwardCache& fc, std::size_t target, const ModelParams& p,
                         const ModelConfig& cfg, ModelParams& grads, double loss_scale) {
    if (!fc.valid) throw UsageError("model_backward: cache is not from a completed forward pass");
    if (!fc.training) throw UsageError("model_backward: cache must come from a training-mode forward");
    if (target >= cfg.num_classes) {
        throw UsageError("model_backward: target class " + std::to_string(target) +
                         " out of range");
    }

    const std::size_t flat_dim = cfg.flattened_dim();

    // softmax + cross-entropy: dlogits = probs - onehot(target)
    std::vector<double> dlogits(fc.probs);
    dlogits[target] -= 1.0;
    if (loss_scale != 1.0) {
        for (double& v : dlogits) v *= loss_scale;
    }

    std::vector<double> dflat_dropped(flat_dim, 0.0);
    for (std::size_t r = 0; r < cfg.num_classes; ++r) {
        grads.dense.b[r] += dlogits[r];
        axpy(grads.dense.W.row(r), dlogits[r], fc.flat_dropped.data(), flat_dim);
        axpy(dflat_dropped.data(), dlogits[r], p.dense.W.row(r), flat_dim);
    }

    std::vector<double> dflat(flat_dim);
    if (!fc.dropout_mask.empty()) {
        for (std::size_t i = 0; i < flat_dim; ++i) dflat[i] = dflat_dropped[i] * fc.dropout_mask[i];
    } else {
        dflat = dflat_dropped;
    }

    // unflatten (t-major) to the pool2 grid
    const std::size_t p2_len = cfg.pool2_out_len();
    const std::size_t c2_ch = cfg.conv2_filters;
    Matrix dpool2(p2_len, c2_ch);
    for (std::size_t t = 0; t < p2_len; ++t)
        for (std::size_t c = 0; c < c2_ch; ++c) dpool2(t, c) = dflat[t * c2_ch + c];

    Matrix dconv2post = maxpool1d_backward(dpool2, fc.pool2, c2_ch);
    for (std::size_t t = 0; t < dconv2post.rows(); ++t)
        for (std::size_t c = 0; c < c2_ch; ++c)
            if (fc.conv2.post(t, c) <= 0.0) dconv2post(t, c) = 0.0;  // ReLU gate

    Matrix dpool1(fc.conv2.input.rows(), fc.conv2.input.cols());
    conv1d_backward(fc.conv2.input, dconv2post, p.conv2, cfg.conv_stride, grads.conv2, dpool1);

    Matrix dconv1post = maxpool1d_backward(dpool1, fc.pool1, cfg.conv1_filters);
    for (std::size_t t = 0; t < dconv1post.rows(); ++t)
        for (std::size_t c = 0; c < cfg.conv1_filters; ++c)
            if (fc.conv1.post(t, c) <= 0.0) dconv1post(t, c) = 0.0;

    Matrix dconv_in(fc.conv_input.rows(), fc.conv_input.cols());
    conv1d_backward(fc.conv_input, dconv1post, p.conv1, cfg.conv_stride, grads.conv1, dconv_in);

    if (cfg.use_concat) {
        // LSTM features occupy the columns after the raw input block
        Matrix dh_seq(cfg.window, cfg.lstm_hidden);
        for (std::size_t t = 0; t < cfg.window; ++t) {
            std::memcpy(dh_seq.row(t), dconv_in.row(t) + cfg.input_dim,
                        cfg.lstm_hidden * sizeof(double));
        }
        lstm_backward(fc.lstm, p.lstm, dh_seq, grads.lstm);
    }
    // with use_concat off the LSTM has no forward influence; its gradients stay zero
}

ModelParams model_backward(const ForwardCache& cache, std::size_t target, const ModelParams& p,
                           const ModelConfig& cfg) {
    ModelParams grads = make_params_shell(cfg);
    model_backward_into(cache, target, p, cfg, grads);
    return grads;
}

// ============================================================================
// Accounting
// ============================================================================

ParamCountReport count_params(const ModelConfig& cfg) {
    cfg.validate();
    const std::uint64_t h = cfg.lstm_hidden, d = cfg.input_dim;
    ParamCountReport r;
    r.layers.push_back({"lstm", 4 * (h * (d + h) + h)});
    r.layers.push_back(
        {"conv1", static_cast<std::uint64_t>(cfg.conv1_filters) * cfg.concat_dim() * cfg.kernel +
                      cfg.conv1_filters});
    r.layers.push_back(
        {"conv2", static_cast<std::uint64_t>(cfg.conv2_filters) * cfg.conv1_filters * cfg.kernel +
                      cfg.conv2_filters});
    r.layers.push_back(
        {"dense", static_cast<std::uint64_t>(cfg.num_classes) * cfg.flattened_dim() +
                      cfg.num_classes});
    for (const auto& l : r.layers) r.total += l.params;
    r.note =
        "The published total is not derivable from the stated architecture alone: the "
        "pooling geometry (here kernel 2, stride 2) and the output head (here two logits "
        "with softmax) are unspecified there, so the derived total differs by the "
        "parameters those choices imply.";
    return r;
}

FlopCountReport count_flops(const ModelConfig& cfg) {
    cfg.validate();
    const std::uint64_t h = cfg.lstm_hidden, d = cfg.input_dim;
    FlopCountReport r;
    r.lstm_macs_per_step = 4 * h * (d + h);
    r.layers.push_back({"lstm", static_cast<std::uint64_t>(cfg.window) * r.lstm_macs_per_step});
    r.layers.push_back({"conv1", static_cast<std::uint64_t>(cfg.conv1_out_len()) *
                                     cfg.conv1_filters * cfg.concat_dim() * cfg.kernel});
    r.layers.push_back({"conv2", static_cast<std::uint64_t>(cfg.conv2_out_len()) *
                                     cfg.conv2_filters * cfg.conv1_filters * cfg.kernel});
    r.layers.push_back({"dense", static_cast<std::uint64_t>(cfg.num_classes) *
                                     cfg.flattened_dim()});
    for (const auto& l : r.layers) r.total_macs += l.macs;
    r.total_flops = 2 * r.total_macs;
    r.convention =
        "multiply-accumulates only, 1 MAC = 2 FLOPs; activations, pooling comparisons and "
        "bias adds excluded";
    return r;
}

std::string format_count_report(const ParamCountReport& pc, const FlopCountReport& fc) {
    std::ostringstream os;
    char buf[128];
    os << "parameters (per layer):\n";
    for (const auto& l : pc.layers) {
        std::snprintf(buf, sizeof(buf), "  %-6s %10llu\n", l.layer.c_str(),
                      static_cast<unsigned long long>(l.params));
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  total  %10llu  (%.2fK; paper: %.2fK)\n",
                  static_cast<unsigned long long>(pc.total), pc.total / 1000.0,
                  pc.paper_params_k);
    os << buf;
    os << "  note: " << pc.note << "\n\n";

    os << "FLOPs per patch (" << fc.convention << "):\n";
    for (const auto& l : fc.layers) {
        std::snprintf(buf, sizeof(buf), "  %-6s %12llu MACs  %12llu FLOPs\n", l.layer.c_str(),
                      static_cast<unsigned long long>(l.macs),
                      static_cast<unsigned long long>(2 * l.macs));
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  total  %12llu MACs  %12llu FLOPs  (%.2fK; paper: %.2fK)\n",
                  static_cast<unsigned long long>(fc.total_macs),
                  static_cast<unsigned long long>(fc.total_flops), fc.total_flops / 1000.0,
                  fc.paper_flops_k);
    os << buf;
    std::snprintf(buf, sizeof(buf), "  lstm per timestep: %llu MACs (%llu FLOPs)\n",
                  static_cast<unsigned long long>(fc.lstm_macs_per_step),
                  static_cast<unsigned long long>(2 * fc.lstm_macs_per_step));
    os << buf;
    return os.str();
}

// ============================================================================
// Checkpoints
// ============================================================================

namespace {

constexpr char kMagic[4] = {'L', 'C', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw FormatError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return std::bit_cast<double>(v);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const ModelParams& p, const ModelConfig& cfg, const std::string& path) {
    cfg.validate();
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(cfg.input_dim));
    put_u32(out, static_cast<std::uint32_t>(cfg.window));
    put_u32(out, static_cast<std::uint32_t>(cfg.lstm_hidden));
    put_u32(out, static_cast<std::uint32_t>(cfg.conv1_filters));
    put_u32(out, static_cast<std::uint32_t>(cfg.conv2_filters));
    put_u32(out, static_cast<std::uint32_t>(cfg.kernel));
    put_u32(out, static_cast<std::uint32_t>(cfg.conv_stride));
    put_u32(out, static_cast<std::uint32_t>(cfg.pool_kernel));
    put_u32(out, static_cast<std::uint32_t>(cfg.pool_stride));
    put_u32(out, static_cast<std::uint32_t>(cfg.num_classes));
    put_f64(out, cfg.dropout_p);
    out.push_back(cfg.use_concat ? 1 : 0);

    auto table = tensor_table(const_cast<ModelParams&>(p));
    put_u32(out, static_cast<std::uint32_t>(table.size()));
    for (const auto& t : table) {
        out.push_back(static_cast<char>(t.name.size()));
        out.append(t.name);
        out.push_back(static_cast<char>(t.dims.size()));
        for (std::size_t d : t.dims) put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (const auto& t : table) {
        for (std::size_t i = 0; i < t.size; ++i) put_f64(out, t.data[i]);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for '" + path + "'");
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string buf = ss.str();
    ByteReader r{buf};

    if (r.bytes(4) != std::string(kMagic, 4)) {
        throw FormatError("checkpoint '" + path + "': bad magic");
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw FormatError("checkpoint '" + path + "': unsupported version " +
                          std::to_string(version));
    }

    ModelConfig cfg;
    cfg.input_dim = r.u32();
    cfg.window = r.u32();
    cfg.lstm_hidden = r.u32();
    cfg.conv1_filters = r.u32();
    cfg.conv2_filters = r.u32();
    cfg.kernel = r.u32();
    cfg.conv_stride = r.u32();
    cfg.pool_kernel = r.u32();
    cfg.pool_stride = r.u32();
    cfg.num_classes = r.u32();
    cfg.dropout_p = r.f64();
    cfg.use_concat = r.u8() != 0;
    try {
        cfg.validate();
    } catch (const ShapeError& e) {
        throw FormatError("checkpoint '" + path + "': invalid config: " + e.what());
    }

    ModelParams params = make_params_shell(cfg);
    auto expected = tensor_table(params);

    const std::uint32_t n_tensors = r.u32();
    if (n_tensors != expected.size()) {
        throw FormatError("checkpoint '" + path + "': tensor count " + std::to_string(n_tensors) +
                          " does not match expected " + std::to_string(expected.size()));
    }
    for (const auto& exp : expected) {
        const std::string name = r.bytes(r.u8());
        if (name != exp.name) {
            throw FormatError("checkpoint '" + path + "': tensor '" + name + "' where '" +
                              exp.name + "' was expected");
        }
        const std::uint8_t ndim = r.u8();
        if (ndim != exp.dims.size()) {
            throw FormatError("checkpoint '" + path + "': tensor '" + name + "' has rank " +
                              std::to_string(ndim) + ", expected " +
                              std::to_string(exp.dims.size()));
        }
        for (std::size_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = r.u32();
            if (dim != exp.dims[d]) {
                throw FormatError("checkpoint '" + path + "': tensor '" + name + "' dim " +
                                  std::to_string(d) + " is " + std::to_string(dim) +
                                  ", expected " + std::to_string(exp.dims[d]));
            }
        }
    }
    for (auto& exp : expected) {
        for (std::size_t i = 0; i < exp.size; ++i) exp.data[i] = r.f64();
    }
    if (r.pos != buf.size()) {
        throw FormatError("checkpoint '" + path + "': trailing bytes after tensor data");
    }
    return {std::move(params), cfg};
}

}  // namespace lstmcnn
