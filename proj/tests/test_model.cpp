#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "lstmcnn/model.hpp"
#include "oracles.hpp"

using namespace lstmcnn;
namespace fs = std::filesystem;

namespace {

// small but full architecture: 12 -> 10 -> 5 -> 3 -> 1, flattened 3
ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.window = 12;
    cfg.lstm_hidden = 4;
    cfg.conv1_filters = 2;
    cfg.conv2_filters = 3;
    cfg.kernel = 3;
    cfg.conv_stride = 1;
    cfg.pool_kernel = 2;
    cfg.pool_stride = 2;
    cfg.dropout_p = 0.0;
    return cfg;
}

Patch random_patch(const ModelConfig& cfg, std::uint64_t seed) {
    Patch p;
    p.values = Matrix(cfg.window, cfg.input_dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values.data()[i] = rng.uniform(-1, 1);
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("lstmcnn_model_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("init: same seed gives bit-identical parameters") {
    ModelConfig cfg;
    Rng r1(5), r2(5);
    ModelParams a = init_params(cfg, r1);
    ModelParams b = init_params(cfg, r2);
    auto ta = tensor_table(a), tb = tensor_table(b);
    for (std::size_t i = 0; i < ta.size(); ++i)
        for (std::size_t j = 0; j < ta[i].size; ++j) CHECK(ta[i].data[j] == tb[i].data[j]);
}

TEST_CASE("init: default LSTM holds 68608 weights") {
    ModelConfig cfg;
    Rng rng(1);
    ModelParams p = init_params(cfg, rng);
    CHECK(p.lstm.W.size() + p.lstm.U.size() + p.lstm.b.size() == 68608);
    // 4(h(d+h)+h) with d=5, h=128
    CHECK(4 * (128 * (5 + 128) + 128) == 68608);
}

TEST_CASE("init: biases zero except the forget-gate slice") {
    ModelConfig cfg;
    cfg.lstm_hidden = 16;
    Rng rng(2);
    ModelParams p = init_params(cfg, rng);
    const std::size_t h = cfg.lstm_hidden;
    for (std::size_t i = 0; i < 4 * h; ++i) {
        const bool forget = i >= h && i < 2 * h;
        CHECK(p.lstm.b[i] == (forget ? 1.0 : 0.0));
    }
    for (double v : p.conv1.bias) CHECK(v == 0.0);
    for (double v : p.conv2.bias) CHECK(v == 0.0);
    for (double v : p.dense.b) CHECK(v == 0.0);
}

TEST_CASE("init: weights bounded by 1/sqrt(fan_in)") {
    ModelConfig cfg;
    Rng rng(3);
    ModelParams p = init_params(cfg, rng);
    const double wb = 1.0 / std::sqrt(5.0);
    for (std::size_t i = 0; i < p.lstm.W.size(); ++i) {
        CHECK(std::abs(p.lstm.W.data()[i]) <= wb);
    }
    const double ub = 1.0 / std::sqrt(128.0);
    for (std::size_t i = 0; i < p.lstm.U.size(); ++i) {
        CHECK(std::abs(p.lstm.U.data()[i]) <= ub);
    }
}

TEST_CASE("lstm: zero weights and input give zero hidden states") {
    ModelConfig cfg = tiny_config();
    ModelParams p = make_params_shell(cfg);
    Matrix x(cfg.window, cfg.input_dim);
    Matrix h = lstm_forward(x, p.lstm);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(h.data()[i] == 0.0);
}

TEST_CASE("lstm: single-step scalar cell matches the hand recursion") {
    // w=1, d=1, h=1, U irrelevant (h0 = 0), b = 0
    LstmParams p;
    p.W = Matrix(4, 1);
    const double wi = 0.3, wf = -0.8, wg = 1.1, wo = 0.5;
    p.W(0, 0) = wi;
    p.W(1, 0) = wf;
    p.W(2, 0) = wg;
    p.W(3, 0) = wo;
    p.U = Matrix(4, 1);
    p.b.assign(4, 0.0);
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    Matrix h = lstm_forward(x, p);
    auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double expected = sigmoid(wo) * std::tanh(sigmoid(wi) * std::tanh(wg));
    CHECK(h(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("lstm: output shape is w x h") {
    ModelConfig cfg = tiny_config();
    Rng rng(4);
    ModelParams p = init_params(cfg, rng);
    Patch patch = random_patch(cfg, 9);
    Matrix h = lstm_forward(patch.values, p.lstm);
    CHECK(h.rows() == cfg.window);
    CHECK(h.cols() == cfg.lstm_hidden);
}

TEST_CASE("concat: default widths give 133 features") {
    Matrix x(128, 5), h(128, 128);
    Matrix out = concat_skip(x, h);
    CHECK(out.cols() == 133);
    CHECK(out.rows() == 128);
}

TEST_CASE("concat: input block first, LSTM block second") {
    Matrix x(3, 2);
    x(0, 0) = 1;
    x(2, 1) = 7;
    Matrix h(3, 4);  // all zero
    Matrix out = concat_skip(x, h);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(2, 1) == 7.0);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t j = 2; j < 6; ++j) CHECK(out(t, j) == 0.0);
}

TEST_CASE("concat: length mismatch raises a shape error") {
    Matrix x(4, 5), h(5, 8);
    CHECK_THROWS_AS(concat_skip(x, h), ShapeError);
}

TEST_CASE("concat disabled: only conv1 input width changes") {
    ModelConfig on;
    ModelConfig off;
    off.use_concat = false;
    ModelParams a = make_params_shell(on);
    ModelParams b = make_params_shell(off);
    CHECK(a.conv1.in_ch == 133);
    CHECK(b.conv1.in_ch == 5);
    CHECK(a.conv2.in_ch == b.conv2.in_ch);
    CHECK(a.conv2.out_ch == b.conv2.out_ch);
    CHECK(a.dense.W.size() == b.dense.W.size());
}

TEST_CASE("conv: default geometry maps 128 to 63") {
    ModelConfig cfg;
    CHECK(cfg.conv1_out_len() == 63);
}

TEST_CASE("conv: delta kernel reproduces the input interior") {
    ConvParams p;
    p.out_ch = 1;
    p.in_ch = 1;
    p.k = 3;
    p.kernels = {0.0, 1.0, 0.0};
    p.bias = {0.0};
    Matrix x(6, 1);
    for (int i = 0; i < 6; ++i) x(i, 0) = i + 1;  // positive, ReLU transparent
    Matrix out = conv1d_forward(x, p, 1);
    REQUIRE(out.rows() == 4);
    for (int i = 0; i < 4; ++i) CHECK(out(i, 0) == x(i + 1, 0));
}

TEST_CASE("conv: random case matches the nested-loop oracle") {
    Rng rng(15);
    ConvParams p;
    p.out_ch = 4;
    p.in_ch = 6;
    p.k = 3;
    p.kernels = rng.uniform_vec(-1, 1, p.out_ch * p.in_ch * p.k);
    p.bias = rng.uniform_vec(-1, 1, p.out_ch);
    Matrix x(20, 6);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    for (std::size_t stride : {1ul, 2ul, 3ul}) {
        Matrix got = conv1d_forward(x, p, stride);
        Matrix want = oracles::conv1d(x, p.kernels, p.bias, p.out_ch, p.in_ch, p.k, stride);
        REQUIRE(got.rows() == want.rows());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv: input shorter than kernel raises a shape error") {
    ConvParams p;
    p.out_ch = 1;
    p.in_ch = 1;
    p.k = 3;
    p.kernels = {1, 1, 1};
    p.bias = {0};
    Matrix x(2, 1);
    CHECK_THROWS_AS(conv1d_forward(x, p, 1), ShapeError);
}

TEST_CASE("pool: [1,3,2,5] with k=2 s=2 gives [3,5]") {
    Matrix x(4, 1);
    x(0, 0) = 1;
    x(1, 0) = 3;
    x(2, 0) = 2;
    x(3, 0) = 5;
    Matrix out = maxpool1d_forward(x, 2, 2);
    REQUIRE(out.rows() == 2);
    CHECK(out(0, 0) == 3);
    CHECK(out(1, 0) == 5);
}

TEST_CASE("pool: random case matches the nested-loop oracle") {
    Rng rng(16);
    Matrix x(25, 7);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-5, 5);
    for (std::size_t k : {2ul, 3ul}) {
        for (std::size_t s : {1ul, 2ul, 3ul}) {
            Matrix got = maxpool1d_forward(x, k, s);
            Matrix want = oracles::maxpool1d(x, k, s);
            REQUIRE(got.rows() == want.rows());
            for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == want.data()[i]);
        }
    }
}

TEST_CASE("pool: constant input stays constant") {
    Matrix x(10, 2, 3.5);
    Matrix out = maxpool1d_forward(x, 2, 2);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 3.5);
}

TEST_CASE("shape algebra: default chain 128 -> 63 -> 31 -> 15 -> 7, flattened 224") {
    ModelConfig cfg;
    CHECK(cfg.conv1_out_len() == 63);
    CHECK(cfg.pool1_out_len() == 31);
    CHECK(cfg.conv2_out_len() == 15);
    CHECK(cfg.pool2_out_len() == 7);
    CHECK(cfg.flattened_dim() == 224);
}

TEST_CASE("forward: inference is deterministic and normalized") {
    ModelConfig cfg = tiny_config();
    cfg.dropout_p = 0.5;  // must not fire outside training
    Rng rng(6);
    ModelParams p = init_params(cfg, rng);
    Patch patch = random_patch(cfg, 77);
    Rng r1(100), r2(200);  // different streams: inference must not consume them
    auto a = model_forward(patch, p, cfg, false, r1);
    auto b = model_forward(patch, p, cfg, false, r2);
    CHECK(a == b);
    CHECK(a[0] + a[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a[0] >= 0.0);
    CHECK(a[1] >= 0.0);
}

TEST_CASE("forward: probabilities normalized for random params") {
    ModelConfig cfg = tiny_config();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        ModelParams p = init_params(cfg, rng);
        Patch patch = random_patch(cfg, seed + 1000);
        Rng dummy(0);
        auto probs = model_forward(patch, p, cfg, false, dummy);
        CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : probs) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("forward: dropout_p = 0 in training equals inference exactly") {
    ModelConfig cfg = tiny_config();
    cfg.dropout_p = 0.0;
    Rng rng(8);
    ModelParams p = init_params(cfg, rng);
    Patch patch = random_patch(cfg, 30);
    Rng train_rng(1), infer_rng(2);
    auto train_out = model_forward(patch, p, cfg, true, train_rng);
    auto infer_out = model_forward(patch, p, cfg, false, infer_rng);
    CHECK(train_out == infer_out);
}

TEST_CASE("forward: wrong patch width is a shape error") {
    ModelConfig cfg = tiny_config();
    Rng rng(9);
    ModelParams p = init_params(cfg, rng);
    Patch patch;
    patch.values = Matrix(cfg.window + 1, cfg.input_dim);
    Rng dummy(0);
    CHECK_THROWS_AS(model_forward(patch, p, cfg, false, dummy), ShapeError);
}

TEST_CASE("backward: analytic gradients match central finite differences") {
    ModelConfig cfg = tiny_config();
    auto res = gradcheck::run(cfg, 42);
    CHECK(res.n_params > 0);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("backward: gradcheck passes with active dropout") {
    ModelConfig cfg = tiny_config();
    cfg.dropout_p = 0.5;
    auto res = gradcheck::run(cfg, 7);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("backward: gradcheck passes with concatenation disabled") {
    ModelConfig cfg = tiny_config();
    cfg.use_concat = false;
    auto res = gradcheck::run(cfg, 11);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("backward: dense bias gradient is predicted minus onehot") {
    ModelConfig cfg = tiny_config();
    Rng rng(10);
    ModelParams p = init_params(cfg, rng);
    Patch patch;
    patch.values = Matrix(cfg.window, cfg.input_dim);  // zero input
    Rng dummy(0);
    ForwardCache cache;
    auto probs = model_forward(patch, p, cfg, true, dummy, &cache);
    ModelParams g = model_backward(cache, 1, p, cfg);
    CHECK(g.dense.b[0] == doctest::Approx(probs[0]).epsilon(1e-15));
    CHECK(g.dense.b[1] == doctest::Approx(probs[1] - 1.0).epsilon(1e-15));
}

TEST_CASE("backward: masked dropout units contribute zero dense gradient") {
    ModelConfig cfg = tiny_config();
    cfg.dropout_p = 0.5;
    Rng rng(12);
    ModelParams p = init_params(cfg, rng);
    Patch patch = random_patch(cfg, 55);
    Rng dropout_rng(77);
    ForwardCache cache;
    model_forward(patch, p, cfg, true, dropout_rng, &cache);
    REQUIRE(!cache.dropout_mask.empty());
    bool saw_masked = false;
    ModelParams g = model_backward(cache, 0, p, cfg);
    for (std::size_t i = 0; i < cache.dropout_mask.size(); ++i) {
        if (cache.dropout_mask[i] == 0.0) {
            saw_masked = true;
            for (std::size_t r = 0; r < cfg.num_classes; ++r) CHECK(g.dense.W(r, i) == 0.0);
        }
    }
    CHECK(saw_masked);
}

TEST_CASE("backward: stale cache is a usage error") {
    ModelConfig cfg = tiny_config();
    Rng rng(13);
    ModelParams p = init_params(cfg, rng);
    ForwardCache cache;  // never filled
    CHECK_THROWS_AS(model_backward(cache, 0, p, cfg), UsageError);
}

TEST_CASE("backward: inference cache is rejected") {
    ModelConfig cfg = tiny_config();
    Rng rng(14);
    ModelParams p = init_params(cfg, rng);
    Patch patch = random_patch(cfg, 60);
    Rng dummy(0);
    ForwardCache cache;
    model_forward(patch, p, cfg, false, dummy, &cache);
    CHECK_THROWS_AS(model_backward(cache, 0, p, cfg), UsageError);
}

TEST_CASE("count_params: closed forms for the default configuration") {
    ModelConfig cfg;
    auto report = count_params(cfg);
    REQUIRE(report.layers.size() == 4);
    CHECK(report.layers[0].params == 68608);  // lstm
    CHECK(report.layers[1].params == 6400);   // conv1, in = 133
    CHECK(report.layers[2].params == 1568);   // conv2
    CHECK(report.layers[3].params == 450);    // dense, 2 x 224 + 2
    CHECK(report.total == 68608 + 6400 + 1568 + 450);
}

TEST_CASE("count_params: total equals live parameter storage") {
    ModelConfig cfg;
    Rng rng(17);
    ModelParams p = init_params(cfg, rng);
    std::size_t stored = 0;
    for (const auto& t : tensor_table(p)) stored += t.size;
    CHECK(count_params(cfg).total == stored);
}

TEST_CASE("count_flops: conv MACs follow L' * out * in * k") {
    ModelConfig cfg;
    auto report = count_flops(cfg);
    REQUIRE(report.layers.size() == 4);
    CHECK(report.layers[1].macs == 63ull * 16 * 133 * 3);
    CHECK(report.layers[2].macs == 15ull * 32 * 16 * 3);
    CHECK(report.lstm_macs_per_step == 4ull * 128 * (5 + 128));
    CHECK(report.layers[0].macs == 128 * report.lstm_macs_per_step);
    CHECK(report.total_flops == 2 * report.total_macs);
}

TEST_CASE("count_flops: doubling the window roughly doubles lstm and conv1") {
    ModelConfig small;
    ModelConfig big;
    big.window = 256;
    auto a = count_flops(small);
    auto b = count_flops(big);
    const double lstm_ratio = static_cast<double>(b.layers[0].macs) / a.layers[0].macs;
    const double conv1_ratio = static_cast<double>(b.layers[1].macs) / a.layers[1].macs;
    CHECK(lstm_ratio == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(conv1_ratio > 1.8);
    CHECK(conv1_ratio < 2.2);
}

TEST_CASE("count report prints the published figures beside the derived ones") {
    ModelConfig cfg;
    std::string report = format_count_report(count_params(cfg), count_flops(cfg));
    CHECK(report.find("83.89") != std::string::npos);
    CHECK(report.find("590.21") != std::string::npos);
    CHECK(report.find("68608") != std::string::npos);
}

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
    TempDir dir;
    ModelConfig cfg = tiny_config();
    Rng rng(18);
    ModelParams p = init_params(cfg, rng);
    const std::string p1 = dir.file("a.lcnn");
    const std::string p2 = dir.file("b.lcnn");
    save_checkpoint(p, cfg, p1);
    auto [loaded, loaded_cfg] = load_checkpoint(p1);
    save_checkpoint(loaded, loaded_cfg, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint: loaded config matches the saved one") {
    TempDir dir;
    ModelConfig cfg = tiny_config();
    cfg.dropout_p = 0.25;
    cfg.use_concat = false;
    Rng rng(19);
    ModelParams p = init_params(cfg, rng);
    save_checkpoint(p, cfg, dir.file("c.lcnn"));
    auto [_, lc] = load_checkpoint(dir.file("c.lcnn"));
    CHECK(lc.window == cfg.window);
    CHECK(lc.lstm_hidden == cfg.lstm_hidden);
    CHECK(lc.dropout_p == cfg.dropout_p);
    CHECK(lc.use_concat == cfg.use_concat);
}

TEST_CASE("checkpoint: truncation is a format error, no partial model") {
    TempDir dir;
    ModelConfig cfg = tiny_config();
    Rng rng(20);
    ModelParams p = init_params(cfg, rng);
    const std::string path = dir.file("t.lcnn");
    save_checkpoint(p, cfg, path);
    std::string bytes = slurp(path);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}

TEST_CASE("checkpoint: bad magic and trailing garbage rejected") {
    TempDir dir;
    ModelConfig cfg = tiny_config();
    Rng rng(21);
    ModelParams p = init_params(cfg, rng);
    const std::string path = dir.file("m.lcnn");
    save_checkpoint(p, cfg, path);
    std::string bytes = slurp(path);

    std::string corrupted = bytes;
    corrupted[0] = 'X';
    const std::string bad_magic = dir.file("bad_magic.lcnn");
    std::ofstream(bad_magic, std::ios::binary) << corrupted;
    CHECK_THROWS_AS(load_checkpoint(bad_magic), FormatError);

    const std::string trailing = dir.file("trailing.lcnn");
    std::ofstream(trailing, std::ios::binary) << bytes << "junk";
    CHECK_THROWS_AS(load_checkpoint(trailing), FormatError);
}

TEST_CASE("checkpoint: serialized scalar count equals count_params total") {
    TempDir dir;
    ModelConfig cfg = tiny_config();
    Rng rng(22);
    ModelParams p = init_params(cfg, rng);
    const std::string path = dir.file("n.lcnn");
    save_checkpoint(p, cfg, path);

    // header size computed independently from the format definition
    std::size_t header = 4 + 2 + 10 * 4 + 8 + 1 + 4;
    for (const auto& t : tensor_table(p)) header += 1 + t.name.size() + 1 + 4 * t.dims.size();
    const std::size_t file_size = fs::file_size(path);
    REQUIRE((file_size - header) % 8 == 0);
    CHECK((file_size - header) / 8 == count_params(cfg).total);
}

TEST_CASE("config validation: degenerate geometries are rejected") {
    ModelConfig cfg;
    cfg.window = 2;  // shorter than the kernel
    CHECK_THROWS_AS(cfg.validate(), ShapeError);
    ModelConfig bad_dropout;
    bad_dropout.dropout_p = 1.0;
    CHECK_THROWS_AS(bad_dropout.validate(), ShapeError);
}
