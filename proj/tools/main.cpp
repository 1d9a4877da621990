// Command-line surface for the handwriting diagnosis pipeline:
//   synth  — generate a synthetic spiral dataset
//   train  — subject-level cross-validated training, checkpoints + report
//   eval   — cross-validated metrics, alpha/window sweep CSVs
//   infer  — per-sequence diagnosis records with stage timings
//   count  — parameter / FLOP accounting

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lstmcnn/infer.hpp"
#include "lstmcnn/metrics.hpp"
#include "lstmcnn/model.hpp"
#include "lstmcnn/signal.hpp"
#include "lstmcnn/synth.hpp"
#include "lstmcnn/train.hpp"

namespace fs = std::filesystem;
using namespace lstmcnn;

namespace {

struct SweepRange {
    double lo = 0, hi = 0, step = 0;
    bool set = false;
};

SweepRange parse_sweep_range(const std::string& s) {
    SweepRange r;
    if (s.empty()) return r;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &r.lo, &r.hi, &r.step) != 3 || r.step <= 0 ||
        r.hi < r.lo) {
        throw UsageError("bad sweep range '" + s + "', expected lo:hi:step with step > 0");
    }
    r.set = true;
    return r;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoul(tok)));
        } catch (const std::exception&) {
            throw UsageError("bad window list entry '" + tok + "'");
        }
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw DataError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string csv_metric(const MetricValue& m) {
    if (!m.defined()) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", m.get());
    return buf;
}

void print_metric_table(const ConfusionMatrix& cm, const std::string& heading) {
    std::cout << heading << "\n";
    std::cout << "  confusion  tp=" << cm.tp << " tn=" << cm.tn << " fp=" << cm.fp
              << " fn=" << cm.fn << "\n";
    std::cout << "  accuracy   " << format_percent(accuracy(cm)) << "\n";
    std::cout << "  recall     " << format_percent(recall(cm)) << "\n";
    std::cout << "  f1         " << format_percent(f1(cm)) << "\n";
    std::cout << "  mcc        " << format_mcc(mcc(cm)) << "\n";
}

// shared flag bundles -------------------------------------------------------

struct SegFlags {
    std::size_t window = 128;
    std::size_t stride = 64;
    std::string diff_mode = "geometric";

    SegmentationConfig to_config() const {
        SegmentationConfig seg;
        seg.window_size = window;
        seg.stride_size = stride;
        seg.diff_mode = parse_diff_mode(diff_mode);
        return seg;
    }
    void attach(CLI::App* cmd) {
        cmd->add_option("--window", window, "Patch window size w");
        cmd->add_option("--stride", stride, "Segmentation stride s");
        cmd->add_option("--diff-mode", diff_mode,
                        "Forward-difference target: geometric|none|azimuth|altitude|pressure");
    }
};

struct ModelFlags {
    double dropout = 0.5;
    bool no_concat = false;

    ModelConfig to_config(std::size_t window) const {
        ModelConfig m;
        m.window = window;
        m.dropout_p = dropout;
        m.use_concat = !no_concat;
        return m;
    }
    void attach(CLI::App* cmd) {
        cmd->add_option("--dropout", dropout, "Dropout probability before the dense layer");
        cmd->add_flag("--no-concat", no_concat, "Disable the input/LSTM concatenation (ablation)");
    }
};

struct TrainFlags {
    std::size_t epochs = 50;
    std::size_t batch = 32;
    double lr = 1e-3;
    std::string optimizer = "adam";
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    bool class_weighting = false;
    std::size_t threads = 1;

    TrainConfig to_config() const {
        TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch;
        t.learning_rate = lr;
        if (optimizer == "adam") {
            t.optimizer = TrainConfig::Optimizer::Adam;
        } else if (optimizer == "sgd") {
            t.optimizer = TrainConfig::Optimizer::Sgd;
        } else {
            throw UsageError("unknown optimizer '" + optimizer + "' (expected adam or sgd)");
        }
        t.seed = seed;
        t.folds = folds;
        t.class_weighting = class_weighting;
        t.threads = threads;
        return t;
    }
    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "Training epochs per fold");
        cmd->add_option("--batch", batch, "Minibatch size");
        cmd->add_option("--lr", lr, "Learning rate");
        cmd->add_option("--optimizer", optimizer, "adam|sgd");
        cmd->add_option("--seed", seed, "Master RNG seed");
        cmd->add_option("--folds", folds, "Cross-validation folds");
        cmd->add_flag("--class-weighting", class_weighting, "Weight patch losses by class frequency");
        cmd->add_option("--threads", threads, "Folds trained in parallel (results are unaffected)");
    }
};

void run_train_into(const std::string& manifest, const std::string& out_dir, const SegFlags& segf,
                    const ModelFlags& modelf, const TrainFlags& trainf, double alpha) {
    auto rows = read_manifest(manifest);
    const SegmentationConfig seg = segf.to_config();
    const ModelConfig mcfg = modelf.to_config(seg.window_size);
    const TrainConfig tcfg = trainf.to_config();

    std::cerr << "loading " << rows.size() << " sequences...\n";
    auto data = load_dataset(rows, seg);
    auto cv = run_cross_validation(data, mcfg, tcfg, seg, alpha);

    fs::create_directories(out_dir);
    for (const auto& fold : cv.folds) {
        const std::string path =
            (fs::path(out_dir) / ("fold" + std::to_string(fold.fold_index) + ".lcnn")).string();
        save_checkpoint(fold.params, fold.mcfg, path);
    }
    write_text((fs::path(out_dir) / "folds.json").string(), fold_splits_json(cv.splits));
    write_text((fs::path(out_dir) / "train_report.json").string(),
               train_report_json(cv.report, true));

    for (const auto& f : cv.report.folds) {
        std::cout << "fold " << f.fold_index << ": accuracy "
                  << format_percent(accuracy(f.confusion)) << "  (" << f.wall_sec << " s)\n";
    }
    print_metric_table(cv.report.pooled, "pooled (all folds)");
    std::printf("mean fold accuracy: %.3f\n", mean_fold_accuracy(cv.report));
    std::cout << "artifacts written to " << out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM-CNN dynamic handwriting diagnosis pipeline"};
    app.set_config("--config", "", "Read options from a config file; flags override file values");
    app.require_subcommand(1);

    // ---- synth -------------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic spiral dataset");
    std::string synth_out;
    SynthConfig synth_cfg;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth_cfg.seed, "RNG seed");
    synth_cmd->add_option("--subjects", synth_cfg.subjects_per_class, "Subjects per class");
    synth_cmd->add_option("--duration", synth_cfg.duration_sec, "Recording length in seconds");
    synth_cmd->add_option("--rate", synth_cfg.sample_rate_hz, "Sample rate in Hz");
    synth_cmd->add_option("--tremor-pd", synth_cfg.tremor_amp_pd_mm, "PD tremor amplitude (mm)");
    synth_cmd->add_option("--tremor-hc", synth_cfg.tremor_amp_hc_mm, "HC tremor amplitude (mm)");
    synth_cmd->add_option("--noise", synth_cfg.noise_sd_mm, "Coordinate jitter sd (mm)");
    synth_cmd->add_option("--pitch", synth_cfg.spiral_pitch_mm, "Spiral pitch (mm per turn)");
    synth_cmd->add_option("--turns", synth_cfg.spiral_turns, "Spiral turns per recording");
    synth_cmd->callback([&] {
        auto rows = generate_dataset(synth_cfg, synth_out);
        std::cout << "wrote " << rows.size() << " sequences and manifest.csv to " << synth_out
                  << "\n";
    });

    // ---- train ---------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Cross-validated training");
    std::string train_data, train_out;
    SegFlags train_seg;
    ModelFlags train_model;
    TrainFlags train_train;
    double train_alpha = 0.5;
    train_cmd->add_option("--data", train_data, "Dataset manifest CSV")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();
    train_seg.attach(train_cmd);
    train_model.attach(train_cmd);
    train_train.attach(train_cmd);
    train_cmd->add_option("--alpha", train_alpha, "Majority-vote threshold");
    train_cmd->callback([&] {
        run_train_into(train_data, train_out, train_seg, train_model, train_train, train_alpha);
    });

    // ---- eval ----------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand(
        "eval", "Cross-validated evaluation from a train output directory; optional sweeps");
    std::string eval_data, eval_ckpt_dir, eval_out;
    SegFlags eval_seg;
    ModelFlags eval_model;
    TrainFlags eval_train;
    double eval_alpha = 0.5;
    std::string alpha_sweep_arg, window_sweep_arg;
    std::size_t eval_threads = 1;
    eval_cmd->add_option("--data", eval_data, "Dataset manifest CSV")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt_dir,
                         "Directory holding fold{k}.lcnn and folds.json (from train)");
    eval_cmd->add_option("--out", eval_out, "Directory for sweep CSVs (default: checkpoint dir)");
    eval_seg.attach(eval_cmd);
    eval_model.attach(eval_cmd);
    eval_train.attach(eval_cmd);
    eval_cmd->add_option("--alpha", eval_alpha, "Majority-vote threshold");
    eval_cmd->add_option("--alpha-sweep", alpha_sweep_arg, "lo:hi:step threshold sweep CSV");
    eval_cmd->add_option("--window-sweep", window_sweep_arg,
                         "Comma-separated window sizes; trains one CV per size");
    eval_cmd->add_option("--eval-threads", eval_threads, "Sequences evaluated in parallel");
    eval_cmd->callback([&] {
        auto rows = read_manifest(eval_data);
        const SegmentationConfig seg = eval_seg.to_config();
        const std::string out_dir = eval_out.empty() ? eval_ckpt_dir : eval_out;
        if (!out_dir.empty()) fs::create_directories(out_dir);

        if (!eval_ckpt_dir.empty()) {
            auto splits = parse_fold_splits(read_text((fs::path(eval_ckpt_dir) / "folds.json").string()));
            std::vector<std::string> ckpts;
            for (std::size_t k = 0; k < splits.size(); ++k) {
                ckpts.push_back((fs::path(eval_ckpt_dir) / ("fold" + std::to_string(k) + ".lcnn")).string());
            }
            auto result = evaluate_dataset(rows, ckpts, splits, seg, eval_alpha, eval_threads);
            print_metric_table(result.confusion, "cross-validated metrics (alpha=" +
                                                     std::to_string(eval_alpha) + ")");

            SweepRange sweep = parse_sweep_range(alpha_sweep_arg);
            if (sweep.set) {
                std::ostringstream csv;
                csv << "# seed=" << eval_train.seed << " window=" << seg.window_size
                    << " stride=" << seg.stride_size << " diff_mode=" << eval_seg.diff_mode << "\n";
                csv << "alpha,tp,tn,fp,fn,n_pd_predicted,accuracy,recall,f1,mcc\n";
                for (double a = sweep.lo; a <= sweep.hi + 1e-12; a += sweep.step) {
                    ConfusionMatrix cm = confusion_at(result.votes, a);
                    csv << a << ',' << cm.tp << ',' << cm.tn << ',' << cm.fp << ',' << cm.fn << ','
                        << (cm.tp + cm.fp) << ',' << csv_metric(accuracy(cm)) << ','
                        << csv_metric(recall(cm)) << ',' << csv_metric(f1(cm)) << ','
                        << csv_metric(mcc(cm)) << "\n";
                }
                const std::string path = (fs::path(out_dir) / "alpha_sweep.csv").string();
                write_text(path, csv.str());
                std::cout << "alpha sweep written to " << path << "\n";
            }
        } else if (alpha_sweep_arg.empty() && window_sweep_arg.empty()) {
            throw UsageError("eval: pass --checkpoint for evaluation or --window-sweep to retrain");
        }

        auto windows = parse_size_list(window_sweep_arg);
        if (!windows.empty()) {
            std::ostringstream csv;
            csv << "# seed=" << eval_train.seed << " stride=" << seg.stride_size
                << " diff_mode=" << eval_seg.diff_mode << " epochs=" << eval_train.epochs << "\n";
            csv << "window,tp,tn,fp,fn,accuracy,recall,f1,mcc,wall_sec\n";
            for (std::size_t w : windows) {
                SegmentationConfig wseg = seg;
                wseg.window_size = w;
                const ModelConfig mcfg = eval_model.to_config(w);
                const TrainConfig tcfg = eval_train.to_config();
                auto data = load_dataset(rows, wseg);
                auto cv = run_cross_validation(data, mcfg, tcfg, wseg, eval_alpha);
                const ConfusionMatrix& cm = cv.report.pooled;
                csv << w << ',' << cm.tp << ',' << cm.tn << ',' << cm.fp << ',' << cm.fn << ','
                    << csv_metric(accuracy(cm)) << ',' << csv_metric(recall(cm)) << ','
                    << csv_metric(f1(cm)) << ',' << csv_metric(mcc(cm)) << ','
                    << cv.report.wall_sec << "\n";
                std::cout << "window " << w << ": accuracy " << format_percent(accuracy(cm))
                          << "\n";
            }
            const std::string path = (fs::path(out_dir) / "window_sweep.csv").string();
            write_text(path, csv.str());
            std::cout << "window sweep written to " << path << "\n";
        }
    });

    // ---- infer ---------------------------------------------------------------
    auto* infer_cmd = app.add_subcommand("infer", "Diagnose individual sequences");
    std::string infer_ckpt, infer_format = "dwt";
    double infer_alpha = 0.5;
    std::size_t infer_stride = 64;
    std::size_t infer_threads = std::max(1u, std::thread::hardware_concurrency());
    std::string infer_diff = "geometric";
    std::vector<std::string> infer_files;
    infer_cmd->add_option("--checkpoint", infer_ckpt, "Model checkpoint (.lcnn)")->required();
    infer_cmd->add_option("--format", infer_format, "Input format: svc|dwt");
    infer_cmd->add_option("--alpha", infer_alpha, "Majority-vote threshold");
    infer_cmd->add_option("--stride", infer_stride, "Segmentation stride");
    infer_cmd->add_option("--diff-mode", infer_diff, "Forward-difference target");
    infer_cmd->add_option("--threads", infer_threads, "Patch-level inference threads");
    infer_cmd->add_option("files", infer_files, "Sequence files")->required();
    infer_cmd->callback([&] {
        auto [params, mcfg] = load_checkpoint(infer_ckpt);
        SegmentationConfig seg;
        seg.window_size = mcfg.window;
        seg.stride_size = infer_stride;
        seg.diff_mode = parse_diff_mode(infer_diff);
        const SequenceFormat fmt = parse_sequence_format(infer_format);

        nlohmann::ordered_json hdr;
        hdr["run_config"] = {{"checkpoint", infer_ckpt},
                             {"format", infer_format},
                             {"alpha", infer_alpha},
                             {"window", mcfg.window},
                             {"stride", infer_stride},
                             {"diff_mode", infer_diff},
                             {"threads", infer_threads}};
        std::cout << hdr.dump() << "\n";
        for (const auto& file : infer_files) {
            Diagnosis d = diagnose_sequence(file, fmt, params, mcfg, seg, infer_alpha,
                                            infer_threads);
            std::cout << diagnosis_json(d) << "\n";
        }
    });

    // ---- count ---------------------------------------------------------------
    auto* count_cmd = app.add_subcommand("count", "Parameter and FLOP accounting");
    SegFlags count_seg;
    ModelFlags count_model;
    count_seg.attach(count_cmd);
    count_model.attach(count_cmd);
    count_cmd->callback([&] {
        const ModelConfig mcfg = count_model.to_config(count_seg.window);
        std::cout << format_count_report(count_params(mcfg), count_flops(mcfg));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
