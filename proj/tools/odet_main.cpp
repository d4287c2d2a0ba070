// Command-line front end: wavelet demo, gradient checks, dataset tooling,
// evaluation and parameter/FLOP accounting.
//
// Exit codes: 0 success, 1 failed check, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "odet/dota.hpp"
#include "odet/dynconv.hpp"
#include "odet/eval.hpp"
#include "odet/gradcheck.hpp"
#include "odet/model_config.hpp"
#include "odet/okm.hpp"
#include "odet/wavelet.hpp"

namespace fs = std::filesystem;
using namespace odet;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << content;
}

Tensor random_tensor(Dims dims, std::mt19937_64& rng) {
    Tensor t(dims);
    fill_normal(t, rng);
    return t;
}

int run_demo_wtconv(int levels, int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int channels = 4;
    const Tensor x = random_tensor({1, channels, size, size}, rng);

    const WaveletPyramid pyramid = wt_cascade(x, levels, true);
    const double rt_err = max_abs_diff(wt_cascade_inverse(pyramid), x);

    const WtConvWeights weights = make_wtconv_weights(channels, 3, levels, rng);
    const Tensor y = wtconv(x, weights);

    std::printf("input (1,%d,%d,%d), %d cascade levels\n", channels, size, size, levels);
    std::printf("cascade round-trip max abs error: %.3e\n", rt_err);
    std::printf("wtconv output dims (%d,%d,%d,%d)\n\n", y.n(), y.c(), y.h(), y.w());
    std::printf("%-8s %-12s %-16s\n", "levels", "params", "receptive field");
    for (int l = 0; l <= levels; ++l) {
        std::printf("%-8d %-12zu %-16d\n", l, wtconv_param_count(channels, 3, l),
                    wtconv_receptive_field(3, l));
    }
    return rt_err <= 1e-10 ? 0 : 1;
}

int run_gradcheck(const std::string& module, std::uint64_t seed, double tol) {
    std::mt19937_64 rng(seed);
    std::function<ad::Var()> forward;
    std::vector<ad::Var> leaves;

    if (module == "conv") {
        auto x = ad::Var::leaf(random_tensor({1, 2, 4, 4}, rng));
        auto k = ad::Var::leaf(random_tensor({2, 2, 3, 3}, rng));
        auto b = ad::Var::leaf(random_tensor({2, 1, 1, 1}, rng));
        leaves = {x, k, b};
        forward = [x, k, b] { return ad::conv(x, k, b, same_spec(3, 3)); };
    } else if (module == "wtconv") {
        auto layer = std::make_shared<WtConvLayer>(2, 3, 2, rng);
        auto x = ad::Var::leaf(random_tensor({1, 2, 8, 8}, rng));
        leaves = layer->params();
        leaves.push_back(x);
        forward = [layer, x] { return layer->apply(x); };
    } else if (module == "c2f-wtc") {
        C2fWtcConfig cfg;
        cfg.in_channels = 4;
        cfg.out_channels = 8;
        cfg.levels = 1;
        auto block = std::make_shared<C2fWtcBlock>(cfg, rng);
        auto x = ad::Var::leaf(random_tensor({1, 4, 6, 6}, rng));
        leaves = block->params();
        leaves.push_back(x);
        forward = [block, x] { return block->apply(x); };
    } else if (module == "dynconv") {
        auto layer = std::make_shared<DynamicConvLayer>(3, 4, 3, 3, 0, rng);
        auto x = ad::Var::leaf(random_tensor({2, 3, 5, 5}, rng));
        leaves = layer->params();
        leaves.push_back(x);
        forward = [layer, x] { return layer->apply(x); };
    } else if (module == "ghost") {
        auto ghost = std::make_shared<GhostModule>(3, 8, 1, rng);
        auto x = ad::Var::leaf(random_tensor({1, 3, 6, 6}, rng));
        leaves = ghost->params();
        leaves.push_back(x);
        forward = [ghost, x] { return ghost->apply(x); };
    } else if (module == "c2f-gdc") {
        C2fGdcConfig cfg;
        cfg.in_channels = 4;
        cfg.out_channels = 8;
        cfg.experts = 2;
        auto block = std::make_shared<C2fGdcBlock>(cfg, rng);
        auto x = ad::Var::leaf(random_tensor({1, 4, 6, 6}, rng));
        leaves = block->params();
        leaves.push_back(x);
        forward = [block, x] { return block->apply(x); };
    } else if (module == "okm-csp") {
        OkmCspConfig cfg;
        cfg.channels = 8;
        cfg.height = 6;
        cfg.width = 6;
        auto block = std::make_shared<OkmCspBlock>(cfg, rng);
        auto x = ad::Var::leaf(random_tensor({1, 8, 6, 6}, rng));
        leaves = block->params();
        leaves.push_back(x);
        forward = [block, x] { return block->apply(x); };
    } else if (module == "spd") {
        auto layer = std::make_shared<SpdConvLayer>(SpdConvConfig{3, 5, 2, 3}, rng);
        auto x = ad::Var::leaf(random_tensor({1, 3, 6, 6}, rng));
        leaves = layer->params();
        leaves.push_back(x);
        forward = [layer, x] { return layer->apply(x); };
    } else if (module == "asfp") {
        AsfpConfig cfg;
        cfg.p2_channels = 3;
        cfg.p3_channels = 5;
        cfg.p3_height = 4;
        cfg.p3_width = 4;
        auto block = std::make_shared<AsfpFuseBlock>(cfg, rng);
        auto p2 = ad::Var::leaf(random_tensor({1, 3, 8, 8}, rng));
        auto p3 = ad::Var::leaf(random_tensor({1, 5, 4, 4}, rng));
        leaves = block->params();
        leaves.push_back(p2);
        leaves.push_back(p3);
        forward = [block, p2, p3] { return block->apply(p2, p3); };
    } else {
        std::fprintf(stderr, "unknown module '%s'\n", module.c_str());
        return 2;
    }

    GradCheckOptions opt;
    opt.seed = seed + 7000;
    opt.tol = tol;
    const GradReport report = finite_diff_check(forward, leaves, opt);

    std::printf("module %s, seed %llu, step %.0e, %zu coordinates over %zu leaves\n",
                module.c_str(), static_cast<unsigned long long>(seed), opt.step,
                report.detail.size(), leaves.size());
    std::printf("max abs err %.3e, max rel err %.3e, tol %.0e -> %s\n", report.max_abs_err,
                report.max_rel_err, tol, report.passed ? "PASS" : "FAIL");
    if (!report.passed) {
        for (const GradEntry& entry : report.detail) {
            if (grad_rel_err(entry.analytic, entry.numeric) == report.max_rel_err) {
                std::printf("worst: leaf %zu coord %zu analytic %.12g numeric %.12g\n",
                            entry.leaf, entry.coord, entry.analytic, entry.numeric);
                break;
            }
        }
    }
    return report.passed ? 0 : 1;
}

int run_split(const std::string& annotations_dir, int width, int height, int size, int overlap,
              double keep_frac, const std::string& out_dir) {
    const PatchSpec spec{size, overlap};
    const ClipOptions clip{keep_frac, 0.7};
    const auto windows = patch_grid(width, height, spec);
    fs::create_directories(out_dir);

    int files = 0, patches = 0, instances = 0;
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(annotations_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            inputs.push_back(entry.path());
        }
    }
    std::sort(inputs.begin(), inputs.end());
    for (const fs::path& path : inputs) {
        const auto records = parse_dota_annotation(read_file(path.string()));
        const std::string stem = path.stem().string();
        ++files;
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const auto clipped = clip_annotations_to_window(records, windows[w], clip);
            const std::string name = stem + "__" + std::to_string(windows[w].x) + "_" +
                                     std::to_string(windows[w].y) + ".txt";
            write_file((fs::path(out_dir) / name).string(), serialize_dota_annotation(clipped));
            ++patches;
            instances += static_cast<int>(clipped.size());
        }
    }
    std::printf("split %d annotation files into %d patches (%zu windows/image, %d instances)\n",
                files, patches, windows.size(), instances);
    return 0;
}

int run_eval(const std::string& dets_file, const std::string& gts_dir, double iou,
             const std::string& metric) {
    EvalConfig cfg;
    cfg.iou_thresh = iou;
    if (metric == "voc07") {
        cfg.metric = ApMetric::Voc07;
    } else if (metric == "area") {
        cfg.metric = ApMetric::AllPoint;
    } else {
        std::fprintf(stderr, "unknown metric '%s' (expected voc07 or area)\n", metric.c_str());
        return 2;
    }

    const auto dets = parse_detection_file(read_file(dets_file));
    std::vector<GroundTruth> gts;
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(gts_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            inputs.push_back(entry.path());
        }
    }
    std::sort(inputs.begin(), inputs.end());
    for (const fs::path& path : inputs) {
        const auto records = parse_dota_annotation(read_file(path.string()));
        const std::string image_id = path.stem().string();
        for (const AnnotationRecord& rec : records) {
            gts.push_back(annotation_to_ground_truth(rec, image_id));
        }
    }

    const EvalResult result = evaluate_dataset(dets, gts, cfg);
    std::fputs(format_ap_table(result, cfg.metric).c_str(), stdout);
    return 0;
}

int run_count(const std::string& config_file, const std::string& input_dims) {
    Dims dims{};
    if (std::sscanf(input_dims.c_str(), "%d,%d,%d,%d", &dims[0], &dims[1], &dims[2], &dims[3]) !=
        4) {
        std::fprintf(stderr, "expected --input N,C,H,W, got '%s'\n", input_dims.c_str());
        return 2;
    }
    const ModelConfig config = parse_model_config(read_file(config_file));
    const CountReport report = count_params_flops(config, dims);
    std::fputs(format_count_report(report).c_str(), stdout);
    return 0;
}

int run_ucas_split(const std::string& ids_file, std::uint64_t seed, const std::string& out_file) {
    std::vector<std::string> ids;
    std::istringstream in(read_file(ids_file));
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    const SplitManifest manifest = ratio_split(ids, seed);
    write_file(out_file, serialize_split_manifest(manifest));
    std::printf("split %zu ids 5:2:3 -> %zu train / %zu val / %zu test (seed %llu)\n", ids.size(),
                manifest.train.size(), manifest.val.size(), manifest.test.size(),
                static_cast<unsigned long long>(seed));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oriented-detection building blocks: wavelet and dynamic convolutions, "
                 "rotated-box evaluation, DOTA-style dataset tooling"};
    app.require_subcommand(1);

    int levels = 2, size = 32;
    std::uint64_t seed = 1;
    auto* demo = app.add_subcommand("demo-wtconv", "wavelet cascade round trip and scaling table");
    demo->add_option("--levels", levels, "cascade levels")->default_val(2);
    demo->add_option("--size", size, "input spatial size")->default_val(32);
    demo->add_option("--seed", seed, "rng seed")->default_val(1);

    std::string module;
    double tol = 1e-6;
    std::uint64_t gc_seed = 1;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gradcheck->add_option("--module", module, "one of conv|wtconv|c2f-wtc|dynconv|ghost|"
                                              "c2f-gdc|okm-csp|spd|asfp")
        ->required();
    gradcheck->add_option("--seed", gc_seed, "rng seed")->default_val(1);
    gradcheck->add_option("--tol", tol, "max relative error tolerance")->default_val(1e-6);

    std::string annotations_dir, split_out;
    int width = 0, height = 0, patch_size = 1024, overlap = 200;
    double keep_frac = 0.5;
    auto* split = app.add_subcommand("split", "tile annotation files into overlapping patches");
    split->add_option("--annotations", annotations_dir, "directory of DOTA .txt files")
        ->required();
    split->add_option("--width", width, "image width in pixels")->required();
    split->add_option("--height", height, "image height in pixels")->required();
    split->add_option("--size", patch_size, "patch size")->default_val(1024);
    split->add_option("--overlap", overlap, "patch overlap")->default_val(200);
    split->add_option("--keep-frac", keep_frac, "minimum retained area fraction")
        ->default_val(0.5);
    split->add_option("--out", split_out, "output directory")->required();

    std::string dets_file, gts_dir, metric = "voc07";
    double iou = 0.5;
    auto* evalc = app.add_subcommand("eval", "evaluate detections against ground truth");
    evalc->add_option("--dets", dets_file, "detection file")->required();
    evalc->add_option("--gts", gts_dir, "directory of DOTA .txt ground-truth files")->required();
    evalc->add_option("--iou", iou, "IoU threshold")->default_val(0.5);
    evalc->add_option("--metric", metric, "voc07 or area")->default_val("voc07");

    std::string config_file, input_dims = "1,3,64,64";
    auto* count = app.add_subcommand("count", "parameter and FLOP accounting for a model config");
    count->add_option("--config", config_file, "model config file")->required();
    count->add_option("--input", input_dims, "input dims N,C,H,W")->default_val("1,3,64,64");

    std::string ids_file, manifest_out;
    std::uint64_t split_seed = 1;
    auto* ucas = app.add_subcommand("ucas-split", "deterministic 5:2:3 id split");
    ucas->add_option("--ids", ids_file, "file with one id per line")->required();
    ucas->add_option("--seed", split_seed, "shuffle seed")->default_val(1);
    ucas->add_option("--out", manifest_out, "manifest output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (demo->parsed()) return run_demo_wtconv(levels, size, seed);
        if (gradcheck->parsed()) return run_gradcheck(module, gc_seed, tol);
        if (split->parsed()) {
            return run_split(annotations_dir, width, height, patch_size, overlap, keep_frac,
                             split_out);
        }
        if (evalc->parsed()) return run_eval(dets_file, gts_dir, iou, metric);
        if (count->parsed()) return run_count(config_file, input_dims);
        if (ucas->parsed()) return run_ucas_split(ids_file, split_seed, manifest_out);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
