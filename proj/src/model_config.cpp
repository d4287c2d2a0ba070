#include "odet/model_config.hpp"

#include <charconv>
#include <cstdio>

#include "odet/dynconv.hpp"
#include "odet/okm.hpp"
#include "odet/wavelet.hpp"

namespace odet {

namespace {

std::vector<std::string> split_tokens(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.emplace_back(line.substr(start, i - start));
    }
    return tokens;
}

struct LayerArgs {
    const LayerConfig* cfg;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("layer '" + cfg->kind + "' (line " + std::to_string(cfg->line) + "): " +
                          msg);
    }

    int get_int(const std::string& key, int fallback) const {
        auto it = cfg->args.find(key);
        if (it == cfg->args.end()) return fallback;
        int value = 0;
        const char* end = it->second.data() + it->second.size();
        auto [ptr, ec] = std::from_chars(it->second.data(), end, value);
        if (ec != std::errc() || ptr != end) fail("bad integer for '" + key + "'");
        return value;
    }

    int require_int(const std::string& key) const {
        if (!cfg->args.count(key)) fail("missing required key '" + key + "'");
        return get_int(key, 0);
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = cfg->args.find(key);
        if (it == cfg->args.end()) return fallback;
        double value = 0.0;
        const char* end = it->second.data() + it->second.size();
        auto [ptr, ec] = std::from_chars(it->second.data(), end, value);
        if (ec != std::errc() || ptr != end) fail("bad number for '" + key + "'");
        return value;
    }
};

struct PlainConv {
    int out, k, stride, pad, groups;
    bool bias;
};

PlainConv parse_plain_conv(const LayerArgs& a, int in_channels) {
    PlainConv pc;
    pc.out = a.require_int("out");
    pc.k = a.get_int("k", 3);
    pc.stride = a.get_int("stride", 1);
    pc.pad = a.get_int("pad", -1);
    if (pc.pad < 0) pc.pad = same_padding(pc.k);
    pc.groups = a.get_int("groups", 1);
    pc.bias = a.get_int("bias", 1) != 0;
    if (pc.out < 1 || pc.k < 1 || pc.stride < 1 || pc.groups < 1) a.fail("invalid conv shape");
    if (in_channels % pc.groups != 0 || pc.out % pc.groups != 0) {
        a.fail("groups must divide " + std::to_string(in_channels) + " -> " +
               std::to_string(pc.out));
    }
    return pc;
}

}  // namespace

ModelConfig parse_model_config(std::string_view text) {
    ModelConfig config;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        auto tokens = split_tokens(line);
        if (tokens.empty()) continue;

        LayerConfig layer;
        layer.kind = tokens[0];
        layer.line = line_no;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const std::size_t eq = tokens[i].find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 >= tokens[i].size()) {
                throw ParseError("expected key=value, got '" + tokens[i] + "'", line_no);
            }
            layer.args[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
        }
        config.layers.push_back(std::move(layer));
    }
    return config;
}

namespace {

// Shared walk: computes per-layer closed-form counts and output dims, and
// optionally instantiates the blocks to enumerate their actual weights.
void walk_layers(const ModelConfig& config, const Dims& input, CountReport* report,
                 std::vector<InstantiatedLayer>* instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Dims dims = input;
    for (int d : dims) {
        if (d < 1) throw ConfigError("count: input dims must be positive");
    }

    const auto record_instance = [&](const char* kind, const std::vector<ad::Var>& params) {
        if (!instances) return;
        InstantiatedLayer inst;
        inst.kind = kind;
        for (const ad::Var& p : params) inst.param_sizes.push_back(p.val().numel());
        instances->push_back(std::move(inst));
    };

    for (const LayerConfig& layer : config.layers) {
        LayerArgs a{&layer};
        LayerCount count;
        count.kind = layer.kind;

        if (layer.kind == "conv") {
            const PlainConv pc = parse_plain_conv(a, dims[1]);
            const Dims kdims{pc.out, dims[1] / pc.groups, pc.k, pc.k};
            const ConvSpec spec{pc.stride, pc.pad, pc.pad, 1, pc.groups};
            Dims out;
            try {
                out = conv2d_output_dims(dims, kdims, spec);
            } catch (const ShapeError& e) {
                a.fail(e.what());
            }
            count.params = static_cast<std::size_t>(pc.out) * (dims[1] / pc.groups) * pc.k * pc.k +
                           (pc.bias ? pc.out : 0);
            count.flops = 2ull * pc.k * pc.k * (dims[1] / pc.groups) * pc.out * out[2] * out[3] *
                          out[0];
            if (instances) {
                std::vector<ad::Var> params{make_conv_weight(pc.out, dims[1] / pc.groups, pc.k,
                                                             rng)};
                if (pc.bias) params.push_back(make_bias(pc.out, rng));
                record_instance("conv", params);
            }
            dims = out;
        } else if (layer.kind == "wtconv") {
            const int levels = a.get_int("levels", 2);
            const int k = a.get_int("k", 3);
            if (levels < 0 || k < 1 || k % 2 == 0) a.fail("invalid wtconv shape");
            count.params = wtconv_param_count(dims[1], k, levels);
            count.flops = wtconv_flops(dims[1], k, levels, dims);
            if (instances) record_instance("wtconv", WtConvLayer(dims[1], k, levels, rng).params());
        } else if (layer.kind == "c2f_wtc") {
            C2fWtcConfig cfg;
            cfg.in_channels = dims[1];
            cfg.out_channels = a.require_int("out");
            cfg.bottlenecks = a.get_int("n", 1);
            cfg.levels = a.get_int("levels", 2);
            cfg.kernel = a.get_int("k", 3);
            count.params = c2f_wtc_param_count(cfg);
            count.flops = c2f_wtc_flops(cfg, dims);
            if (instances) {
                try {
                    record_instance("c2f_wtc", C2fWtcBlock(cfg, rng).params());
                } catch (const ConfigError& e) {
                    a.fail(e.what());
                }
            }
            dims[1] = cfg.out_channels;
        } else if (layer.kind == "dynamic_conv") {
            const int out = a.require_int("out");
            const int experts = a.get_int("experts", 4);
            const int k = a.get_int("k", 3);
            const int hidden = a.get_int("hidden", 0);
            if (out < 1 || experts < 1 || k < 1 || k % 2 == 0) a.fail("invalid dynamic_conv");
            count.params = dynamic_conv_param_count(dims[1], out, k, experts, hidden).total();
            count.flops = dynamic_conv_flops(dims[1], out, k, experts, hidden, dims);
            if (instances) {
                record_instance("dynamic_conv",
                                DynamicConvLayer(dims[1], out, k, experts, hidden, rng).params());
            }
            dims[1] = out;
        } else if (layer.kind == "c2f_gdc") {
            C2fGdcConfig cfg;
            cfg.in_channels = dims[1];
            cfg.out_channels = a.require_int("out");
            cfg.bottlenecks = a.get_int("n", 1);
            cfg.experts = a.get_int("experts", 4);
            cfg.kernel = a.get_int("k", 3);
            cfg.hidden = a.get_int("hidden", 0);
            cfg.second_dynamic = a.get_int("second_dynamic", 0) != 0;
            count.params = c2f_gdc_param_count(cfg);
            count.flops = c2f_gdc_flops(cfg, dims);
            if (instances) {
                try {
                    record_instance("c2f_gdc", C2fGdcBlock(cfg, rng).params());
                } catch (const ConfigError& e) {
                    a.fail(e.what());
                }
            }
            dims[1] = cfg.out_channels;
        } else if (layer.kind == "ghost") {
            const int out = a.require_int("out");
            const int k = a.get_int("k", 1);
            const bool dynamic = a.get_int("dynamic", 0) != 0;
            const int experts = a.get_int("experts", 4);
            if (out < 1 || out % 2 != 0) a.fail("ghost output width must be even");
            count.params = ghost_param_count(dims[1], out, k, dynamic, experts);
            count.flops = ghost_flops(dims[1], out, k, dims);
            if (dynamic) {
                count.flops += dynamic_conv_flops(dims[1], out / 2, k, experts, 0, dims) -
                               2ull * k * k * dims[1] * (out / 2) * dims[2] * dims[3] * dims[0];
            }
            if (instances) {
                record_instance("ghost", GhostModule(dims[1], out, k, rng, dynamic,
                                                     experts)
                                             .params());
            }
            dims[1] = out;
        } else if (layer.kind == "okm_csp") {
            OkmCspConfig cfg;
            cfg.channels = dims[1];
            cfg.out_channels = a.get_int("out", dims[1]);
            cfg.e = a.get_double("e", 0.25);
            cfg.k_large = a.get_int("k_large", 7);
            cfg.height = dims[2];
            cfg.width = dims[3];
            try {
                count.params = okm_csp_param_count(cfg);
            } catch (const ValidationError& e) {
                a.fail(e.what());
            }
            count.flops = okm_csp_flops(cfg, dims);
            if (instances) record_instance("okm_csp", OkmCspBlock(cfg, rng).params());
            dims[1] = cfg.out_channels;
        } else if (layer.kind == "spd_conv") {
            SpdConvConfig cfg;
            cfg.in_channels = dims[1];
            cfg.out_channels = a.require_int("out");
            cfg.scale = a.get_int("scale", 2);
            cfg.kernel = a.get_int("k", 3);
            if (cfg.scale < 1 || dims[2] % cfg.scale != 0 || dims[3] % cfg.scale != 0) {
                a.fail("spatial dims " + dims_to_string(dims) + " not divisible by scale");
            }
            count.params = spd_conv_param_count(cfg);
            count.flops = spd_conv_flops(cfg, dims);
            if (instances) record_instance("spd_conv", SpdConvLayer(cfg, rng).params());
            dims = Dims{dims[0], cfg.out_channels, dims[2] / cfg.scale, dims[3] / cfg.scale};
        } else if (layer.kind == "asfp_fuse") {
            // The running stream is P2; the P3 feed is declared inline.
            AsfpConfig cfg;
            cfg.p2_channels = dims[1];
            cfg.p3_channels = a.require_int("p3");
            cfg.spd_channels = a.get_int("spd", 0);
            cfg.out_channels = a.get_int("out", 0);
            cfg.e = a.get_double("e", 0.25);
            cfg.k_large = a.get_int("k_large", 7);
            if (dims[2] % 2 != 0 || dims[3] % 2 != 0) {
                a.fail("P2 spatial dims must be even");
            }
            cfg.p3_height = dims[2] / 2;
            cfg.p3_width = dims[3] / 2;
            count.params = asfp_param_count(cfg);
            count.flops = asfp_flops(cfg, dims);
            if (instances) record_instance("asfp_fuse", AsfpFuseBlock(cfg, rng).params());
            const int out = cfg.out_channels > 0 ? cfg.out_channels : cfg.p3_channels;
            dims = Dims{dims[0], out, dims[2] / 2, dims[3] / 2};
        } else {
            a.fail("unknown layer kind");
        }

        if (report) {
            count.out_dims = dims;
            report->layers.push_back(count);
            report->total_params += count.params;
            report->total_flops += count.flops;
        }
    }
}

}  // namespace

CountReport count_params_flops(const ModelConfig& config, const Dims& input) {
    CountReport report;
    walk_layers(config, input, &report, nullptr, 0);
    return report;
}

std::vector<InstantiatedLayer> instantiate_layers(const ModelConfig& config, const Dims& input,
                                                  std::uint64_t seed) {
    std::vector<InstantiatedLayer> instances;
    walk_layers(config, input, nullptr, &instances, seed);
    return instances;
}

std::string format_count_report(const CountReport& report) {
    std::string out;
    char line[192];
    std::snprintf(line, sizeof(line), "%-4s %-14s %-20s %14s %16s\n", "#", "kind", "out dims",
                  "params", "flops");
    out += line;
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
        const LayerCount& lc = report.layers[i];
        std::snprintf(line, sizeof(line), "%-4zu %-14s %-20s %14zu %16llu\n", i, lc.kind.c_str(),
                      dims_to_string(lc.out_dims).c_str(), lc.params,
                      static_cast<unsigned long long>(lc.flops));
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-4s %-14s %-20s %14zu %16llu\n", "", "total", "",
                  report.total_params, static_cast<unsigned long long>(report.total_flops));
    out += line;
    return out;
}

}  // namespace odet
