#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "odet/tensor.hpp"

namespace odet {

// Line-oriented model description: one layer per line, `kind key=value ...`,
// '#' starts a comment. Known kinds: conv, wtconv, c2f_wtc, dynamic_conv,
// c2f_gdc, ghost, okm_csp, spd_conv, asfp_fuse.
struct LayerConfig {
    std::string kind;
    std::map<std::string, std::string> args;
    int line = 0;
};

struct ModelConfig {
    std::vector<LayerConfig> layers;
};

ModelConfig parse_model_config(std::string_view text);

struct LayerCount {
    std::string kind;
    Dims out_dims{};
    std::size_t params = 0;
    std::uint64_t flops = 0;
};

struct CountReport {
    std::vector<LayerCount> layers;
    std::size_t total_params = 0;
    std::uint64_t total_flops = 0;
};

// Closed-form parameter and FLOP accounting for the given input shape.
// FLOPs count two per multiply-accumulate.
CountReport count_params_flops(const ModelConfig& config, const Dims& input);

// Builds every layer with seeded weights and reports the element count of each
// weight tensor; the brute-force oracle for the closed-form counter.
struct InstantiatedLayer {
    std::string kind;
    std::vector<std::size_t> param_sizes;
};
std::vector<InstantiatedLayer> instantiate_layers(const ModelConfig& config, const Dims& input,
                                                  std::uint64_t seed);

std::string format_count_report(const CountReport& report);

}  // namespace odet
