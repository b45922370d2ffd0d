#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eqcl/contrastive.hpp"
#include "eqcl/eval.hpp"
#include "eqcl/nn.hpp"
#include "eqcl/signal.hpp"
#include "eqcl/views.hpp"

namespace eqcl {

struct PathsConfig {
    std::string dataset = "data/train.eqds";
    std::string test_dataset = "data/test.eqds";
    std::string checkpoint = "run/pretrain.eqsg";
    std::string finetuned_checkpoint = "run/finetune.eqsg";
    std::string report_dir = "run/reports";
};

struct TransferConfig {
    std::vector<std::string> source_datasets;  // concatenated for pretraining
    double le_label_fraction = 1.0;
    double ssl_label_fraction = 0.01;
    LengthAdapter length_adapter = LengthAdapter::None;
};

struct AblateConfig {
    int seeds = 1;
    double ssl_label_fraction = 0.01;
};

// Everything one run needs. Serialized as an INI-style text file with one
// section per stage; see emit_template() for every key and its default.
struct RunConfig {
    SyntheticDatasetSpec data;
    int test_samples_per_class_per_snr = 50;
    EmdConfig emd;
    ModelSpec model;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    TransferConfig transfer;
    AblateConfig ablate;
    PathsConfig paths;
};

struct LoadedConfig {
    RunConfig config;
    std::vector<std::string> defaulted;  // "section.key = value" for every omitted key
};

// Throws ConfigError with a line number on malformed lines and with the full
// "section.key" name on unknown keys.
LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config(const std::filesystem::path& path);

// Canonical text: every key in fixed order, no comments.
std::string save_config(const RunConfig& cfg);
// Canonical text with a comment describing each key and its default.
std::string emit_template();

// 16 hex digits of FNV-1a over save_config(cfg).
std::string config_hash(const RunConfig& cfg);

}  // namespace eqcl
