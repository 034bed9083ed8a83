#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazeclip/tensor.hpp"

namespace gazeclip {

enum class AwsPlacement { kBefore, kBetween, kAfter };
enum class QueryMode { kCls, kPatch, kAll };
enum class CmcFeature { kFused, kAgpm };
enum class GazeSource { kStandIn, kManifest };

const char* to_string(AwsPlacement v);
const char* to_string(QueryMode v);
const char* to_string(CmcFeature v);
const char* to_string(GazeSource v);
const char* to_string(ag::Precision v);

/// Every architectural extent, ablation switch and optimizer setting of a run.
struct ModelConfig {
    // Shared extents.
    int image_size = 32;
    int patch = 8;
    int d = 32;  // image-encoder width
    int s = 16;  // joint embedding / text width
    int a = 24;  // appearance-gaze encoder width
    int heads = 4;
    int classes = 5;  // seen attribution classes (real + seen generators)
    double init_std = 0.02;

    // Appearance-gaze perception.
    int agpm_blocks = 2;
    int agpm_channels = 8;
    int agpm_map = 4;  // h = w of the appearance feature map

    // Gaze-aware image encoder.
    int gie_blocks = 4;
    int gie_lora_blocks = 2;
    QueryMode query_mode = QueryMode::kCls;
    bool use_gi = true;

    // Language refinement encoder.
    bool lre_enabled = true;
    int lre_blocks = 2;
    int lre_tokens = 16;
    int lre_vocab = 128;
    int lre_lora_blocks = 1;
    bool use_aws = true;
    AwsPlacement aws_placement = AwsPlacement::kBefore;
    int prompt_level = 4;

    // LoRA.
    int lora_rank = 2;
    double lora_alpha = 4.0;

    // Module switches.
    bool use_agpm = true;
    bool use_gaze = true;
    bool use_gie = true;
    GazeSource gaze_source = GazeSource::kStandIn;
    CmcFeature cmc_feature = CmcFeature::kFused;

    // Optimization.
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-3;
    bool decoupled_weight_decay = false;
    int lr_step_epochs = 15;
    double lr_drop = 10.0;
    int epochs = 10;
    int batch = 8;
    std::uint64_t seed = 0;
    ag::Precision precision = ag::Precision::kF32;

    int patches() const { return (image_size / patch) * (image_size / patch); }
    int appearance_tokens() const { return agpm_map * agpm_map; }

    static ModelConfig desk();
    static ModelConfig paper();

    /// Throws a config error naming the first violated constraint.
    void validate() const;

    /// Flat `key = value` text, one key per line in a fixed order.
    std::string serialize() const;
    /// Applies `key = value` lines on top of `base`; unknown keys are errors.
    static ModelConfig parse(const std::string& text, const ModelConfig& base = desk());
    static ModelConfig load(const std::string& path, const ModelConfig& base = desk());
    /// Applies a single dotted-key assignment.
    void set(const std::string& key, const std::string& value);

    /// FNV-1a over serialize(), as 16 hex digits.
    std::string hash() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Padding (0 or 1) per stride-2, 3×3 stage mapping `input` to exactly
/// `target`; the shortest plan wins, preferring padding 1.
std::vector<int> plan_appearance_stages(int input, int target);

}  // namespace gazeclip
