#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazeclip/config.hpp"
#include "gazeclip/nn.hpp"

namespace gazeclip {

/// Hierarchical labels feeding the prompt generator. `authenticity` is
/// "real" or "fake"; the rest are empty for real faces.
struct PromptLevels {
    std::string authenticity;
    std::string forgery_type;  // EFS, FS, AM, FR, TF
    std::string family;        // gan, diffusion, flow
    std::string generator;

    bool operator==(const PromptLevels&) const = default;
};

/// Prompt up to `level` (1..4), e.g. "a photo of a fake face, face swap
/// manipulation, made by a diffusion model, generator diffface".
std::string ftg_generate(const PromptLevels& labels, int level);

/// Every word the templates can produce apart from generator names.
std::vector<std::string> prompt_base_corpus();

/// Lowercase, split on anything that is not a letter or digit.
std::vector<std::string> split_words(const std::string& text);

struct TokenizedText {
    std::vector<int> ids;  // exactly t entries
    std::size_t eos = 0;   // position of EOS
};

/// Closed word vocabulary. Ids are dense in first-appearance order after the
/// reserved PAD/BOS/EOS.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;

    Vocabulary();
    /// Base corpus followed by the given generator names.
    static Vocabulary for_generators(const std::vector<std::string>& generators);

    void add_text(const std::string& text);
    int id(const std::string& word) const;
    bool contains(const std::string& word) const { return ids_.count(word) != 0; }
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

    /// BOS + words + EOS, padded or truncated to `length` (EOS always kept).
    TokenizedText tokenize(const std::string& text, std::size_t length) const;

private:
    std::map<std::string, int> ids_;
    std::vector<std::string> words_;
};

/// Row i of x scaled by diag[i].
ag::Tensor aws_apply(const ag::Tensor& x, const ag::Tensor& diag);

/// Frozen text block with an optional word-selector diagonal.
class Trtb {
public:
    Trtb() = default;
    Trtb(nn::Builder& b, const std::string& name, const ModelConfig& cfg);

    ag::Tensor operator()(const ag::Tensor& x) const;
    ag::Tensor vanilla(const ag::Tensor& x) const;

    nn::LayerNorm ln1, ln2;
    nn::MultiHeadAttention attn;
    nn::FeedForward ff;
    ag::Tensor diag;  // [t], undefined without the selector
    AwsPlacement placement = AwsPlacement::kBefore;
};

class Lre {
public:
    Lre() = default;
    Lre(nn::Builder& b, const ModelConfig& cfg);

    /// Token ids → T_g_l [1×s], pooled at the EOS row.
    ag::Tensor operator()(const TokenizedText& text) const;
    /// Sequence after embedding, blocks and adapters.
    ag::Tensor tokens(const TokenizedText& text) const;

    ag::Tensor embedding;  // [V×s]
    ag::Tensor positions;  // [t×s]
    std::vector<Trtb> blocks;
    std::vector<nn::LoRA> loras;
    std::vector<int> lora_after;
};

}  // namespace gazeclip
