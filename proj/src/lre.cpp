#include "gazeclip/lre.hpp"

#include <algorithm>
#include <cctype>

#include "gazeclip/errors.hpp"
#include "gazeclip/instrumentation.hpp"

namespace gazeclip {

namespace {

const std::map<std::string, std::string>& type_phrases() {
    static const std::map<std::string, std::string> phrases{{"EFS", "entire face synthesis"},
                                                            {"FS", "face swap"},
                                                            {"AM", "attribute manipulation"},
                                                            {"FR", "face reenactment"},
                                                            {"TF", "talking face"}};
    return phrases;
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::string ftg_generate(const PromptLevels& labels, int level) {
    if (!(level >= 1 && level <= 4)) fail(ErrorKind::kConfig, "prompt level must be 1..4, got " + std::to_string(level));
    const std::string auth = lowercase(labels.authenticity);
    if (!(auth == "real" || auth == "fake")) fail(ErrorKind::kData, "authenticity label must be 'real' or 'fake', got '" + labels.authenticity + "'");
    std::string text = "a photo of a " + auth + " face";
    if (auth == "real") return text;

    auto need = [&](const std::string& value, int at, const char* what) {
        if (!(!value.empty())) fail(ErrorKind::kData, std::string("prompt level ") + std::to_string(at) + " needs a " + what + " label");
    };
    if (level >= 2) {
        need(labels.forgery_type, 2, "forgery type");
        const auto it = type_phrases().find(labels.forgery_type);
        if (!(it != type_phrases().end())) fail(ErrorKind::kData, "unknown forgery type '" + labels.forgery_type + "'");
        text += ", " + it->second + " manipulation";
    }
    if (level >= 3) {
        need(labels.family, 3, "generator family");
        const std::string family = lowercase(labels.family);
        if (!(family == "gan" || family == "diffusion" || family == "flow")) fail(ErrorKind::kData, "unknown generator family '" + labels.family + "'");
        text += ", made by a " + family + " model";
    }
    if (level >= 4) {
        need(labels.generator, 4, "generator name");
        text += ", generator " + lowercase(labels.generator);
    }
    return text;
}

std::vector<std::string> prompt_base_corpus() {
    std::vector<std::string> corpus{"a photo of a real face", "a photo of a fake face"};
    for (const auto& [code, phrase] : type_phrases()) corpus.push_back(phrase + " manipulation");
    for (const char* family : {"gan", "diffusion", "flow"})
        corpus.push_back(std::string("made by a ") + family + " model");
    corpus.emplace_back("generator");
    return corpus;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

Vocabulary::Vocabulary() : words_{"<pad>", "<bos>", "<eos>"} {
    for (int i = 0; i < 3; ++i) ids_[words_[static_cast<std::size_t>(i)]] = i;
}

Vocabulary Vocabulary::for_generators(const std::vector<std::string>& generators) {
    Vocabulary v;
    for (const auto& text : prompt_base_corpus()) v.add_text(text);
    for (const auto& g : generators) v.add_text(g);
    return v;
}

void Vocabulary::add_text(const std::string& text) {
    for (auto& w : split_words(text)) {
        if (ids_.count(w)) continue;
        ids_[w] = static_cast<int>(words_.size());
        words_.push_back(std::move(w));
    }
}

int Vocabulary::id(const std::string& word) const {
    const auto it = ids_.find(word);
    if (!(it != ids_.end())) fail(ErrorKind::kData, "word '" + word + "' is not in the prompt vocabulary");
    return it->second;
}

TokenizedText Vocabulary::tokenize(const std::string& text, std::size_t length) const {
    require(length >= 2, ErrorKind::kConfig, "token length must be at least 2");
    TokenizedText out;
    out.ids.push_back(kBos);
    for (const auto& w : split_words(text)) out.ids.push_back(id(w));
    if (out.ids.size() > length - 1) out.ids.resize(length - 1);
    out.eos = out.ids.size();
    out.ids.push_back(kEos);
    out.ids.resize(length, kPad);
    return out;
}

ag::Tensor aws_apply(const ag::Tensor& x, const ag::Tensor& diag) {
    if (!(diag.numel() == x.rows())) fail(ErrorKind::kDimension, "selector diagonal has " + std::to_string(diag.numel()) + " entries for " + std::to_string(x.rows()) + " tokens");
    return ag::scale_rows(x, diag);
}

Trtb::Trtb(nn::Builder& b, const std::string& name, const ModelConfig& cfg)
    : ln1(b, name + ".ln1", cfg.s, true),
      ln2(b, name + ".ln2", cfg.s, true),
      attn(b, name + ".attn", cfg.s, cfg.heads, true),
      ff(b, name + ".ff", cfg.s, true),
      placement(cfg.aws_placement) {
    if (cfg.use_aws) diag = b.store.normal(name + ".aws", {static_cast<std::size_t>(cfg.lre_tokens)}, 1.0, b.rng, false);
}

ag::Tensor Trtb::operator()(const ag::Tensor& x) const {
    if (!diag.defined()) return vanilla(x);
    switch (placement) {
        case AwsPlacement::kBefore: {
            ag::Tensor h = ag::add(x, attn(aws_apply(ln1(x), diag)));
            return ag::add(h, ff(ln2(h)));
        }
        case AwsPlacement::kBetween: {
            ag::Tensor h = ag::add(x, attn(ln1(x)));
            return ag::add(h, ff(aws_apply(ln2(h), diag)));
        }
        case AwsPlacement::kAfter: return aws_apply(vanilla(x), diag);
    }
    return vanilla(x);
}

ag::Tensor Trtb::vanilla(const ag::Tensor& x) const {
    ag::Tensor h = ag::add(x, attn(ln1(x)));
    return ag::add(h, ff(ln2(h)));
}

Lre::Lre(nn::Builder& b, const ModelConfig& cfg) {
    const auto s = static_cast<std::size_t>(cfg.s);
    embedding = b.store.normal("lre.embedding", {static_cast<std::size_t>(cfg.lre_vocab), s}, b.init_std, b.rng, true);
    positions = b.store.normal("lre.positions", {static_cast<std::size_t>(cfg.lre_tokens), s}, b.init_std, b.rng, true);
    for (int i = 0; i < cfg.lre_blocks; ++i) blocks.emplace_back(b, "lre.block" + std::to_string(i), cfg);
    for (int i = 0; i < cfg.lre_lora_blocks; ++i) {
        loras.emplace_back(b, "lre.lora" + std::to_string(i), cfg.s, cfg.lora_rank, cfg.lora_alpha);
        lora_after.push_back(cfg.lre_blocks - cfg.lre_lora_blocks + i);
    }
    instrumentation::note_lre_built();
}

ag::Tensor Lre::tokens(const TokenizedText& text) const {
    if (!(text.ids.size() == positions.rows())) fail(ErrorKind::kDimension, "text has " + std::to_string(text.ids.size()) + " tokens, encoder expects " + std::to_string(positions.rows()));
    for (int id : text.ids)
        if (!(id >= 0 && static_cast<std::size_t>(id) < embedding.rows())) fail(ErrorKind::kData, "token id " + std::to_string(id) + " outside the embedding table");
    instrumentation::note_lre_forward();
    ag::Tensor x = ag::add(ag::embedding(embedding, text.ids), positions);
    std::size_t next_lora = 0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        x = blocks[j](x);
        if (next_lora < loras.size() && lora_after[next_lora] == static_cast<int>(j)) x = loras[next_lora++](x);
    }
    return x;
}

ag::Tensor Lre::operator()(const TokenizedText& text) const { return ag::slice_rows(tokens(text), text.eos, 1); }

}  // namespace gazeclip
