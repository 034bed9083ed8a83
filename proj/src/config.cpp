#include "gazeclip/config.hpp"

#include <charconv>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "gazeclip/errors.hpp"

namespace gazeclip {

const char* to_string(AwsPlacement v) {
    switch (v) {
        case AwsPlacement::kBefore: return "before";
        case AwsPlacement::kBetween: return "between";
        case AwsPlacement::kAfter: return "after";
    }
    return "?";
}
const char* to_string(QueryMode v) {
    switch (v) {
        case QueryMode::kCls: return "cls";
        case QueryMode::kPatch: return "patch";
        case QueryMode::kAll: return "all";
    }
    return "?";
}
const char* to_string(CmcFeature v) { return v == CmcFeature::kFused ? "fused" : "agpm"; }
const char* to_string(GazeSource v) { return v == GazeSource::kStandIn ? "standin" : "manifest"; }
const char* to_string(ag::Precision v) { return v == ag::Precision::kF32 ? "f32" : "f64"; }

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    fail(ErrorKind::kConfig, "invalid value '" + value + "' for key '" + key + "'");
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    bad_value(key, value);
}

struct Field {
    const char* key;
    std::function<std::string(const ModelConfig&)> get;
    std::function<void(ModelConfig&, const std::string&, const std::string&)> set;
};

#define GZ_INT(KEY, MEMBER)                                                                    \
    Field {                                                                                    \
        KEY, [](const ModelConfig& c) { return std::to_string(c.MEMBER); },                    \
            [](ModelConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_int(k, v); } \
    }
#define GZ_DBL(KEY, MEMBER)                                                                    \
    Field {                                                                                    \
        KEY, [](const ModelConfig& c) { return fmt_double(c.MEMBER); },                        \
            [](ModelConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_double(k, v); } \
    }
#define GZ_BOOL(KEY, MEMBER)                                                                   \
    Field {                                                                                    \
        KEY, [](const ModelConfig& c) { return std::string(c.MEMBER ? "true" : "false"); },    \
            [](ModelConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_bool(k, v); } \
    }

template <typename E>
E parse_enum(const std::string& key, const std::string& value, std::initializer_list<E> options) {
    for (E e : options)
        if (value == to_string(e)) return e;
    bad_value(key, value);
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        GZ_INT("model.image_size", image_size),
        GZ_INT("model.patch", patch),
        GZ_INT("model.d", d),
        GZ_INT("model.s", s),
        GZ_INT("model.a", a),
        GZ_INT("model.heads", heads),
        GZ_INT("model.classes", classes),
        GZ_DBL("model.init_std", init_std),
        GZ_BOOL("modules.agpm", use_agpm),
        GZ_BOOL("modules.gaze", use_gaze),
        GZ_BOOL("modules.gie", use_gie),
        GZ_INT("agpm.blocks", agpm_blocks),
        GZ_INT("agpm.channels", agpm_channels),
        GZ_INT("agpm.map_size", agpm_map),
        GZ_INT("gie.blocks", gie_blocks),
        GZ_INT("gie.lora_blocks", gie_lora_blocks),
        Field{"gie.query_mode", [](const ModelConfig& c) { return std::string(to_string(c.query_mode)); },
              [](ModelConfig& c, const std::string& k, const std::string& v) {
                  c.query_mode = parse_enum(k, v, {QueryMode::kCls, QueryMode::kPatch, QueryMode::kAll});
              }},
        GZ_BOOL("gie.use_gi", use_gi),
        GZ_BOOL("lre.enabled", lre_enabled),
        GZ_INT("lre.blocks", lre_blocks),
        GZ_INT("lre.tokens", lre_tokens),
        GZ_INT("lre.vocab_size", lre_vocab),
        GZ_INT("lre.lora_blocks", lre_lora_blocks),
        GZ_BOOL("lre.use_aws", use_aws),
        Field{"lre.aws_placement", [](const ModelConfig& c) { return std::string(to_string(c.aws_placement)); },
              [](ModelConfig& c, const std::string& k, const std::string& v) {
                  c.aws_placement =
                      parse_enum(k, v, {AwsPlacement::kBefore, AwsPlacement::kBetween, AwsPlacement::kAfter});
              }},
        GZ_INT("lre.prompt_level", prompt_level),
        GZ_INT("lora.rank", lora_rank),
        GZ_DBL("lora.alpha", lora_alpha),
        Field{"gaze.source", [](const ModelConfig& c) { return std::string(to_string(c.gaze_source)); },
              [](ModelConfig& c, const std::string& k, const std::string& v) {
                  c.gaze_source = parse_enum(k, v, {GazeSource::kStandIn, GazeSource::kManifest});
              }},
        Field{"loss.cmc_feature", [](const ModelConfig& c) { return std::string(to_string(c.cmc_feature)); },
              [](ModelConfig& c, const std::string& k, const std::string& v) {
                  c.cmc_feature = parse_enum(k, v, {CmcFeature::kFused, CmcFeature::kAgpm});
              }},
        GZ_DBL("optim.lr", lr),
        GZ_DBL("optim.beta1", beta1),
        GZ_DBL("optim.beta2", beta2),
        GZ_DBL("optim.eps", adam_eps),
        GZ_DBL("optim.weight_decay", weight_decay),
        GZ_BOOL("optim.decoupled_weight_decay", decoupled_weight_decay),
        GZ_INT("optim.lr_step_epochs", lr_step_epochs),
        GZ_DBL("optim.lr_drop", lr_drop),
        GZ_INT("train.epochs", epochs),
        GZ_INT("train.batch", batch),
        Field{"train.seed", [](const ModelConfig& c) { return std::to_string(c.seed); },
              [](ModelConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
        Field{"train.precision", [](const ModelConfig& c) { return std::string(to_string(c.precision)); },
              [](ModelConfig& c, const std::string& k, const std::string& v) {
                  c.precision = parse_enum(k, v, {ag::Precision::kF32, ag::Precision::kF64});
              }},
    };
    return table;
}

#undef GZ_INT
#undef GZ_DBL
#undef GZ_BOOL

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.image_size = 256;
    c.patch = 32;
    c.d = 768;
    c.s = 512;
    c.a = 1024;
    c.heads = 8;
    c.classes = 11;
    c.agpm_blocks = 6;
    c.agpm_channels = 512;
    c.agpm_map = 7;
    c.gie_blocks = 12;
    c.lre_blocks = 12;
    c.lre_tokens = 308;
    c.lre_vocab = 49408;
    c.lora_rank = 8;
    c.lora_alpha = 32.0;
    c.lr = 1e-4;
    c.weight_decay = 1e-3;
    c.epochs = 30;
    c.batch = 32;
    return c;
}

void ModelConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(*this, key, value);
            return;
        }
    }
    fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string ModelConfig::serialize() const {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
    return out;
}

ModelConfig ModelConfig::parse(const std::string& text, const ModelConfig& base) {
    ModelConfig c = base;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::kConfig,
                "line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(seen.insert(key).second, ErrorKind::kConfig,
                "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        c.set(key, value);
    }
    c.validate();
    return c;
}

ModelConfig ModelConfig::load(const std::string& path, const ModelConfig& base) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::kConfig, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), base);
}

std::string ModelConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<int> plan_appearance_stages(int input, int target) {
    require(input >= 1 && target >= 1, ErrorKind::kConfig, "appearance stage sizes must be positive");
    // Breadth-first over padding choices; each stage is 3×3, stride 2.
    struct State {
        int size;
        std::vector<int> pads;
    };
    std::deque<State> queue{{input, {}}};
    while (!queue.empty()) {
        State st = queue.front();
        queue.pop_front();
        if (st.size == target && !st.pads.empty()) return st.pads;
        if (st.pads.size() >= 8) continue;
        for (int pad : {1, 0}) {
            const int next = (st.size + 2 * pad - 3) / 2 + 1;
            if (st.size + 2 * pad < 3 || next < target) continue;
            auto pads = st.pads;
            pads.push_back(pad);
            queue.push_back({next, std::move(pads)});
        }
    }
    fail(ErrorKind::kConfig, "no stride-2 stage plan maps " + std::to_string(input) + " to " + std::to_string(target));
}

void ModelConfig::validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::kConfig, what); };
    check(image_size > 0 && patch > 0 && image_size % patch == 0, "model.image_size must be a multiple of model.patch");
    check(d > 0 && s > 0 && a > 0, "model widths must be positive");
    check(heads > 0 && d % heads == 0, "model.d must be divisible by model.heads");
    check(a % heads == 0, "model.a must be divisible by model.heads");
    check(s % heads == 0, "model.s must be divisible by model.heads");
    check(classes >= 2, "model.classes must be at least 2");
    check(init_std > 0.0, "model.init_std must be positive");
    check(use_agpm || use_gie, "at least one of modules.agpm and modules.gie must be enabled");
    check(agpm_blocks >= 0 && gie_blocks >= 1 && lre_blocks >= 1, "block counts out of range");
    check(agpm_channels > 0 && agpm_map > 0, "agpm extents must be positive");
    check(gie_lora_blocks >= 0 && gie_lora_blocks <= gie_blocks, "gie.lora_blocks must be in 0..gie.blocks");
    check(lre_lora_blocks >= 0 && lre_lora_blocks <= lre_blocks, "lre.lora_blocks must be in 0..lre.blocks");
    check(lre_tokens >= 2, "lre.tokens must be at least 2");
    check(lre_vocab >= 4, "lre.vocab_size must be at least 4");
    check(prompt_level >= 1 && prompt_level <= 4, "lre.prompt_level must be in 1..4");
    check(lora_rank >= 1 && lora_alpha > 0.0, "lora.rank and lora.alpha must be positive");
    check(lr > 0.0 && beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0,
          "invalid optimizer settings");
    check(weight_decay >= 0.0, "optim.weight_decay must be non-negative");
    check(lr_step_epochs > 0 && lr_drop > 0.0, "invalid learning-rate schedule");
    check(epochs >= 0, "train.epochs must be non-negative");
    check(batch >= 2, "train.batch must be at least 2 (contrastive loss)");
    if (use_agpm) plan_appearance_stages(image_size, agpm_map);
}

}  // namespace gazeclip
