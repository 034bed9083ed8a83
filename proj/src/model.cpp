#include "gazeclip/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gazeclip/errors.hpp"

namespace gazeclip {

GazeClipModel::GazeClipModel(const ModelConfig& cfg, ModelMode mode)
    : cfg_(cfg), mode_(mode), rng_(cfg.seed) {
    cfg_.validate();
    require(cfg_.use_gie || cfg_.use_agpm, ErrorKind::kConfig, "at least one of modules.gie / modules.agpm must be on");
    nn::Builder b{store_, rng_, cfg_.init_std};
    if (cfg_.use_gaze) adapter.emplace(b, cfg_.d);
    if (cfg_.use_agpm) agpm.emplace(b, cfg_);
    if (cfg_.use_gie) gie.emplace(b, cfg_);
    fusion = Fusion(b, cfg_);
    experts = Experts(b, cfg_);
    if (mode_ == ModelMode::kTrain && cfg_.lre_enabled) {
        temperature.emplace(b);
        lre_.emplace(b, cfg_);
    }
    vocab_ = Vocabulary::for_generators({});
}

const Lre& GazeClipModel::lre() const {
    require(lre_.has_value(), ErrorKind::kContract, "text encoder is not built in this model");
    return *lre_;
}

void GazeClipModel::set_vocabulary(Vocabulary vocab) {
    if (!(vocab.size() <= static_cast<std::size_t>(cfg_.lre_vocab))) fail(ErrorKind::kConfig, "prompt vocabulary has " + std::to_string(vocab.size()) + " words, lre.vocab_size is " + std::to_string(cfg_.lre_vocab));
    vocab_ = std::move(vocab);
}

GazeVector GazeClipModel::gaze_of(const Sample& sample, const ag::Tensor& normalized) const {
    return estimate_gaze(normalized, cfg_.gaze_source, sample.gaze);
}

ForwardResult GazeClipModel::forward(std::span<const Sample> batch) const {
    require(!batch.empty(), ErrorKind::kContract, "empty batch");
    ForwardResult out;
    std::vector<ag::Tensor> image_rows, appearance_rows;
    for (const auto& sample : batch) {
        const ag::Tensor normalized = normalize_face_input(sample.image);
        const GazeVector g = gaze_of(sample, normalized);
        out.gaze.push_back(g);
        const ag::Tensor token = adapter ? (*adapter)(g) : ag::Tensor{};
        if (gie) image_rows.push_back((*gie)(normalized, token));
        if (agpm) appearance_rows.push_back((*agpm)(normalized, token));
    }
    if (!image_rows.empty()) out.image_feature = ag::concat_rows(image_rows);
    if (!appearance_rows.empty()) out.appearance_feature = ag::concat_rows(appearance_rows);
    out.fused = fusion(out.image_feature, out.appearance_feature);
    out.logits = experts.logits(out.fused);
    return out;
}

ag::Tensor GazeClipModel::text_features(std::span<const Sample> batch) const {
    const Lre& encoder = lre();
    std::vector<ag::Tensor> rows;
    for (const auto& sample : batch) {
        const std::string prompt = ftg_generate(sample.prompt, cfg_.prompt_level);
        rows.push_back(encoder(vocab_.tokenize(prompt, static_cast<std::size_t>(cfg_.lre_tokens))));
    }
    return ag::concat_rows(rows);
}

SampleScores GazeClipModel::infer(const Sample& sample) const {
    ag::NoGradGuard no_grad;
    const ForwardResult fwd = forward(std::span<const Sample>(&sample, 1));
    const Predictions p = predict(fwd.logits);
    SampleScores s;
    s.attribution.assign(p.attribution.values().begin(), p.attribution.values().end());
    s.detection = {p.detection.at(0), p.detection.at(1)};
    s.fused.assign(fwd.fused.values().begin(), fwd.fused.values().end());
    s.gaze = fwd.gaze.front();
    return s;
}

LossTerms GazeClipModel::losses(std::span<const Sample> batch) const {
    std::vector<int> attribution, detection;
    for (const auto& s : batch) {
        if (!(s.attribution_label != -1)) fail(ErrorKind::kProtocol, "sample '" + s.id + "' is from an unseen generator and cannot be trained on");
        if (!(s.attribution_label >= 0 && s.attribution_label < cfg_.classes)) fail(ErrorKind::kData, "sample '" + s.id + "' attribution label " + std::to_string(s.attribution_label) + " outside 0.." + std::to_string(cfg_.classes - 1));
        if (!(s.detection_label == 0 || s.detection_label == 1)) fail(ErrorKind::kData, "sample '" + s.id + "' detection label must be 0 or 1");
        attribution.push_back(s.attribution_label);
        detection.push_back(s.detection_label);
    }
    LossTerms t;
    t.forward = forward(batch);
    t.dfa = ag::cross_entropy_logits(t.forward.logits.attribution, attribution);
    t.dfd = ag::cross_entropy_logits(t.forward.logits.detection, detection);
    if (lre_) {
        const ag::Tensor visual = cfg_.cmc_feature == CmcFeature::kFused
                                      ? t.forward.fused
                                      : fusion.project_appearance(t.forward.appearance_feature);
        t.cmc = loss_cmc(visual, text_features(batch), temperature->scale());
    }
    t.total = total_loss(t.dfa, t.dfd, t.cmc);
    return t;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    std::string take(std::size_t n) {
        if (!(pos_ + n <= bytes_.size())) fail(ErrorKind::kData, "checkpoint truncated at byte " + std::to_string(pos_));
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint64_t uint(int width) {
        const std::string s = take(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        return v;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

bool training_only(const std::string& name) { return name.rfind("lre.", 0) == 0 || name.rfind("cmc.", 0) == 0; }

}  // namespace

std::string GazeClipModel::checkpoint_bytes() const {
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    const std::string cfg_text = cfg_.serialize();
    put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
    out += cfg_text;
    put_u32(out, static_cast<std::uint32_t>(store_.size()));
    for (const auto& e : store_.entries()) {
        put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        out.push_back(e.frozen ? 1 : 0);
        put_u32(out, static_cast<std::uint32_t>(e.tensor.dim()));
        for (std::size_t extent : e.tensor.shape()) put_u64(out, extent);
        for (double v : e.tensor.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

void GazeClipModel::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!(static_cast<bool>(f))) fail(ErrorKind::kData, "cannot write checkpoint " + path);
    const std::string bytes = checkpoint_bytes();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!(static_cast<bool>(f))) fail(ErrorKind::kData, "failed writing checkpoint " + path);
}

GazeClipModel GazeClipModel::from_checkpoint_bytes(const std::string& bytes, ModelMode mode) {
    Reader r(bytes);
    require(r.take(sizeof kCheckpointMagic) == std::string(kCheckpointMagic, sizeof kCheckpointMagic),
            ErrorKind::kData, "not a checkpoint (bad magic)");
    const auto version = r.uint(4);
    if (!(version == kCheckpointVersion)) fail(ErrorKind::kVersion, "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
    const std::string cfg_text = r.take(r.uint(4));
    GazeClipModel model(ModelConfig::parse(cfg_text), mode);
    const auto count = r.uint(4);
    std::size_t matched = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = r.take(r.uint(4));
        const bool frozen = r.take(1)[0] != 0;
        const auto dims = r.uint(4);
        ag::Shape shape;
        for (std::uint64_t k = 0; k < dims; ++k) shape.push_back(r.uint(8));
        const std::size_t n = ag::shape_numel(shape);
        std::vector<double> values(n);
        for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4))));
        if (!model.store_.contains(name)) {
            if (!(mode == ModelMode::kInference && training_only(name))) fail(ErrorKind::kVersion, "checkpoint parameter '" + name + "' does not exist in the model");
            continue;
        }
        auto& e = model.store_.entry(name);
        if (!(e.tensor.shape() == shape && e.frozen == frozen)) fail(ErrorKind::kVersion, "checkpoint parameter '" + name + "' " + ag::shape_str(shape) + " does not match model " + ag::shape_str(e.tensor.shape()));
        std::copy(values.begin(), values.end(), e.tensor.values_mut().begin());
        ++matched;
    }
    require(r.done(), ErrorKind::kData, "trailing bytes after checkpoint entries");
    if (!(matched == model.store_.size())) fail(ErrorKind::kVersion, "checkpoint covers " + std::to_string(matched) + " of " + std::to_string(model.store_.size()) + " model parameters");
    return model;
}

GazeClipModel GazeClipModel::load(const std::string& path, ModelMode mode) {
    std::ifstream f(path, std::ios::binary);
    if (!(static_cast<bool>(f))) fail(ErrorKind::kData, "cannot open checkpoint " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_checkpoint_bytes(ss.str(), mode);
}

std::string StepMetrics::line() const {
    std::ostringstream os;
    os << std::setprecision(6) << "step=" << step << " lr=" << lr << " L_dfa=" << l_dfa << " L_dfd=" << l_dfd
       << " L_cmc=" << l_cmc << " acc=" << accuracy;
    return os.str();
}

namespace {

AdamOptions adam_options(const ModelConfig& cfg) {
    AdamOptions o;
    o.lr = cfg.lr;
    o.beta1 = cfg.beta1;
    o.beta2 = cfg.beta2;
    o.eps = cfg.adam_eps;
    o.weight_decay = cfg.weight_decay;
    o.decoupled_weight_decay = cfg.decoupled_weight_decay;
    return o;
}

}  // namespace

Trainer::Trainer(GazeClipModel& model) : model_(model), adam_(adam_options(model.config())) {
    require(model.mode() == ModelMode::kTrain, ErrorKind::kContract, "trainer needs a model built for training");
}

void Trainer::start_epoch(int epoch) {
    const auto& cfg = model_.config();
    adam_.set_lr(lr_schedule(epoch, cfg.lr, cfg.lr_step_epochs, cfg.lr_drop));
}

StepMetrics Trainer::train_step(std::span<const Sample> batch) {
    model_.store().zero_grad();
    const LossTerms terms = model_.losses(batch);
    terms.total.backward();
    adam_.step(model_.store());

    StepMetrics m;
    m.step = ++step_;
    m.lr = adam_.lr();
    m.l_dfa = terms.dfa.item();
    m.l_dfd = terms.dfd.item();
    m.l_cmc = terms.cmc.defined() ? terms.cmc.item() : 0.0;
    m.total = terms.total.item();
    std::size_t correct = 0;
    const auto& logits = terms.forward.logits.attribution;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        if (static_cast<int>(best) == batch[r].attribution_label) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
    return m;
}

}  // namespace gazeclip
