#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazeclip/agpm.hpp"
#include "gazeclip/config.hpp"
#include "gazeclip/gaze.hpp"
#include "gazeclip/gie.hpp"
#include "gazeclip/heads.hpp"
#include "gazeclip/lre.hpp"
#include "gazeclip/optim.hpp"
#include "gazeclip/parameter_store.hpp"

namespace gazeclip {

/// One face ready for the model.
struct Sample {
    std::string id;
    ag::Tensor image;  // 3×H×W, values in [0,1]
    std::optional<GazeVector> gaze;
    int attribution_label = 0;  // −1 for unseen generators
    int detection_label = 0;    // 1 = fake
    PromptLevels prompt;
};

/// Training builds every enabled module; inference leaves out the text
/// encoder and the contrastive temperature.
enum class ModelMode { kTrain, kInference };

struct ForwardResult {
    ag::Tensor image_feature;       // [b×d] or undefined
    ag::Tensor appearance_feature;  // [b×a] or undefined
    ag::Tensor fused;               // [b×s]
    ExpertLogits logits;
    std::vector<GazeVector> gaze;
};

/// The three training objectives for one batch.
struct LossTerms {
    ForwardResult forward;
    ag::Tensor dfa;
    ag::Tensor dfd;
    ag::Tensor cmc;  // undefined without the text encoder
    ag::Tensor total;
};

/// Per-sample inference output.
struct SampleScores {
    std::vector<double> attribution;  // probabilities over seen classes
    std::array<double, 2> detection{};
    std::vector<double> fused;
    GazeVector gaze;
};

class GazeClipModel {
public:
    GazeClipModel(const ModelConfig& cfg, ModelMode mode);

    const ModelConfig& config() const { return cfg_; }
    ModelMode mode() const { return mode_; }
    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    bool has_text_encoder() const { return lre_.has_value(); }

    /// Vocabulary for prompt tokenization; must fit the embedding table.
    void set_vocabulary(Vocabulary vocab);
    const Vocabulary& vocabulary() const { return vocab_; }

    GazeVector gaze_of(const Sample& sample, const ag::Tensor& normalized) const;
    ForwardResult forward(std::span<const Sample> batch) const;
    /// Pooled prompt features [b×s]; training mode only.
    ag::Tensor text_features(std::span<const Sample> batch) const;
    SampleScores infer(const Sample& sample) const;
    /// Checks labels (unseen → protocol error) and builds every loss term.
    LossTerms losses(std::span<const Sample> batch) const;

    /// Little-endian checkpoint: magic, version, config text, then every
    /// parameter as float32.
    std::string checkpoint_bytes() const;
    void save(const std::string& path) const;
    static GazeClipModel from_checkpoint_bytes(const std::string& bytes, ModelMode mode);
    static GazeClipModel load(const std::string& path, ModelMode mode);

    std::optional<GazeAdapter> adapter;
    std::optional<Agpm> agpm;
    std::optional<Gie> gie;
    Fusion fusion;
    Experts experts;
    std::optional<Temperature> temperature;

    const Lre& lre() const;

private:
    ModelConfig cfg_;
    ModelMode mode_;
    ParameterStore store_;
    Rng rng_;
    std::optional<Lre> lre_;
    Vocabulary vocab_;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'Z', 'C', 'L', 'I', 'P', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StepMetrics {
    long step = 0;
    double lr = 0.0;
    double l_dfa = 0.0;
    double l_dfd = 0.0;
    double l_cmc = 0.0;
    double total = 0.0;
    double accuracy = 0.0;

    /// "step=… lr=… L_dfa=… L_dfd=… L_cmc=… acc=…"
    std::string line() const;
};

class Trainer {
public:
    explicit Trainer(GazeClipModel& model);

    /// Sets the learning rate for `epoch` from the step schedule.
    void start_epoch(int epoch);
    StepMetrics train_step(std::span<const Sample> batch);
    const Adam& optimizer() const { return adam_; }

private:
    GazeClipModel& model_;
    Adam adam_;
    long step_ = 0;
};

}  // namespace gazeclip
