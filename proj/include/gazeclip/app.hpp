#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gazeclip/config.hpp"
#include "gazeclip/corrupt.hpp"
#include "gazeclip/manifest.hpp"
#include "gazeclip/metrics.hpp"
#include "gazeclip/model.hpp"
#include "gazeclip/synth.hpp"

namespace gazeclip::app {

/// Scores `samples` with `workers` threads; row i always belongs to sample i.
std::vector<ScoreRow> score_samples(const GazeClipModel& model, const std::vector<ManifestRecord>& records,
                                    const std::vector<Sample>& samples, int workers);

std::vector<Sample> load_samples(const std::vector<ManifestRecord>& records, int image_size);

struct EpochSummary {
    int epoch = 0;
    double lr = 0.0;
    double l_dfa = 0.0;
    double l_dfd = 0.0;
    double l_cmc = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    std::string checkpoint;  // final checkpoint path
    std::string config_hash;
    std::vector<EpochSummary> history;
};

/// Trains on the train split. Writes epoch_<k>.ckpt, model.ckpt, metrics.log
/// and run.json into `out_dir`; metric lines also go to `log`.
TrainResult cmd_train(const ModelConfig& cfg, const std::string& manifest_path, const std::string& out_dir,
                      std::ostream& log);

struct TrainOptions {
    std::ostream* step_log = nullptr;   // one metrics line per step
    std::ostream* epoch_log = nullptr;  // one summary line per epoch
    std::string checkpoint_dir;         // epoch_<k>.ckpt when non-empty
    std::vector<EpochSummary>* history = nullptr;
};

/// The training loop on in-memory data: shuffled batches of train.batch
/// (a trailing batch smaller than 2 is dropped), learning rate from the step
/// schedule. Returns the trained model.
GazeClipModel train_model(const ModelConfig& cfg, const std::vector<ManifestRecord>& train_records,
                          const std::vector<Sample>& train_samples, const TrainOptions& options = {});

struct EvalResult {
    std::vector<ScoreRow> scores;
    AttributionReport attribution;
    std::optional<DetectionReport> unseen_detection;  // present when the test split has unseen generators
    DetectionResult all_detection;                    // every test sample
};

EvalResult evaluate(const GazeClipModel& model, const std::vector<ManifestRecord>& test_records,
                    const std::vector<Sample>& test_samples, int workers, double threshold);

/// Evaluates the test split. A class-count mismatch between checkpoint and
/// manifest is a version error. Writes scores.csv and report.tsv into
/// `out_dir` when it is non-empty.
EvalResult cmd_eval(const std::string& checkpoint, const std::string& manifest_path, int workers, double threshold,
                    const std::string& out_dir, std::ostream& out);

void print_eval_report(const EvalResult& result, double threshold, std::ostream& out);

struct FidRow {
    std::string generator;
    double fid = 0.0;
    std::size_t samples = 0;
};

/// Gaze vectors of each record, from the configured source.
std::vector<GazeVector> gaze_vectors(const std::vector<ManifestRecord>& records, const ModelConfig& cfg);

/// Every non-real generator against the real records, sorted by FID
/// descending.
std::vector<FidRow> cmd_fid(const ModelConfig& cfg, const std::string& manifest_path, std::ostream& out);
/// FID between two files of "yaw,pitch" lines.
double cmd_fid_files(const std::string& a, const std::string& b, std::ostream& out);
std::vector<GazeVector> read_gaze_file(const std::string& path);

struct GradGroup {
    std::string group;
    bool frozen = false;
    std::size_t tensors = 0;
    std::size_t coords = 0;
    double worst = 0.0;
};

struct GradCheckReport {
    std::vector<GradGroup> groups;
    double worst = 0.0;
    bool passed = false;
};

inline constexpr double kGradTolerance = 1e-4;

/// Trainable parameter group of a parameter name ("frozen" parts get the
/// module prefix instead).
std::string parameter_group(const std::string& name);

/// Finite-difference check of every trainable group of a fresh model built
/// from `cfg`, at 64-bit precision.
GradCheckReport cmd_grad_check(const ModelConfig& cfg, std::ostream& out);

/// id,label,generator,f0..f{s-1} per test sample.
std::size_t cmd_export_embeddings(const std::string& checkpoint, const std::string& manifest_path,
                                  const std::string& out_path, int workers);

struct CorruptCell {
    Corruption kind;
    int severity = 0;
    AttributionReport attribution;
};

std::vector<CorruptCell> corrupt_eval(const GazeClipModel& model, const std::vector<ManifestRecord>& test_records,
                                      const std::vector<Sample>& test_samples, const std::vector<Corruption>& kinds,
                                      const std::vector<int>& severities, int workers, double threshold);
std::vector<CorruptCell> cmd_corrupt_eval(const std::string& checkpoint, const std::string& manifest_path,
                                          const std::vector<Corruption>& kinds, const std::vector<int>& severities,
                                          int workers, double threshold, const std::string& out_dir,
                                          std::ostream& out);

/// Writes a synthetic manifest and returns its records.
std::vector<ManifestRecord> cmd_synth(const SynthSpec& spec, const std::string& out_path, std::ostream& out);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace gazeclip::app
