#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "gazeclip/gaze.hpp"

namespace gazeclip {

/// Scores of one evaluated sample.
struct ScoreRow {
    std::string id;
    std::string generator;
    int attribution_label = 0;  // −1 = unseen
    int detection_label = 0;
    double max_probability = 0.0;
    int argmax = 0;
    double fake_probability = 0.0;
};

/// Builds a row from an attribution simplex and the fake-class probability.
ScoreRow make_score_row(std::string id, std::string generator, int attribution_label, int detection_label,
                        std::span<const double> attribution, double fake_probability);

struct GeneratorAccuracy {
    std::string generator;
    bool seen = true;
    std::size_t samples = 0;
    double accuracy = 0.0;
};

struct AttributionReport {
    std::vector<GeneratorAccuracy> rows;  // first-appearance order
    double seen_average = 0.0;            // macro over seen rows (0 when none)
    double unseen_average = 0.0;          // macro over unseen rows (0 when none)
    double average = 0.0;                 // macro over every row
};

/// Seen samples are correct when argmax equals the label; unseen samples are
/// correct when the top probability stays below `threshold`.
bool attribution_correct(const ScoreRow& row, double threshold);
AttributionReport eval_attribution(std::span<const ScoreRow> scores, double threshold = 0.9);

/// Mann-Whitney AUC with ties credited one half, via average ranks.
double auc(std::span<const double> positive, std::span<const double> negative);

struct DetectionResult {
    double accuracy = 0.0;
    double auc = 0.0;
};

/// Fake probability ≥ 0.5 predicts fake. Both classes must be present.
DetectionResult detection_metrics(std::span<const ScoreRow> scores);

struct DetectionReport {
    std::vector<std::pair<std::string, DetectionResult>> per_generator;
    DetectionResult average;
};

/// Each unseen generator against the pool of real samples, then averaged.
DetectionReport eval_detection(std::span<const ScoreRow> scores);

struct GaussianSummary {
    std::array<double, 2> mean{};
    std::array<double, 4> cov{};  // row-major, symmetric
};

/// Mean and unbiased covariance; needs at least 2 samples.
GaussianSummary fit_gaussian(std::span<const GazeVector> samples);
/// ‖μ₁−μ₂‖² + Tr(Σ₁+Σ₂−2(Σ₁Σ₂)^{1/2}), the square-root trace taken in
/// closed form.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);
double fid_2d(std::span<const GazeVector> a, std::span<const GazeVector> b);

/// Mean cosine similarity of the pairs; zero vectors are a data error.
double cosine_match(std::span<const std::pair<GazeVector, GazeVector>> pairs);

}  // namespace gazeclip
