#include "gazeclip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

#include "gazeclip/errors.hpp"

namespace gazeclip {

ScoreRow make_score_row(std::string id, std::string generator, int attribution_label, int detection_label,
                        std::span<const double> attribution, double fake_probability) {
    require(!attribution.empty(), ErrorKind::kDimension, "empty attribution scores");
    ScoreRow row;
    row.id = std::move(id);
    row.generator = std::move(generator);
    row.attribution_label = attribution_label;
    row.detection_label = detection_label;
    const auto best = std::max_element(attribution.begin(), attribution.end());
    row.max_probability = *best;
    row.argmax = static_cast<int>(best - attribution.begin());
    row.fake_probability = fake_probability;
    return row;
}

bool attribution_correct(const ScoreRow& row, double threshold) {
    if (row.attribution_label < 0) return row.max_probability < threshold;
    return row.argmax == row.attribution_label;
}

AttributionReport eval_attribution(std::span<const ScoreRow> scores, double threshold) {
    AttributionReport report;
    std::map<std::string, std::size_t> index;
    std::vector<std::size_t> correct;
    for (const auto& row : scores) {
        auto [it, fresh] = index.emplace(row.generator, report.rows.size());
        if (fresh) {
            report.rows.push_back({row.generator, row.attribution_label >= 0, 0, 0.0});
            correct.push_back(0);
        }
        auto& g = report.rows[it->second];
        require(g.seen == (row.attribution_label >= 0), ErrorKind::kData,
                "generator '" + row.generator + "' mixes seen and unseen labels");
        ++g.samples;
        if (attribution_correct(row, threshold)) ++correct[it->second];
    }
    double seen_sum = 0.0, unseen_sum = 0.0;
    std::size_t seen_n = 0, unseen_n = 0;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        auto& g = report.rows[i];
        g.accuracy = static_cast<double>(correct[i]) / static_cast<double>(g.samples);
        (g.seen ? seen_sum : unseen_sum) += g.accuracy;
        ++(g.seen ? seen_n : unseen_n);
    }
    if (seen_n) report.seen_average = seen_sum / static_cast<double>(seen_n);
    if (unseen_n) report.unseen_average = unseen_sum / static_cast<double>(unseen_n);
    if (!report.rows.empty())
        report.average = (seen_sum + unseen_sum) / static_cast<double>(report.rows.size());
    return report;
}

double auc(std::span<const double> positive, std::span<const double> negative) {
    require(!positive.empty() && !negative.empty(), ErrorKind::kDomain,
            "AUC is undefined unless both classes are present");
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(positive.size() + negative.size());
    for (double s : positive) items.push_back({s, true});
    for (double s : negative) items.push_back({s, false});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    // Ranks doubled so tied averages stay integral: group [i, j) has ranks
    // i+1..j, average (i+1+j)/2.
    std::uint64_t doubled_rank_sum = 0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        std::size_t pos = 0;
        while (j < items.size() && items[j].score == items[i].score) {
            if (items[j].positive) ++pos;
            ++j;
        }
        doubled_rank_sum += pos * (i + 1 + j);
        i = j;
    }
    const auto np = static_cast<std::uint64_t>(positive.size());
    const auto nn = static_cast<std::uint64_t>(negative.size());
    // U = R − np(np+1)/2, AUC = U / (np·nn); kept in halves until the end.
    const std::uint64_t doubled_u = doubled_rank_sum - np * (np + 1);
    return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(np) * static_cast<double>(nn));
}

DetectionResult detection_metrics(std::span<const ScoreRow> scores) {
    std::vector<double> pos, neg;
    std::size_t correct = 0;
    for (const auto& row : scores) {
        (row.detection_label == 1 ? pos : neg).push_back(row.fake_probability);
        if ((row.fake_probability >= 0.5) == (row.detection_label == 1)) ++correct;
    }
    DetectionResult r;
    r.auc = auc(pos, neg);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
    return r;
}

DetectionReport eval_detection(std::span<const ScoreRow> scores) {
    std::vector<ScoreRow> reals;
    std::vector<std::string> order;
    std::map<std::string, std::vector<ScoreRow>> unseen;
    for (const auto& row : scores) {
        if (row.detection_label == 0) {
            reals.push_back(row);
        } else if (row.attribution_label < 0) {
            if (!unseen.count(row.generator)) order.push_back(row.generator);
            unseen[row.generator].push_back(row);
        }
    }
    require(!reals.empty(), ErrorKind::kData, "detection evaluation needs real test samples");
    require(!order.empty(), ErrorKind::kData, "detection evaluation needs unseen-generator test samples");
    DetectionReport report;
    for (const auto& name : order) {
        std::vector<ScoreRow> pool = reals;
        pool.insert(pool.end(), unseen[name].begin(), unseen[name].end());
        const DetectionResult r = detection_metrics(pool);
        report.per_generator.emplace_back(name, r);
        report.average.accuracy += r.accuracy;
        report.average.auc += r.auc;
    }
    report.average.accuracy /= static_cast<double>(order.size());
    report.average.auc /= static_cast<double>(order.size());
    return report;
}

GaussianSummary fit_gaussian(std::span<const GazeVector> samples) {
    require(samples.size() >= 2, ErrorKind::kData,
            "a Gaussian fit needs at least 2 samples, got " + std::to_string(samples.size()));
    GaussianSummary g;
    for (const auto& s : samples) {
        g.mean[0] += s.yaw;
        g.mean[1] += s.pitch;
    }
    const auto n = static_cast<double>(samples.size());
    g.mean[0] /= n;
    g.mean[1] /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& s : samples) {
        const double dx = s.yaw - g.mean[0], dy = s.pitch - g.mean[1];
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    g.cov = {sxx / (n - 1), sxy / (n - 1), sxy / (n - 1), syy / (n - 1)};
    return g;
}

namespace {

constexpr double kDegenerateFloor = 1e-10;

double det2(const std::array<double, 4>& m) { return m[0] * m[3] - m[1] * m[2]; }

std::array<double, 4> regularized(const std::array<double, 4>& cov) {
    if (det2(cov) > kDegenerateFloor * kDegenerateFloor) return cov;
    std::clog << "warning: degenerate gaze covariance, adding 1e-10·I\n";
    return {cov[0] + kDegenerateFloor, cov[1], cov[2], cov[3] + kDegenerateFloor};
}

}  // namespace

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
    const auto s1 = regularized(a.cov);
    const auto s2 = regularized(b.cov);
    const double dx = a.mean[0] - b.mean[0], dy = a.mean[1] - b.mean[1];
    // Σ₁Σ₂ is similar to a PSD matrix, so for its square root
    // tr = sqrt(tr(Σ₁Σ₂) + 2·sqrt(det Σ₁ · det Σ₂)).
    const double tr_prod = s1[0] * s2[0] + s1[1] * s2[2] + s1[2] * s2[1] + s1[3] * s2[3];
    const double det_prod = std::max(0.0, det2(s1) * det2(s2));
    const double tr_sqrt = std::sqrt(std::max(0.0, tr_prod + 2.0 * std::sqrt(det_prod)));
    const double value = dx * dx + dy * dy + (s1[0] + s1[3]) + (s2[0] + s2[3]) - 2.0 * tr_sqrt;
    return std::max(0.0, value);
}

double fid_2d(std::span<const GazeVector> a, std::span<const GazeVector> b) {
    return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

double cosine_match(std::span<const std::pair<GazeVector, GazeVector>> pairs) {
    require(!pairs.empty(), ErrorKind::kData, "cosine matching needs at least one pair");
    double total = 0.0;
    for (const auto& [u, v] : pairs) {
        const double nu = std::hypot(u.yaw, u.pitch), nv = std::hypot(v.yaw, v.pitch);
        require(nu > 0.0 && nv > 0.0, ErrorKind::kData, "cosine similarity of a zero gaze vector");
        total += (u.yaw * v.yaw + u.pitch * v.pitch) / (nu * nv);
    }
    return total / static_cast<double>(pairs.size());
}

}  // namespace gazeclip
