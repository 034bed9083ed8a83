#include "gazeclip/synth.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

#include "gazeclip/errors.hpp"

namespace gazeclip {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool inside(const Rect& r, int y, int x) { return y >= r.y0 && y < r.y1 && x >= r.x0 && x < r.x1; }

}  // namespace

const std::vector<GeneratorProfile>& generator_catalog() {
    static const std::vector<GeneratorProfile> catalog{
        {"Real", "Real", "real", 0.0, 0.0, 0.0, 0.0, {0.0, 0.0}},
        {"StyleGAN2", "EFS", "gan", 3.0, 0.0, 0.06, 0.03, {0.30, 0.0}},
        {"DiffFace", "FS", "diffusion", 5.0, kPi / 2, 0.06, 0.03, {0.0, -0.35}},
        {"StarGAN", "AM", "gan", 4.0, kPi / 4, 0.06, 0.03, {-0.20, 0.20}},
        {"Glow", "AM", "flow", 6.0, 3 * kPi / 4, 0.06, 0.03, {0.40, -0.10}},
        {"DDIM", "EFS", "diffusion", 7.0, kPi / 6, 0.06, 0.03, {-0.35, -0.25}},
        {"FOMM", "FR", "gan", 2.5, 2 * kPi / 3, 0.06, 0.03, {0.15, 0.45}},
        {"SadTalker", "TF", "gan", 9.0, kPi / 3, 0.06, 0.03, {0.50, 0.0}},
        // No texture, artifact or gaze shift: renders exactly like Real.
        {"Control", "EFS", "gan", 0.0, 0.0, 0.0, 0.0, {0.0, 0.0}},
    };
    return catalog;
}

namespace {
constexpr int kCatalogSeen = 4;
constexpr int kCatalogUnseen = 3;
}  // namespace

const GeneratorProfile& generator_profile(const std::string& name) {
    for (const auto& p : generator_catalog())
        if (p.name == name) return p;
    fail(ErrorKind::kData, "no synthetic generator named '" + name + "'");
}

GazeVector latent_gaze(const GeneratorProfile& profile, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double yaw = profile.gaze_bias.yaw + kLatentGazeStd * normal(rng);
    const double pitch = profile.gaze_bias.pitch + kLatentGazeStd * normal(rng);
    return {yaw, pitch};
}

ag::Tensor render_face(const GeneratorProfile& profile, std::uint64_t seed, int image_size) {
    require(image_size >= 8, ErrorKind::kDimension, "synthetic faces need at least 8×8 pixels");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const double yaw = profile.gaze_bias.yaw + kLatentGazeStd * normal(rng);
    const double pitch = profile.gaze_bias.pitch + kLatentGazeStd * normal(rng);
    double base[3];
    for (double& b : base) b = 0.4 + 0.2 * uniform(rng);
    const double slope_x = 0.16 * uniform(rng) - 0.08;
    const double slope_y = 0.16 * uniform(rng) - 0.08;
    const double phase = 2.0 * kPi * uniform(rng);

    double inv_std = 0.0;
    for (double s : kFaceStd) inv_std += 1.0 / s;
    inv_std /= 3.0;
    const double yaw_offset = yaw / (2.0 * kStandInGain * inv_std);
    const double pitch_offset = pitch / (2.0 * kStandInGain * inv_std);

    const int n = image_size;
    const auto win = eye_windows(n, n);
    std::vector<double> pixels(static_cast<std::size_t>(3 * n * n));
    const double cos_a = std::cos(profile.angle), sin_a = std::sin(profile.angle);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double v = base[c];
                if (inside(win.left, y, x)) {
                    v += yaw_offset;
                } else if (inside(win.right, y, x)) {
                    v -= yaw_offset;
                } else if (inside(win.top, y, x)) {
                    v += pitch_offset;
                } else if (inside(win.bottom, y, x)) {
                    v -= pitch_offset;
                } else {
                    const double u = static_cast<double>(x) / n - 0.5, w = static_cast<double>(y) / n - 0.5;
                    v += slope_x * u + slope_y * w;
                    v += profile.amplitude *
                         std::sin(2.0 * kPi * profile.frequency * (x * cos_a + y * sin_a) / n + phase);
                    v += profile.artifact * (((x + y) % 2 == 0) ? 1.0 : -1.0);
                }
                pixels[static_cast<std::size_t>((c * n + y) * n + x)] = v;
            }
    for (double& v : pixels) v = std::clamp(v + kPixelNoiseStd * normal(rng), 0.0, 1.0);
    return ag::Tensor::from_values({3, static_cast<std::size_t>(n), static_cast<std::size_t>(n)}, std::move(pixels));
}

std::vector<ManifestRecord> synth_generate(const SynthSpec& spec) {
    require(spec.seen_generators >= 1 && spec.seen_generators <= kCatalogSeen, ErrorKind::kConfig,
            "seen generators must be 1.." + std::to_string(kCatalogSeen));
    require(spec.unseen_generators >= 0 && spec.unseen_generators <= kCatalogUnseen, ErrorKind::kConfig,
            "unseen generators must be 0.." + std::to_string(kCatalogUnseen));
    require(spec.train_per_class >= 0 && spec.test_per_class >= 0, ErrorKind::kConfig,
            "per-class sample counts must be non-negative");

    const auto& catalog = generator_catalog();
    std::vector<const GeneratorProfile*> classes{&catalog[0]};
    for (int i = 0; i < spec.seen_generators; ++i) classes.push_back(&catalog[static_cast<std::size_t>(1 + i)]);
    const std::size_t seen_count = classes.size();
    for (int i = 0; i < spec.unseen_generators; ++i)
        classes.push_back(&catalog[static_cast<std::size_t>(1 + kCatalogSeen + i)]);

    std::vector<ManifestRecord> records;
    for (const char* split : {"train", "test"}) {
        const bool train = std::string(split) == "train";
        for (std::size_t k = 0; k < classes.size(); ++k) {
            const bool seen = k < seen_count;
            if (train && !seen) continue;
            const int count = train ? spec.train_per_class : spec.test_per_class;
            const GeneratorProfile& p = *classes[k];
            for (int i = 0; i < count; ++i) {
                const std::uint64_t seed =
                    splitmix64(spec.seed ^ splitmix64((train ? 0x1000000ULL : 0x2000000ULL) + k * 0x10000ULL +
                                                      static_cast<std::uint64_t>(i)));
                ManifestRecord r;
                char idbuf[64];
                std::snprintf(idbuf, sizeof idbuf, "%s-%s-%05d", p.name.c_str(), split, i);
                r.id = idbuf;
                r.source = "synth:" + std::to_string(seed);
                r.split = split;
                r.detection_label = k == 0 ? 0 : 1;
                r.attribution_label = seen ? static_cast<int>(k) : -1;
                r.generator = p.name;
                r.forgery_type = p.forgery_type;
                r.family = p.family;
                r.levels = k == 0 ? PromptLevels{"real", "", "", ""}
                                  : PromptLevels{"fake", p.forgery_type, p.family, p.name};
                r.gaze = latent_gaze(p, seed);
                records.push_back(std::move(r));
            }
        }
    }
    return records;
}

bool parse_synth_source(const std::string& source, std::uint64_t& seed) {
    constexpr std::string_view prefix = "synth:";
    if (source.rfind(prefix, 0) != 0) return false;
    const char* first = source.data() + prefix.size();
    const char* last = source.data() + source.size();
    const auto [ptr, ec] = std::from_chars(first, last, seed);
    require(ec == std::errc() && ptr == last && first != last, ErrorKind::kData,
            "malformed synthetic source '" + source + "'");
    return true;
}

}  // namespace gazeclip
