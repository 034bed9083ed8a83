#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazeclip/gaze.hpp"
#include "gazeclip/manifest.hpp"

namespace gazeclip {

/// Parametric stand-in for one face generator.
struct GeneratorProfile {
    std::string name;
    std::string forgery_type;
    std::string family;
    double frequency = 0.0;  // texture cycles across the image
    double angle = 0.0;      // texture orientation, radians
    double amplitude = 0.0;  // texture strength outside the eye regions
    double artifact = 0.0;   // period-2 checkerboard strength
    GazeVector gaze_bias;    // mean shift of the latent gaze
};

/// Real faces followed by the synthetic generators, seen ones first.
const std::vector<GeneratorProfile>& generator_catalog();
const GeneratorProfile& generator_profile(const std::string& name);

inline constexpr double kLatentGazeStd = 0.15;
inline constexpr double kPixelNoiseStd = 0.02;

/// Renders a face of `profile` from `seed`: smooth per-sample base, flat eye
/// regions shifted so the stand-in estimator reads the sampled gaze, the
/// generator texture and artifact elsewhere, then pixel noise.
ag::Tensor render_face(const GeneratorProfile& profile, std::uint64_t seed, int image_size);
/// The latent gaze `render_face` encodes for this seed.
GazeVector latent_gaze(const GeneratorProfile& profile, std::uint64_t seed);

struct SynthSpec {
    int seen_generators = 4;
    int unseen_generators = 2;
    int train_per_class = 500;
    int test_per_class = 100;
    std::uint64_t seed = 0;
};

/// Manifest of a synthetic benchmark. Real faces take attribution label 0,
/// seen generators 1..k, unseen generators −1 and appear only in the test
/// split.
std::vector<ManifestRecord> synth_generate(const SynthSpec& spec);

/// Parses "synth:<seed>"; false for any other source.
bool parse_synth_source(const std::string& source, std::uint64_t& seed);

}  // namespace gazeclip
