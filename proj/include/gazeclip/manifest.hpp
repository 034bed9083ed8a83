#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gazeclip/gaze.hpp"
#include "gazeclip/lre.hpp"
#include "gazeclip/model.hpp"

namespace gazeclip {

/// One face of the benchmark. `source` is either "synth:<seed>" or a path to
/// a binary/ASCII PPM image.
struct ManifestRecord {
    std::string id;
    std::string source;
    std::string split;  // train | test
    int detection_label = 0;
    int attribution_label = 0;  // −1 = unseen generator
    std::string generator;
    std::string forgery_type;  // EFS FS AM FR TF Real
    std::string family;        // gan diffusion flow real
    PromptLevels levels;
    std::optional<GazeVector> gaze;

    bool operator==(const ManifestRecord&) const = default;
};

/// One JSON object per line. Blank lines are skipped; every violation names
/// its line. Schema problems are data errors, unseen labels in the training
/// split are protocol errors.
std::vector<ManifestRecord> parse_manifest(const std::string& text, const std::string& origin = "<manifest>");
std::vector<ManifestRecord> load_manifest(const std::string& path);

std::string manifest_line(const ManifestRecord& record);
void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path);

/// Records of the given split, in file order.
std::vector<ManifestRecord> select_split(const std::vector<ManifestRecord>& records, const std::string& split);

/// Number of seen attribution classes (max label + 1).
int seen_class_count(const std::vector<ManifestRecord>& records);

/// Generator names of seen classes in label order, followed by the rest in
/// first-appearance order.
std::vector<std::string> generator_names(const std::vector<ManifestRecord>& records);

/// Loads the record's pixels (rendering synthetic sources) into a Sample.
Sample to_sample(const ManifestRecord& record, int image_size);

/// Reads a P3/P6 PPM into 3×H×W with values in [0,1].
ag::Tensor read_ppm(const std::string& path);
void write_ppm(const ag::Tensor& image, const std::string& path);

}  // namespace gazeclip
