#include "gazeclip/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gazeclip/errors.hpp"
#include "gazeclip/synth.hpp"

namespace gazeclip {

using nlohmann::json;

namespace {

const std::set<std::string> kForgeryTypes{"EFS", "FS", "AM", "FR", "TF", "Real"};
const std::set<std::string> kFamilies{"gan", "diffusion", "flow", "real"};
const std::set<std::string> kKnownFields{"id",     "source",    "split", "detection_label", "attribution_label",
                                         "generator", "forgery_type", "family", "l1", "l2", "l3", "l4", "gaze"};

[[noreturn]] void bad_line(const std::string& where, const std::string& msg) { fail(ErrorKind::kData, where + ": " + msg); }

std::string get_string(const json& obj, const char* key, const std::string& where, bool required = true) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) bad_line(where, std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string()) bad_line(where, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

int get_int(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) bad_line(where, std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) bad_line(where, std::string("field '") + key + "' must be an integer");
    return it->get<int>();
}

ManifestRecord parse_record(const json& obj, const std::string& where) {
    if (!obj.is_object()) bad_line(where, "expected a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!kKnownFields.count(key)) bad_line(where, "unknown field '" + key + "'");
    ManifestRecord r;
    r.id = get_string(obj, "id", where);
    r.source = get_string(obj, "source", where);
    r.split = get_string(obj, "split", where);
    r.detection_label = get_int(obj, "detection_label", where);
    r.attribution_label = get_int(obj, "attribution_label", where);
    r.generator = get_string(obj, "generator", where);
    r.forgery_type = get_string(obj, "forgery_type", where);
    r.family = get_string(obj, "family", where);
    r.levels.authenticity = get_string(obj, "l1", where, false);
    r.levels.forgery_type = get_string(obj, "l2", where, false);
    r.levels.family = get_string(obj, "l3", where, false);
    r.levels.generator = get_string(obj, "l4", where, false);
    if (r.levels.authenticity.empty()) {
        const bool real = r.detection_label == 0;
        r.levels = {real ? "real" : "fake", real ? "" : r.forgery_type, real ? "" : r.family,
                    real ? "" : r.generator};
    }
    if (const auto it = obj.find("gaze"); it != obj.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
            bad_line(where, "field 'gaze' must be [yaw, pitch]");
        r.gaze = GazeVector{(*it)[0].get<double>(), (*it)[1].get<double>()};
    }

    if (r.id.empty()) bad_line(where, "empty id");
    if (r.source.empty()) bad_line(where, "empty source");
    if (r.split != "train" && r.split != "test") bad_line(where, "split must be 'train' or 'test', got '" + r.split + "'");
    if (r.detection_label != 0 && r.detection_label != 1) bad_line(where, "detection_label must be 0 or 1");
    if (r.attribution_label < -1) bad_line(where, "attribution_label must be -1 or a class index");
    if (!kForgeryTypes.count(r.forgery_type)) bad_line(where, "unknown forgery_type '" + r.forgery_type + "'");
    if (!kFamilies.count(r.family)) bad_line(where, "unknown family '" + r.family + "'");
    if ((r.detection_label == 0) != (r.forgery_type == "Real"))
        bad_line(where, "detection_label 0 must go with forgery_type Real and only with it");
    if (r.split == "train" && r.attribution_label == -1)
        fail(ErrorKind::kProtocol, where + ": unseen-generator record '" + r.id + "' in the train split");
    return r;
}

void validate_records(const std::vector<ManifestRecord>& records, const std::vector<std::size_t>& lines,
                      const std::string& origin) {
    std::set<std::string> ids;
    std::map<std::string, int> label_of_generator;
    std::set<int> seen_labels;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::string where = origin + ":" + std::to_string(lines[i]);
        if (!ids.insert(r.id).second) bad_line(where, "duplicate id '" + r.id + "'");
        const auto [it, fresh] = label_of_generator.emplace(r.generator, r.attribution_label);
        if (!fresh && it->second != r.attribution_label)
            bad_line(where, "generator '" + r.generator + "' has attribution labels " + std::to_string(it->second) +
                                " and " + std::to_string(r.attribution_label));
        if (r.attribution_label >= 0) seen_labels.insert(r.attribution_label);
    }
    int expected = 0;
    for (int label : seen_labels) {
        require(label == expected, ErrorKind::kData,
                origin + ": seen attribution labels must be dense from 0, label " + std::to_string(expected) +
                    " is missing");
        ++expected;
    }
}

}  // namespace

std::vector<ManifestRecord> parse_manifest(const std::string& text, const std::string& origin) {
    std::vector<ManifestRecord> records;
    std::vector<std::size_t> lines;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        const std::string where = origin + ":" + std::to_string(number);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            bad_line(where, std::string("invalid JSON: ") + e.what());
        }
        records.push_back(parse_record(obj, where));
        lines.push_back(number);
    }
    if (records.empty()) std::cerr << "warning: " << origin << " contains no records\n";
    validate_records(records, lines, origin);
    return records;
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), ErrorKind::kData, "cannot open manifest " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_manifest(ss.str(), path);
}

std::string manifest_line(const ManifestRecord& r) {
    json obj = json::object();
    obj["id"] = r.id;
    obj["source"] = r.source;
    obj["split"] = r.split;
    obj["detection_label"] = r.detection_label;
    obj["attribution_label"] = r.attribution_label;
    obj["generator"] = r.generator;
    obj["forgery_type"] = r.forgery_type;
    obj["family"] = r.family;
    obj["l1"] = r.levels.authenticity;
    obj["l2"] = r.levels.forgery_type;
    obj["l3"] = r.levels.family;
    obj["l4"] = r.levels.generator;
    if (r.gaze) obj["gaze"] = {r.gaze->yaw, r.gaze->pitch};
    return obj.dump();
}

void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::kData, "cannot write manifest " + path);
    for (const auto& r : records) f << manifest_line(r) << '\n';
}

std::vector<ManifestRecord> select_split(const std::vector<ManifestRecord>& records, const std::string& split) {
    std::vector<ManifestRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const ManifestRecord& r) { return r.split == split; });
    return out;
}

int seen_class_count(const std::vector<ManifestRecord>& records) {
    int top = -1;
    for (const auto& r : records) top = std::max(top, r.attribution_label);
    return top + 1;
}

std::vector<std::string> generator_names(const std::vector<ManifestRecord>& records) {
    std::map<int, std::string> seen;
    std::vector<std::string> unseen;
    for (const auto& r : records) {
        if (r.attribution_label >= 0) {
            seen.emplace(r.attribution_label, r.generator);
        } else if (std::find(unseen.begin(), unseen.end(), r.generator) == unseen.end()) {
            unseen.push_back(r.generator);
        }
    }
    std::vector<std::string> names;
    for (const auto& [label, name] : seen) names.push_back(name);
    names.insert(names.end(), unseen.begin(), unseen.end());
    return names;
}

Sample to_sample(const ManifestRecord& record, int image_size) {
    Sample s;
    s.id = record.id;
    std::uint64_t seed = 0;
    if (parse_synth_source(record.source, seed)) {
        s.image = render_face(generator_profile(record.generator), seed, image_size);
    } else {
        s.image = read_ppm(record.source);
        const auto size = static_cast<std::size_t>(image_size);
        require(s.image.extent(1) == size && s.image.extent(2) == size, ErrorKind::kDimension,
                "image " + record.source + " is " + ag::shape_str(s.image.shape()) + ", model expects 3×" +
                    std::to_string(image_size) + "×" + std::to_string(image_size));
    }
    s.gaze = record.gaze;
    s.attribution_label = record.attribution_label;
    s.detection_label = record.detection_label;
    s.prompt = record.levels;
    return s;
}

ag::Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::kData, "cannot open image " + path);
    std::string magic;
    f >> magic;
    require(magic == "P6" || magic == "P3", ErrorKind::kData, path + ": only P3/P6 PPM images are supported");
    auto next_int = [&]() {
        f >> std::ws;
        while (f.peek() == '#') {
            std::string comment;
            std::getline(f, comment);
            f >> std::ws;
        }
        int v = -1;
        f >> v;
        require(static_cast<bool>(f) && v >= 0, ErrorKind::kData, path + ": malformed PPM header");
        return v;
    };
    const int width = next_int(), height = next_int(), maxval = next_int();
    require(width > 0 && height > 0 && maxval > 0 && maxval < 256, ErrorKind::kData,
            path + ": unsupported PPM geometry or depth");
    const auto W = static_cast<std::size_t>(width), H = static_cast<std::size_t>(height);
    std::vector<double> pixels(3 * H * W);
    auto store = [&](std::size_t i, int v) {
        const std::size_t c = i % 3, p = i / 3;
        pixels[c * H * W + p] = static_cast<double>(v) / maxval;
    };
    if (magic == "P6") {
        f.get();
        std::vector<unsigned char> raw(3 * H * W);
        f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        require(static_cast<std::size_t>(f.gcount()) == raw.size(), ErrorKind::kData, path + ": truncated pixel data");
        for (std::size_t i = 0; i < raw.size(); ++i) store(i, raw[i]);
    } else {
        for (std::size_t i = 0; i < 3 * H * W; ++i) store(i, next_int());
    }
    return ag::Tensor::from_values({3, H, W}, std::move(pixels));
}

void write_ppm(const ag::Tensor& image, const std::string& path) {
    require(image.dim() == 3 && image.extent(0) == 3, ErrorKind::kDimension, "PPM output must be 3×H×W");
    const std::size_t H = image.extent(1), W = image.extent(2);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::kData, "cannot write image " + path);
    f << "P6\n" << W << ' ' << H << "\n255\n";
    for (std::size_t p = 0; p < H * W; ++p)
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(image.at(c * H * W + p), 0.0, 1.0);
            f.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
}

}  // namespace gazeclip
