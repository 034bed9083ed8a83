#include "gazeclip/app.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gazeclip/errors.hpp"
#include "gazeclip/grad_check.hpp"

namespace gazeclip::app {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::kData, "cannot create directory " + dir + ": " + ec.message());
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    const auto w = static_cast<std::size_t>(std::max(1, workers));
    if (w == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(w);
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += w) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::vector<Sample> load_samples(const std::vector<ManifestRecord>& records, int image_size) {
    std::vector<Sample> samples;
    samples.reserve(records.size());
    for (const auto& r : records) samples.push_back(to_sample(r, image_size));
    return samples;
}

std::vector<ScoreRow> score_samples(const GazeClipModel& model, const std::vector<ManifestRecord>& records,
                                    const std::vector<Sample>& samples, int workers) {
    require(records.size() == samples.size(), ErrorKind::kContract, "records and samples differ in length");
    ag::PrecisionScope precision(model.config().precision);
    std::vector<ScoreRow> rows(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const SampleScores s = model.infer(samples[i]);
        const auto& r = records[i];
        rows[i] = make_score_row(r.id, r.generator, r.attribution_label, r.detection_label, s.attribution,
                                 s.detection[1]);
    });
    return rows;
}

GazeClipModel train_model(const ModelConfig& cfg, const std::vector<ManifestRecord>& train_records,
                          const std::vector<Sample>& train_samples, const TrainOptions& options) {
    require(!train_samples.empty(), ErrorKind::kData, "no training samples");
    require(train_records.size() == train_samples.size(), ErrorKind::kContract, "records and samples differ in length");
    const int classes = seen_class_count(train_records);
    require(classes == cfg.classes, ErrorKind::kConfig,
            "manifest has " + std::to_string(classes) + " seen classes, model.classes is " +
                std::to_string(cfg.classes));
    require(cfg.batch >= 2 || !cfg.lre_enabled, ErrorKind::kConfig,
            "train.batch must be at least 2 for the contrastive loss");
    ag::PrecisionScope precision(cfg.precision);

    GazeClipModel model(cfg, ModelMode::kTrain);
    model.set_vocabulary(Vocabulary::for_generators(generator_names(train_records)));
    Trainer trainer(model);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5e1ec7));
    std::vector<std::size_t> order(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto batch = static_cast<std::size_t>(cfg.batch);
    const std::size_t min_batch = cfg.lre_enabled ? 2 : 1;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        trainer.start_epoch(epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochSummary sum;
        sum.epoch = epoch + 1;
        sum.lr = trainer.optimizer().lr();
        std::size_t steps = 0, seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t n = std::min(batch, order.size() - start);
            if (n < min_batch) break;
            std::vector<Sample> items;
            for (std::size_t k = 0; k < n; ++k) items.push_back(train_samples[order[start + k]]);
            const StepMetrics m = trainer.train_step(items);
            if (options.step_log) *options.step_log << "epoch=" << epoch + 1 << ' ' << m.line() << '\n';
            sum.l_dfa += m.l_dfa;
            sum.l_dfd += m.l_dfd;
            sum.l_cmc += m.l_cmc;
            sum.accuracy += m.accuracy * static_cast<double>(n);
            seen += n;
            ++steps;
        }
        if (steps) {
            sum.l_dfa /= static_cast<double>(steps);
            sum.l_dfd /= static_cast<double>(steps);
            sum.l_cmc /= static_cast<double>(steps);
            sum.accuracy /= static_cast<double>(seen);
        }
        if (options.epoch_log)
            *options.epoch_log << "epoch " << sum.epoch << "/" << cfg.epochs << "  lr=" << sum.lr
                               << "  L_dfa=" << sum.l_dfa << "  L_dfd=" << sum.l_dfd << "  L_cmc=" << sum.l_cmc
                               << "  train_acc=" << sum.accuracy << std::endl;
        if (options.history) options.history->push_back(sum);
        if (!options.checkpoint_dir.empty())
            model.save((fs::path(options.checkpoint_dir) / ("epoch_" + std::to_string(epoch + 1) + ".ckpt")).string());
    }
    return model;
}

TrainResult cmd_train(const ModelConfig& cfg, const std::string& manifest_path, const std::string& out_dir,
                      std::ostream& log) {
    const std::string started = utc_now();
    const auto records = load_manifest(manifest_path);
    const auto train = select_split(records, "train");
    require(!train.empty(), ErrorKind::kData, manifest_path + " has no train records");
    ensure_dir(out_dir);
    const auto samples = load_samples(train, cfg.image_size);

    std::ofstream metrics((fs::path(out_dir) / "metrics.log").string(), std::ios::trunc);
    require(static_cast<bool>(metrics), ErrorKind::kData, "cannot write metrics log in " + out_dir);
    TrainResult result;
    result.config_hash = cfg.hash();
    log << "config " << result.config_hash << "  seed " << cfg.seed << "  train samples " << samples.size()
        << "  classes " << cfg.classes << '\n';
    TrainOptions options;
    options.step_log = &metrics;
    options.epoch_log = &log;
    options.checkpoint_dir = out_dir;
    options.history = &result.history;
    const GazeClipModel model = train_model(cfg, train, samples, options);
    result.checkpoint = (fs::path(out_dir) / "model.ckpt").string();
    model.save(result.checkpoint);

    nlohmann::json run;
    run["config_hash"] = result.config_hash;
    run["seed"] = cfg.seed;
    run["start_time"] = started;
    run["end_time"] = utc_now();
    run["checkpoint"] = result.checkpoint;
    run["manifest"] = manifest_path;
    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : result.history)
        history.push_back({{"epoch", e.epoch},
                           {"lr", e.lr},
                           {"L_dfa", e.l_dfa},
                           {"L_dfd", e.l_dfd},
                           {"L_cmc", e.l_cmc},
                           {"train_acc", e.accuracy}});
    run["history"] = history;
    std::ofstream((fs::path(out_dir) / "run.json").string(), std::ios::trunc) << run.dump(2) << '\n';
    std::ofstream((fs::path(out_dir) / "config.txt").string(), std::ios::trunc) << cfg.serialize();
    log << "wrote " << result.checkpoint << '\n';
    return result;
}

EvalResult evaluate(const GazeClipModel& model, const std::vector<ManifestRecord>& test_records,
                    const std::vector<Sample>& test_samples, int workers, double threshold) {
    EvalResult r;
    r.scores = score_samples(model, test_records, test_samples, workers);
    r.attribution = eval_attribution(r.scores, threshold);
    bool any_real = false, any_fake = false, any_unseen = false;
    for (const auto& s : r.scores) {
        any_real |= s.detection_label == 0;
        any_fake |= s.detection_label == 1;
        any_unseen |= s.detection_label == 1 && s.attribution_label < 0;
    }
    if (any_real && any_fake) r.all_detection = detection_metrics(r.scores);
    if (any_real && any_unseen) r.unseen_detection = eval_detection(r.scores);
    return r;
}

void print_eval_report(const EvalResult& result, double threshold, std::ostream& out) {
    out << "attribution (threshold " << threshold << ")\n";
    out << std::left << std::setw(16) << "generator" << std::setw(8) << "kind" << std::right << std::setw(8) << "n"
        << std::setw(10) << "ACC" << '\n';
    for (const auto& g : result.attribution.rows)
        out << std::left << std::setw(16) << g.generator << std::setw(8) << (g.seen ? "seen" : "unseen") << std::right
            << std::setw(8) << g.samples << std::setw(10) << std::fixed << std::setprecision(4) << g.accuracy
            << '\n';
    out << "seen average    " << result.attribution.seen_average << '\n';
    out << "unseen average  " << result.attribution.unseen_average << '\n';
    out << "overall average " << result.attribution.average << '\n';
    if (result.unseen_detection) {
        out << "detection, unseen generators vs real\n";
        for (const auto& [name, d] : result.unseen_detection->per_generator)
            out << std::left << std::setw(16) << name << std::right << "  ACC " << d.accuracy << "  AUC " << d.auc
                << '\n';
        out << "average           ACC " << result.unseen_detection->average.accuracy << "  AUC "
            << result.unseen_detection->average.auc << '\n';
    }
    out << "detection, all test samples  ACC " << result.all_detection.accuracy << "  AUC "
        << result.all_detection.auc << '\n';
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);
}

EvalResult cmd_eval(const std::string& checkpoint, const std::string& manifest_path, int workers, double threshold,
                    const std::string& out_dir, std::ostream& out) {
    const GazeClipModel model = GazeClipModel::load(checkpoint, ModelMode::kInference);
    const auto records = load_manifest(manifest_path);
    const int classes = seen_class_count(records);
    require(classes == model.config().classes, ErrorKind::kVersion,
            "checkpoint was trained for " + std::to_string(model.config().classes) + " classes, manifest has " +
                std::to_string(classes));
    const auto test = select_split(records, "test");
    require(!test.empty(), ErrorKind::kData, manifest_path + " has no test records");
    const EvalResult result = evaluate(model, test, load_samples(test, model.config().image_size), workers, threshold);
    print_eval_report(result, threshold, out);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ofstream scores((fs::path(out_dir) / "scores.csv").string(), std::ios::trunc);
        scores << "id,generator,attribution_label,detection_label,argmax,max_probability,fake_probability\n";
        for (const auto& s : result.scores)
            scores << s.id << ',' << s.generator << ',' << s.attribution_label << ',' << s.detection_label << ','
                   << s.argmax << ',' << format_double(s.max_probability) << ','
                   << format_double(s.fake_probability) << '\n';
        std::ofstream report((fs::path(out_dir) / "report.tsv").string(), std::ios::trunc);
        report << "section\tname\tsamples\tmetric\tvalue\n";
        for (const auto& g : result.attribution.rows)
            report << "attribution\t" << g.generator << '\t' << g.samples << "\tACC\t" << format_double(g.accuracy)
                   << '\n';
        report << "attribution\tseen_average\t\tACC\t" << format_double(result.attribution.seen_average) << '\n';
        report << "attribution\tunseen_average\t\tACC\t" << format_double(result.attribution.unseen_average) << '\n';
        report << "attribution\taverage\t\tACC\t" << format_double(result.attribution.average) << '\n';
        if (result.unseen_detection) {
            for (const auto& [name, d] : result.unseen_detection->per_generator) {
                report << "detection\t" << name << "\t\tACC\t" << format_double(d.accuracy) << '\n';
                report << "detection\t" << name << "\t\tAUC\t" << format_double(d.auc) << '\n';
            }
            report << "detection\taverage\t\tACC\t" << format_double(result.unseen_detection->average.accuracy) << '\n';
            report << "detection\taverage\t\tAUC\t" << format_double(result.unseen_detection->average.auc) << '\n';
        }
    }
    return result;
}

std::vector<GazeVector> gaze_vectors(const std::vector<ManifestRecord>& records, const ModelConfig& cfg) {
    std::vector<GazeVector> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (cfg.gaze_source == GazeSource::kManifest) {
            require(r.gaze.has_value(), ErrorKind::kData, "record '" + r.id + "' has no gaze");
            out.push_back(*r.gaze);
        } else {
            const Sample s = to_sample(r, cfg.image_size);
            out.push_back(estimate_gaze_standin(normalize_face_input(s.image)));
        }
    }
    return out;
}

std::vector<FidRow> cmd_fid(const ModelConfig& cfg, const std::string& manifest_path, std::ostream& out) {
    const auto records = load_manifest(manifest_path);
    std::vector<ManifestRecord> reals;
    std::vector<std::string> order;
    std::map<std::string, std::vector<ManifestRecord>> fakes;
    for (const auto& r : records) {
        if (r.detection_label == 0) {
            reals.push_back(r);
        } else {
            if (!fakes.count(r.generator)) order.push_back(r.generator);
            fakes[r.generator].push_back(r);
        }
    }
    const auto real_gaze = gaze_vectors(reals, cfg);
    const GaussianSummary real_fit = fit_gaussian(real_gaze);
    std::vector<FidRow> rows;
    for (const auto& name : order) {
        const auto gaze = gaze_vectors(fakes[name], cfg);
        require(gaze.size() >= 2, ErrorKind::kData, "generator '" + name + "' has fewer than 2 samples");
        rows.push_back({name, frechet_distance(real_fit, fit_gaussian(gaze)), gaze.size()});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const FidRow& a, const FidRow& b) { return a.fid > b.fid; });
    out << std::left << std::setw(16) << "generator" << std::right << std::setw(10) << "n" << std::setw(14)
        << "FID" << '\n';
    for (const auto& r : rows)
        out << std::left << std::setw(16) << r.generator << std::right << std::setw(10) << r.samples << std::setw(14)
            << std::setprecision(6) << r.fid << '\n';
    return rows;
}

std::vector<GazeVector> read_gaze_file(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), ErrorKind::kData, "cannot open gaze file " + path);
    std::vector<GazeVector> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(f, line)) {
        ++number;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream in(line);
        GazeVector g;
        require(static_cast<bool>(in >> g.yaw >> g.pitch), ErrorKind::kData,
                path + ":" + std::to_string(number) + ": expected 'yaw,pitch'");
        out.push_back(g);
    }
    return out;
}

double cmd_fid_files(const std::string& a, const std::string& b, std::ostream& out) {
    const double fid = fid_2d(read_gaze_file(a), read_gaze_file(b));
    out << "FID " << std::setprecision(8) << fid << '\n';
    return fid;
}

std::string parameter_group(const std::string& name) {
    auto has = [&](const char* part) { return name.find(part) != std::string::npos; };
    auto starts = [&](const char* prefix) { return name.rfind(prefix, 0) == 0; };
    if (starts("gaze.adapter")) return "gaze_adapter";
    if (has(".gi.")) return "gaze_injector";
    if (starts("gie.lora")) return "gie_lora";
    if (starts("lre.lora")) return "lre_lora";
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ".aws") == 0) return "aws";
    if (starts("agpm.")) return "agpm";
    if (starts("fusion.")) return "fusion";
    if (starts("experts.")) return "experts";
    if (starts("cmc.")) return "temperature";
    if (starts("gie.patch_embed")) return "gie_patch_embed";
    if (starts("gie.block")) return "gie_blocks";
    if (starts("lre.block")) return "lre_blocks";
    if (starts("lre.")) return "lre_embedding";
    return name.substr(0, name.find('.'));
}

GradCheckReport cmd_grad_check(const ModelConfig& cfg_in, std::ostream& out) {
    ModelConfig cfg = cfg_in;
    cfg.precision = ag::Precision::kF64;
    ag::PrecisionScope precision(ag::Precision::kF64);

    SynthSpec spec;
    spec.seen_generators = std::clamp(cfg.classes - 1, 1, 4);
    spec.unseen_generators = 0;
    spec.train_per_class = 1;
    spec.test_per_class = 0;
    spec.seed = cfg.seed;
    const auto records = synth_generate(spec);
    std::vector<Sample> batch{to_sample(records[0], cfg.image_size), to_sample(records[1], cfg.image_size)};

    GazeClipModel model(cfg, ModelMode::kTrain);
    model.set_vocabulary(Vocabulary::for_generators(generator_names(records)));
    // Random values for zero-initialized trainables (LoRA up-projections,
    // biases, norm shifts).
    Rng jitter(mix_seed(cfg.seed, 0x9c));
    std::normal_distribution<double> normal(0.0, 0.05);
    for (auto& e : model.store().entries()) {
        if (e.frozen) continue;
        auto values = e.tensor.values_mut();
        if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; }))
            for (double& v : values) v = normal(jitter);
    }

    GradCheckOptions options;
    options.eps = 1e-4;
    options.seed = cfg.seed;
    const auto entries = grad_check([&] { return model.losses(batch).total; }, model.store(), options);

    GradCheckReport report;
    std::map<std::string, std::size_t> index;
    auto group_of = [&](const std::string& name, bool frozen) -> GradGroup& {
        const std::string g = parameter_group(name);
        auto [it, fresh] = index.emplace(g, report.groups.size());
        if (fresh) report.groups.push_back({g, frozen, 0, 0, 0.0});
        return report.groups[it->second];
    };
    for (const auto& e : model.store().entries()) ++group_of(e.name, e.frozen).tensors;
    for (const auto& e : entries) {
        GradGroup& g = group_of(e.name, false);
        g.coords += e.coords_checked;
        g.worst = std::max(g.worst, e.max_rel_error);
    }
    report.worst = worst_error(entries);
    report.passed = report.worst < kGradTolerance;

    out << std::left << std::setw(18) << "group" << std::setw(8) << "status" << std::right << std::setw(9)
        << "tensors" << std::setw(9) << "coords" << std::setw(14) << "max rel err" << '\n';
    for (const auto& g : report.groups) {
        const char* status = g.frozen ? "frozen" : (g.worst < kGradTolerance ? "ok" : "FAIL");
        out << std::left << std::setw(18) << g.group << std::setw(8) << status << std::right << std::setw(9)
            << g.tensors << std::setw(9) << g.coords << std::setw(14);
        if (g.frozen) {
            out << "-";
        } else {
            out << std::scientific << std::setprecision(3) << g.worst << std::defaultfloat;
        }
        out << '\n';
    }
    out << "worst " << std::scientific << std::setprecision(3) << report.worst << std::defaultfloat << "  tolerance "
        << kGradTolerance << "  " << (report.passed ? "PASS" : "FAIL") << '\n';
    return report;
}

std::size_t cmd_export_embeddings(const std::string& checkpoint, const std::string& manifest_path,
                                  const std::string& out_path, int workers) {
    const GazeClipModel model = GazeClipModel::load(checkpoint, ModelMode::kInference);
    const auto test = select_split(load_manifest(manifest_path), "test");
    const auto samples = load_samples(test, model.config().image_size);
    std::vector<std::vector<double>> features(samples.size());
    {
        ag::PrecisionScope precision(model.config().precision);
        parallel_for(samples.size(), workers, [&](std::size_t i) { features[i] = model.infer(samples[i]).fused; });
    }
    std::ofstream f(out_path, std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::kData, "cannot write " + out_path);
    f << "id,label,generator";
    for (int k = 0; k < model.config().s; ++k) f << ",f" << k;
    f << '\n';
    for (std::size_t i = 0; i < test.size(); ++i) {
        f << test[i].id << ',' << test[i].attribution_label << ',' << test[i].generator;
        for (double v : features[i]) f << ',' << format_double(v);
        f << '\n';
    }
    return test.size();
}

std::vector<CorruptCell> corrupt_eval(const GazeClipModel& model, const std::vector<ManifestRecord>& test_records,
                                      const std::vector<Sample>& test_samples, const std::vector<Corruption>& kinds,
                                      const std::vector<int>& severities, int workers, double threshold) {
    std::vector<CorruptCell> cells;
    for (Corruption kind : kinds)
        for (int severity : severities) {
            std::vector<Sample> corrupted = test_samples;
            for (std::size_t i = 0; i < corrupted.size(); ++i)
                corrupted[i].image = corrupt(test_samples[i].image, kind, severity, mix_seed(model.config().seed, i));
            const auto scores = score_samples(model, test_records, corrupted, workers);
            cells.push_back({kind, severity, eval_attribution(scores, threshold)});
        }
    return cells;
}

std::vector<CorruptCell> cmd_corrupt_eval(const std::string& checkpoint, const std::string& manifest_path,
                                          const std::vector<Corruption>& kinds, const std::vector<int>& severities,
                                          int workers, double threshold, const std::string& out_dir,
                                          std::ostream& out) {
    for (int s : severities)
        require(s >= 0 && s <= kMaxSeverity, ErrorKind::kConfig, "severity " + std::to_string(s) + " outside 0..5");
    const GazeClipModel model = GazeClipModel::load(checkpoint, ModelMode::kInference);
    const auto records = load_manifest(manifest_path);
    require(seen_class_count(records) == model.config().classes, ErrorKind::kVersion,
            "checkpoint class count does not match the manifest");
    const auto test = select_split(records, "test");
    require(!test.empty(), ErrorKind::kData, manifest_path + " has no test records");
    const auto cells =
        corrupt_eval(model, test, load_samples(test, model.config().image_size), kinds, severities, workers, threshold);

    out << std::left << std::setw(10) << "kind" << std::right << std::setw(9) << "severity" << std::setw(10) << "seen"
        << std::setw(10) << "unseen" << std::setw(10) << "average" << '\n';
    for (const auto& c : cells)
        out << std::left << std::setw(10) << to_string(c.kind) << std::right << std::setw(9) << c.severity
            << std::fixed << std::setprecision(4) << std::setw(10) << c.attribution.seen_average << std::setw(10)
            << c.attribution.unseen_average << std::setw(10) << c.attribution.average << '\n';
    out.unsetf(std::ios::fixed);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ofstream f((fs::path(out_dir) / "corruption.tsv").string(), std::ios::trunc);
        f << "kind\tseverity\tseen_acc\tunseen_acc\taverage_acc\n";
        for (const auto& c : cells)
            f << to_string(c.kind) << '\t' << c.severity << '\t' << format_double(c.attribution.seen_average) << '\t'
              << format_double(c.attribution.unseen_average) << '\t' << format_double(c.attribution.average) << '\n';
    }
    return cells;
}

std::vector<ManifestRecord> cmd_synth(const SynthSpec& spec, const std::string& out_path, std::ostream& out) {
    const auto records = synth_generate(spec);
    write_manifest(records, out_path);
    out << "wrote " << records.size() << " records (" << select_split(records, "train").size() << " train, "
        << select_split(records, "test").size() << " test) to " << out_path << '\n';
    return records;
}

}  // namespace gazeclip::app
