// gazeclip: train, evaluate and analyse gaze-guided deepfake attribution models.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gazeclip/app.hpp"
#include "gazeclip/errors.hpp"

namespace {

using namespace gazeclip;

struct Common {
    std::string config_path;
    std::string preset = "desk";
    std::string manifest;
    std::string checkpoint;
    std::string out;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string precision;
    double threshold = 0.9;
    std::vector<std::string> overrides;
};

ModelConfig resolve_config(const Common& c) {
    const ModelConfig base = c.preset == "paper" ? ModelConfig::paper() : ModelConfig::desk();
    ModelConfig cfg = c.config_path.empty() ? base : ModelConfig::load(c.config_path, base);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorKind::kConfig, "override '" + kv + "' is not key=value");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    if (!c.precision.empty()) cfg.set("train.precision", c.precision);
    cfg.validate();
    return cfg;
}

void require_flag(const std::string& value, const char* flag) {
    require(!value.empty(), ErrorKind::kConfig, std::string("missing ") + flag);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaze-guided deepfake attribution and detection"};
    app.require_subcommand(1);
    Common c;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", c.config_path, "config file (key = value lines)");
        sub->add_option("--preset", c.preset, "base preset")->check(CLI::IsMember({"desk", "paper"}));
        sub->add_option("--set", c.overrides, "extra key=value overrides");
        sub->add_option("--seed", c.seed, "override train.seed");
        sub->add_option("--precision", c.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    };
    auto add_eval = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", c.checkpoint, "model checkpoint")->required();
        sub->add_option("--manifest", c.manifest, "manifest (JSON lines)")->required();
        sub->add_option("--workers", c.workers, "evaluation threads")->check(CLI::PositiveNumber);
        sub->add_option("--threshold", c.threshold, "unseen rejection threshold")->check(CLI::Range(0.0, 1.0));
    };

    auto* train = app.add_subcommand("train", "train on the manifest's train split");
    add_config(train);
    train->add_option("--manifest", c.manifest, "manifest (JSON lines)")->required();
    train->add_option("--out", c.out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "attribution and detection report on the test split");
    add_eval(eval);
    eval->add_option("--out", c.out, "directory for scores.csv and report.tsv");

    auto* fid = app.add_subcommand("fid", "gaze FID of each generator against real faces");
    add_config(fid);
    std::vector<std::string> gaze_files;
    fid->add_option("--manifest", c.manifest, "manifest (JSON lines)");
    fid->add_option("--samples", gaze_files, "two files of yaw,pitch lines")->expected(2);

    auto* grad = app.add_subcommand("grad-check", "finite-difference check of every trainable group");
    add_config(grad);
    std::string broken;
    grad->add_option("--break-backward", broken)->check(CLI::IsMember({"gelu", "matmul", "layernorm"}))->group("");

    auto* exportc = app.add_subcommand("export-embeddings", "fused features of the test split");
    exportc->add_option("--checkpoint", c.checkpoint, "model checkpoint")->required();
    exportc->add_option("--manifest", c.manifest, "manifest (JSON lines)")->required();
    exportc->add_option("--out", c.out, "output CSV")->required();
    exportc->add_option("--workers", c.workers, "evaluation threads")->check(CLI::PositiveNumber);

    auto* corrupt_cmd = app.add_subcommand("corrupt-eval", "attribution ACC under corruptions");
    add_eval(corrupt_cmd);
    std::vector<std::string> kinds{"noise", "blur", "pixelate"};
    std::vector<int> severities{0, 1, 2, 3, 4, 5};
    corrupt_cmd->add_option("--kinds", kinds, "noise, blur, pixelate");
    corrupt_cmd->add_option("--severities", severities, "subset of 0..5");
    corrupt_cmd->add_option("--out", c.out, "directory for corruption.tsv");

    auto* synth = app.add_subcommand("synth", "write a synthetic benchmark manifest");
    SynthSpec spec;
    synth->add_option("--out", c.out, "manifest path")->required();
    synth->add_option("--seen", spec.seen_generators, "seen generators (1..4)");
    synth->add_option("--unseen", spec.unseen_generators, "unseen generators (0..3)");
    synth->add_option("--train-per-class", spec.train_per_class);
    synth->add_option("--test-per-class", spec.test_per_class);
    synth->add_option("--seed", spec.seed);

    auto* show = app.add_subcommand("config", "print the resolved config and its hash");
    add_config(show);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            app::cmd_train(resolve_config(c), c.manifest, c.out, std::cout);
        } else if (*eval) {
            app::cmd_eval(c.checkpoint, c.manifest, c.workers, c.threshold, c.out, std::cout);
        } else if (*fid) {
            if (!gaze_files.empty()) {
                app::cmd_fid_files(gaze_files[0], gaze_files[1], std::cout);
            } else {
                require_flag(c.manifest, "--manifest or --samples");
                app::cmd_fid(resolve_config(c), c.manifest, std::cout);
            }
        } else if (*grad) {
            if (broken == "gelu") ag::debug::set_backward_fault(ag::debug::BackwardFault::kGelu);
            if (broken == "matmul") ag::debug::set_backward_fault(ag::debug::BackwardFault::kMatmul);
            if (broken == "layernorm") ag::debug::set_backward_fault(ag::debug::BackwardFault::kLayerNorm);
            const auto report = app::cmd_grad_check(resolve_config(c), std::cout);
            if (!report.passed) return exit_code(ErrorKind::kVerification);
        } else if (*exportc) {
            const auto rows = app::cmd_export_embeddings(c.checkpoint, c.manifest, c.out, c.workers);
            std::cout << "wrote " << rows << " rows to " << c.out << '\n';
        } else if (*corrupt_cmd) {
            std::vector<Corruption> parsed;
            for (const auto& k : kinds) parsed.push_back(parse_corruption(k));
            app::cmd_corrupt_eval(c.checkpoint, c.manifest, parsed, severities, c.workers, c.threshold, c.out,
                                  std::cout);
        } else if (*synth) {
            app::cmd_synth(spec, c.out, std::cout);
        } else if (*show) {
            const ModelConfig cfg = resolve_config(c);
            std::cout << cfg.serialize() << "# hash " << cfg.hash() << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
