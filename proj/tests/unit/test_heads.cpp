#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "gazeclip/errors.hpp"
#include "gazeclip/heads.hpp"
#include "gazeclip/manifest.hpp"
#include "gazeclip/model.hpp"
#include "gazeclip/synth.hpp"
#include "support.hpp"

using namespace gazeclip;
using ag::Tensor;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error");
    return ErrorKind::kVerification;
}

struct Heads {
    ParameterStore store;
    Rng rng{1};
    Fusion fusion;
    Experts experts;
    explicit Heads(const ModelConfig& cfg) {
        nn::Builder b{store, rng, cfg.init_std};
        fusion = Fusion(b, cfg);
        experts = Experts(b, cfg);
    }
};

// Three seen generators plus real, small images.
struct SmallSet {
    ModelConfig cfg = testing::tiny_config();
    std::vector<ManifestRecord> records;
    std::vector<Sample> samples;

    SmallSet() {
        cfg.classes = 4;
        cfg.batch = 8;
        SynthSpec spec;
        spec.seen_generators = 3;
        spec.unseen_generators = 0;
        spec.train_per_class = 4;
        spec.test_per_class = 1;
        records = select_split(synth_generate(spec), "train");
        for (const auto& r : records) samples.push_back(to_sample(r, cfg.image_size));
    }

    GazeClipModel model() const {
        GazeClipModel m(cfg, ModelMode::kTrain);
        m.set_vocabulary(Vocabulary::for_generators(generator_names(records)));
        return m;
    }
};

double ce_row(const std::vector<double>& logits, int label) {
    double z = 0.0;
    for (double v : logits) z += std::exp(v);
    return std::log(z) - logits[static_cast<std::size_t>(label)];
}

}  // namespace

TEST_SUITE("fusion") {
    TEST_CASE("sum of the two projections") {
        ag::PrecisionScope p(ag::Precision::kF64);
        Heads h(ModelConfig::desk());
        std::mt19937_64 rng(2);
        Tensor image = testing::random_tensor({3, 32}, rng);
        Tensor appearance = testing::random_tensor({3, 24}, rng);
        Tensor fused = h.fusion(image, appearance);
        REQUIRE(fused.shape() == ag::Shape{3, 16});
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 16; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 32; ++k) acc += image.at(i, k) * h.fusion.w_image.at(k, j);
                for (std::size_t k = 0; k < 24; ++k) acc += appearance.at(i, k) * h.fusion.w_appearance.at(k, j);
                CHECK(std::abs(fused.at(i, j) - acc) < 1e-12);
            }
    }

    TEST_CASE("zero appearance weight leaves the image branch") {
        Heads h(ModelConfig::desk());
        for (auto& v : h.fusion.w_appearance.values_mut()) v = 0.0;
        std::mt19937_64 rng(3);
        Tensor image = testing::random_tensor({2, 32}, rng);
        CHECK(testing::bitwise_equal(h.fusion(image, testing::random_tensor({2, 24}, rng)),
                                     ag::matmul(image, h.fusion.w_image)));
    }

    TEST_CASE("disabled branches") {
        ModelConfig cfg = ModelConfig::desk();
        cfg.use_agpm = false;
        Heads h(cfg);
        CHECK_FALSE(h.fusion.w_appearance.defined());
        std::mt19937_64 rng(4);
        Tensor image = testing::random_tensor({2, 32}, rng);
        CHECK(testing::bitwise_equal(h.fusion(image, Tensor()), ag::matmul(image, h.fusion.w_image)));
        CHECK(kind_of([&] { h.fusion(Tensor(), Tensor()); }) == ErrorKind::kConfig);
    }
}

TEST_SUITE("experts") {
    TEST_CASE("zero logits give uniform predictions") {
        Heads h(ModelConfig::desk());
        Predictions p = predict({Tensor::zeros({2, 5}), Tensor::zeros({2, 2})});
        for (double v : p.attribution.values()) CHECK(v == doctest::Approx(0.2));
        for (double v : p.detection.values()) CHECK(v == doctest::Approx(0.5));
    }

    TEST_CASE("predictions are simplex rows invariant to a constant shift") {
        ag::PrecisionScope prec(ag::Precision::kF64);
        Heads h(ModelConfig::desk());
        std::mt19937_64 rng(5);
        ExpertLogits logits = h.experts.logits(testing::random_tensor({4, 16}, rng, -3, 3));
        CHECK(logits.attribution.shape() == ag::Shape{4, 5});
        CHECK(logits.detection.shape() == ag::Shape{4, 2});
        Predictions p = predict(logits);
        Predictions shifted = predict({ag::add(logits.attribution, Tensor::full({4, 5}, 7.5)),
                                       ag::add(logits.detection, Tensor::full({4, 2}, -3.0))});
        for (std::size_t r = 0; r < 4; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < 5; ++c) {
                total += p.attribution.at(r, c);
                CHECK(p.attribution.at(r, c) >= 0.0);
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(p.detection.at(r, 0) + p.detection.at(r, 1) == doctest::Approx(1.0).epsilon(1e-12));
        }
        CHECK(testing::max_abs_diff(p.attribution, shifted.attribution) < 1e-12);
        CHECK(testing::max_abs_diff(p.detection, shifted.detection) < 1e-12);
    }
}

TEST_SUITE("classification losses") {
    TEST_CASE("uniform binary prediction costs ln 2") {
        Tensor probs = Tensor::full({3, 2}, 0.5);
        Tensor labels = Tensor::from_values({3, 2}, {1, 0, 0, 1, 1, 0});
        CHECK(loss_dfd(probs, labels).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }

    TEST_CASE("uniform over eleven classes costs ln 11") {
        Tensor probs = Tensor::full({2, 11}, 1.0 / 11.0);
        std::vector<double> z(22, 0.0);
        z[3] = 1.0;
        z[11 + 10] = 1.0;
        CHECK(loss_dfa(probs, Tensor::from_values({2, 11}, z)).item() ==
              doctest::Approx(std::log(11.0)).epsilon(1e-6));
    }

    TEST_CASE("batch mean of negative log probabilities") {
        ag::PrecisionScope p(ag::Precision::kF64);
        std::mt19937_64 rng(6);
        Tensor probs = ag::softmax_rows(testing::random_tensor({4, 3}, rng, -2, 2));
        const std::vector<int> labels{2, 0, 1, 2};
        std::vector<double> z(12, 0.0);
        double expect = 0.0;
        for (std::size_t r = 0; r < 4; ++r) {
            z[r * 3 + static_cast<std::size_t>(labels[r])] = 1.0;
            expect -= std::log(probs.at(r, static_cast<std::size_t>(labels[r]))) / 4.0;
        }
        CHECK(loss_dfa(probs, Tensor::from_values({4, 3}, z)).item() == doctest::Approx(expect).epsilon(1e-12));
        CHECK(loss_dfa(probs, labels).item() == doctest::Approx(expect).epsilon(1e-12));
    }

    TEST_CASE("logit form agrees with the probability form") {
        ag::PrecisionScope p(ag::Precision::kF64);
        std::mt19937_64 rng(7);
        Tensor logits = testing::random_tensor({5, 4}, rng, -3, 3);
        const std::vector<int> labels{0, 3, 1, 1, 2};
        const double expect = loss_dfa(ag::softmax_rows(logits), labels).item();
        CHECK(ag::cross_entropy_logits(logits, labels).item() == doctest::Approx(expect).epsilon(1e-12));
    }

    TEST_CASE("labels must be one-hot") {
        Tensor probs = Tensor::full({2, 2}, 0.5);
        CHECK(kind_of([&] { loss_dfd(probs, Tensor::from_values({2, 2}, {1, 1, 0, 1})); }) == ErrorKind::kData);
        CHECK(kind_of([&] { loss_dfd(probs, Tensor::from_values({2, 2}, {0, 0, 0, 1})); }) == ErrorKind::kData);
        CHECK(kind_of([&] { loss_dfd(probs, Tensor::from_values({2, 2}, {0.5, 0.5, 0, 1})); }) == ErrorKind::kData);
        CHECK(labels_from_one_hot(Tensor::from_values({2, 3}, {0, 0, 1, 1, 0, 0})) == std::vector<int>{2, 0});
    }
}

TEST_SUITE("contrastive loss") {
    TEST_CASE("identical rows cost ln b") {
        Tensor rows = Tensor::full({2, 4}, 0.5);
        CHECK(loss_cmc(rows, rows, Tensor::full({1}, 10.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }

    TEST_CASE("orthogonal matched pairs at high scale approach zero") {
        Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        CHECK(loss_cmc(eye, eye, Tensor::full({1}, 100.0)).item() < 1e-6);
    }

    TEST_CASE("three pairs against an explicit similarity matrix") {
        ag::PrecisionScope p(ag::Precision::kF64);
        std::mt19937_64 rng(7);
        Tensor img = testing::random_tensor({3, 5}, rng);
        Tensor txt = testing::random_tensor({3, 5}, rng);
        const double scale = 14.0;
        auto norm_row = [](const Tensor& t, std::size_t r) {
            std::vector<double> v(t.cols());
            double n = 0.0;
            for (std::size_t c = 0; c < t.cols(); ++c) n += t.at(r, c) * t.at(r, c);
            for (std::size_t c = 0; c < t.cols(); ++c) v[c] = t.at(r, c) / std::sqrt(n);
            return v;
        };
        double sim[3][3];
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                const auto a = norm_row(img, i), b = norm_row(txt, j);
                sim[i][j] = 0.0;
                for (std::size_t k = 0; k < 5; ++k) sim[i][j] += scale * a[k] * b[k];
            }
        double expect = 0.0;
        for (int i = 0; i < 3; ++i) {
            expect += ce_row({sim[i][0], sim[i][1], sim[i][2]}, i) / 6.0;
            expect += ce_row({sim[0][i], sim[1][i], sim[2][i]}, i) / 6.0;
        }
        CHECK(loss_cmc(img, txt, Tensor::full({1}, scale)).item() == doctest::Approx(expect).epsilon(1e-12));
    }

    TEST_CASE("joint permutation and positive feature scaling leave it unchanged") {
        ag::PrecisionScope p(ag::Precision::kF64);
        std::mt19937_64 rng(8);
        Tensor img = testing::random_tensor({4, 6}, rng);
        Tensor txt = testing::random_tensor({4, 6}, rng);
        const Tensor scale = Tensor::full({1}, 12.0);
        const double base = loss_cmc(img, txt, scale).item();
        const std::vector<std::size_t> perm{2, 0, 3, 1};
        std::vector<Tensor> ir, tr;
        for (auto i : perm) {
            ir.push_back(ag::scale(ag::slice_rows(img, i, 1), 3.0 + static_cast<double>(i)));
            tr.push_back(ag::scale(ag::slice_rows(txt, i, 1), 0.25));
        }
        CHECK(loss_cmc(ag::concat_rows(ir), ag::concat_rows(tr), scale).item() ==
              doctest::Approx(base).epsilon(1e-12));
    }

    TEST_CASE("a batch of one is a config error") {
        Tensor row = Tensor::full({1, 4}, 1.0);
        CHECK(kind_of([&] { loss_cmc(row, row, Tensor::full({1}, 1.0)); }) == ErrorKind::kConfig);
    }

    TEST_CASE("temperature starts at 1/0.07 and is capped at 100") {
        ParameterStore store;
        Rng rng(9);
        nn::Builder b{store, rng, 0.02};
        Temperature t(b);
        CHECK(t.scale().item() == doctest::Approx(1.0 / 0.07).epsilon(1e-6));
        t.log_scale.values_mut()[0] = 10.0;
        CHECK(t.scale().item() == 100.0);
    }
}

TEST_SUITE("total loss") {
    TEST_CASE("plain sum") {
        CHECK(total_loss(Tensor::full({1}, 1.0), Tensor::full({1}, 2.0), Tensor::full({1}, 0.5)).item() == 3.5);
        CHECK(total_loss(Tensor::full({1}, 1.0), Tensor::full({1}, 2.0), Tensor()).item() == 3.0);
    }

    TEST_CASE("gradient is the sum of the term gradients") {
        ag::PrecisionScope p(ag::Precision::kF64);
        std::mt19937_64 rng(10);
        Tensor x = testing::random_tensor({3, 4}, rng, -1, 1, true);
        auto terms = [&] {
            return std::array<Tensor, 3>{ag::sum(ag::mul(x, x)), ag::mean(ag::exp(x)),
                                         ag::sum(ag::gelu(ag::scale(x, 2.0)))};
        };
        std::vector<double> separate(12, 0.0);
        for (int k = 0; k < 3; ++k) {
            x.zero_grad();
            terms()[static_cast<std::size_t>(k)].backward();
            for (std::size_t i = 0; i < 12; ++i) separate[i] += x.grad()[i];
        }
        x.zero_grad();
        auto t = terms();
        total_loss(t[0], t[1], t[2]).backward();
        for (std::size_t i = 0; i < 12; ++i) CHECK(x.grad()[i] == doctest::Approx(separate[i]).epsilon(1e-12));
    }
}

TEST_SUITE("training step") {
    TEST_CASE("unseen label in a batch is a protocol error") {
        SmallSet set;
        GazeClipModel model = set.model();
        Trainer trainer(model);
        std::vector<Sample> batch(set.samples.begin(), set.samples.begin() + 2);
        batch[1].attribution_label = -1;
        CHECK(kind_of([&] { trainer.train_step(batch); }) == ErrorKind::kProtocol);
    }

    TEST_CASE("two identical runs give identical parameters") {
        SmallSet set;
        GazeClipModel a = set.model(), b = set.model();
        Trainer ta(a), tb(b);
        const std::span<const Sample> batch(set.samples.data(), 8);
        for (int i = 0; i < 3; ++i) {
            const auto ma = ta.train_step(batch), mb = tb.train_step(batch);
            CHECK(ma.total == mb.total);
        }
        CHECK(a.checkpoint_bytes() == b.checkpoint_bytes());
    }

    TEST_CASE("frozen entries never change and trainable ones do") {
        SmallSet set;
        GazeClipModel model = set.model();
        std::map<std::string, std::vector<double>> before;
        for (const auto& e : model.store().entries()) before[e.name] = testing::copy_values(e.tensor);
        Trainer trainer(model);
        for (int i = 0; i < 5; ++i) trainer.train_step(std::span<const Sample>(set.samples.data() + 2 * i, 4));
        std::size_t frozen = 0;
        for (const auto& e : model.store().entries()) {
            CAPTURE(e.name);
            if (e.frozen) {
                ++frozen;
                CHECK(testing::copy_values(e.tensor) == before[e.name]);
            } else {
                CHECK(testing::copy_values(e.tensor) != before[e.name]);
            }
        }
        CHECK(frozen > 0);
        CHECK(trainer.optimizer().step_count() == 5);
    }

    TEST_CASE("loss falls over fifty steps") {
        SmallSet set;
        GazeClipModel model = set.model();
        Trainer trainer(model);
        const std::span<const Sample> all(set.samples);
        auto batch_loss = [&](std::size_t i) { return model.losses(all.subspan(i * 8, 8)).total.item(); };
        const double start = (batch_loss(0) + batch_loss(1)) / 2.0;
        for (int step = 0; step < 50; ++step) trainer.train_step(all.subspan(static_cast<std::size_t>(step % 2) * 8, 8));
        const double end = (batch_loss(0) + batch_loss(1)) / 2.0;
        CHECK(end < start);
    }

    TEST_CASE("metrics line names every term") {
        StepMetrics m;
        m.step = 3;
        const std::string line = m.line();
        for (const char* key : {"step=", "lr=", "L_dfa=", "L_dfd=", "L_cmc=", "acc="})
            CHECK(line.find(key) != std::string::npos);
    }
}
