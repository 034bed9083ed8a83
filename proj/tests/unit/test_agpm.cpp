#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "gazeclip/agpm.hpp"
#include "gazeclip/errors.hpp"
#include "gazeclip/gaze.hpp"
#include "gazeclip/grad_check.hpp"
#include "gazeclip/instrumentation.hpp"
#include "support.hpp"

using namespace gazeclip;
using ag::Tensor;

namespace {

struct Built {
    ParameterStore store;
    Rng rng;
    Agpm agpm;
    explicit Built(const ModelConfig& cfg, std::uint64_t seed = 1) : rng(seed) {
        nn::Builder b{store, rng, cfg.init_std};
        agpm = Agpm(b, cfg);
    }
};

}  // namespace

TEST_CASE("desk appearance map is 8x4x4") {
    Built m(ModelConfig::desk());
    std::mt19937_64 rng(2);
    Tensor map = m.agpm.encoder(testing::random_tensor({3, 32, 32}, rng, 0, 1));
    CHECK(map.shape() == ag::Shape{8, 4, 4});
    CHECK(m.agpm.encoder.stages.size() == 3);
}

TEST_CASE("paper preset echoes the map extents") {
    const ModelConfig p = ModelConfig::paper();
    CHECK(p.agpm_channels == 512);
    CHECK(p.agpm_map == 7);
    CHECK(p.agpm_blocks == 6);
    CHECK(p.a == 1024);
}

TEST_CASE("zero image with zero biases gives a zero map") {
    Built m(ModelConfig::desk());
    Tensor map = m.agpm.encoder(Tensor::zeros({3, 32, 32}));
    for (double v : map.values()) CHECK(v == 0.0);
}

TEST_CASE("wrong image size is a dimension error") {
    Built m(ModelConfig::desk());
    CHECK_THROWS_AS(m.agpm.encoder(Tensor::zeros({3, 16, 16})), Error);
}

TEST_CASE("single position map gives one projected token") {
    Built m(ModelConfig::desk());
    std::mt19937_64 rng(3);
    Tensor map = testing::random_tensor({8, 1, 1}, rng);
    Tensor tok = m.agpm.tokenize(map);
    REQUIRE(tok.shape() == ag::Shape{1, 24});
    Tensor expect = m.agpm.token_proj(ag::reshape(map, {1, 8}));
    CHECK(testing::bitwise_equal(tok, expect));
}

TEST_CASE("identity projection exposes channel vectors") {
    ModelConfig cfg = ModelConfig::desk();
    cfg.a = 8;
    Built m(cfg);
    auto w = m.agpm.token_proj.weight.values_mut();
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < 8; ++i) w[i * 8 + i] = 1.0;
    std::mt19937_64 rng(4);
    Tensor map = testing::random_tensor({8, 4, 4}, rng);
    Tensor tok = m.agpm.tokenize(map);
    for (std::size_t pos = 0; pos < 16; ++pos)
        for (std::size_t c = 0; c < 8; ++c) CHECK(tok.at(pos, c) == map.at(c * 16 + pos));
}

TEST_CASE("tokens match a per-position loop") {
    ag::PrecisionScope p(ag::Precision::kF64);
    Built m(ModelConfig::desk());
    std::mt19937_64 rng(5);
    for (auto& v : m.agpm.token_proj.bias.values_mut()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    Tensor map = testing::random_tensor({8, 4, 4}, rng);
    Tensor tok = m.agpm.tokenize(map);
    const Tensor& W = m.agpm.token_proj.weight;
    const Tensor& b = m.agpm.token_proj.bias;
    for (std::size_t pos = 0; pos < 16; ++pos)
        for (std::size_t j = 0; j < 24; ++j) {
            double acc = b.at(j);
            for (std::size_t c = 0; c < 8; ++c) acc += map.at(c * 16 + pos) * W.at(c, j);
            CHECK(std::abs(tok.at(pos, j) - acc) < 1e-6);
        }
}

TEST_CASE("sequence entering the blocks has n+2 rows") {
    Built m(ModelConfig::desk());
    std::mt19937_64 rng(6);
    Tensor seq = m.agpm.assemble(testing::random_tensor({16, 24}, rng), testing::random_tensor({1, 24}, rng));
    CHECK(seq.shape() == ag::Shape{18, 24});
}

TEST_CASE("without blocks the output is the class token plus its position") {
    ModelConfig cfg = ModelConfig::desk();
    cfg.agpm_blocks = 0;
    Built m(cfg);
    std::mt19937_64 rng(7);
    Tensor out = m.agpm(testing::random_tensor({3, 32, 32}, rng, 0, 1), testing::random_tensor({1, 32}, rng));
    Tensor expect = ag::add(m.agpm.cls, ag::slice_rows(m.agpm.positions, 0, 1));
    CHECK(testing::bitwise_equal(out, expect));
}

TEST_CASE("joint permutation of appearance tokens and positions") {
    ag::PrecisionScope p(ag::Precision::kF64);
    Built m(ModelConfig::desk());
    std::mt19937_64 rng(8);
    Tensor tokens = testing::random_tensor({16, 24}, rng);
    Tensor gaze = testing::random_tensor({1, 24}, rng);
    Tensor base = m.agpm.encode(m.agpm.assemble(tokens, gaze));

    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tensor> rows, pos_rows{ag::slice_rows(m.agpm.positions, 0, 1)};
    for (auto i : perm) {
        rows.push_back(ag::slice_rows(tokens, i, 1));
        pos_rows.push_back(ag::slice_rows(m.agpm.positions, i + 1, 1));
    }
    pos_rows.push_back(ag::slice_rows(m.agpm.positions, 17, 1));
    const auto saved = testing::copy_values(m.agpm.positions);
    Tensor permuted_positions = ag::concat_rows(pos_rows);
    std::copy(permuted_positions.values().begin(), permuted_positions.values().end(),
              m.agpm.positions.values_mut().begin());
    Tensor out = m.agpm.encode(m.agpm.assemble(ag::concat_rows(rows), gaze));
    std::copy(saved.begin(), saved.end(), m.agpm.positions.values_mut().begin());
    CHECK(testing::max_abs_diff(out, base) < 1e-12);
}

TEST_CASE("attention rows are stochastic") {
    Built m(ModelConfig::desk());
    std::mt19937_64 rng(9);
    instrumentation::reset();
    instrumentation::set_row_check(true);
    for (int i = 0; i < 5; ++i) m.agpm(testing::random_tensor({3, 32, 32}, rng, 0, 1), testing::random_tensor({1, 32}, rng));
    instrumentation::set_row_check(false);
    CHECK(instrumentation::attention_rows_checked() > 0);
    CHECK(instrumentation::max_attention_row_deviation() < 1e-6);
}

TEST_CASE("gaze adapter gradient through the module passes central differences") {
    ag::PrecisionScope p(ag::Precision::kF64);
    const ModelConfig cfg = ModelConfig::desk();
    ParameterStore store;
    Rng rng(10);
    nn::Builder b{store, rng, cfg.init_std};
    GazeAdapter adapter(b, cfg.d);
    Agpm agpm(b, cfg);
    std::mt19937_64 r(11);
    Tensor image = testing::random_tensor({3, 32, 32}, r, 0, 1);
    Tensor head = testing::random_tensor({24, 1}, r);
    const GazeVector g{0.3, -0.2};
    GradCheckOptions o;
    o.eps = 1e-4;
    const auto entries = grad_check([&] { return ag::sum(ag::matmul(agpm(image, adapter(g)), head)); }, store, o,
                                    [](const std::string& n) { return n == "gaze.adapter"; });
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].coords_checked == 64);
    CHECK(entries[0].max_rel_error < 1e-4);
}

TEST_CASE("every module parameter is trainable") {
    Built m(ModelConfig::desk());
    for (const auto& e : m.store.entries()) CHECK_FALSE(e.frozen);
}
