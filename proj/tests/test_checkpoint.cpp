#include "dimignn/checkpoint.hpp"

#include "support/test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace dimignn;

namespace {

ModelConfig demo_config() {
    ModelConfig cfg;
    cfg.input_len = 8;
    cfg.horizon = 2;
    cfg.segment_len = 2;
    cfg.blocks = 2;
    cfg.hidden = 4;
    cfg.heads = 2;
    cfg.k_neighbors = 2;
    cfg.seed = 99;
    return cfg;
}

NormStats demo_stats(int n, int c) {
    SeriesTensor s = synth_coupled(n, c, 50, 5, CouplingGraph{});
    return NormStats::fit(s);
}

} // namespace

TEST_CASE("checkpoint round-trips config, stats and every parameter bit-exactly") {
    test_util::TempDir dir("ckpt");
    ModelConfig cfg = demo_config();
    Model model = Model::init(cfg, 4, 2);
    NormStats stats = demo_stats(4, 2);
    save_checkpoint(model, stats, {"a", "b", "c", "d"}, dir.file("model.json"));

    auto [loaded, meta] = load_checkpoint(dir.file("model.json"));
    CHECK(meta.n_vars == 4);
    CHECK(meta.c_attrs == 2);
    CHECK(meta.variable_names == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(meta.cfg.seed == cfg.seed);
    CHECK(meta.cfg.hidden == cfg.hidden);
    CHECK(meta.norm.mean == stats.mean);
    CHECK(meta.norm.stddev == stats.stddev);

    REQUIRE(loaded.store.size() == model.store.size());
    for (const auto& [name, t] : model.store.entries()) {
        CHECK(loaded.store.get(name).values() == t.values());
    }

    // Identical forward behavior after reload.
    std::mt19937_64 gen(1);
    Tensor x = test_util::random_tensor({8, 4, 2}, gen);
    CHECK(model_forward(loaded, x).values() == model_forward(model, x).values());
}

TEST_CASE("checkpoint shape audit rejects mismatched parameters") {
    test_util::TempDir dir("ckpt");
    ModelConfig cfg = demo_config();
    Model model = Model::init(cfg, 4, 2);
    save_checkpoint(model, demo_stats(4, 2), {"a", "b", "c", "d"}, dir.file("model.json"));

    // Corrupt one parameter's shape in the JSON text.
    std::ifstream in(dir.file("model.json"));
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"emb.b\"");
    REQUIRE(pos != std::string::npos);
    pos = text.find("\"shape\"", pos);
    pos = text.find('[', pos);
    text.replace(pos, text.find(']', pos) - pos + 1, "[5]");
    std::ofstream out(dir.file("broken.json"));
    out << text;
    out.close();

    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("broken.json")),
                         doctest::Contains("emb.b"), DataError);
}

TEST_CASE("non-checkpoint files are rejected up front") {
    test_util::TempDir dir("ckpt");
    std::ofstream out(dir.file("junk.json"));
    out << "{\"hello\": 1}";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(dir.file("junk.json")), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.json")), DataError);
}
