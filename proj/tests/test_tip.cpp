#include "dimignn/tip.hpp"

#include "support/dnsm_oracle.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dimignn;

namespace {

VariableProfile make_profile(int n, int c, std::vector<double> data) {
    VariableProfile p;
    p.n_vars = n;
    p.c_attrs = c;
    p.data = std::move(data);
    return p;
}

// The worked 4-variable example: near-duplicate of variable 0, a diagonal
// vector, and an orthogonal one.
VariableProfile hand_profile() {
    return make_profile(4, 2,
                        {1.0, 0.0,
                         1.0, 0.0,
                         0.7071, 0.7071,
                         0.0, 1.0});
}

VariableProfile random_profile(std::mt19937_64& rng, int n, int c) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    VariableProfile p;
    p.n_vars = n;
    p.c_attrs = c;
    p.data.resize(static_cast<std::size_t>(n) * c);
    for (auto& v : p.data) v = d(rng);
    return p;
}

} // namespace

TEST_CASE("temporal_profile averages segments and hidden units") {
    Tensor constant = Tensor::full({3, 2, 2, 4}, 2.5);
    VariableProfile p = temporal_profile(constant);
    CHECK(p.n_vars == 2);
    CHECK(p.c_attrs == 2);
    for (double v : p.data) CHECK(v == doctest::Approx(2.5));

    // L=1, hidden=1 squeezes to the input itself.
    Tensor tiny({1, 2, 2, 1}, {1, 2, 3, 4});
    VariableProfile q = temporal_profile(tiny);
    CHECK(q.data == std::vector<double>{1, 2, 3, 4});

    // Alternating 0/2 along L averages to 1.
    Tensor alt({2, 2, 1, 1}, {0, 0, 2, 2});
    CHECK(temporal_profile(alt).data == std::vector<double>{1, 1});
}

TEST_CASE("cosine similarity basics and zero-norm policy") {
    const double a[] = {1, 0};
    const double b[] = {1, 0};
    const double c[] = {0, 1};
    const double d[] = {0.7071, 0.7071};
    const double z[] = {0, 0};
    CHECK(cosine_similarity(a, b, 2) == doctest::Approx(1.0));
    CHECK(cosine_similarity(a, c, 2) == doctest::Approx(0.0));
    CHECK(cosine_similarity(a, d, 2) == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(cosine_similarity(a, z, 2) == 0.0);
}

TEST_CASE("hand-scored selection: similarity-diversity tradeoff at lambda 0.7") {
    // For variable 0: first pick is its duplicate (cos=1). Candidate 2 then
    // scores 0.7*0.7071 + 0.3*(1-0.7071) = 0.5829 against candidate 3's
    // 0.7*0 + 0.3*1 = 0.3, so the diagonal vector wins.
    DnsmConfig cfg;
    cfg.k = 2;
    cfg.lambda = 0.7;
    NeighborMatrix nm = dnsm_select(hand_profile(), cfg);
    CHECK(nm.at(0, 0) == 1);
    CHECK(nm.at(0, 1) == 2);
}

TEST_CASE("hand-scored selection: pure diversity at lambda 0 flips the second pick") {
    DnsmConfig cfg;
    cfg.k = 2;
    cfg.lambda = 0.0;
    NeighborMatrix nm = dnsm_select(hand_profile(), cfg);
    CHECK(nm.at(0, 0) == 1);  // first pick is still the cosine argmax
    CHECK(nm.at(0, 1) == 3);  // orthogonal candidate maximizes diversity
}

TEST_CASE("lambda 1 reproduces descending-cosine ranking") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);
        const int c = 2 + static_cast<int>(rng() % 4);
        VariableProfile p = random_profile(rng, n, c);
        DnsmConfig cfg;
        cfg.k = std::min(3, n - 1);
        cfg.lambda = 1.0;
        NeighborMatrix nm = dnsm_select(p, cfg);

        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<double, int>> ranked;
            for (int j = 0; j < n; ++j) {
                if (j != i) ranked.emplace_back(-cosine_similarity(p.row(i), p.row(j), c), j);
            }
            std::sort(ranked.begin(), ranked.end());
            for (int m = 0; m < cfg.k; ++m) CHECK(nm.at(i, m) == ranked[m].second);
        }
    }
}

TEST_CASE("selection is invariant to positive rescaling of profile rows") {
    std::mt19937_64 rng(43);
    VariableProfile p = random_profile(rng, 6, 3);
    DnsmConfig cfg;
    cfg.k = 3;
    cfg.lambda = 0.7;
    NeighborMatrix base = dnsm_select(p, cfg);

    VariableProfile scaled = p;
    std::uniform_real_distribution<double> s(0.1, 10.0);
    for (int i = 0; i < 6; ++i) {
        const double c = s(rng);
        for (int j = 0; j < 3; ++j) scaled.data[i * 3 + j] *= c;
    }
    NeighborMatrix after = dnsm_select(scaled, cfg);
    CHECK(after.indices == base.indices);
}

TEST_CASE("relabeling variables permutes selections consistently") {
    std::mt19937_64 rng(47);
    const int n = 6, c = 3;
    VariableProfile p = random_profile(rng, n, c);
    DnsmConfig cfg;
    cfg.k = 2;
    cfg.lambda = 0.7;
    NeighborMatrix base = dnsm_select(p, cfg);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);  // perm[new] = old
    VariableProfile moved = p;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) moved.data[i * c + j] = p.data[perm[i] * c + j];
    }
    std::vector<int> inv(n);
    for (int i = 0; i < n; ++i) inv[perm[i]] = i;

    NeighborMatrix after = dnsm_select(moved, cfg);
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < cfg.k; ++m) {
            CHECK(after.at(i, m) == inv[base.at(perm[i], m)]);
        }
    }
}

TEST_CASE("dnsm_select agrees with the reference oracle on random instances") {
    std::mt19937_64 rng(53);
    const double lambdas[] = {0.0, 0.3, 0.7, 1.0};
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);       // N in [3, 8]
        const int c = 2 + static_cast<int>(rng() % 5);       // C in [2, 6]
        DnsmConfig cfg;
        cfg.k = 1 + static_cast<int>(rng() % std::min(4, n - 1));
        cfg.lambda = lambdas[rng() % 4];
        VariableProfile p = random_profile(rng, n, c);
        NeighborMatrix got = dnsm_select(p, cfg);
        NeighborMatrix want = test_util::dnsm_oracle(p, cfg);
        REQUIRE(got.indices == want.indices);
    }
}

TEST_CASE("oracle agreement holds in the all-identical degenerate case") {
    VariableProfile p = make_profile(4, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    DnsmConfig cfg;
    cfg.k = 2;
    for (double lambda : {0.0, 0.7, 1.0}) {
        cfg.lambda = lambda;
        NeighborMatrix got = dnsm_select(p, cfg);
        NeighborMatrix want = test_util::dnsm_oracle(p, cfg);
        CHECK(got.indices == want.indices);
        // Lowest-index tie-breaking: variable 0 picks 1 then 2.
        CHECK(got.at(0, 0) == 1);
        CHECK(got.at(0, 1) == 2);
    }
}

TEST_CASE("dnsm_select validates k") {
    VariableProfile p = hand_profile();
    DnsmConfig cfg;
    cfg.k = 4;  // N-1 is 3
    CHECK_THROWS_AS(dnsm_select(p, cfg), ShapeError);
    cfg.k = 0;
    CHECK_THROWS_AS(dnsm_select(p, cfg), ShapeError);
}

TEST_CASE("graph attention with only the self-loop reduces to tanh(W h)") {
    ParamStore store;
    Rng rng(61);
    GatParams p = GatParams::init(3, store, rng, "gat");
    std::mt19937_64 gen(62);
    Tensor z = test_util::random_tensor({2, 3, 2, 3}, gen);

    NeighborMatrix none;
    none.n_vars = 3;
    none.k = 0;  // test harness: no selected neighbors, self-loop only
    GatDebug dbg;
    Tensor out = termm_gat(z, none, p, &dbg);
    CHECK(out.shape() == z.shape());
    for (double w : dbg.attention.values()) CHECK(w == doctest::Approx(1.0));

    Tensor expected = tanh(matmul(z, p.weight));
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        CHECK(out.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-12));
    }
}

TEST_CASE("identical node features give uniform attention over self plus neighbors") {
    ParamStore store;
    Rng rng(63);
    GatParams p = GatParams::init(4, store, rng, "gat");
    std::mt19937_64 gen(64);

    Tensor row = test_util::random_tensor({1, 1, 1, 4}, gen);
    std::vector<double> rep;
    for (int i = 0; i < 4; ++i) rep.insert(rep.end(), row.values().begin(), row.values().end());
    std::vector<double> grid;
    for (int l = 0; l < 2; ++l) grid.insert(grid.end(), rep.begin(), rep.end());
    Tensor z({2, 4, 1, 4}, grid);

    NeighborMatrix nm;
    nm.n_vars = 4;
    nm.k = 2;
    nm.indices = {1, 2, 0, 3, 3, 0, 2, 1};
    GatDebug dbg;
    termm_gat(z, nm, p, &dbg);
    for (double w : dbg.attention.values()) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("attention rows over the neighborhood sum to one") {
    ParamStore store;
    Rng rng(65);
    GatParams p = GatParams::init(4, store, rng, "gat");
    std::mt19937_64 gen(66);
    Tensor z = test_util::random_tensor({3, 5, 2, 4}, gen);

    DnsmConfig cfg;
    cfg.k = 2;
    NeighborMatrix nm = dnsm_select(temporal_profile(z), cfg);
    GatDebug dbg;
    termm_gat(z, nm, p, &dbg);
    const auto& a = dbg.attention;
    const int fan = a.shape()[2];
    for (std::int64_t r = 0; r < a.numel() / fan; ++r) {
        double sum = 0.0;
        for (int j = 0; j < fan; ++j) sum += a.values()[r * fan + j];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("tip_forward keeps the input shape and routes through selection") {
    ParamStore store;
    Rng rng(67);
    GatParams p = GatParams::init(4, store, rng, "gat");
    std::mt19937_64 gen(68);
    Tensor z = test_util::random_tensor({2, 4, 2, 4}, gen);

    DnsmConfig cfg;
    cfg.k = 2;
    NeighborMatrix chosen;
    Tensor out = tip_forward(z, cfg, p, &chosen);
    CHECK(out.shape() == z.shape());
    CHECK(chosen.n_vars == 4);
    chosen.validate();
}

TEST_CASE("tip gradients (selection frozen) match finite differences") {
    ParamStore store;
    Rng rng(69);
    GatParams p = GatParams::init(4, store, rng, "gat");
    std::mt19937_64 gen(70);
    Tensor z = test_util::random_tensor({2, 4, 2, 4}, gen);

    DnsmConfig cfg;
    cfg.k = 2;
    const NeighborMatrix frozen = dnsm_select(temporal_profile(z), cfg);
    auto loss = [&] {
        Tensor out = termm_gat(z, frozen, p);
        return mean_all(mul(out, out));
    };
    CHECK(test_util::grad_check_store(store, loss) < 1e-6);
}
