#include "dimignn/trip.hpp"

#include "support/test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dimignn;

namespace {

TripBlockParams make_block(ParamStore& store, Rng& rng, int hidden, int heads,
                           NormKind norm, bool with_merge) {
    return TripBlockParams::init(hidden, heads, norm, with_merge, store, rng, "blk.trip");
}

void zero_param(Tensor t) {
    t.mutable_values().assign(t.values().size(), 0.0);
}

} // namespace

TEST_CASE("dyt evaluates gamma*tanh(alpha*x)+beta") {
    ParamStore store;
    NormParams p = NormParams::init(NormKind::Dyt, 1, store, "n");

    // x = 0 gives beta regardless of alpha and gamma.
    p.bias.mutable_values() = {0.25};
    Tensor zero({2, 1}, {0.0, 0.0});
    Tensor at_zero = dyt(zero, p);
    for (double v : at_zero.values()) CHECK(v == doctest::Approx(0.25));

    // alpha=0.5, gamma=2, beta=1 at x=2: 2*tanh(1)+1.
    p.alpha.mutable_values() = {0.5};
    p.gain.mutable_values() = {2.0};
    p.bias.mutable_values() = {1.0};
    Tensor x({1, 1}, {2.0});
    CHECK(dyt(x, p).values()[0] == doctest::Approx(2.5231884).epsilon(1e-7));

    // Saturation: large positive x approaches gamma + beta.
    Tensor big({1, 1}, {500.0});
    CHECK(dyt(big, p).values()[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("layernorm normalizes the hidden axis before the affine map") {
    ParamStore store;
    NormParams p = NormParams::init(NormKind::LayerNorm, 2, store, "ln");

    // Hand case: (1, 3) centers to (-1, 1) under unit gain, zero bias.
    Tensor x({1, 2}, {1.0, 3.0});
    Tensor y = layernorm(x, p.gain, p.bias);
    CHECK(y.values()[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(y.values()[1] == doctest::Approx(1.0).epsilon(1e-9));

    // Constant vectors map to zero, not NaN.
    Tensor flat({1, 2}, {4.0, 4.0});
    Tensor flat_out = layernorm(flat, p.gain, p.bias);
    for (double v : flat_out.values()) CHECK(v == 0.0);

    // Pre-affine mean ~0 and variance ~1 over the hidden axis.
    ParamStore store8;
    NormParams p8 = NormParams::init(NormKind::LayerNorm, 8, store8, "ln8");
    std::mt19937_64 gen(3);
    Tensor r = test_util::random_tensor({5, 8}, gen, -2, 2);
    Tensor n = layernorm(r, p8.gain, p8.bias);
    for (int row = 0; row < 5; ++row) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 8; ++j) mean += n.at({row, j});
        mean /= 8;
        for (int j = 0; j < 8; ++j) {
            const double d = n.at({row, j}) - mean;
            var += d * d;
        }
        var /= 8;
        CHECK(std::fabs(mean) < 1e-6);
        CHECK(std::fabs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("merge_segments halves the count, duplicate-padding odd lengths") {
    ParamStore store;
    Rng rng(1);
    MergeParams p = MergeParams::init(4, store, rng, "m");
    std::mt19937_64 gen(2);

    Tensor z4 = test_util::random_tensor({4, 2, 2, 4}, gen);
    CHECK(merge_segments(z4, p).shape() == Shape{2, 2, 2, 4});
    Tensor z5 = test_util::random_tensor({5, 2, 2, 4}, gen);
    CHECK(merge_segments(z5, p).shape() == Shape{3, 2, 2, 4});
}

TEST_CASE("identity-like merge projection returns the even segments") {
    // Weight [I; 0] makes output pair j equal input segment 2j.
    ParamStore store;
    Rng rng(1);
    MergeParams p = MergeParams::init(3, store, rng, "m");
    std::vector<double> w(static_cast<std::size_t>(6) * 3, 0.0);
    for (int i = 0; i < 3; ++i) w[static_cast<std::size_t>(i) * 3 + i] = 1.0;
    p.weight.mutable_values() = w;
    p.bias.mutable_values() = {0, 0, 0};

    std::mt19937_64 gen(4);
    Tensor z = test_util::random_tensor({4, 2, 1, 3}, gen);
    Tensor m = merge_segments(z, p);
    for (int j = 0; j < 2; ++j) {
        for (int n = 0; n < 2; ++n) {
            for (int d = 0; d < 3; ++d) {
                CHECK(m.at({j, n, 0, d}) == doctest::Approx(z.at({2 * j, n, 0, d})));
            }
        }
    }
}

TEST_CASE("attention over a single position is the value-then-output projection") {
    ParamStore store;
    Rng rng(5);
    MsaParams p = MsaParams::init(4, 2, store, rng, "msa");
    std::mt19937_64 gen(6);
    Tensor z = test_util::random_tensor({1, 2, 3, 4}, gen);  // time axis has length 1

    MsaDebug dbg;
    Tensor out = msa_axis(z, AttnAxis::Time, p, &dbg);
    CHECK(out.shape() == z.shape());
    for (double w : dbg.attention.values()) CHECK(w == doctest::Approx(1.0));

    Tensor expected = linear(linear(z, p.wv, p.bv), p.wo, p.bo);
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        CHECK(out.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-12));
    }
}

TEST_CASE("attention weights are row-normalized and uniform for identical keys") {
    ParamStore store;
    Rng rng(7);
    MsaParams p = MsaParams::init(4, 2, store, rng, "msa");
    std::mt19937_64 gen(8);

    Tensor z = test_util::random_tensor({5, 2, 2, 4}, gen);
    MsaDebug dbg;
    msa_axis(z, AttnAxis::Time, p, &dbg);
    const auto& a = dbg.attention;
    const int rows = a.shape()[0] * a.shape()[1];
    for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (int j = 0; j < a.shape()[2]; ++j) sum += a.values()[r * a.shape()[2] + j];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Identical positions along the attended axis: weights become 1/L.
    std::vector<double> rep;
    Tensor row = test_util::random_tensor({1, 2, 2, 4}, gen);
    for (int i = 0; i < 5; ++i) rep.insert(rep.end(), row.values().begin(), row.values().end());
    Tensor uniform({5, 2, 2, 4}, rep);
    MsaDebug dbg2;
    msa_axis(uniform, AttnAxis::Time, p, &dbg2);
    for (double w : dbg2.attention.values()) CHECK(w == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("trip_forward keeps L on the first block and halves it on deeper blocks") {
    ParamStore store;
    Rng rng(11);
    TripBlockParams first = make_block(store, rng, 4, 2, NormKind::Dyt, false);
    TripBlockParams deeper = TripBlockParams::init(4, 2, NormKind::Dyt, true, store, rng, "deep.trip");
    std::mt19937_64 gen(12);

    Tensor z = test_util::random_tensor({6, 3, 2, 4}, gen);
    CHECK(trip_forward(z, true, first).shape() == Shape{6, 3, 2, 4});
    CHECK(trip_forward(z, false, deeper).shape() == Shape{3, 3, 2, 4});
}

TEST_CASE("zeroed output projections collapse the block to four norm applications") {
    for (bool deeper : {false, true}) {
        ParamStore store;
        Rng rng(13);
        TripBlockParams p = TripBlockParams::init(4, 2, NormKind::Dyt, deeper, store, rng, "b.trip");
        zero_param(p.msa_time.wo);
        zero_param(p.msa_time.bo);
        zero_param(p.msa_attr.wo);
        zero_param(p.msa_attr.bo);
        zero_param(p.mlp_time.w2);
        zero_param(p.mlp_time.b2);
        zero_param(p.mlp_attr.w2);
        zero_param(p.mlp_attr.b2);

        std::mt19937_64 gen(14);
        Tensor z = test_util::random_tensor({4, 2, 2, 4}, gen);
        Tensor out = trip_forward(z, !deeper, p);

        Tensor base = deeper ? merge_segments(z, *p.merge) : z;
        Tensor expected = dyt(dyt(dyt(dyt(base, p.norm1), p.norm2), p.norm3), p.norm4);
        CHECK(out.values() == expected.values());  // bit-exact
    }
}

TEST_CASE("every norm site's parameters receive gradient under a generic loss") {
    ParamStore store;
    Rng rng(15);
    TripBlockParams p = make_block(store, rng, 4, 2, NormKind::Dyt, false);
    std::mt19937_64 gen(16);
    Tensor z = test_util::random_tensor({3, 2, 2, 4}, gen);

    {
        Tape tape;
        Tensor out = trip_forward(z, true, p);
        tape.backward(mean_all(mul(out, out)));
    }
    for (const auto& norm : {p.norm1, p.norm2, p.norm3, p.norm4}) {
        for (const Tensor& t : {norm.alpha, norm.gain, norm.bias}) {
            REQUIRE(t.has_grad());
            double mag = 0.0;
            for (double g : t.grad()) mag += std::fabs(g);
            CHECK(mag > 0.0);
        }
    }
    store.zero_grads();
}

TEST_CASE("trip_forward gradients match finite differences") {
    for (bool deeper : {false, true}) {
        ParamStore store;
        Rng rng(17);
        TripBlockParams p = TripBlockParams::init(4, 2, NormKind::Dyt, deeper, store, rng, "b.trip");
        std::mt19937_64 gen(18);
        Tensor z = test_util::random_tensor({2, 3, 2, 4}, gen);

        auto loss = [&] {
            Tensor out = trip_forward(z, !deeper, p);
            return mean_all(mul(out, out));
        };
        CHECK(test_util::grad_check_store(store, loss) < 1e-6);
    }
}

TEST_CASE("layernorm mode runs the full block with finite outputs and checkable grads") {
    ParamStore store;
    Rng rng(19);
    TripBlockParams p = make_block(store, rng, 4, 2, NormKind::LayerNorm, false);
    std::mt19937_64 gen(20);
    Tensor z = test_util::random_tensor({3, 2, 2, 4}, gen);

    Tensor out = trip_forward(z, true, p);
    CHECK(out.shape() == z.shape());
    for (double v : out.values()) CHECK(std::isfinite(v));

    auto loss = [&] {
        Tensor y = trip_forward(z, true, p);
        return mean_all(mul(y, y));
    };
    CHECK(test_util::grad_check_store(store, loss) < 1e-6);
}
