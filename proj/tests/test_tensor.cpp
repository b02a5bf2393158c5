#include "dimignn/tensor.hpp"

#include "support/test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace dimignn;

TEST_CASE("tensor construction enforces shape invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(Tensor({0, 3}, {}), ShapeError);
    CHECK_THROWS_AS(Tensor({-1}, {1.0}), ShapeError);
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK(t.at({1, 0}) == 3.0);
}

TEST_CASE("matmul identity and shape errors") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor c = matmul(a, eye);
    CHECK(c.values() == std::vector<double>{1, 2, 3, 4});

    Tensor bad({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_WITH_AS(matmul(a, bad) /* inner 2 vs 3 */, doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("matmul batched and linear-over-last-axis forms") {
    // Two stacked 2x2 products.
    Tensor a({2, 2, 2}, {1, 0, 0, 1, 2, 0, 0, 2});
    Tensor b({2, 2, 2}, {1, 2, 3, 4, 1, 2, 3, 4});
    Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 2, 2});
    CHECK(c.values() == std::vector<double>{1, 2, 3, 4, 2, 4, 6, 8});

    // Rank-3 times rank-2 weight maps the last axis.
    Tensor x({2, 1, 3}, {1, 2, 3, 4, 5, 6});
    Tensor w({3, 2}, {1, 0, 0, 1, 1, 1});
    Tensor y = matmul(x, w);
    CHECK(y.shape() == Shape{2, 1, 2});
    CHECK(y.values() == std::vector<double>{4, 5, 10, 11});
}

TEST_CASE("softmax symmetry, normalization and shift invariance") {
    Tensor z({3}, {0, 0, 0});
    Tensor s = softmax_lastdim(z);
    for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = test_util::random_tensor({4, 5}, rng, -3, 3);
        Tensor sm = softmax_lastdim(x);
        for (int r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (int j = 0; j < 5; ++j) sum += sm.at({r, j});
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
        const double c = rng() % 7 + 0.5;
        Tensor shifted = softmax_lastdim(add(x, Tensor::scalar(c)));
        for (std::size_t i = 0; i < sm.values().size(); ++i) {
            CHECK(std::fabs(sm.values()[i] - shifted.values()[i]) < 1e-6);
        }
    }
}

TEST_CASE("tanh reference value") {
    Tensor x({1}, {1.0});
    CHECK(tanh(x).values()[0] == doctest::Approx(0.7615942).epsilon(1e-7));
}

TEST_CASE("non-finite outputs abort with the op named") {
    Tensor big({1}, {1000.0});
    CHECK_THROWS_WITH_AS(exp(big), doctest::Contains("exp"), NumericError);
    Tensor neg({1}, {-1.0});
    CHECK_THROWS_AS(log(neg), NumericError);
}

TEST_CASE("broadcasting matches trailing-alignment rules") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor row({3}, {10, 20, 30});
    CHECK(add(x, row).values() == std::vector<double>{11, 22, 33, 14, 25, 36});
    Tensor col({2, 1}, {100, 200});
    CHECK(add(x, col).values() == std::vector<double>{101, 102, 103, 204, 205, 206});
    CHECK(mul(x, Tensor::scalar(2.0)).values() == std::vector<double>{2, 4, 6, 8, 10, 12});

    Tensor bad({4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(add(x, bad), ShapeError);
}

TEST_CASE("slice, concat, transpose, take round out the op set") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(slice(x, 1, 1, 2).values() == std::vector<double>{2, 3, 5, 6});
    CHECK_THROWS_AS(slice(x, 1, 2, 2), ShapeError);

    Tensor y({1, 3}, {7, 8, 9});
    Tensor cat = concat({x, y}, 0);
    CHECK(cat.shape() == Shape{3, 3});
    CHECK(cat.values() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});

    Tensor t = transpose(x, {1, 0});
    CHECK(t.shape() == Shape{3, 2});
    CHECK(t.values() == std::vector<double>{1, 4, 2, 5, 3, 6});

    Tensor gathered = take(x, 1, {2, 0, 2}, {3});
    CHECK(gathered.values() == std::vector<double>{3, 1, 3, 6, 4, 6});
    CHECK_THROWS_AS(take(x, 1, {5}, {1}), ShapeError);
}

TEST_CASE("mean_axis with and without keepdim") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor m0 = mean_axis(x, 0);
    CHECK(m0.shape() == Shape{3});
    CHECK(m0.values() == std::vector<double>{2.5, 3.5, 4.5});
    Tensor m1 = mean_axis(x, 1, true);
    CHECK(m1.shape() == Shape{2, 1});
    CHECK(m1.values() == std::vector<double>{2, 5});
    Tensor v({3}, {3, 4, 5});
    CHECK(mean_axis(v, 0).shape() == Shape{1});
}

TEST_CASE("forward_op dispatches every named kind") {
    Tensor a({2}, {1, 2});
    Tensor b({2}, {3, 4});
    CHECK(forward_op(OpKind::Add, {a, b}).values() == std::vector<double>{4, 6});
    CHECK(forward_op(OpKind::Sub, {a, b}).values() == std::vector<double>{-2, -2});
    CHECK(forward_op(OpKind::Mul, {a, b}).values() == std::vector<double>{3, 8});
    CHECK(forward_op(OpKind::Tanh, {Tensor({1}, {0.0})}).values()[0] == 0.0);
    CHECK(forward_op(OpKind::Relu, {Tensor({2}, {-1, 2})}).values() == std::vector<double>{0, 2});
    OpArgs leaky;
    leaky.negative_slope = 0.5;
    CHECK(forward_op(OpKind::LeakyRelu, {Tensor({2}, {-2, 2})}, leaky).values() ==
          std::vector<double>{-1, 2});
    OpArgs ax;
    ax.axis = 0;
    CHECK(forward_op(OpKind::MeanAxis, {Tensor({2}, {1, 3})}, ax).values() == std::vector<double>{2});
    CHECK_THROWS_AS(forward_op(OpKind::MatMul, {a}, {}), ShapeError);
    CHECK(std::string(op_kind_name(OpKind::SoftmaxLastDim)) == "softmax_lastdim");
}
