#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ksddpg/adam.hpp"
#include "ksddpg/checkpoint.hpp"
#include "ksddpg/dense.hpp"
#include "ksddpg/errors.hpp"
#include "ksddpg/matrix.hpp"
#include "oracles.hpp"

using namespace ksddpg;

TEST_CASE("matrix basics and shape errors") {
    Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    Matrix b = Matrix::from_rows({{7, 8}, {9, 10}, {11, 12}});
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(58.0));
    CHECK(c(1, 1) == doctest::Approx(154.0));
    CHECK_THROWS_AS(matmul(a, c), DimensionError);
    CHECK_THROWS_AS(a + b, DimensionError);

    Matrix t = transpose(a);
    CHECK(t.rows() == 3);
    CHECK(t(2, 1) == doctest::Approx(6.0));

    Matrix left = Matrix::row({1, 2});
    Matrix right = Matrix::row({3});
    Matrix joined = concat_rows({&left, &right});
    CHECK(joined.cols() == 3);
    CHECK(joined(0, 2) == doctest::Approx(3.0));
    Matrix mid = slice_row(joined, 1, 2);
    CHECK(mid(0, 0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(slice_row(joined, 2, 2), DimensionError);
}

TEST_CASE("dense_forward trivial cases") {
    // x=[0,0], W=0, b=0, relu -> zeros
    DenseParams p{Matrix(2, 3), Matrix(1, 3)};
    Matrix y = dense_forward(Matrix(1, 2), p, Activation::Relu);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.at(i) == 0.0);

    // x=[1], W=[[2]], b=[-1], relu -> [1]
    DenseParams q{Matrix::from_rows({{2.0}}), Matrix::row({-1.0})};
    Matrix y2 = dense_forward(Matrix::row({1.0}), q, Activation::Relu);
    CHECK(y2(0, 0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(dense_forward(Matrix(1, 3), q, Activation::Relu), DimensionError);
}

TEST_CASE("dense_forward matches scalar-loop oracle") {
    Rng rng = make_rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        DenseParams p = glorot_dense(3, 2, rng);
        Matrix x = oracle::random_matrix(1, 3, rng);
        Matrix got = dense_forward(x, p, Activation::Tanh);
        auto want = oracle::affine(oracle::to_vec(x), oracle::to_rows(p.weight),
                                   oracle::to_vec(p.bias), [](double v) { return std::tanh(v); });
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::abs(got(0, j) - want[j]) < 1e-12);
        }
    }
}

TEST_CASE("dense identity activation is linear when bias is zero") {
    Rng rng = make_rng(12);
    DenseParams p = glorot_dense(4, 3, rng);
    p.bias.fill(0.0);
    Matrix x = oracle::random_matrix(1, 4, rng);
    Matrix y = oracle::random_matrix(1, 4, rng);
    const double alpha = 0.7, beta = -1.3;
    Matrix mix = alpha * x + beta * y;
    Matrix lhs = dense_forward(mix, p, Activation::Identity);
    Matrix rhs = alpha * dense_forward(x, p, Activation::Identity) +
                 beta * dense_forward(y, p, Activation::Identity);
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("dense_backward trivial cases") {
    Rng rng = make_rng(13);
    DenseParams p = glorot_dense(2, 3, rng);
    DenseCache cache;
    dense_forward(Matrix::row({0.3, -0.4}), p, Activation::Tanh, &cache);
    DenseGrads g = dense_backward(Matrix(1, 3), cache, p);
    CHECK(inf_norm(g.input) == 0.0);
    CHECK(inf_norm(g.weight) == 0.0);
    CHECK(inf_norm(g.bias) == 0.0);

    // identity activation, x=[1,0]: grad_w row 0 = grad_out, row 1 = 0
    DenseCache cache2;
    dense_forward(Matrix::row({1.0, 0.0}), p, Activation::Identity, &cache2);
    Matrix go = Matrix::row({0.5, -2.0, 3.0});
    DenseGrads g2 = dense_backward(go, cache2, p);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(g2.weight(0, j) == doctest::Approx(go(0, j)));
        CHECK(g2.weight(1, j) == 0.0);
    }

    // consumed cache is a usage error
    CHECK_THROWS_AS(dense_backward(go, cache2, p), UsageError);
}

TEST_CASE("dense_backward matches central finite differences") {
    Rng rng = make_rng(14);
    for (Activation act : {Activation::Identity, Activation::Tanh, Activation::Sigmoid,
                           Activation::Relu}) {
        DenseParams p = glorot_dense(3, 2, rng);
        Matrix x = oracle::random_matrix(1, 3, rng, 0.1, 0.9);  // keep relu pre-acts off the kink
        Matrix upstream = oracle::random_matrix(1, 2, rng);

        auto loss = [&]() {
            Matrix y = dense_forward(x, p, act);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += upstream.at(i) * y.at(i);
            return s;
        };
        DenseCache cache;
        dense_forward(x, p, act, &cache);
        DenseGrads g = dense_backward(upstream, cache, p);

        CHECK(oracle::max_fd_rel_err(p.weight, g.weight, loss) < 1e-5);
        CHECK(oracle::max_fd_rel_err(p.bias, g.bias, loss) < 1e-5);
        CHECK(oracle::max_fd_rel_err(x, g.input, loss) < 1e-5);
    }
}

TEST_CASE("adam_step trivial and closed-form first step") {
    Matrix params = Matrix::row({1.0, -2.0});
    AdamState st = make_adam(1, 2, 0.01);

    SUBCASE("zero gradient leaves params unchanged") {
        Matrix before = params;
        adam_step(params, Matrix(1, 2), st);
        CHECK(max_abs_diff(params, before) == 0.0);
        CHECK(st.step_count == 1);
    }
    SUBCASE("zero learning rate leaves params unchanged") {
        st.lr = 0.0;
        Matrix before = params;
        adam_step(params, Matrix::row({3.0, -7.0}), st);
        CHECK(max_abs_diff(params, before) == 0.0);
    }
    SUBCASE("first step matches lr*g/(|g|+eps)") {
        const double g = 0.37;
        Matrix grads = Matrix::row({g, 0.0});
        adam_step(params, grads, st);
        const double expected = 1.0 - st.lr * g / (std::abs(g) + st.epsilon);
        CHECK(params(0, 0) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(params(0, 1) == doctest::Approx(-2.0));
    }
    SUBCASE("non-finite gradient rejected, params untouched") {
        Matrix grads = Matrix::row({1.0, std::nan("")});
        Matrix before = params;
        CHECK_THROWS_AS(adam_step(params, grads, st), NumericError);
        CHECK(max_abs_diff(params, before) == 0.0);
    }
}

TEST_CASE("soft_update bounds and contraction") {
    Matrix target(2, 2, 0.0);
    Matrix source(2, 2, 1.0);

    SUBCASE("tau=1 copies source") {
        soft_update(target, source, 1.0);
        CHECK(max_abs_diff(target, source) == 0.0);
    }
    SUBCASE("tau=0 is a no-op") {
        soft_update(target, source, 0.0);
        CHECK(inf_norm(target) == 0.0);
    }
    SUBCASE("tau=0.01 moves by 0.01") {
        soft_update(target, source, 0.01);
        CHECK(target(0, 0) == doctest::Approx(0.01));
    }
    SUBCASE("tau outside [0,1] is a config error") {
        CHECK_THROWS_AS(soft_update(target, source, 1.5), ConfigError);
        CHECK_THROWS_AS(soft_update(target, source, -0.1), ConfigError);
    }
    SUBCASE("n repeats contract by (1-tau)^n") {
        Rng rng = make_rng(15);
        Matrix t = oracle::random_matrix(3, 3, rng);
        Matrix s = oracle::random_matrix(3, 3, rng);
        const double initial = inf_norm(t - s);
        const double tau = 0.05;
        const int n = 40;
        for (int i = 0; i < n; ++i) soft_update(t, s, tau);
        const double want = std::pow(1.0 - tau, n) * initial;
        CHECK(std::abs(inf_norm(t - s) - want) < 1e-10);
    }
}

TEST_CASE("glorot init stays inside the fan bound") {
    Rng rng = make_rng(16);
    DenseParams p = glorot_dense(7, 5, rng);
    const double bound = std::sqrt(6.0 / 12.0);
    for (double v : p.weight.values()) {
        CHECK(std::abs(v) <= bound);
    }
    CHECK(inf_norm(p.bias) == 0.0);
}

TEST_CASE("checkpoint round-trip and version guard") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ksddpg_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "params.ckpt").string();

    Rng rng = make_rng(17);
    NamedMatrices entries;
    entries.emplace_back("actor.w", oracle::random_matrix(3, 4, rng));
    entries.emplace_back("actor.b", oracle::random_matrix(1, 4, rng));
    save_checkpoint(path, entries);

    NamedMatrices back = load_checkpoint(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "actor.w");
    CHECK(max_abs_diff(back[0].second, entries[0].second) == 0.0);
    CHECK(max_abs_diff(checkpoint_get(back, "actor.b"), entries[1].second) == 0.0);
    CHECK_THROWS_AS(checkpoint_get(back, "missing"), ConfigError);

    const std::string bad = (dir / "bad.ckpt").string();
    {
        std::FILE* f = std::fopen(bad.c_str(), "wb");
        std::fputs("NOT-A-CKPT\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(bad), VersionError);
}
