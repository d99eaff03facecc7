#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "cfa/optim.hpp"
#include "cfa/rng.hpp"
#include "cfa/tensor.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cfa;
using cfa::testing::fd_gradient;
using cfa::testing::rel_err;

namespace {

Tensor random_parameter(Shape shape, Rng& rng, double scale = 1.0) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
    return Tensor::parameter(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
    Tape tape;
    auto eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    auto b = Tensor::from_values({2, 2}, {3, 4, 5, 6});
    auto prod = tape.matmul(eye, b);
    CHECK(prod.values() == std::vector<double>{3, 4, 5, 6});

    auto r = tape.matmul(Tensor::from_values({1, 2}, {1, 2}), Tensor::from_values({2, 1}, {3, 4}));
    CHECK(r.shape() == Shape{1, 1});
    CHECK(r.values()[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tape tape;
    auto a = Tensor::from_values({2, 3}, std::vector<double>(6, 1.0));
    auto b = Tensor::from_values({2, 2}, std::vector<double>(4, 1.0));
    CHECK_THROWS_AS(tape.matmul(a, b), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(11);
    auto a = random_parameter({3, 3}, rng);
    auto b = random_parameter({3, 3}, rng);

    Tape tape;
    auto loss = tape.sum(tape.matmul(a, b));
    tape.backward(loss);

    auto eval = [&]() {
        Tape t(false);
        return t.sum(t.matmul(a, b)).scalar_value();
    };
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(rel_err(a.grad()[i], fd_gradient(a, i, eval)) < 1e-5);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(rel_err(b.grad()[i], fd_gradient(b, i, eval)) < 1e-5);
    }
}

TEST_CASE("elementwise basics") {
    Tape tape;
    auto r = tape.relu(Tensor::row({-1, 0, 2}));
    CHECK(r.values() == std::vector<double>{0, 0, 2});

    auto lg = tape.log(Tensor::row({1}));
    CHECK(lg.values()[0] == doctest::Approx(0.0));

    CHECK_THROWS_AS(tape.log(Tensor::row({0.0})), DomainError);
    CHECK_THROWS_AS(tape.log(Tensor::row({-1.0})), DomainError);
    CHECK_THROWS_AS(tape.add(Tensor::row({1, 2}), Tensor::row({1, 2, 3})), ShapeError);
}

TEST_CASE("exp gradient matches finite differences on a random vector") {
    Rng rng(7);
    auto x = random_parameter({8}, rng);
    Tape tape;
    auto loss = tape.sum(tape.exp(x));
    tape.backward(loss);
    auto eval = [&]() {
        Tape t(false);
        return t.sum(t.exp(x)).scalar_value();
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(rel_err(x.grad()[i], fd_gradient(x, i, eval)) < 1e-5);
    }
}

TEST_CASE("every differentiable op agrees with central finite differences") {
    Rng rng(23);
    // Positive inputs keep log in-domain; subtract/exp/relu etc. are fine.
    auto x = random_parameter({6}, rng);
    for (double& v : x.values()) v = 0.3 + std::abs(v);
    auto y = random_parameter({6}, rng);
    auto s = random_parameter({1}, rng);

    struct Case {
        const char* name;
        std::function<Tensor(Tape&)> build;
    };
    const std::vector<Case> cases = {
        {"add", [&](Tape& t) { return t.sum(t.add(x, y)); }},
        {"add-scalar", [&](Tape& t) { return t.sum(t.add(x, s)); }},
        {"sub", [&](Tape& t) { return t.sum(t.sub(x, y)); }},
        {"sub-scalar", [&](Tape& t) { return t.sum(t.sub(s, y)); }},
        {"mul", [&](Tape& t) { return t.sum(t.mul(x, y)); }},
        {"mul-scalar", [&](Tape& t) { return t.sum(t.mul(s, x)); }},
        {"relu", [&](Tape& t) { return t.sum(t.relu(y)); }},
        {"exp", [&](Tape& t) { return t.sum(t.exp(y)); }},
        {"log", [&](Tape& t) { return t.sum(t.log(x)); }},
        {"scale", [&](Tape& t) { return t.sum(t.scale(x, -1.7)); }},
        {"clamp_min", [&](Tape& t) { return t.sum(t.clamp_min(y, 0.25)); }},
        {"softmax", [&](Tape& t) { return t.sum(t.mul(y, t.softmax(x))); }},
        {"mean", [&](Tape& t) { return t.mean(t.mul(x, y)); }},
        {"l2_norm", [&](Tape& t) { return t.l2_norm(x); }},
        {"concat", [&](Tape& t) { return t.sum(t.mul(t.concat({x, y}), t.concat({y, x}))); }},
        {"matvec", [&](Tape& t) {
             return t.sum(t.matmul(x, Tensor::from_values({6, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12})));
         }},
    };

    for (const auto& c : cases) {
        CAPTURE(c.name);
        for (Tensor p : {x, y, s}) p.zero_grad();
        Tape tape;
        tape.backward(c.build(tape));
        auto eval = [&]() {
            Tape t(false);
            return c.build(t).scalar_value();
        };
        for (Tensor p : {x, y, s}) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double ad = p.grad().empty() ? 0.0 : p.grad()[i];
                CHECK(rel_err(ad, fd_gradient(p, i, eval)) < 1e-4);
            }
        }
    }
}

TEST_CASE("softmax basics and stability") {
    Tape tape;
    auto p = tape.softmax(Tensor::row({0, 0}));
    CHECK(p.values()[0] == doctest::Approx(0.5));
    CHECK(p.values()[1] == doctest::Approx(0.5));

    for (double c : {-3.0, 0.0, 42.0}) {
        auto q = tape.softmax(Tensor::row({c, c, c, c}));
        for (double v : q.values()) CHECK(v == doctest::Approx(0.25));
    }

    auto big = tape.softmax(Tensor::row({1000, 1000}));
    CHECK(big.values()[0] == doctest::Approx(0.5));

    CHECK_THROWS_AS(Tensor::from_values({0}, {}), ShapeError);
    CHECK_THROWS_AS(tape.softmax(Tensor::from_values({2, 2}, {1, 2, 3, 4})), ShapeError);
}

TEST_CASE("softmax output is a probability vector on random inputs") {
    Rng rng(5);
    Tape tape(false);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.index(10);
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(-50.0, 50.0);
        auto p = tape.softmax(Tensor::row(v));
        double total = 0.0;
        for (double x : p.values()) {
            CHECK(x >= 0.0);
            total += x;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward basics") {
    auto x = Tensor::parameter({5}, {1, 2, 3, 4, 5});

    Tape tape;
    auto loss = tape.sum(x);
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>(5, 1.0));

    x.zero_grad();
    Tape tape2;
    auto half_sq = tape2.scale(tape2.sum(tape2.mul(x, x)), 0.5);
    tape2.backward(half_sq);
    CHECK(x.grad() == x.values());

    Tape tape3;
    auto nonscalar = tape3.add(x, x);
    CHECK_THROWS_AS(tape3.backward(nonscalar), ContractError);
}

TEST_CASE("unreachable parameters keep zero gradient") {
    auto x = Tensor::parameter({3}, {1, 2, 3});
    auto unused = Tensor::parameter({3}, {4, 5, 6});
    unused.zero_grad();
    Tape tape;
    tape.backward(tape.sum(x));
    CHECK(unused.grad() == std::vector<double>(3, 0.0));
}

TEST_CASE("backward is deterministic") {
    auto run = [] {
        Rng rng(99);
        auto a = random_parameter({4, 4}, rng);
        auto b = random_parameter({4, 4}, rng);
        Tape tape;
        auto y = tape.relu(tape.matmul(a, b));
        tape.backward(tape.sum(tape.mul(y, y)));
        std::vector<double> grads = a.grad();
        grads.insert(grads.end(), b.grad().begin(), b.grad().end());
        return grads;
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite results raise instead of propagating") {
    Tape tape;
    CHECK_THROWS_AS(tape.exp(Tensor::row({1000.0})), DomainError);
    auto huge = Tensor::row({1e308});
    CHECK_THROWS_AS(tape.add(huge, huge), DomainError);
    CHECK_THROWS_AS(Tensor::row({std::nan("")}), DomainError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto p = Tensor::parameter({3}, {1.0, -2.0, 3.0});
    AdamOptimizer opt({p}, {.lr = 1e-2});
    opt.zero_grad();
    opt.step();
    CHECK(p.values() == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam: constant gradient moves parameters against its sign") {
    auto p = Tensor::parameter({2}, {0.0, 0.0});
    AdamOptimizer opt({p}, {.lr = 1e-3});
    for (int i = 0; i < 50; ++i) {
        opt.zero_grad();
        p.grad_buffer()[0] = 0.7;
        p.grad_buffer()[1] = -1.3;
        opt.step();
    }
    CHECK(p.values()[0] < 0.0);
    CHECK(p.values()[1] > 0.0);
}

TEST_CASE("adam: first step from zeroed state matches the closed form") {
    const double lr = 1e-2;
    const double g = 0.5;
    const double eps = 1e-8;
    auto p = Tensor::parameter({1}, {1.0});
    AdamOptimizer opt({p}, {.lr = lr, .epsilon = eps});
    opt.zero_grad();
    p.grad_buffer()[0] = g;
    opt.step();
    // First step with bias correction: m_hat = g, v_hat = g^2.
    const double expected = 1.0 - lr * g / (std::sqrt(g * g) + eps);
    CHECK(p.values()[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(1.0 - p.values()[0]) == doctest::Approx(lr).epsilon(1e-6));
}

TEST_CASE("adam rejects mismatched state") {
    auto p = Tensor::parameter({2}, {0.0, 0.0});
    AdamOptimizer opt({p}, {});
    p.grad_buffer();
    p.values().push_back(0.0);  // corrupt the shape on purpose
    CHECK_THROWS_AS(opt.step(), ShapeError);
}
