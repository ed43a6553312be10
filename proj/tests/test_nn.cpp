#include "stylecap/nn.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace stylecap;

TEST_CASE("linear forward matches explicit dot products") {
    nn::Linear lin(3, 4);
    Rng rng(1);
    lin.init(rng);
    Vec x = rng.normal_vec(4);
    Vec y = lin.forward(x);
    for (int i = 0; i < 3; ++i) {
        double acc = lin.b[i];
        for (int j = 0; j < 4; ++j) acc += lin.w(i, j) * x[j];
        CHECK(y[i] == Catch::Approx(acc).epsilon(1e-12));
    }
    CHECK_THROWS_AS(lin.forward(rng.normal_vec(5)), std::invalid_argument);
}

TEST_CASE("linear backward matches finite differences") {
    nn::Linear lin(3, 4);
    Rng rng(2);
    lin.init(rng);
    Vec x = rng.normal_vec(4);
    Vec target = rng.normal_vec(3);

    auto loss = [&]() { return 0.5 * (lin.forward(x) - target).squaredNorm(); };

    std::vector<TensorRef> refs;
    lin.collect(refs, "lin");
    zero_grads(refs);
    Vec gy = lin.forward(x) - target;
    Vec dx = lin.backward(x, gy);
    auto rep = test_util::grad_check(refs, loss);
    CHECK(rep.max_rel_err < 1e-6);

    for (int j = 0; j < 4; ++j) {
        const double fd = test_util::fd_grad(&x[j], loss);
        CHECK(test_util::rel_err(dx[j], fd) < 1e-6);
    }
}

TEST_CASE("lstm backward matches finite differences") {
    const int hidden = 5, input = 3, steps = 4;
    nn::Lstm lstm(hidden, input);
    Rng rng(3);
    lstm.init(rng);
    std::vector<Vec> xs;
    for (int t = 0; t < steps; ++t) xs.push_back(rng.normal_vec(input));
    Vec target = rng.normal_vec(hidden);

    // loss reads every step's hidden state so all dh paths are exercised
    auto loss = [&]() {
        auto tr = nn::lstm_forward(lstm, xs);
        double l = 0.5 * (tr.h.back() - target).squaredNorm();
        for (int t = 0; t < steps; ++t) l += 0.25 * tr.h[t].squaredNorm();
        return l;
    };

    std::vector<TensorRef> refs;
    lstm.collect(refs, "lstm");
    zero_grads(refs);
    auto tr = nn::lstm_forward(lstm, xs);
    std::vector<Vec> dh(steps);
    for (int t = 0; t < steps; ++t) {
        dh[t] = 0.5 * tr.h[t];
        if (t == steps - 1) dh[t] += tr.h.back() - target;
    }
    auto dx = nn::lstm_backward(lstm, tr, dh);

    auto rep = test_util::grad_check(refs, loss, 20);
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);

    for (int t = 0; t < steps; ++t)
        for (int j = 0; j < input; ++j) {
            const double fd = test_util::fd_grad(&xs[t][j], loss);
            CHECK(test_util::rel_err(dx[t][j], fd) < 1e-6);
        }
}

TEST_CASE("embedding gradients accumulate per index") {
    nn::Embedding emb(4, 6);
    Rng rng(4);
    emb.init(rng);
    std::vector<int> ids = {2, 5, 2};
    Vec w = rng.normal_vec(4);

    auto loss = [&]() {
        double l = 0.0;
        for (int id : ids) l += w.dot(emb.lookup(id));
        return l;
    };

    std::vector<TensorRef> refs;
    emb.collect(refs, "emb");
    zero_grads(refs);
    for (int id : ids) emb.accumulate(id, w);

    auto rep = test_util::grad_check(refs, loss, 24);
    CHECK(rep.max_rel_err < 1e-6);
    // duplicate index accumulates twice
    CHECK(emb.ge.col(2).isApprox(Vec(2.0 * w)));
}

TEST_CASE("softmax and cross entropy") {
    Rng rng(5);
    Vec logits = rng.normal_vec(7);
    Vec p = nn::softmax(logits);
    CHECK(p.sum() == Catch::Approx(1.0).margin(1e-12));
    CHECK(p.minCoeff() > 0.0);

    // shift invariance
    Vec shifted = logits.array() + 123.0;
    CHECK(nn::softmax(shifted).isApprox(p, 1e-9));

    Vec dlogits;
    const double l = nn::cross_entropy_from_logits(logits, 3, &dlogits);
    CHECK(l == Catch::Approx(-std::log(p[3])).epsilon(1e-12));
    auto loss = [&]() { return nn::cross_entropy_from_logits(logits, 3); };
    for (int i = 0; i < logits.size(); ++i) {
        const double fd = test_util::fd_grad(&logits[i], loss);
        CHECK(test_util::rel_err(dlogits[i], fd) < 1e-6);
    }
}

TEST_CASE("adam is deterministic and reduces a quadratic") {
    auto run = [&]() {
        nn::Linear lin(2, 2);
        Rng rng(6);
        lin.init(rng);
        Vec x(2);
        x << 1.0, -2.0;
        Vec target(2);
        target << 0.3, 0.7;
        std::vector<TensorRef> refs;
        lin.collect(refs, "lin");
        nn::Adam opt(refs, 1e-2);
        double last = 0.0;
        for (int it = 0; it < 200; ++it) {
            zero_grads(refs);
            Vec gy = lin.forward(x) - target;
            last = 0.5 * gy.squaredNorm();
            lin.backward(x, gy);
            opt.step();
        }
        return std::pair{last, lin.w};
    };
    auto [loss1, w1] = run();
    auto [loss2, w2] = run();
    CHECK(loss1 < 1e-4);
    CHECK(loss1 == loss2);
    CHECK(w1 == w2);
}

TEST_CASE("rng normal has sane moments and is reproducible") {
    Rng a(123), b(123);
    double mean = 0.0, var = 0.0;
    const int n = 20000;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = a.normal();
    for (double x : xs) mean += x / n;
    for (double x : xs) var += (x - mean) * (x - mean) / n;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
    for (int i = 0; i < 100; ++i) CHECK(xs[i] == b.normal());
}
