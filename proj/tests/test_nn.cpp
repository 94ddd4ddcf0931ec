#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "nrr/nn.hpp"

using namespace nrr;
using nn::Network;

namespace {

Matrix row_matrix(const std::vector<double>& values) {
    Matrix m(1, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(0, i) = values[i];
    return m;
}

Network tiny_linear() {
    // y = W x + b with fixed numbers
    Network net;
    net.layers.push_back(nn::make_dense(2, 2));
    net.layers[0].dense.weights(0, 0) = 1.0;
    net.layers[0].dense.weights(0, 1) = 2.0;
    net.layers[0].dense.weights(1, 0) = -1.0;
    net.layers[0].dense.weights(1, 1) = 0.5;
    net.layers[0].dense.bias = {0.25, -0.5};
    return net;
}

}  // namespace

TEST_CASE("dense forward computes W x + b") {
    const Network net = tiny_linear();
    const Matrix y = net.forward(row_matrix({3.0, 4.0}), nn::Mode::eval);
    CHECK(y(0, 0) == doctest::Approx(1.0 * 3 + 2.0 * 4 + 0.25).epsilon(1e-15));
    CHECK(y(0, 1) == doctest::Approx(-1.0 * 3 + 0.5 * 4 - 0.5).epsilon(1e-15));
}

TEST_CASE("relu zeroes negatives and keeps positives") {
    Network net;
    net.layers.push_back(nn::make_relu());
    const Matrix y = net.forward(row_matrix({-2.0, 0.0, 3.5}), nn::Mode::eval);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == 0.0);
    CHECK(y(0, 2) == 3.5);
}

TEST_CASE("width chain validation rejects mismatched layers") {
    Network net;
    net.layers.push_back(nn::make_dense(4, 3));
    net.layers.push_back(nn::make_dense(5, 2));  // expects width 3
    CHECK_THROWS_AS(net.validate(), StructuralError);
}

TEST_CASE("skip links require equal widths and forward order") {
    Network net;
    net.layers.push_back(nn::make_dense(4, 3));
    net.layers.push_back(nn::make_relu());
    net.layers.push_back(nn::make_dense(3, 2));
    net.skips.push_back({0, 2});  // 3-wide source onto 2-wide destination
    CHECK_THROWS_AS(net.validate(), StructuralError);
    net.skips[0] = {2, 0};
    CHECK_THROWS_AS(net.validate(), StructuralError);
}

TEST_CASE("skip link adds the cached source output") {
    Network net;
    net.layers.push_back(nn::make_dense(2, 2));
    net.layers.push_back(nn::make_relu());
    net.layers.push_back(nn::make_dense(2, 2));
    // identity weights on both dense layers
    for (int li : {0, 2}) {
        net.layers[li].dense.weights(0, 0) = 1.0;
        net.layers[li].dense.weights(1, 1) = 1.0;
    }
    net.skips.push_back({1, 2});
    net.validate();
    const Matrix y = net.forward(row_matrix({1.0, 2.0}), nn::Mode::eval);
    // dst output = dense(relu(x)) + relu(x) = 2x for positive x
    CHECK(y(0, 0) == doctest::Approx(2.0));
    CHECK(y(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("eval mode ignores dropout and is repeatable") {
    Network net;
    net.layers.push_back(nn::make_dense(3, 3));
    net.layers.push_back(nn::make_dropout(0.5));
    net.init_parameters(9);
    const Matrix x = row_matrix({0.3, -0.7, 1.1});
    const Matrix a = net.forward(x, nn::Mode::eval);
    const Matrix b = net.forward(x, nn::Mode::eval);
    for (std::size_t j = 0; j < a.cols(); ++j) CHECK(a(0, j) == b(0, j));
}

TEST_CASE("train-mode dropout keeps the expected activation scale") {
    Network net;
    net.layers.push_back(nn::make_dropout(0.2));
    const std::size_t n = 20000;
    Matrix x(n, 1);
    for (std::size_t i = 0; i < n; ++i) x(i, 0) = 1.0;
    StreamRng rng(StreamKey(3).add("dropout-test"));
    nn::ForwardCache cache;
    const Matrix y = net.forward(x, nn::Mode::train, &rng, &cache);
    double mean = 0.0;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += y(i, 0);
        if (y(i, 0) == 0.0) ++zeros;
    }
    mean /= static_cast<double>(n);
    // inverted dropout: surviving units scaled by 1/keep, mean stays ~1
    CHECK(std::abs(mean - 1.0) < 0.01);
    CHECK(std::abs(zeros / static_cast<double>(n) - 0.2) < 0.01);
}

TEST_CASE("mean squared error matches the hand example") {
    const Matrix pred = row_matrix({1.0, 2.0});
    const Matrix target = row_matrix({0.0, 0.0});
    CHECK(nn::mse_loss(pred, target) == doctest::Approx(2.5).epsilon(1e-15));
    const Matrix g = nn::mse_loss_grad(pred, target);
    // d/dp mean((p-t)^2) = 2 (p-t) / n_entries
    CHECK(g(0, 0) == doctest::Approx(2.0 * 1.0 / 2.0).epsilon(1e-15));
    CHECK(g(0, 1) == doctest::Approx(2.0 * 2.0 / 2.0).epsilon(1e-15));
}

TEST_CASE("reconstruction loss sums columns and averages rows") {
    Matrix pred(1, nn::kReconstructionWidth);
    Matrix target(1, nn::kReconstructionWidth);
    pred(0, 7) = 2.0;  // single column off by two
    CHECK(nn::reconstruction_loss(pred, target) == doctest::Approx(4.0).epsilon(1e-15));

    Matrix pred2(2, nn::kReconstructionWidth);
    Matrix target2(2, nn::kReconstructionWidth);
    pred2(0, 0) = 1.0;
    pred2(1, 0) = 3.0;
    // rows contribute 1 and 9, averaged over the 2 rows
    CHECK(nn::reconstruction_loss(pred2, target2) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("adam takes the textbook first step") {
    Network net;
    net.layers.push_back(nn::make_dense(1, 1));
    net.layers[0].dense.weights(0, 0) = 0.5;
    net.layers[0].dense.bias[0] = 0.0;

    nn::OptimizerConfig cfg;
    cfg.kind = nn::OptimizerKind::adam;
    cfg.lr = 0.1;
    nn::Optimizer opt(cfg, net);

    nn::Gradients grads;
    grads.weights.assign(1, Matrix(1, 1));
    grads.bias.assign(1, std::vector<double>(1, 0.0));
    grads.weights[0](0, 0) = 0.3;
    opt.step(net, grads);

    // bias-corrected first step: m_hat = g, v_hat = g^2, step = lr * g/(|g| + eps)
    const double expected = 0.5 - 0.1 * 0.3 / (std::sqrt(0.3 * 0.3) + cfg.eps);
    CHECK(net.layers[0].dense.weights(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(net.layers[0].dense.bias[0] == 0.0);
}

TEST_CASE("adam and adamw agree when weight decay is zero") {
    Network a;
    a.layers.push_back(nn::make_dense(3, 2));
    a.init_parameters(4);
    Network b = a;

    nn::OptimizerConfig ca;
    ca.kind = nn::OptimizerKind::adam;
    nn::OptimizerConfig cb;
    cb.kind = nn::OptimizerKind::adamw;
    nn::Optimizer oa(ca, a);
    nn::Optimizer ob(cb, b);

    StreamRng rng(StreamKey(1).add("grads"));
    for (int it = 0; it < 5; ++it) {
        nn::Gradients g;
        g.weights.assign(1, Matrix(2, 3));
        g.bias.assign(1, std::vector<double>(2, 0.0));
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 3; ++j) g.weights[0](i, j) = rng.normal();
            g.bias[0][i] = rng.normal();
        }
        oa.step(a, g);
        ob.step(b, g);
    }
    CHECK(a.parameters() == b.parameters());
}

TEST_CASE("adamw decays parameters outside the adaptive step") {
    Network net;
    net.layers.push_back(nn::make_dense(1, 1));
    net.layers[0].dense.weights(0, 0) = 1.0;

    nn::OptimizerConfig cfg;
    cfg.kind = nn::OptimizerKind::adamw;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    nn::Optimizer opt(cfg, net);

    nn::Gradients g;
    g.weights.assign(1, Matrix(1, 1));
    g.bias.assign(1, std::vector<double>(1, 0.0));
    g.weights[0](0, 0) = 0.2;
    opt.step(net, g);

    const double adaptive = 0.1 * 0.2 / (std::sqrt(0.2 * 0.2) + cfg.eps);
    const double expected = (1.0 - adaptive) * (1.0 - 0.1 * 0.5);
    CHECK(net.layers[0].dense.weights(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences on varied topologies") {
    StreamRng data_rng(StreamKey(77).add("gradcheck-data"));
    const auto make_input = [&](std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) m(i, j) = data_rng.normal();
        return m;
    };

    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        // plain mlp
        Network mlp;
        mlp.layers.push_back(nn::make_dense(6, 8));
        mlp.layers.push_back(nn::make_relu());
        mlp.layers.push_back(nn::make_dense(8, 1));
        mlp.init_parameters(seed);
        auto report = nn::gradient_check(mlp, make_input(4, 6), make_input(4, 1),
                                         nn::CheckLoss::mse, 1e-4, seed);
        CHECK(report.pass);

        // skip link
        Network skip;
        skip.layers.push_back(nn::make_dense(5, 7));
        skip.layers.push_back(nn::make_relu());
        skip.layers.push_back(nn::make_dense(7, 7));
        skip.layers.push_back(nn::make_dense(7, 2));
        skip.skips.push_back({1, 2});
        skip.init_parameters(seed);
        report = nn::gradient_check(skip, make_input(3, 5), make_input(3, 2),
                                    nn::CheckLoss::mse, 1e-4, seed);
        CHECK(report.pass);

        // dropout with frozen masks
        Network drop;
        drop.layers.push_back(nn::make_dense(6, 9));
        drop.layers.push_back(nn::make_relu());
        drop.layers.push_back(nn::make_dropout(0.3));
        drop.layers.push_back(nn::make_dense(9, 3));
        drop.init_parameters(seed);
        report = nn::gradient_check(drop, make_input(4, 6), make_input(4, 3),
                                    nn::CheckLoss::mse, 1e-4, seed);
        CHECK(report.pass);
    }
}

TEST_CASE("gradient check refuses oversized networks") {
    Network net;
    net.layers.push_back(nn::make_dense(200, 200));  // 40200 parameters
    net.init_parameters(1);
    Matrix x(1, 200), t(1, 200);
    CHECK_THROWS_AS(nn::gradient_check(net, x, t, nn::CheckLoss::mse, 1e-4, 1), UsageError);
}

TEST_CASE("backward injections add head gradients at internal layers") {
    // trunk: dense -> relu -> dense; an injection at layer 1 models a head
    // reading the relu output. check d(total)/d(params) by finite differences
    // of loss(output) + 0.5 * sum(relu_out^2).
    Network net;
    net.layers.push_back(nn::make_dense(4, 5));
    net.layers.push_back(nn::make_relu());
    net.layers.push_back(nn::make_dense(5, 2));
    net.init_parameters(21);

    StreamRng rng(StreamKey(21).add("inject"));
    Matrix x(3, 4), target(3, 2);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
        for (std::size_t j = 0; j < target.cols(); ++j) target(i, j) = rng.normal();
    }

    const auto total_loss = [&](const Network& n) {
        nn::ForwardCache cache;
        const Matrix out = n.forward(x, nn::Mode::train, nullptr, &cache);
        double aux = 0.0;
        const Matrix& mid = cache.outputs[1];
        for (std::size_t i = 0; i < mid.rows(); ++i)
            for (std::size_t j = 0; j < mid.cols(); ++j) aux += 0.5 * mid(i, j) * mid(i, j);
        return nn::mse_loss(out, target) + aux;
    };

    nn::ForwardCache cache;
    const Matrix out = net.forward(x, nn::Mode::train, nullptr, &cache);
    nn::Gradients grads;
    const Matrix inj = cache.outputs[1];  // d(aux)/d(mid) = mid
    net.backward(cache, nn::mse_loss_grad(out, target), grads, {{1, inj}});

    Network probe = net;
    std::vector<double> params = probe.parameters();
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const double keep = params[p];
        params[p] = keep + h;
        probe.set_parameters(params);
        const double up = total_loss(probe);
        params[p] = keep - h;
        probe.set_parameters(params);
        const double down = total_loss(probe);
        params[p] = keep;
        const double numeric = (up - down) / (2 * h);

        // locate the analytic slot for flat index p
        std::size_t offset = 0;
        double analytic = 0.0;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            if (net.layers[li].kind != nn::LayerKind::dense) continue;
            const std::size_t wn = grads.weights[li].size();
            if (p < offset + wn) {
                analytic = grads.weights[li].data()[p - offset];
                break;
            }
            offset += wn;
            if (p < offset + grads.bias[li].size()) {
                analytic = grads.bias[li][p - offset];
                break;
            }
            offset += grads.bias[li].size();
        }
        worst = std::max(worst,
                         std::abs(analytic - numeric) /
                             std::max(1e-8, std::abs(analytic) + std::abs(numeric)));
    }
    probe.set_parameters(params);
    CHECK(worst < 1e-4);
}

TEST_CASE("network checkpoints round-trip bit-exactly") {
    Network net;
    net.layers.push_back(nn::make_dense(5, 4));
    net.layers.push_back(nn::make_relu());
    net.layers.push_back(nn::make_dropout(0.25));
    net.layers.push_back(nn::make_dense(4, 2, false));
    net.skips.push_back({1, 3});
    // give the skip matching widths
    net.layers[3] = nn::make_dense(4, 4, false);
    net.init_parameters(33);

    std::stringstream buf;
    nn::save_network(buf, net);
    const Network back = nn::load_network(buf);
    CHECK(back.parameters() == net.parameters());
    CHECK(back.layers.size() == net.layers.size());
    CHECK(back.skips.size() == net.skips.size());
    CHECK(back.layers[2].dropout_rate == net.layers[2].dropout_rate);
    CHECK(back.layers[3].dense.trainable == false);

    Matrix x(2, 5);
    x(0, 1) = 0.7;
    x(1, 4) = -1.3;
    const Matrix a = net.forward(x, nn::Mode::eval);
    const Matrix b = back.forward(x, nn::Mode::eval);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) CHECK(a(i, j) == b(i, j));
}
