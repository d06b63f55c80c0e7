#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctl/nn.hpp"
#include "ctl/rng.hpp"

using namespace ctl;

namespace {

Vector random_input(Rng& rng, int d) {
    Vector x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    return x;
}

ParamVector random_params(Rng& rng, const MlpSpec& spec) {
    ParamVector p(param_count(spec));
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 0.5 * rng.normal();
    return p;
}

// central finite differences of loss(forward(params, x)) over every parameter
ParamVector fd_param_grad(const MlpSpec& spec, const ParamVector& params, const Vector& x,
                          const LossFn& loss, double h) {
    ParamVector grad(params.size());
    ParamVector shifted = params;
    for (Eigen::Index j = 0; j < params.size(); ++j) {
        shifted[j] = params[j] + h;
        const auto [up, gu] = loss(forward(spec, shifted, x));
        shifted[j] = params[j] - h;
        const auto [down, gd] = loss(forward(spec, shifted, x));
        shifted[j] = params[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

double max_rel_err(const ParamVector& a, const ParamVector& b) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        const double scale = std::max({std::abs(a[j]), std::abs(b[j]), 1e-6});
        worst = std::max(worst, std::abs(a[j] - b[j]) / scale);
    }
    return worst;
}

}  // namespace

TEST_CASE("param count matches layer arithmetic") {
    CHECK(param_count({{2, 3, 1}, Activation::elu, 0}) == 13);
    CHECK(param_count({{3, 5, 2}, Activation::elu, 0}) == 32);
    CHECK(param_count({{4, 1}, Activation::relu, 0}) == 5);
}

TEST_CASE("validate_spec rejects degenerate shapes") {
    CHECK_THROWS_AS(validate_spec({{}, Activation::elu, 0}), std::invalid_argument);
    CHECK_THROWS_AS(validate_spec({{3}, Activation::elu, 0}), std::invalid_argument);
    CHECK_THROWS_AS(validate_spec({{3, 0, 1}, Activation::elu, 0}), std::invalid_argument);
}

TEST_CASE("init_params is deterministic and fan-in bounded") {
    const MlpSpec spec{{25, 64, 32}, Activation::elu, 1};
    const ParamVector a = init_params(spec);
    const ParamVector b = init_params(spec);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    const ParamVector other = init_params({{25, 64, 32}, Activation::elu, 2});
    CHECK((a - other).cwiseAbs().maxCoeff() > 0.0);

    // first layer weights bounded by sqrt(6/25), biases zero
    const double bound = std::sqrt(6.0 / 25.0);
    const Eigen::Index w1 = 64 * 25;
    CHECK(a.head(w1).cwiseAbs().maxCoeff() <= bound + 1e-12);
    CHECK(a.segment(w1, 64).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer computes w x + b") {
    const MlpSpec spec{{2, 1}, Activation::elu, 0};
    ParamVector p(3);
    p << 2.0, -1.0, 0.5;
    Vector x(2);
    x << 3.0, 4.0;
    const Vector out = forward(spec, p, x);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(2.0 * 3.0 - 1.0 * 4.0 + 0.5).epsilon(1e-12));
}

TEST_CASE("hidden elu is applied, output layer stays linear") {
    const MlpSpec spec{{1, 1, 1}, Activation::elu, 0};
    ParamVector p(4);
    p << 1.0, -2.0, 3.0, 0.25;  // hidden w=1 b=-2, output w=3 b=0.25
    Vector x(1);
    x << 1.0;
    const double hidden = std::exp(1.0 - 2.0) - 1.0;  // elu of the negative preactivation
    const Vector out = forward(spec, p, x);
    CHECK(out[0] == doctest::Approx(3.0 * hidden + 0.25).epsilon(1e-12));
}

TEST_CASE("zero parameters give zero output when activation fixes zero") {
    for (Activation act : {Activation::elu, Activation::relu}) {
        const MlpSpec spec{{3, 4, 2}, act, 0};
        const ParamVector zeros = ParamVector::Zero(param_count(spec));
        Rng rng(5);
        const Vector out = forward(spec, zeros, random_input(rng, 3));
        CHECK(out.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("forward_cached agrees with forward") {
    Rng rng(11);
    const MlpSpec spec{{3, 5, 4, 2}, Activation::elu, 0};
    const ParamVector p = random_params(rng, spec);
    const Vector x = random_input(rng, 3);
    const ForwardCache cache = forward_cached(spec, p, x);
    CHECK((cache.output - forward(spec, p, x)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cache.inputs.size() == 3);
    CHECK((cache.inputs[0] - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward matches finite differences over many shapes") {
    const std::vector<std::vector<int>> shapes = {
        {1, 1}, {2, 3, 1}, {3, 4, 4, 2}, {5, 8, 3, 3, 1}, {2, 6, 1}};
    int checked = 0;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        for (Activation act : {Activation::elu, Activation::relu, Activation::identity}) {
            Rng rng(37 * s + static_cast<std::size_t>(act));
            const MlpSpec spec{shapes[s], act, 0};
            const ParamVector p = random_params(rng, spec);
            const Vector x = random_input(rng, shapes[s].front());
            Vector target = random_input(rng, shapes[s].back());
            const LossFn loss = [&](const Vector& out) {
                const Vector diff = out - target;
                return std::make_pair(0.5 * diff.squaredNorm(), diff);
            };
            const GradResult result = evaluate_with_gradient(spec, p, x, loss);
            const ParamVector fd = fd_param_grad(spec, p, x, loss, 1e-5);
            CHECK(max_rel_err(result.grad, fd) < 1e-4);
            ++checked;
        }
    }
    CHECK(checked == 15);
}

TEST_CASE("input gradient matches finite differences") {
    Rng rng(23);
    const MlpSpec spec{{3, 4, 1}, Activation::elu, 0};
    const ParamVector p = random_params(rng, spec);
    const Vector x = random_input(rng, 3);
    const ForwardCache cache = forward_cached(spec, p, x);
    Vector out_grad(1);
    out_grad << 1.0;
    ParamVector param_grad(p.size());
    Vector input_grad;
    backward(spec, p, cache, out_grad, param_grad, &input_grad);

    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
        Vector xs = x;
        xs[j] = x[j] + h;
        const double up = forward(spec, p, xs)[0];
        xs[j] = x[j] - h;
        const double down = forward(spec, p, xs)[0];
        CHECK(input_grad[j] == doctest::Approx((up - down) / (2.0 * h)).epsilon(1e-5));
    }
}

TEST_CASE("constant loss yields a zero gradient") {
    Rng rng(3);
    const MlpSpec spec{{2, 4, 2}, Activation::elu, 0};
    const ParamVector p = random_params(rng, spec);
    const LossFn loss = [](const Vector& out) {
        return std::make_pair(7.0, Vector(Vector::Zero(out.size())));
    };
    const GradResult result = evaluate_with_gradient(spec, p, random_input(rng, 2), loss);
    CHECK(result.grad.cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.loss == 7.0);
}

TEST_CASE("linear layer with identity loss recovers the input as weight gradient") {
    const MlpSpec spec{{3, 1}, Activation::elu, 0};
    ParamVector p(4);
    p << 0.3, -0.2, 0.7, 0.1;
    Vector x(3);
    x << 1.5, -2.0, 0.25;
    const LossFn loss = [](const Vector& out) {
        return std::make_pair(out[0], Vector(Vector::Ones(1)));
    };
    const GradResult result = evaluate_with_gradient(spec, p, x, loss);
    for (int j = 0; j < 3; ++j) CHECK(result.grad[j] == doctest::Approx(x[j]).epsilon(1e-12));
    CHECK(result.grad[3] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sgd step is params minus lr grad") {
    ParamVector p(3), g(3);
    p << 1.0, 2.0, 3.0;
    g << 0.5, -1.0, 0.0;
    OptimizerState state = OptimizerState::zeros(3);
    OptimizerConfig config;
    config.kind = OptimizerKind::sgd;
    config.lr = 0.1;
    optimizer_step(p, g, state, config);
    CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(2.1).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("adam first step has near lr magnitude for large gradients") {
    ParamVector p(2), g(2);
    p << 0.0, 0.0;
    g << 100.0, -250.0;
    OptimizerState state = OptimizerState::zeros(2);
    OptimizerConfig config;
    config.lr = 1e-3;
    optimizer_step(p, g, state, config);
    // bias-corrected first step: lr * g / (|g| + eps), so magnitude just under lr
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(state.step == 1);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
    for (OptimizerKind kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
        ParamVector p(2);
        p << 1.0, -1.0;
        const ParamVector before = p;
        OptimizerState state = OptimizerState::zeros(2);
        OptimizerConfig config;
        config.kind = kind;
        optimizer_step(p, ParamVector::Zero(2), state, config);
        CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("non-finite gradients are rejected") {
    ParamVector p(2), g(2);
    p << 0.0, 0.0;
    g << 1.0, std::nan("");
    OptimizerState state = OptimizerState::zeros(2);
    OptimizerConfig config;
    CHECK_THROWS_AS(optimizer_step(p, g, state, config), std::invalid_argument);
}

TEST_CASE("adam fits a small regression") {
    Rng rng(42);
    const MlpSpec spec{{1, 8, 1}, Activation::elu, 9};
    ParamVector p = init_params(spec);
    OptimizerState state = OptimizerState::zeros(p.size());
    OptimizerConfig config;
    config.lr = 0.01;

    const int n = 16;
    Matrix xs(n, 1);
    Vector ys(n);
    for (int i = 0; i < n; ++i) {
        xs(i, 0) = rng.uniform(-1.0, 1.0);
        ys[i] = 2.0 * xs(i, 0) - 1.0;
    }
    double last = 0.0;
    for (int step = 0; step < 600; ++step) {
        ParamVector grad = ParamVector::Zero(p.size());
        last = 0.0;
        for (int i = 0; i < n; ++i) {
            const double target = ys[i];
            const LossFn loss = [&](const Vector& out) {
                const double r = out[0] - target;
                Vector g(1);
                g << r;
                return std::make_pair(0.5 * r * r, g);
            };
            const GradResult result =
                evaluate_with_gradient(spec, p, xs.row(i).transpose(), loss);
            grad += result.grad;
            last += result.loss;
        }
        grad /= n;
        optimizer_step(p, grad, state, config);
    }
    CHECK(last / n < 0.01);
}
