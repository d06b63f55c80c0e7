#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace ctl {

using ParamVector = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { elu, relu, identity };

Activation activation_from_string(const std::string& name);
std::string activation_to_string(Activation a);

// Fully connected net. layer_widths runs [input, hidden..., output]; the
// named activation applies to hidden layers only, the output layer is
// always linear. Parameters live in one flat vector, per layer a row-major
// weight block (out x in) followed by the bias block.
struct MlpSpec {
    std::vector<int> layer_widths;
    Activation activation = Activation::elu;
    std::uint64_t seed = 0;
};

Eigen::Index param_count(const MlpSpec& spec);

void validate_spec(const MlpSpec& spec);

// fan-in-scaled uniform weights, |w| <= sqrt(6 / fan_in); biases zero
ParamVector init_params(const MlpSpec& spec);

Vector forward(const MlpSpec& spec, const ParamVector& params, const Vector& x);

// Intermediate state of one forward pass, kept for the backward sweep.
struct ForwardCache {
    std::vector<Vector> inputs;    // activations entering each layer (inputs[0] = x)
    std::vector<Vector> preacts;   // W a + b per layer
    Vector output;
};

ForwardCache forward_cached(const MlpSpec& spec, const ParamVector& params, const Vector& x);

// Reverse sweep given dL/d(output); returns dL/d(params) and dL/d(input).
void backward(const MlpSpec& spec, const ParamVector& params, const ForwardCache& cache,
              const Vector& output_grad, Eigen::Ref<ParamVector> param_grad, Vector* input_grad);

struct GradResult {
    Vector output;
    ParamVector grad;
    Vector input_grad;
    double loss = 0.0;
};

// loss maps the network output to (value, d value / d output)
using LossFn = std::function<std::pair<double, Vector>(const Vector&)>;

GradResult evaluate_with_gradient(const MlpSpec& spec, const ParamVector& params,
                                  const Vector& x, const LossFn& loss);

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    ParamVector m;  // first moment (adam)
    ParamVector v;  // second moment (adam)
    long step = 0;

    static OptimizerState zeros(Eigen::Index n);
};

// One in-place update; adam uses bias-corrected moments.
void optimizer_step(ParamVector& params, const ParamVector& grad, OptimizerState& state,
                    const OptimizerConfig& config);

}  // namespace ctl
