#include "ctl/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "ctl/rng.hpp"

namespace ctl {

Activation activation_from_string(const std::string& name) {
    if (name == "elu") return Activation::elu;
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_to_string(Activation a) {
    switch (a) {
        case Activation::elu: return "elu";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    throw std::logic_error("bad activation enum");
}

void validate_spec(const MlpSpec& spec) {
    if (spec.layer_widths.size() < 2) {
        throw std::invalid_argument("MlpSpec needs at least input and output widths");
    }
    for (int w : spec.layer_widths) {
        if (w <= 0) throw std::invalid_argument("MlpSpec layer widths must be positive");
    }
}

Eigen::Index param_count(const MlpSpec& spec) {
    validate_spec(spec);
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        n += static_cast<Eigen::Index>(spec.layer_widths[l]) * spec.layer_widths[l + 1] +
             spec.layer_widths[l + 1];
    }
    return n;
}

ParamVector init_params(const MlpSpec& spec) {
    validate_spec(spec);
    ParamVector params(param_count(spec));
    Rng rng(spec.seed);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        const int fan_in = spec.layer_widths[l];
        const int fan_out = spec.layer_widths[l + 1];
        const double bound = std::sqrt(6.0 / fan_in);
        for (int i = 0; i < fan_out * fan_in; ++i) {
            params[off++] = rng.uniform(-bound, bound);
        }
        for (int i = 0; i < fan_out; ++i) {
            params[off++] = 0.0;
        }
    }
    return params;
}

namespace {

inline double act(Activation a, double z) {
    switch (a) {
        case Activation::elu: return z > 0.0 ? z : std::expm1(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::identity: return z;
    }
    return z;
}

inline double act_grad(Activation a, double z) {
    switch (a) {
        case Activation::elu: return z > 0.0 ? 1.0 : std::exp(z);
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

ForwardCache forward_cached(const MlpSpec& spec, const ParamVector& params, const Vector& x) {
    validate_spec(spec);
    if (x.size() != spec.layer_widths.front()) {
        throw std::invalid_argument("forward: input width mismatch");
    }
    if (params.size() != param_count(spec)) {
        throw std::invalid_argument("forward: parameter vector has wrong length");
    }
    const std::size_t layers = spec.layer_widths.size() - 1;
    ForwardCache cache;
    cache.inputs.reserve(layers);
    cache.preacts.reserve(layers);
    Vector a = x;
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const int nin = spec.layer_widths[l];
        const int nout = spec.layer_widths[l + 1];
        Eigen::Map<const Matrix> w(params.data() + off, nin, nout);  // column-major view of row-major block
        off += static_cast<Eigen::Index>(nin) * nout;
        Eigen::Map<const Vector> b(params.data() + off, nout);
        off += nout;
        cache.inputs.push_back(a);
        Vector z = w.transpose() * a + b;
        cache.preacts.push_back(z);
        const bool last = (l + 1 == layers);
        if (last) {
            a = z;
        } else {
            a.resize(nout);
            for (int i = 0; i < nout; ++i) a[i] = act(spec.activation, z[i]);
        }
    }
    cache.output = a;
    return cache;
}

Vector forward(const MlpSpec& spec, const ParamVector& params, const Vector& x) {
    return forward_cached(spec, params, x).output;
}

void backward(const MlpSpec& spec, const ParamVector& params, const ForwardCache& cache,
              const Vector& output_grad, Eigen::Ref<ParamVector> param_grad, Vector* input_grad) {
    const std::size_t layers = spec.layer_widths.size() - 1;
    if (param_grad.size() != param_count(spec)) {
        throw std::invalid_argument("backward: gradient buffer has wrong length");
    }
    // delta holds dL/d(preact) for the current layer
    Vector delta = output_grad;
    Eigen::Index off = param_grad.size();
    for (std::size_t l = layers; l-- > 0;) {
        const int nin = spec.layer_widths[l];
        const int nout = spec.layer_widths[l + 1];
        const bool last = (l + 1 == layers);
        if (!last) {
            for (int i = 0; i < nout; ++i) {
                delta[i] *= act_grad(spec.activation, cache.preacts[l][i]);
            }
        }
        off -= nout;
        Eigen::Map<Vector>(param_grad.data() + off, nout) = delta;
        off -= static_cast<Eigen::Index>(nin) * nout;
        Eigen::Map<Matrix> wg(param_grad.data() + off, nin, nout);
        wg.noalias() = cache.inputs[l] * delta.transpose();
        if (l > 0 || input_grad != nullptr) {
            Eigen::Map<const Matrix> w(params.data() + off, nin, nout);
            Vector prev = w * delta;
            if (l == 0) {
                *input_grad = prev;
                return;
            }
            delta.swap(prev);
        }
    }
}

GradResult evaluate_with_gradient(const MlpSpec& spec, const ParamVector& params,
                                  const Vector& x, const LossFn& loss) {
    ForwardCache cache = forward_cached(spec, params, x);
    auto [value, output_grad] = loss(cache.output);
    if (output_grad.size() != cache.output.size()) {
        throw std::invalid_argument("evaluate_with_gradient: loss gradient width mismatch");
    }
    GradResult result;
    result.output = cache.output;
    result.loss = value;
    result.grad.resize(param_count(spec));
    backward(spec, params, cache, output_grad, result.grad, &result.input_grad);
    return result;
}

OptimizerState OptimizerState::zeros(Eigen::Index n) {
    OptimizerState s;
    s.m = ParamVector::Zero(n);
    s.v = ParamVector::Zero(n);
    s.step = 0;
    return s;
}

void optimizer_step(ParamVector& params, const ParamVector& grad, OptimizerState& state,
                    const OptimizerConfig& config) {
    if (grad.size() != params.size()) {
        throw std::invalid_argument("optimizer_step: gradient length mismatch");
    }
    if (!grad.allFinite()) {
        throw std::invalid_argument("optimizer_step: non-finite gradient");
    }
    if (config.lr <= 0.0) throw std::invalid_argument("optimizer_step: lr must be positive");
    switch (config.kind) {
        case OptimizerKind::sgd:
            params.noalias() -= config.lr * grad;
            return;
        case OptimizerKind::adam: {
            if (state.m.size() != params.size() || state.v.size() != params.size()) {
                throw std::invalid_argument("optimizer_step: state size mismatch");
            }
            ++state.step;
            state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
            state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
            params.array() -=
                config.lr * (state.m.array() / c1) /
                ((state.v.array() / c2).sqrt() + config.eps);
            return;
        }
    }
    throw std::logic_error("bad optimizer kind");
}

}  // namespace ctl
