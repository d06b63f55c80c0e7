#include "ctl/tarnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ctl/hash.hpp"
#include "ctl/rng.hpp"
#include "ctl/transport.hpp"
#include "json.hpp"

namespace ctl {

namespace {

using nlohmann::json;

void append_real(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
    out += ';';
}

std::string config_fingerprint(const TrainConfig& c, const MlpSpec& phi,
                               const std::vector<MlpSpec>& heads) {
    std::string s = loss_kind_to_string(c.loss_kind) + ";";
    append_real(s, c.alpha);
    append_real(s, c.lr);
    s += std::to_string(c.epochs) + ";" + std::to_string(c.batch_size) + ";" +
         std::to_string(c.seed) + ";";
    append_real(s, c.ipm.eps);
    s += std::to_string(c.ipm.iters) + ";phi:";
    for (int w : phi.layer_widths) s += std::to_string(w) + ",";
    s += activation_to_string(phi.activation);
    for (const auto& h : heads) {
        s += ";head:";
        for (int w : h.layer_widths) s += std::to_string(w) + ",";
        s += activation_to_string(h.activation);
    }
    return s;
}

double point_loss(LossKind kind, double pred, double y, double* dpred) {
    if (kind == LossKind::squared_error) {
        const double r = pred - y;
        if (dpred) *dpred = 2.0 * r;
        return r * r;
    }
    // pred is a logit; stable softplus form of the Bernoulli likelihood
    const double loss = std::max(pred, 0.0) - y * pred + std::log1p(std::exp(-std::abs(pred)));
    if (dpred) *dpred = 1.0 / (1.0 + std::exp(-pred)) - y;
    return loss;
}

void check_compat(const TarNetModel& model, const CausalDataset& ds, const char* where) {
    if (ds.d() != model.input_dim()) {
        throw std::invalid_argument(std::string(where) + ": covariate width mismatch");
    }
    if (ds.treatments() != model.treatments()) {
        throw std::invalid_argument(std::string(where) + ": treatment count mismatch");
    }
}

void check_train_config(const TrainConfig& config) {
    if (config.alpha < 0.0) throw std::invalid_argument("train: alpha must be nonnegative");
    if (!(config.lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
    if (config.batch_size < 2) throw std::invalid_argument("train: batch_size must be at least 2");
    if (config.alpha > 0.0) {
        if (!(config.ipm.eps > 0.0)) throw std::invalid_argument("train: ipm eps must be positive");
        if (config.ipm.iters < 1) throw std::invalid_argument("train: ipm iters must be at least 1");
    }
}

ObjectiveValue objective_impl(const TarNetModel& model, const CausalDataset& batch,
                              const TrainConfig& config, ParamVector* grad) {
    validate_model(model);
    check_compat(model, batch, "objective");
    if (model.treatments() != 1) {
        throw std::invalid_argument("objective: group weights are defined for binary treatments");
    }
    const Eigen::Index n = batch.n();
    if (n == 0) throw std::invalid_argument("objective: empty batch");

    const double v = batch.a.cast<double>().mean();
    if (v == 0.0 || v == 1.0) {
        throw std::invalid_argument(
            "objective: batch has a single treatment group, so the group weights and the "
            "balancing term are undefined");
    }

    const Eigen::Index latent_width = model.latent_dim();
    const Eigen::Index phi_count = param_count(model.phi_spec);
    std::vector<Eigen::Index> head_offset(model.head_specs.size());
    Eigen::Index off = phi_count;
    for (std::size_t h = 0; h < model.head_specs.size(); ++h) {
        head_offset[h] = off;
        off += param_count(model.head_specs[h]);
    }

    std::vector<ForwardCache> phi_caches(static_cast<std::size_t>(n));
    std::vector<ForwardCache> head_caches(static_cast<std::size_t>(n));
    Matrix z(n, latent_width);
    Eigen::VectorXd preds(n), weights(n), dpreds(n);
    double factual = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int a = batch.a[i];
        weights[i] = a == 1 ? 1.0 / (2.0 * v) : 1.0 / (2.0 * (1.0 - v));
        phi_caches[static_cast<std::size_t>(i)] =
            forward_cached(model.phi_spec, model.phi_params, batch.x.row(i).transpose());
        z.row(i) = phi_caches[static_cast<std::size_t>(i)].output.transpose();
        head_caches[static_cast<std::size_t>(i)] =
            forward_cached(model.head_specs[static_cast<std::size_t>(a)],
                           model.head_params[static_cast<std::size_t>(a)],
                           phi_caches[static_cast<std::size_t>(i)].output);
        preds[i] = head_caches[static_cast<std::size_t>(i)].output[0];
        double dp = 0.0;
        factual += weights[i] * point_loss(config.loss_kind, preds[i], batch.y[i],
                                           grad ? &dp : nullptr);
        dpreds[i] = dp;
    }
    factual /= static_cast<double>(n);

    ObjectiveValue value;
    value.factual = factual;

    std::vector<Eigen::Index> idx0, idx1;
    for (Eigen::Index i = 0; i < n; ++i) (batch.a[i] == 0 ? idx0 : idx1).push_back(i);

    Matrix latent_grad;
    if (grad) latent_grad = Matrix::Zero(n, latent_width);
    if (config.alpha > 0.0) {
        PointCloud c0 = PointCloud::uniform(Matrix(idx0.size(), latent_width));
        PointCloud c1 = PointCloud::uniform(Matrix(idx1.size(), latent_width));
        for (std::size_t r = 0; r < idx0.size(); ++r) c0.points.row(r) = z.row(idx0[r]);
        for (std::size_t r = 0; r < idx1.size(); ++r) c1.points.row(r) = z.row(idx1[r]);
        const TransportResult transport = sinkhorn_w1(c0, c1, config.ipm.eps, config.ipm.iters);
        value.ipm = transport.cost;
        if (grad) {
            for (std::size_t r = 0; r < idx0.size(); ++r) {
                latent_grad.row(idx0[r]) = config.alpha * transport.grad_p->row(r);
            }
            for (std::size_t r = 0; r < idx1.size(); ++r) {
                latent_grad.row(idx1[r]) = config.alpha * transport.grad_q->row(r);
            }
        }
    }
    value.total = value.factual + config.alpha * value.ipm;
    if (!grad) return value;

    grad->setZero(total_param_count(model));
    ParamVector phi_scratch(phi_count);
    std::vector<ParamVector> head_scratch;
    for (const auto& spec : model.head_specs) head_scratch.emplace_back(param_count(spec));

    Vector head_out_grad(1), head_input_grad;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto a = static_cast<std::size_t>(batch.a[i]);
        head_out_grad[0] = weights[i] * dpreds[i] / static_cast<double>(n);
        backward(model.head_specs[a], model.head_params[a],
                 head_caches[static_cast<std::size_t>(i)], head_out_grad, head_scratch[a],
                 &head_input_grad);
        grad->segment(head_offset[a], head_scratch[a].size()) += head_scratch[a];
        const Vector phi_out_grad = head_input_grad + latent_grad.row(i).transpose();
        backward(model.phi_spec, model.phi_params, phi_caches[static_cast<std::size_t>(i)],
                 phi_out_grad, phi_scratch, nullptr);
        grad->head(phi_count) += phi_scratch;
    }
    return value;
}

std::vector<std::vector<Eigen::Index>> make_batches(const std::vector<Eigen::Index>& perm,
                                                    Eigen::Index batch_size) {
    std::vector<std::vector<Eigen::Index>> batches;
    const auto n = static_cast<Eigen::Index>(perm.size());
    for (Eigen::Index start = 0; start < n; start += batch_size) {
        const Eigen::Index end = std::min(start + batch_size, n);
        batches.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    // a trailing singleton cannot contain both groups; fold it into its neighbor
    if (batches.size() > 1 && batches.back().size() < 2) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
    }
    return batches;
}

bool mixed_groups(const CausalDataset& ds, const std::vector<Eigen::Index>& rows) {
    bool saw0 = false, saw1 = false;
    for (Eigen::Index i : rows) {
        (ds.a[i] == 0 ? saw0 : saw1) = true;
        if (saw0 && saw1) return true;
    }
    return false;
}

TrainTrace descent_loop(TarNetModel& model, const CausalDataset& ds, const TrainConfig& config,
                        Rng& rng) {
    const Eigen::Index n = ds.n();
    const Eigen::Index batch_size = std::min<Eigen::Index>(config.batch_size, n);

    ParamVector flat = pack_params(model);
    ParamVector grad(flat.size());
    OptimizerState opt = OptimizerState::zeros(flat.size());
    OptimizerConfig opt_config;
    opt_config.kind = OptimizerKind::adam;
    opt_config.lr = config.lr;

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::vector<Eigen::Index> pool = perm;

    TrainTrace trace;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(perm);
        double ef = 0.0, ei = 0.0, et = 0.0;
        const auto batches = make_batches(perm, batch_size);
        for (auto batch_rows : batches) {
            int attempts = 0;
            while (!mixed_groups(ds, batch_rows)) {
                if (++attempts > 100) {
                    throw std::runtime_error(
                        "train: could not draw a batch containing both treatment groups");
                }
                for (std::size_t k = 0; k < batch_rows.size(); ++k) {
                    const std::size_t j = k + static_cast<std::size_t>(rng.below(
                                                  static_cast<std::uint64_t>(pool.size() - k)));
                    std::swap(pool[k], pool[j]);
                    batch_rows[k] = pool[k];
                }
            }
            std::vector<int> batch_ints(batch_rows.size());
            std::transform(batch_rows.begin(), batch_rows.end(), batch_ints.begin(),
                           [](Eigen::Index i) { return static_cast<int>(i); });
            const CausalDataset batch = subset(ds, batch_ints);
            unpack_params(model, flat);
            const ObjectiveValue value = objective_impl(model, batch, config, &grad);
            optimizer_step(flat, grad, opt, opt_config);
            ef += value.factual;
            ei += value.ipm;
            et += value.total;
        }
        const auto nb = static_cast<double>(batches.size());
        trace.factual.push_back(ef / nb);
        trace.ipm.push_back(ei / nb);
        trace.total.push_back(et / nb);
    }
    unpack_params(model, flat);
    return trace;
}

json spec_to_json(const MlpSpec& spec, const ParamVector& params) {
    json j;
    j["layer_widths"] = spec.layer_widths;
    j["activation"] = activation_to_string(spec.activation);
    j["seed"] = spec.seed;
    j["params"] = std::vector<double>(params.data(), params.data() + params.size());
    return j;
}

void spec_from_json(const json& j, MlpSpec& spec, ParamVector& params) {
    spec.layer_widths = j.at("layer_widths").get<std::vector<int>>();
    spec.activation = activation_from_string(j.at("activation").get<std::string>());
    spec.seed = j.at("seed").get<std::uint64_t>();
    const auto values = j.at("params").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != param_count(spec)) {
        throw std::runtime_error("load_model: parameter count does not match the layer widths");
    }
    params = Eigen::Map<const ParamVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "squared_error") return LossKind::squared_error;
    if (name == "bernoulli_nll") return LossKind::bernoulli_nll;
    throw std::invalid_argument("unknown loss kind: " + name);
}

std::string loss_kind_to_string(LossKind kind) {
    return kind == LossKind::squared_error ? "squared_error" : "bernoulli_nll";
}

void validate_model(const TarNetModel& model) {
    validate_spec(model.phi_spec);
    if (model.head_specs.size() < 2) {
        throw std::invalid_argument("model: needs one head per treatment label, at least two");
    }
    if (model.head_specs.size() != model.head_params.size()) {
        throw std::invalid_argument("model: head spec/parameter count mismatch");
    }
    if (model.phi_params.size() != param_count(model.phi_spec)) {
        throw std::invalid_argument("model: representation parameter count mismatch");
    }
    if (!model.phi_params.allFinite()) {
        throw std::invalid_argument("model: nonfinite representation parameters");
    }
    for (std::size_t h = 0; h < model.head_specs.size(); ++h) {
        const MlpSpec& spec = model.head_specs[h];
        validate_spec(spec);
        if (spec.layer_widths.front() != model.phi_spec.layer_widths.back()) {
            throw std::invalid_argument("model: head input width differs from the latent width");
        }
        if (spec.layer_widths.back() != 1) {
            throw std::invalid_argument("model: heads must produce a scalar outcome");
        }
        if (model.head_params[h].size() != param_count(spec)) {
            throw std::invalid_argument("model: head parameter count mismatch");
        }
        if (!model.head_params[h].allFinite()) {
            throw std::invalid_argument("model: nonfinite head parameters");
        }
    }
}

MlpSpec default_phi_spec(int input_dim) {
    MlpSpec spec;
    spec.layer_widths = {input_dim, 64, 32};
    spec.activation = Activation::elu;
    return spec;
}

std::vector<int> default_head_hidden() { return {16}; }

TarNetModel make_model(int input_dim, const MlpSpec& phi_spec,
                       const std::vector<int>& head_hidden, int num_treatments,
                       std::uint64_t seed) {
    if (num_treatments < 1) throw std::invalid_argument("make_model: need at least one treatment");
    if (phi_spec.layer_widths.empty() || phi_spec.layer_widths.front() != input_dim) {
        throw std::invalid_argument("make_model: representation input width mismatch");
    }
    Rng rng(seed);
    TarNetModel model;
    model.phi_spec = phi_spec;
    model.phi_spec.seed = rng.raw();
    model.phi_params = init_params(model.phi_spec);
    std::vector<int> head_widths;
    head_widths.push_back(phi_spec.layer_widths.back());
    head_widths.insert(head_widths.end(), head_hidden.begin(), head_hidden.end());
    head_widths.push_back(1);
    for (int h = 0; h <= num_treatments; ++h) {
        MlpSpec head;
        head.layer_widths = head_widths;
        head.activation = phi_spec.activation;
        head.seed = rng.raw();
        model.head_specs.push_back(head);
        model.head_params.push_back(init_params(head));
    }
    validate_model(model);
    return model;
}

Eigen::Index total_param_count(const TarNetModel& model) {
    Eigen::Index total = param_count(model.phi_spec);
    for (const auto& spec : model.head_specs) total += param_count(spec);
    return total;
}

ParamVector pack_params(const TarNetModel& model) {
    ParamVector flat(total_param_count(model));
    flat.head(model.phi_params.size()) = model.phi_params;
    Eigen::Index off = model.phi_params.size();
    for (const auto& p : model.head_params) {
        flat.segment(off, p.size()) = p;
        off += p.size();
    }
    return flat;
}

void unpack_params(TarNetModel& model, const ParamVector& flat) {
    if (flat.size() != total_param_count(model)) {
        throw std::invalid_argument("unpack_params: length mismatch");
    }
    model.phi_params = flat.head(param_count(model.phi_spec));
    Eigen::Index off = model.phi_params.size();
    for (std::size_t h = 0; h < model.head_params.size(); ++h) {
        model.head_params[h] = flat.segment(off, param_count(model.head_specs[h]));
        off += model.head_params[h].size();
    }
}

ObjectiveValue objective(const TarNetModel& model, const CausalDataset& batch,
                         const TrainConfig& config) {
    return objective_impl(model, batch, config, nullptr);
}

ObjectiveValue objective_with_gradient(const TarNetModel& model, const CausalDataset& batch,
                                       const TrainConfig& config, ParamVector& grad) {
    return objective_impl(model, batch, config, &grad);
}

TrainResult train(const CausalDataset& ds, const MlpSpec& phi_spec,
                  const std::vector<int>& head_hidden, const TrainConfig& config) {
    validate_dataset(ds);
    check_train_config(config);
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
    if (ds.treatments() != 1) {
        throw std::invalid_argument("train: group weights are defined for binary treatments");
    }
    const Eigen::Index treated = (ds.a.array() == 1).count();
    if (treated == 0 || treated == ds.n()) {
        throw std::invalid_argument("train: dataset has a single treatment group");
    }

    Rng rng(config.seed);
    TrainResult result;
    result.model = make_model(ds.d(), phi_spec, head_hidden, ds.treatments(), rng.raw());
    result.trace = descent_loop(result.model, ds, config, rng);
    result.model.meta.dataset_id = dataset_id(ds);
    result.model.meta.config_hash =
        content_digest(config_fingerprint(config, phi_spec, result.model.head_specs));
    result.model.meta.final_train_loss = result.trace.total.back();
    return result;
}

TrainResult fine_tune(const TarNetModel& source, const CausalDataset& target,
                      const TrainConfig& config) {
    validate_model(source);
    validate_dataset(target);
    check_train_config(config);
    if (config.epochs < 0) throw std::invalid_argument("fine_tune: epochs must be nonnegative");
    check_compat(source, target, "fine_tune");

    TrainResult result;
    result.model = source;
    if (config.epochs == 0) return result;

    const Eigen::Index treated = (target.a.array() == 1).count();
    if (treated == 0 || treated == target.n()) {
        throw std::invalid_argument("fine_tune: dataset has a single treatment group");
    }
    Rng rng(config.seed);
    rng.raw();  // keep the batch stream aligned with train(), which draws init seeds first
    result.trace = descent_loop(result.model, target, config, rng);
    result.model.meta.dataset_id = dataset_id(target);
    result.model.meta.config_hash =
        content_digest(config_fingerprint(config, source.phi_spec, source.head_specs));
    result.model.meta.final_train_loss = result.trace.total.back();
    return result;
}

double predict_outcome(const TarNetModel& model, const Eigen::VectorXd& x, int a) {
    if (a < 0 || a > model.treatments()) {
        throw std::invalid_argument("predict_outcome: treatment label out of range");
    }
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("predict_outcome: covariate width mismatch");
    }
    const Vector z = forward(model.phi_spec, model.phi_params, x);
    const auto h = static_cast<std::size_t>(a);
    return forward(model.head_specs[h], model.head_params[h], z)[0];
}

double predict_ite(const TarNetModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("predict_ite: covariate width mismatch");
    }
    const Vector z = forward(model.phi_spec, model.phi_params, x);
    return forward(model.head_specs[1], model.head_params[1], z)[0] -
           forward(model.head_specs[0], model.head_params[0], z)[0];
}

Eigen::VectorXd latent(const TarNetModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("latent: covariate width mismatch");
    }
    return forward(model.phi_spec, model.phi_params, x);
}

Matrix latent_all(const TarNetModel& model, const Matrix& x) {
    Matrix z(x.rows(), model.latent_dim());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        z.row(i) = latent(model, x.row(i).transpose()).transpose();
    }
    return z;
}

void save_model(const TarNetModel& model, const std::string& path) {
    validate_model(model);
    json j;
    j["phi"] = spec_to_json(model.phi_spec, model.phi_params);
    j["heads"] = json::array();
    for (std::size_t h = 0; h < model.head_specs.size(); ++h) {
        j["heads"].push_back(spec_to_json(model.head_specs[h], model.head_params[h]));
    }
    j["meta"] = {{"dataset_id", model.meta.dataset_id},
                 {"config_hash", model.meta.config_hash},
                 {"final_train_loss", model.meta.final_train_loss}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out.good()) throw std::runtime_error("save_model: write failed for " + path);
}

TarNetModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("load_model: invalid JSON in " + path + ": " + e.what());
    }
    TarNetModel model;
    try {
        spec_from_json(j.at("phi"), model.phi_spec, model.phi_params);
        for (const auto& h : j.at("heads")) {
            MlpSpec spec;
            ParamVector params;
            spec_from_json(h, spec, params);
            model.head_specs.push_back(spec);
            model.head_params.push_back(std::move(params));
        }
        const auto& meta = j.at("meta");
        model.meta.dataset_id = meta.at("dataset_id").get<std::string>();
        model.meta.config_hash = meta.at("config_hash").get<std::string>();
        const auto& loss = meta.at("final_train_loss");
        model.meta.final_train_loss =
            loss.is_null() ? std::numeric_limits<double>::quiet_NaN() : loss.get<double>();
    } catch (const json::exception& e) {
        throw std::runtime_error("load_model: missing or malformed field in " + path + ": " +
                                 e.what());
    }
    validate_model(model);
    return model;
}

}  // namespace ctl
