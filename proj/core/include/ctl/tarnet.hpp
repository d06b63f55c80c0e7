#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctl/dataset.hpp"
#include "ctl/nn.hpp"

namespace ctl {

enum class LossKind { squared_error, bernoulli_nll };

LossKind loss_kind_from_string(const std::string& name);
std::string loss_kind_to_string(LossKind kind);

struct IpmConfig {
    double eps = 0.01;
    int iters = 500;
};

struct TrainConfig {
    double alpha = 1.0;
    double lr = 1e-3;
    int epochs = 60;
    int batch_size = 128;
    std::uint64_t seed = 0;
    LossKind loss_kind = LossKind::squared_error;
    IpmConfig ipm;
};

struct ModelMeta {
    std::string dataset_id;
    std::string config_hash;
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
};

// shared representation plus one scalar outcome head per treatment label
struct TarNetModel {
    MlpSpec phi_spec;
    ParamVector phi_params;
    std::vector<MlpSpec> head_specs;
    std::vector<ParamVector> head_params;
    ModelMeta meta;

    int treatments() const { return static_cast<int>(head_specs.size()) - 1; }
    int input_dim() const { return phi_spec.layer_widths.front(); }
    int latent_dim() const { return phi_spec.layer_widths.back(); }
};

// head input widths must equal the representation output width, head outputs
// must be scalar, and every parameter must be finite
void validate_model(const TarNetModel& model);

MlpSpec default_phi_spec(int input_dim);
std::vector<int> default_head_hidden();

// freshly initialized model; spec seeds are drawn from `seed`
TarNetModel make_model(int input_dim, const MlpSpec& phi_spec,
                       const std::vector<int>& head_hidden, int num_treatments,
                       std::uint64_t seed);

// flat parameter layout: [phi | head 0 | head 1 | ...]
Eigen::Index total_param_count(const TarNetModel& model);
ParamVector pack_params(const TarNetModel& model);
void unpack_params(TarNetModel& model, const ParamVector& flat);

struct ObjectiveValue {
    double factual = 0.0;
    double ipm = 0.0;
    double total = 0.0;
};

// weighted factual risk plus alpha times the latent group transport cost;
// per-row weights are a_i/(2v) + (1-a_i)/(2(1-v)) with v the batch treated
// share, so a batch with a single group is rejected
ObjectiveValue objective(const TarNetModel& model, const CausalDataset& batch,
                         const TrainConfig& config);
ObjectiveValue objective_with_gradient(const TarNetModel& model, const CausalDataset& batch,
                                       const TrainConfig& config, ParamVector& grad);

struct TrainTrace {
    std::vector<double> factual;
    std::vector<double> ipm;
    std::vector<double> total;
};

struct TrainResult {
    TarNetModel model;
    TrainTrace trace;
};

// minibatch descent on the objective; batches that land on a single group are
// redrawn at random a bounded number of times
TrainResult train(const CausalDataset& ds, const MlpSpec& phi_spec,
                  const std::vector<int>& head_hidden, const TrainConfig& config);

// continues optimization from the source parameters on the target data with a
// fresh optimizer state; zero epochs returns the source parameters unchanged
TrainResult fine_tune(const TarNetModel& source, const CausalDataset& target,
                      const TrainConfig& config);

double predict_outcome(const TarNetModel& model, const Eigen::VectorXd& x, int a);
double predict_ite(const TarNetModel& model, const Eigen::VectorXd& x);

Eigen::VectorXd latent(const TarNetModel& model, const Eigen::VectorXd& x);
// row-wise representation of a covariate matrix
Matrix latent_all(const TarNetModel& model, const Matrix& x);

void save_model(const TarNetModel& model, const std::string& path);
TarNetModel load_model(const std::string& path);

}  // namespace ctl
