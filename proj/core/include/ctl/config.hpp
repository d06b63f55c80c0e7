#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctl/dataset.hpp"
#include "ctl/tarnet.hpp"

namespace ctl {

// invalid or inconsistent configuration input; the command line maps this to exit code 2
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// one generated task: a family name plus its surface parameters
struct DatasetSpec {
    std::string family;  // heat | movement | rkhs | surrogate
    int n = 2000;
    std::uint64_t seed = 0;
    nlohmann::json params = nlohmann::json::object();
};

DatasetSpec dataset_spec_from_json(const nlohmann::json& j);
nlohmann::json dataset_spec_to_json(const DatasetSpec& spec);

// deterministic combination of a base seed with a replication index
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

// instantiate the described task; the replication overload perturbs the draw
// seed so repeated runs resample the same task
CausalDataset make_dataset(const DatasetSpec& spec);
CausalDataset make_dataset(const DatasetSpec& spec, std::uint64_t replication);

struct ExperimentConfig {
    std::string experiment;  // transfer | symmetry | correlation | efficiency | bundling | verify-bounds
    DatasetSpec target;
    std::vector<DatasetSpec> sources;
    std::vector<std::uint64_t> seeds = {0};
    std::vector<double> alpha_grid;   // correlation sweeps; empty means {train.alpha}
    std::vector<int> sizes;           // efficiency sample sizes or bundling source counts
    std::vector<double> p_grid;       // symmetry flip probabilities
    int target_size = 0;              // rows of the target kept for adaptation; 0 keeps all
    TrainConfig train;
    double fine_tune_fraction = 0.2;  // fine-tuning budget as a share of train.epochs
    int scratch_candidates = 3;       // models trained from scratch per arm
    int workers = 1;
    std::string workdir = "work";
    std::string out;                  // defaults to <workdir>/results
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
void validate_config(const ExperimentConfig& config);
nlohmann::json config_to_json(const ExperimentConfig& config);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace ctl
