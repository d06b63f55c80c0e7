#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctl/config.hpp"
#include "ctl/dataset.hpp"
#include "ctl/tarnet.hpp"

namespace ctl {

struct ResultRow {
    std::string experiment;
    std::uint64_t seed = 0;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    std::string source_id;
    std::string target_id;
    double d_sym = std::numeric_limits<double>::quiet_NaN();
    double pehe = std::numeric_limits<double>::quiet_NaN();
    double factual_loss = std::numeric_limits<double>::quiet_NaN();
    double cf_loss = std::numeric_limits<double>::quiet_NaN();
    long n_train = 0;
};

// flat result sink shared by every runner; the column schema never changes
struct ResultTable {
    static const std::vector<std::string>& columns();

    std::vector<ResultRow> rows;

    void save_csv(const std::string& path) const;
    static ResultTable load_csv(const std::string& path);
};

struct ExperimentOutput {
    ResultTable table;
    nlohmann::json summary;
};

// row-concatenation of tasks sharing covariate width and treatment count
CausalDataset concat_datasets(const std::vector<CausalDataset>& parts);

// creates workdir/{datasets,models,reports,results} when missing
void ensure_workdir(const std::string& workdir);

// persistence under content-derived filenames; each returns the stored path
std::string store_dataset(const std::string& workdir, const CausalDataset& ds);
std::string store_model(const std::string& workdir, const TarNetModel& model);
std::string store_report(const std::string& workdir, const std::string& stem,
                         const nlohmann::json& report);

std::uint64_t file_digest(const std::string& path);

// runs fn(0..jobs-1) on up to `workers` threads; rethrows the first failure
void parallel_for(int workers, int jobs, const std::function<void(int)>& fn);

ExperimentOutput run_transfer(const ExperimentConfig& config);
ExperimentOutput run_symmetry(const ExperimentConfig& config);
ExperimentOutput run_correlation(const ExperimentConfig& config);
ExperimentOutput run_efficiency(const ExperimentConfig& config);
ExperimentOutput run_bundling(const ExperimentConfig& config);
ExperimentOutput run_verify_bounds(const ExperimentConfig& config);

// dispatches on config.experiment
ExperimentOutput run_experiment(const ExperimentConfig& config);

// writes <experiment>-results.csv and <experiment>-summary.json under
// config.out; returns the csv path
std::string write_outputs(const ExperimentConfig& config, const ExperimentOutput& output);

}  // namespace ctl
