#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctl/dataset.hpp"
#include "ctl/tarnet.hpp"

namespace ctl {

// diagonal of the per-sample squared-gradient average over the flat parameter
// layout, normalized to unit trace when the trace is positive
struct FisherSignature {
    Eigen::VectorXd diag;
    bool trace_normalized = false;
    std::string model_id;
    std::string dataset_id;
};

// the per-sample loss is the negative log-likelihood implied by the dataset's
// outcome kind: unit-variance Gaussian for continuous, Bernoulli for binary
FisherSignature empirical_fisher_diag(const TarNetModel& model, const CausalDataset& ds);

// (1/sqrt(2)) times the Euclidean distance between elementwise square roots;
// lands in [0, 1] for unit-trace inputs
double frechet_distance(const FisherSignature& f1, const FisherSignature& f2);

using Permutation = std::vector<int>;
std::string permutation_to_string(const Permutation& perm);

// factorial enumeration cap on treatment labels
inline constexpr int kMaxCitaLabels = 6;

struct TaskDistanceReport {
    std::string source_id;
    std::string target_id;
    std::map<std::string, double> d_per_perm;
    double d_sym = 0.0;
    Permutation best_perm;

    // distance under the untouched labeling
    double identity_distance() const;
};

// distance from the source task to every relabeling of the target task, with
// the symmetrized distance as the minimum; target outcomes stay unchanged
TaskDistanceReport cita(const TarNetModel& source_model, const CausalDataset& source_ds,
                        const CausalDataset& target_ds);

nlohmann::json report_to_json(const TaskDistanceReport& report);
void save_report(const TaskDistanceReport& report, const std::string& path);

struct SelectionResult {
    std::size_t index = 0;
    std::vector<TaskDistanceReport> reports;
};

// argmin of the symmetrized distance over the sources, lowest index on ties;
// when a trust threshold is given, every source model must have reached that
// training loss
SelectionResult select_closest(const std::vector<TarNetModel>& models,
                               const std::vector<CausalDataset>& sources,
                               const CausalDataset& target,
                               std::optional<double> max_source_loss = std::nullopt);

}  // namespace ctl
