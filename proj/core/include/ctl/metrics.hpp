#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctl/dataset.hpp"
#include "ctl/tarnet.hpp"

namespace ctl {

// squared-error risks under the observed assignment and under the flipped
// assignment, with their per-arm decompositions; u is the treated share
struct LossReport {
    double factual = 0.0;
    double factual_a0 = 0.0;
    double factual_a1 = 0.0;
    std::optional<double> counterfactual;
    std::optional<double> counterfactual_a0;
    std::optional<double> counterfactual_a1;
    double u = 0.0;
};

// mean squared error of the predicted effect against the potential-outcome
// difference; rejects factual-only data
double pehe(const TarNetModel& model, const CausalDataset& ds);

// counterfactual fields are filled only when the potential table is present
LossReport losses(const TarNetModel& model, const CausalDataset& ds);

struct BoundReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool holds = false;
    std::map<std::string, double> components;  // named terms summing to rhs
    std::string assumptions;                   // declared premises left unverified
};

// factual risk plus the treated-share-weighted arm-0 counterfactual risk must
// not exceed the effect-estimation error
BoundReport check_thm1(const TarNetModel& model, const CausalDataset& ds);

// the effect-estimation error is at most twice the factual plus twice the
// counterfactual risk
BoundReport check_shalit_sandwich(const TarNetModel& model, const CausalDataset& ds);

struct TransferBoundConfig {
    int subsample = 256;       // per point cloud fed to the exact solver
    std::uint64_t seed = 0;    // subsampling stream
    double tolerance = 0.05;   // relative slack allowed on each inequality
};

// cross-task upper bounds on the target counterfactual risk and the target
// effect-estimation error, with transport terms measured between latent point
// clouds by the exact solver and the task gap read from generator closed forms
std::vector<BoundReport> check_transfer_bounds(const TarNetModel& source_model,
                                               const CausalDataset& source_ds,
                                               const CausalDataset& target_ds,
                                               const TransferBoundConfig& config = {});

// density-distance form of the cross-task counterfactual bound, evaluated by
// quadrature through the closed-form structure of the heat family
BoundReport check_thm2_l1_heat(const CausalDataset& source_ds, const CausalDataset& target_ds,
                               const TarNetModel& model, double tolerance = 0.10);

nlohmann::json bound_reports_to_json(const std::vector<BoundReport>& reports);

void save_bound_reports(const std::vector<BoundReport>& reports, const std::string& path);

}  // namespace ctl
