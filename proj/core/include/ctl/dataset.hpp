#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include <json.hpp>

namespace ctl {

// Sidecar description of how a dataset was produced. params holds the
// family-specific values (surfaces, centers, flip records, ...) so closed
// forms can be re-evaluated later without the generator call.
struct DatasetMeta {
    std::string family;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 0;
    int num_treatments = 1;  // labels run 0..num_treatments
    int n = 0;
    int d = 0;
    std::string outcome_kind = "continuous";  // or "binary"
};

// Observational sample with the full potential-outcome table attached.
// For generated data y[i] == potential(i, a[i]); datasets produced by
// label flipping intentionally break that identity (they model a related
// but different task, not corrupted data).
struct CausalDataset {
    Eigen::MatrixXd x;          // n x d covariates
    Eigen::VectorXi a;          // treatment labels in [0, num_treatments]
    Eigen::VectorXd y;          // factual outcome
    Eigen::MatrixXd potential;  // n x (num_treatments + 1)
    DatasetMeta meta;

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index d() const { return x.cols(); }
    int treatments() const { return meta.num_treatments; }
};

// shape, label-range, and meta consistency; factual consistency is separate
void validate_dataset(const CausalDataset& ds);

// true when y[i] == potential(i, a[i]) for every row (exact comparison)
bool factually_consistent(const CausalDataset& ds);

// short stable identifier, e.g. "heat:k=0.65:s11"
std::string dataset_id(const DatasetMeta& meta);

inline std::string dataset_id(const CausalDataset& ds) { return dataset_id(ds.meta); }

// CSV columns x0..x{d-1}, a, y, y0..yM at 17 significant digits, plus a
// <path>.meta.json sidecar carrying DatasetMeta.
void save_dataset(const CausalDataset& ds, const std::string& path);
CausalDataset load_dataset(const std::string& path);

// row subset in the given index order
CausalDataset subset(const CausalDataset& ds, const std::vector<int>& rows);

// the mirror-image task of a binary dataset: labels invert and each factual
// outcome is replaced by the other arm's potential; the table itself is kept
CausalDataset counterfactual_version(const CausalDataset& ds);

nlohmann::json meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const nlohmann::json& j);

}  // namespace ctl
