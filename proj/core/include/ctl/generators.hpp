#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ctl/dataset.hpp"

namespace ctl {

// Semi-synthetic outcome simulation over given covariates: coefficients
// beta_j drawn from {0, 0.1, 0.2, 0.3, 0.4} with probabilities mu, offset
// W = 0.5, potentials
//   Y0 ~ N(exp(beta.(x + W)), 1),   Y1 ~ N(beta.(x + W) - omega, 1).
// Assignment comes from `assignments` when supplied, else Bernoulli(139/747).
CausalDataset gen_ihdp(const Eigen::MatrixXd& covariates, const std::vector<double>& mu,
                       double omega, std::uint64_t seed,
                       const std::optional<Eigen::VectorXi>& assignments = std::nullopt);

// Self-contained stand-in covariate base: n x 25 standard normals with
// Bernoulli(139/747) assignment, then the same outcome simulation.
CausalDataset gen_surrogate(int n, const std::vector<double>& mu, double omega,
                            std::uint64_t seed);

// Outcome functions are random RBF-kernel sums with centers near gamma_j;
// groups are Gaussian clouds around mu1 / mu0. Noiseless.
CausalDataset gen_rkhs(int n, std::uint64_t seed);

// Cooling-time task: covariate u is an exposure time, control times chi2(2),
// treated times chi2(5), Y0 = exp(-k u), Y1 = max((95 exp(-k u) - 20)/75, 0).
// Noiseless, n/2 per group.
CausalDataset gen_heat(double k, int n, std::uint64_t seed);

// Terminal-velocity task: treated times chi2(2), control times chi2(5),
// Y0 = 10 (1 - exp(-u)), Y1 = (10/C)(1 - exp(-C u)) with C = k/m. Noiseless.
CausalDataset gen_movement(double m, double k, int n, std::uint64_t seed);

// Independent label flips with probability p. Covariates, outcomes and the
// potential table stay untouched, so the result describes a different task
// rather than a noisy copy. Binary treatments only.
CausalDataset flip_treatments(const CausalDataset& ds, double p, std::uint64_t seed);

struct IhdpSetting {
    std::vector<double> mu;
    double omega;
};

// base setting followed by the nine shifted variants
std::vector<IhdpSetting> ihdp_settings();

// 20 decay rates uniformly spaced over [0.5, 2]; the first is the base task
std::vector<double> heat_k_grid();

struct MovementSetting {
    double m;
    double k;
};

// 12 (mass, drag-coefficient) pairs; the first is the base task
std::vector<MovementSetting> movement_settings();

// Closed-form outcome surface f(x, a) reconstructed from dataset meta.
// For the noisy ihdp/surrogate families this is the conditional mean.
double closed_form_outcome(const DatasetMeta& meta, const Eigen::VectorXd& x, int a);

bool has_closed_form(const DatasetMeta& meta);

// RBF width shared by gen_rkhs and closed_form_outcome
inline constexpr double kRkhsBandwidth = 8.0;

}  // namespace ctl
