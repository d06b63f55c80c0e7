#pragma once

#include <Eigen/Dense>
#include <optional>

namespace ctl {

// Weighted point set in R^l. Weights must be positive and sum to 1;
// uniform(points) builds the common equal-weight case.
struct PointCloud {
    Eigen::MatrixXd points;   // m x l
    Eigen::VectorXd weights;  // length m, sums to 1

    static PointCloud uniform(const Eigen::MatrixXd& points);
};

void validate_cloud(const PointCloud& c);

struct TransportResult {
    double cost = 0.0;
    Eigen::MatrixXd plan;  // m x m', rows sum to p.weights, cols to q.weights
    // present for sinkhorn_w1 only: d cost / d point coordinates
    std::optional<Eigen::MatrixXd> grad_p;
    std::optional<Eigen::MatrixXd> grad_q;
};

// Exact discrete 1-Wasserstein distance under the Euclidean ground metric,
// solved as a transportation problem by successive shortest paths with
// node potentials. Weights must be rational (uniform weights always are);
// both sides are capped at 256 points.
TransportResult exact_w1(const PointCloud& p, const PointCloud& q);

// Entropy-regularized approximation. Log-domain scalings with a geometric
// warm-start on the regularization, followed by a rounding step that makes
// the returned plan exactly feasible. eps is the absolute regularization on
// the Euclidean cost scale; the max-normalization applied internally only
// serves numerical stability. Gradients with respect to both coordinate
// sets come from reverse-mode differentiation through the unrolled
// iterations and the rounding, so they agree with finite differences of
// the returned cost.
TransportResult sinkhorn_w1(const PointCloud& p, const PointCloud& q, double eps = 0.01,
                            int iters = 500);

}  // namespace ctl
