#pragma once

#include <Eigen/Dense>

namespace ctl {

// sample Pearson correlation; throws on length mismatch or fewer than two
// points, returns 0 when either input is constant
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Spearman rank correlation with average ranks for ties
double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

double median(Eigen::VectorXd values);

// average ranks (1-based); ties share the mean of their rank positions
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

}  // namespace ctl
