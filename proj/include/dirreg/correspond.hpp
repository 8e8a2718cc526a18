#pragma once

#include <Eigen/Dense>

#include "dirreg/costs.hpp"

namespace dirreg {

// Squared Euclidean distance between every model/target pair, min-max
// normalized to [0,1] over the whole matrix.
Eigen::MatrixXd global_distance(const Eigen::MatrixXd& model, const Eigen::MatrixXd& target);

// Neighbourhood-structure distance: each point is described by its sorted
// k-nearest-neighbour distances divided by their own mean, and entries are
// squared descriptor distances, min-max normalized to [0,1].
Eigen::MatrixXd local_distance(const Eigen::MatrixXd& model, const Eigen::MatrixXd& target, int k);

// Minimum-cost one-to-one assignment (Hungarian). For rectangular inputs the
// smaller side is fully matched. Returns, for each row, the assigned column.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

// Cost matrix alpha * local + (1 - alpha) * global, solved optimally.
CorrespondenceSet estimate_correspondences(const Eigen::MatrixXd& model,
                                           const Eigen::MatrixXd& target,
                                           double alpha, int k = 5);

}  // namespace dirreg
