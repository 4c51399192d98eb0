#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "prmix/recursion.hpp"

namespace prmix {

struct RegressionOptions {
    /// Scale grid.  When empty, 200 log-spaced nodes on [0.1 s, 10 s] with
    /// s the MAD scale of the OLS residuals (s = 1 if that is zero).
    GridPtr scale_grid;
    WeightSchedule schedule{1.0, 0.67};
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;  ///< on max |beta_new - beta_old|
    std::size_t permutations = 1;
    std::uint64_t seed = 0;
};

struct RegressionIteration {
    Eigen::VectorXd beta;
    double objective = 0.0;  ///< PR marginal log-likelihood of the residuals at beta
};

struct RegressionFit {
    Eigen::VectorXd beta;
    MixingDensity scale_density;
    Eigen::VectorXd weights;  ///< E[u^-2 | residual] used in the final solve
    std::vector<RegressionIteration> trace;
    bool converged = false;
    std::size_t iterations = 0;
};

struct ScaleWeights {
    std::vector<double> weights;
    std::size_t floored = 0;  ///< entries clamped to the 1e-12 floor
};

/// weight_i = E[u^-2 | eps_i] under N(eps | 0, u^2) p(u).
ScaleWeights posterior_scale_weights(std::span<const double> residuals,
                                     const MixingDensity& scale_density);

/// Least squares by column-pivoted QR; throws a design error when X is rank
/// deficient.
Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Solves (X' W X) beta = X' W y.
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w);

/// Columns 1, x, x^2, ..., x^degree (intercept optional).
Eigen::MatrixXd polynomial_design(std::span<const double> x, std::size_t degree,
                                  bool intercept = true);

/// Hybrid PR-EM: alternates a PR fit of the error scale density on the
/// current residuals with a weighted least-squares update of beta.
RegressionFit prem_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const RegressionOptions& options = {});

}  // namespace prmix
