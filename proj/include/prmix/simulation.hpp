#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prmix/grid.hpp"
#include "prmix/kernels.hpp"
#include "prmix/recursion.hpp"

namespace prmix {

enum class LatentShape { uniform, gamma, beta };

/// Continuous component of a true mixing distribution.  uniform(a, b) on
/// [a, b]; gamma(shape a, rate b); beta(a, b) on [0, 1].
struct ContinuousLatent {
    LatentShape shape = LatentShape::uniform;
    double a = 0.0;
    double b = 1.0;
    double weight = 1.0;
};

/// Atoms with masses plus an optional continuous part.  Masses sum to 1.
struct MixingSpec {
    std::vector<double> atoms;
    std::vector<double> atom_weights;
    std::optional<ContinuousLatent> continuous;

    void validate() const;
};

struct SimScenario {
    std::string name;
    std::string description;
    KernelFamily family = KernelFamily::poisson;
    std::vector<double> theta;  ///< kernel parameters generating the data
    MixingSpec truth;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    int min_trials = 1;  ///< binomial N drawn uniformly from [min, max]
    int max_trials = 50;

    // Default estimator for the scenario.
    std::vector<double> fit_theta;
    GridSpec fit_grid{0.0, 1.0, 100, {}};
    QuadratureRule fit_rule = QuadratureRule::midpoint;

    Kernel data_kernel() const { return Kernel::make(family, theta); }
};

/// Registered scenario names in a fixed order.
std::vector<std::string_view> scenario_names();
/// Looks a scenario up by name; unknown names raise a config error.
SimScenario find_scenario(std::string_view name);

/// Latent-then-conditional iid draws; deterministic given the seed.
std::vector<Observation> simulate(const SimScenario& scenario);
/// The draws together with the latent values that produced them.
struct LabelledDraws {
    std::vector<Observation> data;
    std::vector<double> latent;
};
LabelledDraws simulate_labelled(const SimScenario& scenario);

/// The true mixing distribution as weighted support points, with the
/// continuous part discretised by a fine midpoint rule.
struct LatentLaw {
    std::vector<double> nodes;
    std::vector<double> masses;
};
LatentLaw discretize(const MixingSpec& spec, std::size_t resolution = 4000);

/// The data-generating mixture f*.
class TrueMixture {
public:
    explicit TrueMixture(const SimScenario& scenario);

    double operator()(const Observation& obs) const;
    double mean() const;
    double sd() const;
    /// y -> f*(y); binomial scenarios are rejected.
    DensityFn evaluator() const;
    const Kernel& kernel() const { return kernel_; }

private:
    Kernel kernel_;
    LatentLaw law_;
};

/// Quadrature over y for divergences against f*: counts up to a tail mass
/// of 1e-10 for Poisson, a 1000-node trapezoid over mean +/- 8 sd otherwise.
YQuadrature kl_quadrature(const SimScenario& scenario);

/// PR estimator settings used by the benchmark harness.
struct EstimatorSpec {
    KernelFamily family = KernelFamily::poisson;
    std::vector<double> theta;
    GridSpec grid{0.0, 1.0, 100, {}};
    QuadratureRule rule = QuadratureRule::midpoint;
    WeightSchedule schedule{1.0, 0.67};
};
EstimatorSpec default_estimator(const SimScenario& scenario);

struct CurvePoint {
    std::size_t n = 0;
    double kl = 0.0;
};

/// One PR pass over max(checkpoints) simulated draws, snapshotting
/// K(f*, f_n) at each checkpoint.  Checkpoint 0 gives the divergence of f_0.
std::vector<CurvePoint> convergence_curve(const SimScenario& scenario,
                                          const EstimatorSpec& estimator,
                                          std::span<const std::size_t> checkpoints);

/// Median KL per checkpoint over replications with seeds seed, seed+1, ...
struct CurveSummary {
    std::vector<std::size_t> n;
    std::vector<double> median_kl;
    std::vector<std::vector<double>> replicate_kl;  ///< [replication][checkpoint]
};
CurveSummary replicate_curves(const SimScenario& scenario, const EstimatorSpec& estimator,
                              std::span<const std::size_t> checkpoints,
                              std::size_t replications, std::size_t jobs = 1);

double median(std::vector<double> values);

/// Least-squares slope of log KL against log n over points with n > 0.
double loglog_slope(std::span<const CurvePoint> points);

/// Linear model y = X beta + e with an intercept and iid U(-2, 2)
/// covariates.  A fraction of errors come from N(0, outlier_sd^2).
struct RegressionBed {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd beta;
    std::vector<bool> outlier;
};
RegressionBed simulate_regression(std::size_t n, std::span<const double> beta, double noise_sd,
                                  double outlier_fraction, double outlier_sd, std::uint64_t seed);

}  // namespace prmix
