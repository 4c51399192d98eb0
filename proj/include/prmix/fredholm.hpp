#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "prmix/recursion.hpp"

namespace prmix {

/// The mixture density f is known; integrals over y use `quadrature`.
struct KnownMixtureTarget {
    DensityFn density;
    YQuadrature quadrature;
};

/// f replaced by the empirical distribution of the data.
struct EmpiricalTarget {
    std::span<const Observation> data;
};

/// f replaced by a caller-supplied density estimate.
struct PlugInTarget {
    DensityFn estimate;
    YQuadrature quadrature;
};

using FredholmTarget = std::variant<KnownMixtureTarget, EmpiricalTarget, PlugInTarget>;

/// p_new(u) = p(u) * integral k(y|u) f(y) / f_p(y) dy, re-normalised.
MixingDensity fredholm_step(const MixingDensity& p_prev, const Kernel& kernel,
                            const FredholmTarget& target);

struct NpmleOptions {
    double tolerance = 1e-8;  ///< sup-norm change of the density values
    std::size_t max_iterations = 10000;
};

struct FredholmState {
    MixingDensity density;
    std::size_t iterations = 0;
    double sup_gradient = 0.0;
    bool converged = false;
    /// (1/n) sum_i k(Y_i|u) / f(Y_i) at every grid node of the final iterate.
    std::vector<double> gradient;
    /// Empirical log-likelihood before the first step and after each step.
    std::vector<double> log_likelihood;
};

/// Iterates the empirical-target update from p0 until the sup-norm change
/// falls below the tolerance.  Hitting max_iterations is reported through
/// `converged`, not by throwing.
FredholmState npmle_fit(std::span<const Observation> data, const Kernel& kernel,
                        const MixingDensity& p0, const NpmleOptions& options = {});

/// Gradient (1/n) sum_i k(Y_i|u_j) / f_p(Y_i) at every node.
std::vector<double> npmle_gradient(std::span<const Observation> data, const Kernel& kernel,
                                   const MixingDensity& p);

/// sum_i log f_p(Y_i).
double mixture_log_likelihood(std::span<const Observation> data, const Kernel& kernel,
                              const MixingDensity& p);

/// Gaussian kernel density estimate with Silverman's bandwidth when
/// bandwidth <= 0.
DensityFn gaussian_kde(std::span<const double> sample, double bandwidth = 0.0);

}  // namespace prmix
