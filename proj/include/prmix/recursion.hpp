#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "prmix/grid.hpp"
#include "prmix/kernels.hpp"

namespace prmix {

/// Weight rule w_i = (c + i)^(-gamma).  Requires c > 0 and gamma in (1/2, 1],
/// which gives sum w_i = inf and sum w_i^2 < inf.  The rate statement for
/// the mixture estimate needs gamma in (2/3, 1].
class WeightSchedule {
public:
    explicit WeightSchedule(double c = 1.0, double gamma = 0.67);

    double c() const noexcept { return c_; }
    double gamma() const noexcept { return gamma_; }
    /// Weight for the i-th observation, i >= 1.
    double operator()(std::size_t i) const;

private:
    double c_;
    double gamma_;
};

double weight(const WeightSchedule& schedule, std::size_t i);

/// One recursive update of raw per-node values, in place.  Returns
/// log f_prev(y), or -inf (leaving `values` untouched) when the current
/// mixture gives the observation zero density.  `scratch` must hold
/// grid.size() doubles.
double pr_update(const Kernel& kernel, const MixingGrid& grid, std::span<double> values,
                 const Observation& obs, double w, std::span<double> scratch);

/// p_new(u) = (1 - w) p(u) + w k(y|u) p(u) / f_p(y), re-normalised.
MixingDensity pr_step(const MixingDensity& p_prev, const Observation& obs, const Kernel& kernel,
                      double w);

struct PRFit {
    MixingDensity density;
    Kernel kernel;
    WeightSchedule schedule;
    /// log f_{i-1}(Y_i) per step; averaged over orders for averaged fits.
    std::vector<double> log_predictive;
    std::size_t permutations_used = 1;
    std::uint64_t seed = 0;

    std::span<const double> theta() const noexcept { return kernel.theta(); }
    /// sum of log_predictive, the log PR marginal likelihood.
    double log_likelihood() const;
    double mixture(const Observation& obs) const { return mixture_density(kernel, density, obs); }
};

/// Single pass over `data` in the given order.
PRFit pr_fit(std::span<const Observation> data, const Kernel& kernel, const MixingDensity& p0,
             const WeightSchedule& schedule);

/// Fit on data visited in `order` (indices into data).
PRFit pr_fit(std::span<const Observation> data, std::span<const std::size_t> order,
             const Kernel& kernel, const MixingDensity& p0, const WeightSchedule& schedule);

/// Data orders used for permutation averaging.  For n <= 5 and
/// count >= n!, every distinct ordering of the sorted multiset is listed
/// once, so the average does not depend on the input order.  Otherwise
/// `count` Fisher-Yates shuffles from a seeded 64-bit Mersenne twister.
std::vector<std::vector<std::size_t>> permutation_orders(std::span<const Observation> data,
                                                         std::size_t count, std::uint64_t seed);

struct AveragingOptions {
    std::size_t permutations = 25;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;  ///< worker threads; output does not depend on it
};

/// Pointwise average of the densities fitted over permuted data orders.
PRFit pr_fit_averaged(std::span<const Observation> data, const Kernel& kernel,
                      const MixingDensity& p0, const WeightSchedule& schedule,
                      const AveragingOptions& options = {});

/// Average of fits over precomputed orders.
PRFit pr_fit_averaged(std::span<const Observation> data,
                      std::span<const std::vector<std::size_t>> orders, const Kernel& kernel,
                      const MixingDensity& p0, const WeightSchedule& schedule,
                      std::size_t jobs = 1);

/// Quadrature over the observation space used for divergences.
struct YQuadrature {
    std::vector<double> nodes;
    std::vector<double> weights;

    /// Counts 0..last with unit weights.
    static YQuadrature counts(std::size_t last);
    /// Smallest count range whose mass under f exceeds 1 - tail.
    static YQuadrature counts_until(const DensityFn& f, double tail = 1e-10,
                                    std::size_t hard_limit = 100000);
    static YQuadrature trapezoid(double lower, double upper, std::size_t m = 1000);
};

/// K(f_true, f_est) = integral of f_true log(f_true / f_est), clipped at 0.
/// Returns +inf when f_est vanishes where f_true is positive.
double kl_divergence(const DensityFn& f_true, const DensityFn& f_est, const YQuadrature& quad);

}  // namespace prmix
