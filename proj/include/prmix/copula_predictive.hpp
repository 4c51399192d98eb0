#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "prmix/kernels.hpp"
#include "prmix/recursion.hpp"

namespace prmix {

/// Bivariate Gaussian copula density.  Arguments are clamped to
/// [1e-12, 1 - 1e-12]; requires |rho| < 1.
double gaussian_copula_density(double a, double b, double rho);

/// Recursive predictive density f_n on a fixed y grid, with its CDF.
struct PredictiveState {
    std::vector<double> y;        ///< equally spaced nodes
    std::vector<double> density;  ///< f_n at the nodes, trapezoid-normalised
    std::vector<double> cdf;      ///< running trapezoid integral of density
    std::size_t n = 0;            ///< observations consumed
    double rho = 0.9;
    WeightSchedule schedule;
    /// Trapezoid mass of the last raw update before re-normalisation.
    double raw_mass = 1.0;
    /// CDF arguments clamped away from {0, 1} so far.
    std::size_t clamped = 0;

    double spacing() const { return y[1] - y[0]; }
    /// Piecewise-linear density and matching (piecewise-quadratic) CDF.
    double density_at(double x) const;
    double cdf_at(double x) const;
    /// The density as a DensityFn (copies the state).
    DensityFn evaluator() const;
};

/// Equally spaced grid on [lower, upper] with f0 given by `f0` (then
/// normalised).  Needs m >= 3 and |rho| < 1.
PredictiveState make_predictive_state(double lower, double upper, std::size_t m,
                                      const DensityFn& f0, double rho,
                                      const WeightSchedule& schedule = WeightSchedule{1.0, 0.67});

/// Grid spanning the data range +/- 4 robust standard deviations
/// (1.4826 MAD, falling back to the sample sd).
struct YGridRange {
    double lower;
    double upper;
};
YGridRange auto_ygrid_range(std::span<const double> data);

/// f_n(y) = (1 - w) f(y) + w g_rho(F(y), F(y_new)) f(y), w = (c + n + 1)^-gamma.
PredictiveState copula_update(const PredictiveState& state, double y_new);

/// Folds copula_update over `data` in order.
PredictiveState copula_fit(const PredictiveState& initial, std::span<const double> data);

/// Average of copula fits over permuted data orders.
PredictiveState copula_fit_averaged(const PredictiveState& initial, std::span<const double> data,
                                    std::size_t permutations, std::uint64_t seed);

}  // namespace prmix
