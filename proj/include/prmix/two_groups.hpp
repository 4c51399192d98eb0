#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prmix/semiparametric.hpp"

namespace prmix {

/// Options for the empirical-Bayes two-groups fit.  Theta coordinates are
/// ordered (mu, tau, sigma).
struct TwoGroupsOptions {
    ThetaBox box{{-1.0, 1.0, 0.3}, {1.0, 10.0, 3.0}};
    std::size_t grid_nodes = 200;  ///< continuous nodes on [-1, 1]
    WeightSchedule schedule{1.0, 0.67};
    double initial_null_mass = 0.9;  ///< p0 mass on the atom at 0
    double pi_cap = 0.999;
    PrmlOptions optimizer{20, 1e-3, 200, 2, 1, 0, 1};
};

/// Fitted model f(y) = pi N(y; mu, sigma^2)
///                    + (1 - pi) int N(y; mu + tau sigma u, sigma^2) p1(u) du.
struct TwoGroupsFit {
    double pi_hat = 1.0;
    double mu_hat = 0.0;
    double tau_hat = 1.0;
    double sigma_hat = 1.0;
    MixingDensity mixing;   ///< on the atom at 0 plus [-1, 1]
    MixingDensity nonnull;  ///< p1, on the continuous part only
    std::size_t atom_index = 0;
    double log_likelihood = 0.0;
    std::vector<PrmlTraceEntry> trace;

    Kernel kernel() const { return Kernel::two_groups(mu_hat, tau_hat, sigma_hat); }
    double log_marginal(double y) const;
    double marginal(double y) const;
    /// pi f0(y)
    double null_part(double y) const;
    /// (1 - pi) f1(y)
    double nonnull_part(double y) const;
};

/// Builds the dominating measure delta_0 + Lebesgue[-1, 1].
GridPtr twogroups_grid(std::size_t continuous_nodes = 200);

/// Two-groups fit from a mixing density already estimated on a
/// twogroups_grid.  Applies the pi cap.
TwoGroupsFit make_twogroups_fit(double mu, double tau, double sigma, const MixingDensity& mixing,
                                double pi_cap = 0.999);

/// Estimates (mu, tau, sigma) by PR marginal likelihood and reads pi off the
/// fitted atom mass.  Requires at least 10 z-scores.
TwoGroupsFit twogroups_fit(std::span<const double> z, const TwoGroupsOptions& options = {});

struct FdrValue {
    double value = 1.0;
    bool underflow = false;  ///< marginal underflowed; value defaulted to 1
};

/// pi f0(y) / f(y), computed in log space and clamped to [0, 1].
FdrValue local_fdr(const TwoGroupsFit& fit, double y);

/// Plain arithmetic form pi f0 / (pi f0 + (1 - pi) f1).
double local_fdr(double pi, double null_density, double nonnull_density);

struct FdrDecisions {
    double cutoff = 0.1;
    std::vector<double> fdr;
    std::vector<bool> reject;
    std::size_t rejections = 0;
    std::size_t up = 0;    ///< rejected with y > mu
    std::size_t down = 0;  ///< rejected with y < mu
    std::optional<double> lower_threshold;  ///< largest y < mu with fdr <= cutoff
    std::optional<double> upper_threshold;  ///< smallest y > mu with fdr <= cutoff
};

FdrDecisions fdr_test(const TwoGroupsFit& fit, std::span<const double> z, double cutoff = 0.1);

struct FdrCurveRow {
    double y = 0.0;
    double marginal = 0.0;
    double null_part = 0.0;
    double nonnull_part = 0.0;
    double fdr = 1.0;
};

/// Plot table on m equally spaced points of [lower, upper].
std::vector<FdrCurveRow> fdr_curve(const TwoGroupsFit& fit, double lower, double upper,
                                   std::size_t m = 400);

}  // namespace prmix
