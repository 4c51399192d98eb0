#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prmix/recursion.hpp"

namespace prmix {

/// Search box for structural parameters.  A coordinate with lower == upper
/// is held fixed.
struct ThetaBox {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const noexcept { return lower.size(); }
    bool is_fixed(std::size_t k) const { return lower[k] == upper[k]; }
    bool contains(std::span<const double> theta) const;
    void validate() const;
};

/// Log PR marginal likelihood.  `failed_at` names the observation that got
/// zero predictive density, in which case `value` is -inf.
struct PrmlValue {
    double value = 0.0;
    std::optional<std::size_t> failed_at;

    bool finite() const noexcept { return !failed_at; }
};

/// sum_i log f_{i-1,theta}(Y_i) over one pass in data order.
PrmlValue prml_loglik(std::span<const Observation> data, KernelFamily family,
                      std::span<const double> theta, const MixingDensity& p0,
                      const WeightSchedule& schedule);

/// Average of the per-order log marginal likelihoods.
PrmlValue prml_loglik(std::span<const Observation> data, KernelFamily family,
                      std::span<const double> theta, const MixingDensity& p0,
                      const WeightSchedule& schedule,
                      std::span<const std::vector<std::size_t>> orders, std::size_t jobs = 1);

struct PrmlOptions {
    std::size_t scan_points = 20;    ///< coarse scan per free coordinate
    double tolerance = 1e-3;         ///< golden-section bracket width
    std::size_t max_evaluations = 200;
    std::size_t max_cycles = 3;      ///< coordinate cycles when dim > 1
    std::size_t permutations = 25;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

struct PrmlTraceEntry {
    std::vector<double> theta;
    double value = 0.0;
    double best = 0.0;  ///< best value seen so far (non-decreasing)
};

struct PrmlResult {
    std::vector<double> theta_hat;
    double log_likelihood = 0.0;
    PRFit fit;
    std::vector<PrmlTraceEntry> trace;
};

/// Maximises the (permutation-averaged) PR marginal likelihood over `box`:
/// a coarse scan along each free coordinate, then cyclic golden-section
/// refinement.  The same data orders are used at every theta.
PrmlResult prml_optimize(std::span<const Observation> data, KernelFamily family,
                         const ThetaBox& box, const MixingDensity& p0,
                         const WeightSchedule& schedule, const PrmlOptions& options = {});

}  // namespace prmix
