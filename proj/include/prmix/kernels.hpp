#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prmix/grid.hpp"

namespace prmix {

enum class KernelFamily {
    poisson,        ///< k(y|u) = Pois(y; u), u > 0
    gaussian,       ///< k(y|u) = N(y; u, sigma^2), theta = (sigma)
    binomial,       ///< k(y|u) = Bin(y; N, u), N taken from the observation
    scale_mixture,  ///< k(y|u) = N(y; 0, u^2), u > 0
    two_groups,     ///< k(y|u) = N(y; mu + tau sigma u, sigma^2), theta = (mu, tau, sigma)
};

KernelFamily parse_family(std::string_view name);
std::string_view to_string(KernelFamily family) noexcept;
/// Number of structural parameters the family expects.
std::size_t theta_size(KernelFamily family) noexcept;

struct Observation {
    double y = 0.0;
    std::optional<int> trials;  ///< binomial N
};

std::vector<Observation> make_observations(std::span<const double> y);

class Kernel {
public:
    static Kernel poisson();
    static Kernel gaussian(double sigma);
    static Kernel binomial();
    static Kernel scale_mixture();
    static Kernel two_groups(double mu, double tau, double sigma);
    /// Validates theta against the family's parameter constraints.
    static Kernel make(KernelFamily family, std::span<const double> theta);

    KernelFamily family() const noexcept { return family_; }
    std::span<const double> theta() const noexcept { return theta_; }

    /// log k(y|u); -inf where the kernel vanishes.  Assumes `check` passed.
    double log_density(const Observation& obs, double u) const;
    double operator()(const Observation& obs, double u) const;

    /// Throws a domain error if the observation lies outside the family's
    /// sample space (e.g. negative or fractional counts).
    void check(const Observation& obs, std::optional<std::size_t> index = std::nullopt) const;
    /// Throws a domain error if some grid node is outside the family's
    /// parameter space (e.g. u <= 0 for Poisson).
    void check(const MixingGrid& grid) const;

    /// Fills `out` with k(y|u_j) / max_j k(y|u_j) over the grid nodes and
    /// returns log max_j k(y|u_j) (-inf if the kernel vanishes everywhere).
    double scaled_row(const Observation& obs, const MixingGrid& grid,
                      std::span<double> out) const;

private:
    Kernel(KernelFamily family, std::vector<double> theta)
        : family_(family), theta_(std::move(theta)) {}

    KernelFamily family_;
    std::vector<double> theta_;
};

/// f_p(y) = sum_j k(y|u_j) p(u_j) nu_j.
double mixture_density(const Kernel& kernel, const MixingDensity& p, const Observation& obs);
double log_mixture_density(const Kernel& kernel, const MixingDensity& p, const Observation& obs);

/// Normal density N(y; mu + tau sigma u, sigma^2) of the two-groups model.
double twogroups_kernel(double mu, double tau, double sigma, double y, double u);

using DensityFn = std::function<double(double)>;

/// Evaluator y -> f_p(y) holding copies of the kernel and density.
/// Binomial kernels need a per-observation N and are rejected here.
DensityFn mixture_evaluator(const Kernel& kernel, const MixingDensity& p);

}  // namespace prmix
