#include "prmix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "prmix/error.hpp"
#include "prmix/normal.hpp"

namespace prmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// a * log(b) with 0 * log(0) = 0.
double xlogy(double a, double b) {
    if (a == 0.0) return 0.0;
    return a * std::log(b);
}

bool is_count(double y) {
    return std::isfinite(y) && y >= 0.0 && y == std::floor(y);
}

std::string where(std::optional<std::size_t> index) {
    return index ? " (observation " + std::to_string(*index) + ")" : std::string{};
}

}  // namespace

KernelFamily parse_family(std::string_view name) {
    if (name == "poisson") return KernelFamily::poisson;
    if (name == "gauss" || name == "gaussian") return KernelFamily::gaussian;
    if (name == "binom" || name == "binomial") return KernelFamily::binomial;
    if (name == "scale" || name == "scale-mixture") return KernelFamily::scale_mixture;
    if (name == "twogroups" || name == "two-groups") return KernelFamily::two_groups;
    throw Error(ErrorCode::config, "unknown kernel '" + std::string(name) +
                                       "' (expected poisson, gauss, binom, scale or twogroups)");
}

std::string_view to_string(KernelFamily family) noexcept {
    switch (family) {
        case KernelFamily::poisson: return "poisson";
        case KernelFamily::gaussian: return "gauss";
        case KernelFamily::binomial: return "binom";
        case KernelFamily::scale_mixture: return "scale";
        case KernelFamily::two_groups: return "twogroups";
    }
    return "unknown";
}

std::size_t theta_size(KernelFamily family) noexcept {
    switch (family) {
        case KernelFamily::gaussian: return 1;
        case KernelFamily::two_groups: return 3;
        default: return 0;
    }
}

std::vector<Observation> make_observations(std::span<const double> y) {
    std::vector<Observation> out;
    out.reserve(y.size());
    for (double v : y) out.push_back(Observation{v, std::nullopt});
    return out;
}

Kernel Kernel::poisson() { return Kernel(KernelFamily::poisson, {}); }
Kernel Kernel::binomial() { return Kernel(KernelFamily::binomial, {}); }
Kernel Kernel::scale_mixture() { return Kernel(KernelFamily::scale_mixture, {}); }

Kernel Kernel::gaussian(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::parameter, "gaussian kernel needs sigma > 0");
    }
    return Kernel(KernelFamily::gaussian, {sigma});
}

Kernel Kernel::two_groups(double mu, double tau, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::parameter, "two-groups kernel needs sigma > 0");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw Error(ErrorCode::parameter, "two-groups kernel needs tau > 0");
    }
    if (!std::isfinite(mu)) throw Error(ErrorCode::parameter, "two-groups kernel needs finite mu");
    return Kernel(KernelFamily::two_groups, {mu, tau, sigma});
}

Kernel Kernel::make(KernelFamily family, std::span<const double> theta) {
    if (theta.size() != theta_size(family)) {
        throw Error(ErrorCode::parameter,
                    std::string(to_string(family)) + " kernel expects " +
                        std::to_string(theta_size(family)) + " structural parameters, got " +
                        std::to_string(theta.size()));
    }
    switch (family) {
        case KernelFamily::poisson: return poisson();
        case KernelFamily::gaussian: return gaussian(theta[0]);
        case KernelFamily::binomial: return binomial();
        case KernelFamily::scale_mixture: return scale_mixture();
        case KernelFamily::two_groups: return two_groups(theta[0], theta[1], theta[2]);
    }
    throw Error(ErrorCode::parameter, "unknown kernel family");
}

void Kernel::check(const Observation& obs, std::optional<std::size_t> index) const {
    if (!std::isfinite(obs.y)) {
        throw Error(ErrorCode::domain, "observation is not finite" + where(index), index);
    }
    switch (family_) {
        case KernelFamily::poisson:
            if (!is_count(obs.y)) {
                throw Error(ErrorCode::domain,
                            "poisson kernel needs nonnegative integer counts, got " +
                                std::to_string(obs.y) + where(index),
                            index);
            }
            break;
        case KernelFamily::binomial:
            if (!obs.trials || *obs.trials < 1) {
                throw Error(ErrorCode::domain,
                            "binomial kernel needs a trial count N >= 1" + where(index), index);
            }
            if (!is_count(obs.y) || obs.y > *obs.trials) {
                throw Error(ErrorCode::domain,
                            "binomial observation must be an integer in 0..N" + where(index),
                            index);
            }
            break;
        default: break;
    }
}

void Kernel::check(const MixingGrid& grid) const {
    const double lo = *std::min_element(grid.nodes().begin(), grid.nodes().end());
    const double hi = *std::max_element(grid.nodes().begin(), grid.nodes().end());
    switch (family_) {
        case KernelFamily::poisson:
        case KernelFamily::scale_mixture:
            if (!(lo > 0.0)) {
                throw Error(ErrorCode::domain,
                            std::string(to_string(family_)) + " kernel needs grid nodes u > 0");
            }
            break;
        case KernelFamily::binomial:
            if (lo < 0.0 || hi > 1.0) {
                throw Error(ErrorCode::domain, "binomial kernel needs grid nodes in [0, 1]");
            }
            break;
        default: break;
    }
}

double Kernel::log_density(const Observation& obs, double u) const {
    const double y = obs.y;
    switch (family_) {
        case KernelFamily::poisson:
            if (u <= 0.0) return y == 0.0 ? 0.0 : kNegInf;
            return y * std::log(u) - u - std::lgamma(y + 1.0);
        case KernelFamily::gaussian: return normal_log_pdf(y, u, theta_[0]);
        case KernelFamily::binomial: {
            const double n = static_cast<double>(*obs.trials);
            if ((u <= 0.0 && y > 0.0) || (u >= 1.0 && y < n)) return kNegInf;
            return std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0) +
                   xlogy(y, u) + xlogy(n - y, 1.0 - u);
        }
        case KernelFamily::scale_mixture:
            if (u <= 0.0) return kNegInf;
            return normal_log_pdf(y, 0.0, u);
        case KernelFamily::two_groups:
            return normal_log_pdf(y, theta_[0] + theta_[1] * theta_[2] * u, theta_[2]);
    }
    return kNegInf;
}

double Kernel::operator()(const Observation& obs, double u) const {
    return std::exp(log_density(obs, u));
}

double Kernel::scaled_row(const Observation& obs, const MixingGrid& grid,
                          std::span<double> out) const {
    const auto nodes = grid.nodes();
    double top = kNegInf;
    switch (family_) {
        case KernelFamily::poisson: {
            const double y = obs.y;
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                const double u = nodes[j];
                out[j] = u > 0.0 ? xlogy(y, u) - u : (y == 0.0 ? 0.0 : kNegInf);
                top = std::max(top, out[j]);
            }
            break;
        }
        case KernelFamily::gaussian:
        case KernelFamily::two_groups: {
            // Both are N(y; a + b u, s^2); the common -log s term cancels in the scaling.
            const bool gauss = family_ == KernelFamily::gaussian;
            const double a = gauss ? 0.0 : theta_[0];
            const double b = gauss ? 1.0 : theta_[1] * theta_[2];
            const double s = gauss ? theta_[0] : theta_[2];
            const double inv = 1.0 / s;
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                const double z = (obs.y - a - b * nodes[j]) * inv;
                out[j] = -0.5 * z * z;
                top = std::max(top, out[j]);
            }
            if (top > kNegInf) {
                for (std::size_t j = 0; j < nodes.size(); ++j) out[j] = std::exp(out[j] - top);
            }
            return top > kNegInf ? top - std::log(s) - kLogSqrt2Pi : kNegInf;
        }
        case KernelFamily::binomial:
        case KernelFamily::scale_mixture:
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                out[j] = log_density(obs, nodes[j]);
                top = std::max(top, out[j]);
            }
            break;
    }
    if (top == kNegInf) {
        std::fill(out.begin(), out.end(), 0.0);
        return kNegInf;
    }
    for (double& v : out) v = std::exp(v - top);
    if (family_ == KernelFamily::poisson) top -= std::lgamma(obs.y + 1.0);
    return top;
}

double log_mixture_density(const Kernel& kernel, const MixingDensity& p, const Observation& obs) {
    const auto& grid = p.grid();
    std::vector<double> row(grid.size());
    const double top = kernel.scaled_row(obs, grid, row);
    if (top == kNegInf) return kNegInf;
    double sum = 0.0;
    const auto w = grid.weights();
    const auto v = p.values();
    for (std::size_t j = 0; j < row.size(); ++j) sum += row[j] * v[j] * w[j];
    return sum > 0.0 ? top + std::log(sum) : kNegInf;
}

double mixture_density(const Kernel& kernel, const MixingDensity& p, const Observation& obs) {
    return std::exp(log_mixture_density(kernel, p, obs));
}

double twogroups_kernel(double mu, double tau, double sigma, double y, double u) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::parameter, "two-groups kernel needs sigma > 0");
    if (!(tau > 0.0)) throw Error(ErrorCode::parameter, "two-groups kernel needs tau > 0");
    return normal_pdf(y, mu + tau * sigma * u, sigma);
}

DensityFn mixture_evaluator(const Kernel& kernel, const MixingDensity& p) {
    if (kernel.family() == KernelFamily::binomial) {
        throw Error(ErrorCode::parameter,
                    "binomial mixtures depend on N; evaluate them per observation");
    }
    return [kernel, p](double y) {
        return mixture_density(kernel, p, Observation{y, std::nullopt});
    };
}

}  // namespace prmix
