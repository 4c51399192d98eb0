#include "prmix/two_groups.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "prmix/error.hpp"
#include "prmix/normal.hpp"

namespace prmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Outward scan from mu for the first abscissa where fdr <= cutoff, refined
// by bisection.  direction is +1 or -1.
std::optional<double> threshold(const TwoGroupsFit& fit, double cutoff, double direction) {
    const double step = 0.01 * fit.sigma_hat;
    const double reach = (fit.tau_hat + 10.0) * fit.sigma_hat;
    double inside = fit.mu_hat;
    if (local_fdr(fit, inside).value <= cutoff) return inside;
    for (double d = step; d <= reach; d += step) {
        const double y = fit.mu_hat + direction * d;
        if (local_fdr(fit, y).value <= cutoff) {
            double a = inside;
            double b = y;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (a + b);
                if (local_fdr(fit, mid).value <= cutoff) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return b;
        }
        inside = y;
    }
    return std::nullopt;
}

}  // namespace

double TwoGroupsFit::log_marginal(double y) const {
    return log_mixture_density(kernel(), mixing, Observation{y, std::nullopt});
}

double TwoGroupsFit::marginal(double y) const { return std::exp(log_marginal(y)); }

double TwoGroupsFit::null_part(double y) const {
    return pi_hat * normal_pdf(y, mu_hat, sigma_hat);
}

double TwoGroupsFit::nonnull_part(double y) const {
    return std::max(0.0, marginal(y) - null_part(y));
}

GridPtr twogroups_grid(std::size_t continuous_nodes) {
    return build_grid(-1.0, 1.0, continuous_nodes, QuadratureRule::midpoint, {0.0});
}

TwoGroupsFit make_twogroups_fit(double mu, double tau, double sigma, const MixingDensity& mixing,
                                double pi_cap) {
    const auto& grid = mixing.grid();
    const auto atoms = grid.atom_indices();
    if (atoms.size() != 1 || grid.node(atoms.front()) != 0.0) {
        throw Error(ErrorCode::invalid_grid, "two-groups fit needs a single atom at 0");
    }
    const std::size_t atom = atoms.front();

    std::vector<double> values(mixing.values().begin(), mixing.values().end());
    double continuous_mass = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (j != atom) continuous_mass += values[j] * grid.weight(j);
    }
    double pi = values[atom] * grid.weight(atom);
    if (pi > pi_cap || !(continuous_mass > 0.0)) {
        pi = std::min(pi, pi_cap);
        if (!(continuous_mass > 0.0)) {
            // Nothing left to rescale; spread the remainder uniformly.
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (j != atom) values[j] = 1.0;
            }
            continuous_mass = grid.total_measure() - grid.weight(atom);
        }
        const double scale = (1.0 - pi) / continuous_mass;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (j != atom) values[j] *= scale;
        }
        values[atom] = pi / grid.weight(atom);
    }
    MixingDensity capped = normalize(mixing.grid_ptr(), values);
    pi = capped.mass(atom);

    std::vector<double> p1;
    p1.reserve(values.size() - 1);
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (j != atom) p1.push_back(capped[j]);
    }
    if (std::all_of(p1.begin(), p1.end(), [](double v) { return v == 0.0; })) {
        std::fill(p1.begin(), p1.end(), 1.0);
    }
    auto cont_grid = build_grid(grid.lower(), grid.upper(), grid.continuous_size(), grid.rule());
    MixingDensity nonnull = normalize(std::move(cont_grid), std::move(p1));

    return TwoGroupsFit{pi, mu, tau, sigma, std::move(capped), std::move(nonnull), atom, 0.0, {}};
}

TwoGroupsFit twogroups_fit(std::span<const double> z, const TwoGroupsOptions& options) {
    if (z.size() < 10) {
        throw Error(ErrorCode::shape, "two-groups fit needs at least 10 z-scores");
    }
    if (!(options.initial_null_mass > 0.0 && options.initial_null_mass < 1.0)) {
        throw Error(ErrorCode::parameter, "initial null mass must lie in (0, 1)");
    }
    auto grid = twogroups_grid(options.grid_nodes);
    std::vector<double> start(grid->size());
    const double spread = (1.0 - options.initial_null_mass) / 2.0;
    for (std::size_t j = 0; j < grid->size(); ++j) {
        start[j] = grid->is_atom(j) ? options.initial_null_mass : spread;
    }
    const MixingDensity p0 = normalize(grid, std::move(start));
    const auto data = make_observations(z);

    PrmlResult best = prml_optimize(data, KernelFamily::two_groups, options.box, p0,
                                    options.schedule, options.optimizer);
    TwoGroupsFit fit = make_twogroups_fit(best.theta_hat[0], best.theta_hat[1],
                                          best.theta_hat[2], best.fit.density, options.pi_cap);
    fit.log_likelihood = best.log_likelihood;
    fit.trace = std::move(best.trace);
    return fit;
}

FdrValue local_fdr(const TwoGroupsFit& fit, double y) {
    const double log_total = fit.log_marginal(y);
    if (log_total == kNegInf || std::isnan(log_total)) return FdrValue{1.0, true};
    const double log_null = std::log(fit.pi_hat) + normal_log_pdf(y, fit.mu_hat, fit.sigma_hat);
    return FdrValue{std::clamp(std::exp(log_null - log_total), 0.0, 1.0), false};
}

double local_fdr(double pi, double null_density, double nonnull_density) {
    const double null_part = pi * null_density;
    const double total = null_part + (1.0 - pi) * nonnull_density;
    if (!(total > 0.0)) return 1.0;
    return std::clamp(null_part / total, 0.0, 1.0);
}

FdrDecisions fdr_test(const TwoGroupsFit& fit, std::span<const double> z, double cutoff) {
    if (!(cutoff > 0.0 && cutoff < 1.0)) {
        throw Error(ErrorCode::parameter, "fdr cutoff must lie in (0, 1)");
    }
    FdrDecisions out;
    out.cutoff = cutoff;
    out.fdr.reserve(z.size());
    out.reject.reserve(z.size());
    for (double y : z) {
        const double f = local_fdr(fit, y).value;
        const bool reject = f <= cutoff;
        out.fdr.push_back(f);
        out.reject.push_back(reject);
        if (reject) {
            ++out.rejections;
            if (y > fit.mu_hat) ++out.up;
            if (y < fit.mu_hat) ++out.down;
        }
    }
    out.lower_threshold = threshold(fit, cutoff, -1.0);
    out.upper_threshold = threshold(fit, cutoff, +1.0);
    return out;
}

std::vector<FdrCurveRow> fdr_curve(const TwoGroupsFit& fit, double lower, double upper,
                                   std::size_t m) {
    if (!(lower < upper) || m < 2) {
        throw Error(ErrorCode::parameter, "fdr curve needs lower < upper and m >= 2");
    }
    std::vector<FdrCurveRow> rows;
    rows.reserve(m);
    const double h = (upper - lower) / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
        const double y = lower + static_cast<double>(i) * h;
        const double f = fit.marginal(y);
        const double null_part = fit.null_part(y);
        rows.push_back(FdrCurveRow{y, f, null_part, std::max(0.0, f - null_part),
                                   local_fdr(fit, y).value});
    }
    return rows;
}

}  // namespace prmix
