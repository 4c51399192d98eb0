#include "prmix/fredholm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "prmix/error.hpp"
#include "prmix/normal.hpp"

namespace prmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Kernel rows for distinct observations, each scaled by its maximum.
struct KernelTable {
    std::vector<std::vector<double>> rows;
    std::vector<double> log_top;
    std::vector<double> counts;
    std::vector<std::size_t> first_index;  // an original index for error messages
    double total = 0.0;
};

KernelTable tabulate(std::span<const Observation> data, const Kernel& kernel,
                     const MixingGrid& grid) {
    kernel.check(grid);
    std::map<std::pair<double, int>, std::size_t> slot;
    KernelTable table;
    for (std::size_t i = 0; i < data.size(); ++i) {
        kernel.check(data[i], i);
        const auto key = std::make_pair(data[i].y, data[i].trials.value_or(0));
        auto [it, inserted] = slot.emplace(key, table.rows.size());
        if (inserted) {
            std::vector<double> row(grid.size());
            table.log_top.push_back(kernel.scaled_row(data[i], grid, row));
            table.rows.push_back(std::move(row));
            table.counts.push_back(0.0);
            table.first_index.push_back(i);
        }
        table.counts[it->second] += 1.0;
    }
    table.total = static_cast<double>(data.size());
    return table;
}

// Scaled mixture values f_i / exp(log_top_i); throws on a zero entry.
std::vector<double> scaled_mixture(const KernelTable& table, const MixingDensity& p) {
    const auto nu = p.grid().weights();
    const auto v = p.values();
    std::vector<double> f(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        double s = 0.0;
        const auto& row = table.rows[i];
        for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * v[j] * nu[j];
        if (!(s > 0.0) || table.log_top[i] == kNegInf) {
            throw Error(ErrorCode::zero_predictive,
                        "mixture density is zero at observation " +
                            std::to_string(table.first_index[i]),
                        table.first_index[i]);
        }
        f[i] = s;
    }
    return f;
}

std::vector<double> gradient_from(const KernelTable& table, std::span<const double> f,
                                  std::size_t m) {
    std::vector<double> g(m, 0.0);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const double coef = table.counts[i] / (table.total * f[i]);
        const auto& row = table.rows[i];
        for (std::size_t j = 0; j < m; ++j) g[j] += coef * row[j];
    }
    return g;
}

double log_likelihood_from(const KernelTable& table, std::span<const double> f) {
    double ll = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        ll += table.counts[i] * (table.log_top[i] + std::log(f[i]));
    }
    return ll;
}

std::vector<double> quadrature_multiplier(const MixingDensity& p, const Kernel& kernel,
                                          const DensityFn& f, const YQuadrature& quad) {
    const auto& grid = p.grid();
    kernel.check(grid);
    const auto nu = grid.weights();
    const auto v = p.values();
    std::vector<double> mult(grid.size(), 0.0);
    std::vector<double> row(grid.size());
    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
        const double target = f(quad.nodes[q]);
        if (!(target > 0.0)) continue;
        const double top = kernel.scaled_row(Observation{quad.nodes[q], std::nullopt}, grid, row);
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * v[j] * nu[j];
        if (top == kNegInf || !(s > 0.0)) {
            throw Error(ErrorCode::zero_predictive,
                        "mixture density is zero at y = " + std::to_string(quad.nodes[q]));
        }
        const double coef = quad.weights[q] * target / s;
        for (std::size_t j = 0; j < row.size(); ++j) mult[j] += coef * row[j];
    }
    return mult;
}

}  // namespace

MixingDensity fredholm_step(const MixingDensity& p_prev, const Kernel& kernel,
                            const FredholmTarget& target) {
    std::vector<double> mult;
    if (const auto* known = std::get_if<KnownMixtureTarget>(&target)) {
        mult = quadrature_multiplier(p_prev, kernel, known->density, known->quadrature);
    } else if (const auto* plug = std::get_if<PlugInTarget>(&target)) {
        mult = quadrature_multiplier(p_prev, kernel, plug->estimate, plug->quadrature);
    } else {
        const auto& empirical = std::get<EmpiricalTarget>(target);
        if (empirical.data.empty()) {
            throw Error(ErrorCode::shape, "empirical target needs at least one observation");
        }
        const KernelTable table = tabulate(empirical.data, kernel, p_prev.grid());
        mult = gradient_from(table, scaled_mixture(table, p_prev), p_prev.size());
    }
    std::vector<double> values(p_prev.values().begin(), p_prev.values().end());
    for (std::size_t j = 0; j < values.size(); ++j) values[j] *= mult[j];
    return normalize(p_prev.grid_ptr(), std::move(values));
}

FredholmState npmle_fit(std::span<const Observation> data, const Kernel& kernel,
                        const MixingDensity& p0, const NpmleOptions& options) {
    if (data.empty()) throw Error(ErrorCode::shape, "NPMLE needs at least one observation");
    if (!(options.tolerance > 0.0)) throw Error(ErrorCode::parameter, "tolerance must be > 0");
    const KernelTable table = tabulate(data, kernel, p0.grid());
    const std::size_t m = p0.size();

    MixingDensity p = p0;
    std::vector<double> f = scaled_mixture(table, p);
    std::vector<double> lls{log_likelihood_from(table, f)};
    std::size_t t = 0;
    bool converged = false;
    while (t < options.max_iterations) {
        const std::vector<double> g = gradient_from(table, f, m);
        std::vector<double> next(p.values().begin(), p.values().end());
        double change = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            next[j] *= g[j];
        }
        MixingDensity updated = normalize(p.grid_ptr(), std::move(next));
        for (std::size_t j = 0; j < m; ++j) change = std::max(change, std::abs(updated[j] - p[j]));
        p = std::move(updated);
        ++t;
        f = scaled_mixture(table, p);
        lls.push_back(log_likelihood_from(table, f));
        if (change < options.tolerance) {
            converged = true;
            break;
        }
    }
    std::vector<double> gradient = gradient_from(table, f, m);
    const double sup = *std::max_element(gradient.begin(), gradient.end());
    return FredholmState{std::move(p), t, sup, converged, std::move(gradient), std::move(lls)};
}

std::vector<double> npmle_gradient(std::span<const Observation> data, const Kernel& kernel,
                                   const MixingDensity& p) {
    const KernelTable table = tabulate(data, kernel, p.grid());
    return gradient_from(table, scaled_mixture(table, p), p.size());
}

double mixture_log_likelihood(std::span<const Observation> data, const Kernel& kernel,
                              const MixingDensity& p) {
    double ll = 0.0;
    for (const auto& obs : data) ll += log_mixture_density(kernel, p, obs);
    return ll;
}

DensityFn gaussian_kde(std::span<const double> sample, double bandwidth) {
    if (sample.size() < 2) throw Error(ErrorCode::shape, "kernel density estimate needs n >= 2");
    std::vector<double> xs(sample.begin(), sample.end());
    if (!(bandwidth > 0.0)) {
        const double n = static_cast<double>(xs.size());
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / (n - 1.0));
        std::vector<double> sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        auto quantile = [&](double q) {
            const double pos = q * (n - 1.0);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
            return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
        };
        const double iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
        double spread = iqr > 0.0 ? std::min(sd, iqr) : sd;
        if (!(spread > 0.0)) spread = 1.0;
        bandwidth = 0.9 * spread * std::pow(n, -0.2);
    }
    return [xs = std::move(xs), h = bandwidth](double y) {
        double s = 0.0;
        for (double x : xs) s += normal_pdf(y, x, h);
        return s / static_cast<double>(xs.size());
    };
}

}  // namespace prmix
