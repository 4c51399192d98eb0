#include "prmix/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "prmix/error.hpp"

namespace prmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool obs_less(const Observation& a, const Observation& b) {
    if (a.y != b.y) return a.y < b.y;
    return a.trials.value_or(0) < b.trials.value_or(0);
}

std::size_t factorial(std::size_t n) {
    std::size_t out = 1;
    for (std::size_t k = 2; k <= n; ++k) out *= k;
    return out;
}

struct SingleFit {
    std::vector<double> values;
    std::vector<double> log_predictive;
};

SingleFit run_order(std::span<const Observation> data, std::span<const std::size_t> order,
                    const Kernel& kernel, const MixingDensity& p0,
                    const WeightSchedule& schedule) {
    const auto& grid = p0.grid();
    SingleFit fit;
    fit.values.assign(p0.values().begin(), p0.values().end());
    fit.log_predictive.reserve(order.size());
    std::vector<double> scratch(grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t idx = order[i];
        const double lf = pr_update(kernel, grid, fit.values, data[idx], schedule(i + 1), scratch);
        if (lf == kNegInf) throw ZeroPredictiveError(idx);
        fit.log_predictive.push_back(lf);
    }
    return fit;
}

void validate(std::span<const Observation> data, const Kernel& kernel, const MixingGrid& grid) {
    if (data.empty()) throw Error(ErrorCode::shape, "PR needs at least one observation");
    kernel.check(grid);
    for (std::size_t i = 0; i < data.size(); ++i) kernel.check(data[i], i);
}

}  // namespace

WeightSchedule::WeightSchedule(double c, double gamma) : c_(c), gamma_(gamma) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw Error(ErrorCode::invalid_schedule, "weight schedule needs c > 0");
    }
    if (!(gamma > 0.5 && gamma <= 1.0)) {
        throw Error(ErrorCode::invalid_schedule,
                    "weight schedule needs gamma in (1/2, 1], got " + std::to_string(gamma));
    }
}

double WeightSchedule::operator()(std::size_t i) const {
    if (i == 0) throw Error(ErrorCode::invalid_schedule, "weights are indexed from 1");
    return std::pow(c_ + static_cast<double>(i), -gamma_);
}

double weight(const WeightSchedule& schedule, std::size_t i) { return schedule(i); }

double pr_update(const Kernel& kernel, const MixingGrid& grid, std::span<double> values,
                 const Observation& obs, double w, std::span<double> scratch) {
    const double top = kernel.scaled_row(obs, grid, scratch);
    if (top == kNegInf) return kNegInf;
    const auto nu = grid.weights();
    double scaled_f = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) scaled_f += scratch[j] * values[j] * nu[j];
    if (!(scaled_f > 0.0)) return kNegInf;
    const double keep = 1.0 - w;
    const double gain = w / scaled_f;
    for (std::size_t j = 0; j < values.size(); ++j) {
        values[j] *= keep + gain * scratch[j];
    }
    normalize_in_place(grid, values);
    return top + std::log(scaled_f);
}

MixingDensity pr_step(const MixingDensity& p_prev, const Observation& obs, const Kernel& kernel,
                      double w) {
    if (!(w > 0.0 && w < 1.0)) throw Error(ErrorCode::parameter, "PR weight must lie in (0, 1)");
    kernel.check(obs);
    std::vector<double> values(p_prev.values().begin(), p_prev.values().end());
    std::vector<double> scratch(values.size());
    if (pr_update(kernel, p_prev.grid(), values, obs, w, scratch) == kNegInf) {
        throw ZeroPredictiveError(0);
    }
    return normalize(p_prev.grid_ptr(), std::move(values));
}

double PRFit::log_likelihood() const {
    return std::accumulate(log_predictive.begin(), log_predictive.end(), 0.0);
}

PRFit pr_fit(std::span<const Observation> data, std::span<const std::size_t> order,
             const Kernel& kernel, const MixingDensity& p0, const WeightSchedule& schedule) {
    validate(data, kernel, p0.grid());
    SingleFit fit = run_order(data, order, kernel, p0, schedule);
    return PRFit{normalize(p0.grid_ptr(), std::move(fit.values)), kernel, schedule,
                 std::move(fit.log_predictive), 1, 0};
}

PRFit pr_fit(std::span<const Observation> data, const Kernel& kernel, const MixingDensity& p0,
             const WeightSchedule& schedule) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return pr_fit(data, order, kernel, p0, schedule);
}

std::vector<std::vector<std::size_t>> permutation_orders(std::span<const Observation> data,
                                                         std::size_t count, std::uint64_t seed) {
    if (count == 0) throw Error(ErrorCode::parameter, "need at least one permutation");
    const std::size_t n = data.size();
    std::vector<std::vector<std::size_t>> orders;

    if (n <= 5 && count >= factorial(n)) {
        // Canonical sorted order, then every distinct arrangement of the
        // multiset.  Equal observations are interchangeable, so this is the
        // full n! average with each arrangement counted once.
        std::vector<std::size_t> sorted(n);
        std::iota(sorted.begin(), sorted.end(), std::size_t{0});
        std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
            return obs_less(data[a], data[b]);
        });
        std::vector<Observation> values(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = data[sorted[i]];
        do {
            // Map each value back to a data index, using equal-valued
            // indices in sorted order.
            std::vector<std::size_t> order(n);
            std::vector<bool> used(n, false);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    const std::size_t idx = sorted[k];
                    if (!used[k] && !obs_less(values[i], data[idx]) &&
                        !obs_less(data[idx], values[i])) {
                        order[i] = idx;
                        used[k] = true;
                        break;
                    }
                }
            }
            orders.push_back(std::move(order));
        } while (std::next_permutation(values.begin(), values.end(), obs_less));
        return orders;
    }

    std::mt19937_64 rng(seed);
    orders.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
        orders.push_back(std::move(order));
    }
    return orders;
}

PRFit pr_fit_averaged(std::span<const Observation> data,
                      std::span<const std::vector<std::size_t>> orders, const Kernel& kernel,
                      const MixingDensity& p0, const WeightSchedule& schedule, std::size_t jobs) {
    if (orders.empty()) throw Error(ErrorCode::parameter, "need at least one permutation");
    validate(data, kernel, p0.grid());

    std::vector<SingleFit> fits(orders.size());
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, orders.size());
    if (workers == 1) {
        for (std::size_t k = 0; k < orders.size(); ++k) {
            fits[k] = run_order(data, orders[k], kernel, p0, schedule);
        }
    } else {
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < workers; ++t) {
                pool.emplace_back([&, t] {
                    try {
                        for (std::size_t k = t; k < orders.size(); k += workers) {
                            fits[k] = run_order(data, orders[k], kernel, p0, schedule);
                        }
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    // Reduction in permutation order keeps the result independent of jobs.
    const std::size_t m = p0.size();
    const std::size_t n = data.size();
    std::vector<double> values(m, 0.0);
    std::vector<double> log_pred(n, 0.0);
    for (const auto& fit : fits) {
        for (std::size_t j = 0; j < m; ++j) values[j] += fit.values[j];
        for (std::size_t i = 0; i < n; ++i) log_pred[i] += fit.log_predictive[i];
    }
    const double inv = 1.0 / static_cast<double>(fits.size());
    for (double& v : values) v *= inv;
    for (double& v : log_pred) v *= inv;
    return PRFit{normalize(p0.grid_ptr(), std::move(values)), kernel, schedule,
                 std::move(log_pred), fits.size(), 0};
}

PRFit pr_fit_averaged(std::span<const Observation> data, const Kernel& kernel,
                      const MixingDensity& p0, const WeightSchedule& schedule,
                      const AveragingOptions& options) {
    const auto orders = permutation_orders(data, options.permutations, options.seed);
    PRFit fit = pr_fit_averaged(data, orders, kernel, p0, schedule, options.jobs);
    fit.seed = options.seed;
    return fit;
}

YQuadrature YQuadrature::counts(std::size_t last) {
    YQuadrature q;
    q.nodes.resize(last + 1);
    std::iota(q.nodes.begin(), q.nodes.end(), 0.0);
    q.weights.assign(last + 1, 1.0);
    return q;
}

YQuadrature YQuadrature::counts_until(const DensityFn& f, double tail, std::size_t hard_limit) {
    double mass = 0.0;
    std::size_t y = 0;
    for (; y < hard_limit; ++y) {
        mass += f(static_cast<double>(y));
        if (mass >= 1.0 - tail) break;
    }
    return counts(y);
}

YQuadrature YQuadrature::trapezoid(double lower, double upper, std::size_t m) {
    if (!(lower < upper) || m < 2) {
        throw Error(ErrorCode::invalid_grid, "trapezoid quadrature needs lower < upper, m >= 2");
    }
    YQuadrature q;
    q.nodes.resize(m);
    q.weights.resize(m);
    const double h = (upper - lower) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        q.nodes[j] = lower + static_cast<double>(j) * h;
        q.weights[j] = (j == 0 || j + 1 == m) ? 0.5 * h : h;
    }
    return q;
}

double kl_divergence(const DensityFn& f_true, const DensityFn& f_est, const YQuadrature& quad) {
    double sum = 0.0;
    for (std::size_t j = 0; j < quad.nodes.size(); ++j) {
        const double ft = f_true(quad.nodes[j]);
        if (!(ft > 0.0)) continue;
        const double fe = f_est(quad.nodes[j]);
        if (!(fe > 0.0)) return std::numeric_limits<double>::infinity();
        sum += quad.weights[j] * ft * std::log(ft / fe);
    }
    return std::max(sum, 0.0);
}

}  // namespace prmix
