#include "prmix/semiparametric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prmix/error.hpp"

namespace prmix {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInvPhi = 0.6180339887498949;  // (sqrt(5) - 1) / 2

class Objective {
public:
    Objective(std::span<const Observation> data, KernelFamily family, const MixingDensity& p0,
              const WeightSchedule& schedule, std::span<const std::vector<std::size_t>> orders,
              std::size_t jobs, std::size_t budget)
        : data_(data), family_(family), p0_(p0), schedule_(schedule), orders_(orders),
          jobs_(jobs), budget_(budget) {}

    double operator()(const std::vector<double>& theta) {
        const PrmlValue v = prml_loglik(data_, family_, theta, p0_, schedule_, orders_, jobs_);
        if (trace_.empty() || v.value > best_value_) {
            best_value_ = v.value;
            best_theta_ = theta;
        }
        trace_.push_back(PrmlTraceEntry{theta, v.value, best_value_});
        return v.value;
    }

    bool exhausted() const { return trace_.size() >= budget_; }
    double best_value() const { return best_value_; }
    const std::vector<double>& best_theta() const { return best_theta_; }
    std::vector<PrmlTraceEntry> take_trace() { return std::move(trace_); }

private:
    std::span<const Observation> data_;
    KernelFamily family_;
    const MixingDensity& p0_;
    const WeightSchedule& schedule_;
    std::span<const std::vector<std::size_t>> orders_;
    std::size_t jobs_;
    std::size_t budget_;
    std::vector<PrmlTraceEntry> trace_;
    double best_value_ = kNegInf;
    std::vector<double> best_theta_;
};

// Golden-section search for a maximum of coordinate k on [lo, hi].
void golden_section(Objective& objective, std::vector<double> theta, std::size_t k, double lo,
                    double hi, double tolerance) {
    auto eval_at = [&](double x) {
        theta[k] = x;
        return objective(theta);
    };
    double a = lo;
    double b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = eval_at(x1);
    if (objective.exhausted()) return;
    double f2 = eval_at(x2);
    while (b - a > tolerance && !objective.exhausted()) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = eval_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = eval_at(x2);
        }
    }
}

}  // namespace

bool ThetaBox::contains(std::span<const double> theta) const {
    if (theta.size() != size()) return false;
    for (std::size_t k = 0; k < size(); ++k) {
        if (theta[k] < lower[k] || theta[k] > upper[k]) return false;
    }
    return true;
}

void ThetaBox::validate() const {
    if (lower.size() != upper.size()) {
        throw Error(ErrorCode::parameter, "theta box bounds differ in length");
    }
    for (std::size_t k = 0; k < size(); ++k) {
        if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) || lower[k] > upper[k]) {
            throw Error(ErrorCode::parameter,
                        "theta box coordinate " + std::to_string(k) + " needs lower <= upper");
        }
    }
}

PrmlValue prml_loglik(std::span<const Observation> data, KernelFamily family,
                      std::span<const double> theta, const MixingDensity& p0,
                      const WeightSchedule& schedule) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::vector<std::vector<std::size_t>> orders{std::move(order)};
    return prml_loglik(data, family, theta, p0, schedule, orders);
}

PrmlValue prml_loglik(std::span<const Observation> data, KernelFamily family,
                      std::span<const double> theta, const MixingDensity& p0,
                      const WeightSchedule& schedule,
                      std::span<const std::vector<std::size_t>> orders, std::size_t jobs) {
    const Kernel kernel = Kernel::make(family, theta);
    try {
        const PRFit fit = pr_fit_averaged(data, orders, kernel, p0, schedule, jobs);
        return PrmlValue{fit.log_likelihood(), std::nullopt};
    } catch (const ZeroPredictiveError& e) {
        return PrmlValue{kNegInf, e.index()};
    }
}

PrmlResult prml_optimize(std::span<const Observation> data, KernelFamily family,
                         const ThetaBox& box, const MixingDensity& p0,
                         const WeightSchedule& schedule, const PrmlOptions& options) {
    box.validate();
    if (box.size() != theta_size(family)) {
        throw Error(ErrorCode::parameter, "theta box has the wrong dimension for this kernel");
    }
    if (options.max_evaluations == 0) {
        throw Error(ErrorCode::parameter, "optimizer budget must be positive");
    }
    const auto orders = permutation_orders(data, options.permutations, options.seed);
    Objective objective(data, family, p0, schedule, orders, options.jobs,
                        options.max_evaluations);

    std::vector<std::size_t> free;
    std::vector<double> theta(box.size());
    for (std::size_t k = 0; k < box.size(); ++k) {
        theta[k] = 0.5 * (box.lower[k] + box.upper[k]);
        if (!box.is_fixed(k)) free.push_back(k);
    }

    if (free.empty()) {
        objective(box.lower);
    } else {
        const std::size_t points = std::max<std::size_t>(options.scan_points, 2);
        std::vector<double> step(box.size(), 0.0);
        for (std::size_t k : free) {
            step[k] = (box.upper[k] - box.lower[k]) / static_cast<double>(points - 1);
            std::vector<double> probe = theta;
            for (std::size_t s = 0; s < points && !objective.exhausted(); ++s) {
                probe[k] = s + 1 == points ? box.upper[k]
                                           : box.lower[k] + static_cast<double>(s) * step[k];
                objective(probe);
            }
            theta = objective.best_theta();
        }
        if (!std::isfinite(objective.best_value())) {
            throw Error(ErrorCode::optimization_failure,
                        "PR marginal likelihood is -inf over the whole initial scan");
        }

        const std::size_t cycles = free.size() == 1 ? 1 : options.max_cycles;
        for (std::size_t cycle = 0; cycle < cycles && !objective.exhausted(); ++cycle) {
            for (std::size_t k : free) {
                if (objective.exhausted()) break;
                theta = objective.best_theta();
                const double half = step[k] / static_cast<double>(1u << cycle);
                const double lo = std::max(box.lower[k], theta[k] - half);
                const double hi = std::min(box.upper[k], theta[k] + half);
                if (hi - lo > options.tolerance) {
                    golden_section(objective, theta, k, lo, hi, options.tolerance);
                }
            }
        }
    }

    if (!std::isfinite(objective.best_value())) {
        throw Error(ErrorCode::optimization_failure,
                    "PR marginal likelihood is -inf at every evaluated theta");
    }
    std::vector<double> theta_hat = objective.best_theta();
    const Kernel kernel = Kernel::make(family, theta_hat);
    PRFit fit = pr_fit_averaged(data, orders, kernel, p0, schedule, options.jobs);
    fit.seed = options.seed;
    return PrmlResult{std::move(theta_hat), objective.best_value(), std::move(fit),
                      objective.take_trace()};
}

}  // namespace prmix
