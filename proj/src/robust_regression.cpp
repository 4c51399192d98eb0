#include "prmix/robust_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prmix/error.hpp"

namespace prmix {
namespace {

constexpr double kWeightFloor = 1e-12;
constexpr double kAscentSlack = 1e-8;
constexpr int kMaxHalvings = 12;

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
}

double mad_scale(const Eigen::VectorXd& r) {
    std::vector<double> v(r.data(), r.data() + r.size());
    const double center = median(v);
    for (double& x : v) x = std::abs(x - center);
    return 1.4826 * median(std::move(v));
}

struct ScaleFit {
    PRFit fit;
    double objective;
};

class ScaleObjective {
public:
    ScaleObjective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, MixingDensity p0,
                   WeightSchedule schedule, std::vector<std::vector<std::size_t>> orders)
        : X_(X), y_(y), p0_(std::move(p0)), schedule_(schedule), orders_(std::move(orders)),
          kernel_(Kernel::scale_mixture()) {}

    // Cold-start PR fit of the scale density on the residuals at beta.
    std::optional<ScaleFit> operator()(const Eigen::VectorXd& beta) const {
        const Eigen::VectorXd r = y_ - X_ * beta;
        const auto data = make_observations(std::span<const double>(r.data(), r.size()));
        try {
            PRFit fit = pr_fit_averaged(data, orders_, kernel_, p0_, schedule_);
            const double objective = fit.log_likelihood();
            return ScaleFit{std::move(fit), objective};
        } catch (const ZeroPredictiveError&) {
            return std::nullopt;
        }
    }

private:
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    MixingDensity p0_;
    WeightSchedule schedule_;
    std::vector<std::vector<std::size_t>> orders_;
    Kernel kernel_;
};

}  // namespace

ScaleWeights posterior_scale_weights(std::span<const double> residuals,
                                     const MixingDensity& scale_density) {
    const auto& grid = scale_density.grid();
    const Kernel kernel = Kernel::scale_mixture();
    kernel.check(grid);
    const auto nodes = grid.nodes();
    const auto nu = grid.weights();
    const auto p = scale_density.values();
    std::vector<double> row(grid.size());

    ScaleWeights out;
    out.weights.reserve(residuals.size());
    for (double eps : residuals) {
        if (!std::isfinite(eps)) throw Error(ErrorCode::domain, "residuals must be finite");
        kernel.scaled_row(Observation{eps, std::nullopt}, grid, row);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double mass = row[j] * p[j] * nu[j];
            den += mass;
            num += mass / (nodes[j] * nodes[j]);
        }
        if (!(num > 0.0) || !(den > 0.0)) {
            out.weights.push_back(kWeightFloor);
            ++out.floored;
        } else {
            out.weights.push_back(std::max(num / den, kWeightFloor));
        }
    }
    return out;
}

Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw Error(ErrorCode::shape, "X and y have different row counts");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols()) {
        throw Error(ErrorCode::design, "design matrix is rank deficient (rank " +
                                           std::to_string(qr.rank()) + " < " +
                                           std::to_string(X.cols()) + ")");
    }
    return qr.solve(y);
}

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w) {
    const Eigen::VectorXd root = w.cwiseSqrt();
    return ols(root.asDiagonal() * X, root.cwiseProduct(y));
}

Eigen::MatrixXd polynomial_design(std::span<const double> x, std::size_t degree, bool intercept) {
    const std::size_t first = intercept ? 0 : 1;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(x.size()),
                      static_cast<Eigen::Index>(degree + 1 - first));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t k = first; k <= degree; ++k) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k - first)) =
                std::pow(x[i], static_cast<double>(k));
        }
    }
    return X;
}

RegressionFit prem_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const RegressionOptions& options) {
    if (X.rows() != y.size()) throw Error(ErrorCode::shape, "X and y have different row counts");
    if (X.rows() <= X.cols()) {
        throw Error(ErrorCode::design, "regression needs more observations than coefficients");
    }
    if (!y.allFinite()) throw Error(ErrorCode::domain, "response contains non-finite values");
    if (!X.allFinite()) throw Error(ErrorCode::domain, "design contains non-finite values");

    Eigen::VectorXd beta = ols(X, y);

    GridPtr grid = options.scale_grid;
    if (!grid) {
        double s = mad_scale(y - X * beta);
        if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
        grid = build_grid(0.1 * s, 10.0 * s, 200, QuadratureRule::log_midpoint);
    }
    const MixingDensity p0 = MixingDensity::uniform(grid);

    const auto n = static_cast<std::size_t>(y.size());
    std::vector<std::vector<std::size_t>> orders;
    if (options.permutations <= 1) {
        orders.emplace_back(n);
        std::iota(orders.front().begin(), orders.front().end(), std::size_t{0});
    } else {
        const std::vector<Observation> placeholder(n, Observation{});
        orders = permutation_orders(placeholder, options.permutations, options.seed);
    }
    const ScaleObjective objective(X, y, p0, options.schedule, std::move(orders));

    auto current = objective(beta);
    if (!current) {
        throw Error(ErrorCode::zero_predictive, "residual at the OLS start has zero density");
    }
    std::vector<RegressionIteration> trace{{beta, current->objective}};
    bool converged = false;
    std::size_t iterations = 0;

    while (iterations < options.max_iterations) {
        ++iterations;
        const Eigen::VectorXd r = y - X * beta;
        const auto w = posterior_scale_weights(std::span<const double>(r.data(), r.size()),
                                               current->fit.density);
        const Eigen::VectorXd target =
            weighted_least_squares(X, y, Eigen::Map<const Eigen::VectorXd>(
                                             w.weights.data(), static_cast<Eigen::Index>(n)));

        // Accept the EM step, or a shortened one, only if it does not lower
        // the PR marginal likelihood.
        Eigen::VectorXd step = target - beta;
        std::optional<ScaleFit> accepted;
        Eigen::VectorXd candidate;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            candidate = beta + step;
            auto trial = objective(candidate);
            if (trial && trial->objective >= current->objective - kAscentSlack) {
                accepted = std::move(trial);
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            converged = step.lpNorm<Eigen::Infinity>() < options.tolerance;
            break;
        }
        const double change = (candidate - beta).lpNorm<Eigen::Infinity>();
        beta = candidate;
        current = std::move(accepted);
        trace.push_back({beta, current->objective});
        if (change < options.tolerance) {
            converged = true;
            break;
        }
    }

    const Eigen::VectorXd r = y - X * beta;
    const auto w = posterior_scale_weights(std::span<const double>(r.data(), r.size()),
                                           current->fit.density);
    Eigen::VectorXd weights =
        Eigen::Map<const Eigen::VectorXd>(w.weights.data(), static_cast<Eigen::Index>(n));
    return RegressionFit{std::move(beta), current->fit.density, std::move(weights),
                         std::move(trace), converged, iterations};
}

}  // namespace prmix
