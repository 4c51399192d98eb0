#include "prmix/copula_predictive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prmix/error.hpp"
#include "prmix/normal.hpp"

namespace prmix {
namespace {

constexpr double kCdfClamp = 1e-12;
constexpr double kUnitMassSlack = 1e-13;

double clamp_unit(double v, std::size_t& clamped) {
    if (v < kCdfClamp) {
        ++clamped;
        return kCdfClamp;
    }
    if (v > 1.0 - kCdfClamp) {
        ++clamped;
        return 1.0 - kCdfClamp;
    }
    return v;
}

double trapezoid_mass(std::span<const double> f, double h) {
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) s += 0.5 * h * (f[j] + f[j + 1]);
    return s;
}

// Normalises density in place and rebuilds the running CDF.  Returns the
// mass before normalisation.
double finalize(PredictiveState& state) {
    const double h = state.spacing();
    const double mass = trapezoid_mass(state.density, h);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw Error(ErrorCode::degenerate_density, "predictive density has no mass");
    }
    if (std::abs(mass - 1.0) > kUnitMassSlack) {
        for (double& v : state.density) v /= mass;
    }
    state.cdf.assign(state.density.size(), 0.0);
    for (std::size_t j = 1; j < state.density.size(); ++j) {
        state.cdf[j] = state.cdf[j - 1] + 0.5 * h * (state.density[j - 1] + state.density[j]);
    }
    return mass;
}

}  // namespace

double gaussian_copula_density(double a, double b, double rho) {
    if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::parameter, "copula needs |rho| < 1");
    std::size_t ignored = 0;
    const double x = normal_quantile(clamp_unit(a, ignored));
    const double z = normal_quantile(clamp_unit(b, ignored));
    const double r2 = rho * rho;
    const double one_minus = 1.0 - r2;
    return std::exp(-(r2 * (x * x + z * z) - 2.0 * rho * x * z) / (2.0 * one_minus)) /
           std::sqrt(one_minus);
}

double PredictiveState::density_at(double x) const {
    if (x < y.front() || x > y.back()) return 0.0;
    const double h = spacing();
    auto j = static_cast<std::size_t>((x - y.front()) / h);
    j = std::min(j, y.size() - 2);
    const double t = (x - y[j]) / h;
    return (1.0 - t) * density[j] + t * density[j + 1];
}

double PredictiveState::cdf_at(double x) const {
    if (x <= y.front()) return 0.0;
    if (x >= y.back()) return cdf.back();
    const double h = spacing();
    auto j = static_cast<std::size_t>((x - y.front()) / h);
    j = std::min(j, y.size() - 2);
    const double t = x - y[j];
    return cdf[j] + t * density[j] + t * t / (2.0 * h) * (density[j + 1] - density[j]);
}

DensityFn PredictiveState::evaluator() const {
    return [state = *this](double x) { return state.density_at(x); };
}

PredictiveState make_predictive_state(double lower, double upper, std::size_t m,
                                      const DensityFn& f0, double rho,
                                      const WeightSchedule& schedule) {
    if (!(lower < upper) || m < 3) {
        throw Error(ErrorCode::invalid_grid, "predictive grid needs lower < upper and m >= 3");
    }
    if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::parameter, "copula needs |rho| < 1");
    PredictiveState state;
    state.y.resize(m);
    state.density.resize(m);
    const double h = (upper - lower) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        state.y[j] = lower + static_cast<double>(j) * h;
        const double v = f0(state.y[j]);
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::degenerate_density, "initial density must be finite and >= 0");
        }
        state.density[j] = v;
    }
    state.rho = rho;
    state.schedule = schedule;
    finalize(state);
    state.raw_mass = 1.0;
    return state;
}

YGridRange auto_ygrid_range(std::span<const double> data) {
    if (data.empty()) throw Error(ErrorCode::shape, "cannot size a y grid without data");
    std::vector<double> v(data.begin(), data.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    auto med = [](const std::vector<double>& s) {
        const std::size_t k = s.size() / 2;
        return s.size() % 2 ? s[k] : 0.5 * (s[k - 1] + s[k]);
    };
    const double center = med(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - center);
    std::sort(dev.begin(), dev.end());
    double sd = 1.4826 * med(dev);
    if (!(sd > 0.0)) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    if (!(sd > 0.0)) sd = 1.0;
    return YGridRange{v.front() - 4.0 * sd, v.back() + 4.0 * sd};
}

PredictiveState copula_update(const PredictiveState& state, double y_new) {
    const double lo = state.y.front();
    const double hi = state.y.back();
    const double span = hi - lo;
    if (!std::isfinite(y_new) || y_new < lo - span || y_new > hi + span) {
        throw Error(ErrorCode::range, "observation " + std::to_string(y_new) +
                                          " lies too far outside the y grid");
    }
    const double y = std::clamp(y_new, lo, hi);

    PredictiveState next = state;
    const double w = state.schedule(state.n + 1);
    const double rho = state.rho;
    const double r2 = rho * rho;
    const double one_minus = 1.0 - r2;
    const double norm = 1.0 / std::sqrt(one_minus);
    const double z = normal_quantile(clamp_unit(state.cdf_at(y), next.clamped));
    for (std::size_t j = 0; j < state.y.size(); ++j) {
        const double x = normal_quantile(clamp_unit(state.cdf[j], next.clamped));
        const double g =
            norm * std::exp(-(r2 * (x * x + z * z) - 2.0 * rho * x * z) / (2.0 * one_minus));
        next.density[j] = (1.0 - w) * state.density[j] + w * g * state.density[j];
    }
    next.raw_mass = finalize(next);
    next.n = state.n + 1;
    return next;
}

PredictiveState copula_fit(const PredictiveState& initial, std::span<const double> data) {
    PredictiveState state = initial;
    for (double y : data) state = copula_update(state, y);
    return state;
}

PredictiveState copula_fit_averaged(const PredictiveState& initial, std::span<const double> data,
                                    std::size_t permutations, std::uint64_t seed) {
    if (data.empty()) return initial;
    const auto obs = make_observations(data);
    const auto orders = permutation_orders(obs, permutations, seed);
    PredictiveState out = initial;
    std::fill(out.density.begin(), out.density.end(), 0.0);
    std::vector<double> permuted(data.size());
    for (const auto& order : orders) {
        for (std::size_t i = 0; i < order.size(); ++i) permuted[i] = data[order[i]];
        const PredictiveState fit = copula_fit(initial, permuted);
        for (std::size_t j = 0; j < out.density.size(); ++j) out.density[j] += fit.density[j];
        out.clamped += fit.clamped;
    }
    for (double& v : out.density) v /= static_cast<double>(orders.size());
    out.n = initial.n + data.size();
    out.raw_mass = finalize(out);
    return out;
}

}  // namespace prmix
