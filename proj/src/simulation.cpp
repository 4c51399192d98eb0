#include "prmix/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "prmix/error.hpp"

namespace prmix {
namespace {

SimScenario make_scenario(std::string name, std::string description, KernelFamily family,
                          std::vector<double> theta, MixingSpec truth, std::size_t n,
                          GridSpec grid, QuadratureRule rule = QuadratureRule::midpoint) {
    SimScenario s;
    s.name = std::move(name);
    s.description = std::move(description);
    s.family = family;
    s.fit_theta = theta;
    s.theta = std::move(theta);
    s.truth = std::move(truth);
    s.n = n;
    s.fit_grid = std::move(grid);
    s.fit_rule = rule;
    return s;
}

std::vector<SimScenario> build_registry() {
    std::vector<SimScenario> out;
    out.push_back(make_scenario("poisson-2atom", "0.5 Pois(1) + 0.5 Pois(5)",
                                KernelFamily::poisson, {}, {{1.0, 5.0}, {0.5, 0.5}, {}}, 2000,
                                {0.0, 25.0, 400, {}}));
    out.push_back(make_scenario("poisson-gamma", "Poisson rates from Gamma(3, 1)",
                                KernelFamily::poisson, {},
                                {{}, {}, ContinuousLatent{LatentShape::gamma, 3.0, 1.0, 1.0}},
                                2000, {0.0, 25.0, 400, {}}));
    out.push_back(make_scenario("gauss-pointmass", "N(0, 1): location mixing is a point mass",
                                KernelFamily::gaussian, {1.0}, {{0.0}, {1.0}, {}}, 1000,
                                {-4.0, 4.0, 200, {}}));
    out.push_back(make_scenario("gauss-bimodal", "0.5 N(-2, 1) + 0.5 N(2, 1)",
                                KernelFamily::gaussian, {1.0}, {{-2.0, 2.0}, {0.5, 0.5}, {}}, 500,
                                {-6.0, 6.0, 240, {}}));
    {
        auto s = make_scenario("gauss-misspecified",
                               "N(0, 0.5^2) data fitted with a sigma = 1 location mixture",
                               KernelFamily::gaussian, {0.5}, {{0.0}, {1.0}, {}}, 2000,
                               {-4.0, 4.0, 200, {}});
        s.fit_theta = {1.0};
        out.push_back(std::move(s));
    }
    out.push_back(make_scenario("twogroups", "0.9 N(0, 1) + 0.05 N(-3, 1) + 0.05 N(3, 1)",
                                KernelFamily::two_groups, {0.0, 3.0, 1.0},
                                {{-1.0, 0.0, 1.0}, {0.05, 0.9, 0.05}, {}}, 5000,
                                {-1.0, 1.0, 200, {0.0}}));
    out.push_back(make_scenario("twogroups-null", "all-null N(0, 1) z-scores",
                                KernelFamily::two_groups, {0.0, 3.0, 1.0}, {{0.0}, {1.0}, {}},
                                5000, {-1.0, 1.0, 200, {0.0}}));
    out.push_back(make_scenario("binomial-beta",
                                "success rates from Beta(2, 5), trials uniform on 1..50",
                                KernelFamily::binomial, {},
                                {{}, {}, ContinuousLatent{LatentShape::beta, 2.0, 5.0, 1.0}}, 500,
                                {0.0, 1.0, 200, {}}));
    out.push_back(make_scenario("scale-contaminated", "errors 0.9 N(0, 1) + 0.1 N(0, 10^2)",
                                KernelFamily::scale_mixture, {}, {{1.0, 10.0}, {0.9, 0.1}, {}},
                                1000, {0.1, 30.0, 200, {}}, QuadratureRule::log_midpoint));
    return out;
}

const std::vector<SimScenario>& registry() {
    static const std::vector<SimScenario> scenarios = build_registry();
    return scenarios;
}

double gamma_log_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double beta_log_pdf(double x, double a, double b) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
}

double draw_continuous(const ContinuousLatent& c, std::mt19937_64& rng) {
    switch (c.shape) {
        case LatentShape::uniform:
            return std::uniform_real_distribution<double>(c.a, c.b)(rng);
        case LatentShape::gamma:
            return std::gamma_distribution<double>(c.a, 1.0 / c.b)(rng);
        case LatentShape::beta: {
            const double x = std::gamma_distribution<double>(c.a, 1.0)(rng);
            const double y = std::gamma_distribution<double>(c.b, 1.0)(rng);
            return x / (x + y);
        }
    }
    return 0.0;
}

double draw_latent(const MixingSpec& spec, std::mt19937_64& rng) {
    double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (std::size_t a = 0; a < spec.atoms.size(); ++a) {
        if (r < spec.atom_weights[a]) return spec.atoms[a];
        r -= spec.atom_weights[a];
    }
    if (spec.continuous) return draw_continuous(*spec.continuous, rng);
    return spec.atoms.back();
}

double draw_observation(const SimScenario& s, double u, int trials, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    switch (s.family) {
        case KernelFamily::poisson:
            return static_cast<double>(std::poisson_distribution<long long>(u)(rng));
        case KernelFamily::gaussian:
            return u + s.theta[0] * z(rng);
        case KernelFamily::binomial:
            return static_cast<double>(std::binomial_distribution<int>(trials, u)(rng));
        case KernelFamily::scale_mixture:
            return u * z(rng);
        case KernelFamily::two_groups:
            return s.theta[0] + s.theta[1] * s.theta[2] * u + s.theta[2] * z(rng);
    }
    return 0.0;
}

}  // namespace

void MixingSpec::validate() const {
    if (atoms.size() != atom_weights.size()) {
        throw Error(ErrorCode::shape, "each atom needs one weight");
    }
    double total = continuous ? continuous->weight : 0.0;
    for (double w : atom_weights) {
        if (!(w >= 0.0)) throw Error(ErrorCode::parameter, "atom weights must be >= 0");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::parameter, "mixing weights must sum to 1");
    }
    if (continuous) {
        const auto& c = *continuous;
        const bool ok = c.shape == LatentShape::uniform ? c.a < c.b : (c.a > 0.0 && c.b > 0.0);
        if (!ok || !(c.weight >= 0.0)) {
            throw Error(ErrorCode::parameter, "invalid continuous mixing component");
        }
    }
    if (atoms.empty() && !continuous) throw Error(ErrorCode::parameter, "empty mixing spec");
}

std::vector<std::string_view> scenario_names() {
    std::vector<std::string_view> out;
    for (const auto& s : registry()) out.push_back(s.name);
    return out;
}

SimScenario find_scenario(std::string_view name) {
    for (const auto& s : registry()) {
        if (s.name == name) return s;
    }
    throw Error(ErrorCode::config, "unknown scenario '" + std::string(name) + "'");
}

std::vector<Observation> simulate(const SimScenario& scenario) {
    return simulate_labelled(scenario).data;
}

LabelledDraws simulate_labelled(const SimScenario& scenario) {
    if (scenario.n == 0) throw Error(ErrorCode::parameter, "scenario needs n >= 1");
    scenario.truth.validate();
    const Kernel kernel = scenario.data_kernel();
    if (scenario.family == KernelFamily::binomial &&
        !(1 <= scenario.min_trials && scenario.min_trials <= scenario.max_trials)) {
        throw Error(ErrorCode::parameter, "binomial scenario needs 1 <= min_trials <= max_trials");
    }
    std::mt19937_64 rng(scenario.seed);
    std::uniform_int_distribution<int> trials(scenario.min_trials, scenario.max_trials);
    LabelledDraws out;
    out.data.reserve(scenario.n);
    out.latent.reserve(scenario.n);
    for (std::size_t i = 0; i < scenario.n; ++i) {
        const double u = draw_latent(scenario.truth, rng);
        out.latent.push_back(u);
        Observation obs;
        int n_trials = 0;
        if (scenario.family == KernelFamily::binomial) {
            n_trials = trials(rng);
            obs.trials = n_trials;
        }
        obs.y = draw_observation(scenario, u, n_trials, rng);
        out.data.push_back(obs);
    }
    return out;
}

LatentLaw discretize(const MixingSpec& spec, std::size_t resolution) {
    spec.validate();
    LatentLaw law;
    law.nodes = spec.atoms;
    law.masses = spec.atom_weights;
    if (spec.continuous && spec.continuous->weight > 0.0) {
        const auto& c = *spec.continuous;
        double lo = c.a;
        double hi = c.b;
        if (c.shape == LatentShape::gamma) {
            lo = 0.0;
            hi = c.a / c.b + 15.0 * std::sqrt(c.a) / c.b;
        } else if (c.shape == LatentShape::beta) {
            lo = 0.0;
            hi = 1.0;
        }
        const double h = (hi - lo) / static_cast<double>(resolution);
        std::vector<double> mass(resolution);
        for (std::size_t j = 0; j < resolution; ++j) {
            const double u = lo + (static_cast<double>(j) + 0.5) * h;
            switch (c.shape) {
                case LatentShape::uniform: mass[j] = 1.0; break;
                case LatentShape::gamma: mass[j] = std::exp(gamma_log_pdf(u, c.a, c.b)); break;
                case LatentShape::beta: mass[j] = std::exp(beta_log_pdf(u, c.a, c.b)); break;
            }
            law.nodes.push_back(u);
        }
        const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
        for (double m : mass) law.masses.push_back(c.weight * m / total);
    }
    return law;
}

TrueMixture::TrueMixture(const SimScenario& scenario)
    : kernel_(scenario.data_kernel()), law_(discretize(scenario.truth)) {}

double TrueMixture::operator()(const Observation& obs) const {
    double s = 0.0;
    for (std::size_t j = 0; j < law_.nodes.size(); ++j) s += law_.masses[j] * kernel_(obs, law_.nodes[j]);
    return s;
}

double TrueMixture::mean() const {
    double m = 0.0;
    for (std::size_t j = 0; j < law_.nodes.size(); ++j) m += law_.masses[j] * law_.nodes[j];
    const auto theta = kernel_.theta();
    switch (kernel_.family()) {
        case KernelFamily::scale_mixture: return 0.0;
        case KernelFamily::two_groups: return theta[0] + theta[1] * theta[2] * m;
        default: return m;
    }
}

double TrueMixture::sd() const {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t j = 0; j < law_.nodes.size(); ++j) {
        m1 += law_.masses[j] * law_.nodes[j];
        m2 += law_.masses[j] * law_.nodes[j] * law_.nodes[j];
    }
    const double var_u = std::max(m2 - m1 * m1, 0.0);
    const auto theta = kernel_.theta();
    switch (kernel_.family()) {
        case KernelFamily::poisson: return std::sqrt(m1 + var_u);
        case KernelFamily::gaussian: return std::sqrt(theta[0] * theta[0] + var_u);
        case KernelFamily::scale_mixture: return std::sqrt(m2);
        case KernelFamily::two_groups: {
            const double s2 = theta[2] * theta[2];
            return std::sqrt(s2 + theta[1] * theta[1] * s2 * var_u);
        }
        case KernelFamily::binomial: return std::sqrt(var_u);
    }
    return 0.0;
}

DensityFn TrueMixture::evaluator() const {
    if (kernel_.family() == KernelFamily::binomial) {
        throw Error(ErrorCode::parameter, "binomial mixtures need a per-observation N");
    }
    return [self = *this](double y) { return self(Observation{y, std::nullopt}); };
}

YQuadrature kl_quadrature(const SimScenario& scenario) {
    const TrueMixture truth(scenario);
    if (scenario.family == KernelFamily::poisson) {
        return YQuadrature::counts_until(truth.evaluator(), 1e-10);
    }
    const double mu = truth.mean();
    const double sd = truth.sd();
    return YQuadrature::trapezoid(mu - 8.0 * sd, mu + 8.0 * sd, 1000);
}

EstimatorSpec default_estimator(const SimScenario& scenario) {
    EstimatorSpec e;
    e.family = scenario.family;
    e.theta = scenario.fit_theta;
    e.grid = scenario.fit_grid;
    e.rule = scenario.fit_rule;
    return e;
}

std::vector<CurvePoint> convergence_curve(const SimScenario& scenario,
                                          const EstimatorSpec& estimator,
                                          std::span<const std::size_t> checkpoints) {
    if (checkpoints.empty()) throw Error(ErrorCode::parameter, "need at least one checkpoint");
    for (std::size_t k = 1; k < checkpoints.size(); ++k) {
        if (checkpoints[k] <= checkpoints[k - 1]) {
            throw Error(ErrorCode::parameter, "checkpoints must be strictly increasing");
        }
    }
    SimScenario s = scenario;
    s.n = std::max<std::size_t>(checkpoints.back(), 1);
    const std::vector<Observation> data = simulate(s);
    const TrueMixture truth(s);
    const DensityFn f_true = truth.evaluator();
    const YQuadrature quad = kl_quadrature(s);

    const Kernel kernel = Kernel::make(estimator.family, estimator.theta);
    const GridPtr grid = build_grid(estimator.grid, estimator.rule);
    kernel.check(*grid);
    const MixingDensity p0 = MixingDensity::uniform(grid);
    std::vector<double> values(p0.values().begin(), p0.values().end());
    std::vector<double> scratch(grid->size());

    auto snapshot = [&](std::size_t n) {
        const MixingDensity p = normalize(grid, values);
        return CurvePoint{n, kl_divergence(f_true, mixture_evaluator(kernel, p), quad)};
    };

    std::vector<CurvePoint> out;
    std::size_t next = 0;
    if (checkpoints[0] == 0) out.push_back(snapshot(next++));
    for (std::size_t i = 0; i < checkpoints.back(); ++i) {
        kernel.check(data[i], i);
        const double lf = pr_update(kernel, *grid, values, data[i], estimator.schedule(i + 1),
                                    scratch);
        if (!std::isfinite(lf)) throw ZeroPredictiveError(i);
        if (next < checkpoints.size() && checkpoints[next] == i + 1) {
            out.push_back(snapshot(i + 1));
            ++next;
        }
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::shape, "median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size() / 2;
    return values.size() % 2 ? values[k] : 0.5 * (values[k - 1] + values[k]);
}

CurveSummary replicate_curves(const SimScenario& scenario, const EstimatorSpec& estimator,
                              std::span<const std::size_t> checkpoints,
                              std::size_t replications, std::size_t jobs) {
    if (replications == 0) throw Error(ErrorCode::parameter, "need at least one replication");
    std::vector<std::vector<CurvePoint>> curves(replications);
    std::vector<std::exception_ptr> failures(replications);
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t r = cursor++; r < replications; r = cursor++) {
            try {
                SimScenario s = scenario;
                s.seed = scenario.seed + r;
                curves[r] = convergence_curve(s, estimator, checkpoints);
            } catch (...) {
                failures[r] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, replications);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    CurveSummary out;
    for (const auto& p : curves.front()) out.n.push_back(p.n);
    out.replicate_kl.resize(replications);
    for (std::size_t r = 0; r < replications; ++r) {
        for (const auto& p : curves[r]) out.replicate_kl[r].push_back(p.kl);
    }
    for (std::size_t k = 0; k < out.n.size(); ++k) {
        std::vector<double> col(replications);
        for (std::size_t r = 0; r < replications; ++r) col[r] = out.replicate_kl[r][k];
        out.median_kl.push_back(median(std::move(col)));
    }
    return out;
}

double loglog_slope(std::span<const CurvePoint> points) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& p : points) {
        if (p.n > 0 && p.kl > 0.0 && std::isfinite(p.kl)) {
            x.push_back(std::log(static_cast<double>(p.n)));
            y.push_back(std::log(p.kl));
        }
    }
    if (x.size() < 2) throw Error(ErrorCode::shape, "slope needs two positive points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::shape, "slope needs distinct n values");
    return sxy / sxx;
}

RegressionBed simulate_regression(std::size_t n, std::span<const double> beta, double noise_sd,
                                  double outlier_fraction, double outlier_sd,
                                  std::uint64_t seed) {
    if (beta.empty()) throw Error(ErrorCode::shape, "beta needs at least one coefficient");
    if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
        throw Error(ErrorCode::parameter, "outlier fraction must lie in [0, 1]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> cov(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto d = static_cast<Eigen::Index>(beta.size());
    RegressionBed bed;
    bed.X.resize(static_cast<Eigen::Index>(n), d);
    bed.y.resize(static_cast<Eigen::Index>(n));
    bed.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), d);
    bed.outlier.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        bed.X(r, 0) = 1.0;
        for (Eigen::Index k = 1; k < d; ++k) bed.X(r, k) = cov(rng);
        const bool bad = unit(rng) < outlier_fraction;
        bed.outlier[i] = bad;
        bed.y(r) = bed.X.row(r).dot(bed.beta) + (bad ? outlier_sd : noise_sd) * z(rng);
    }
    return bed;
}

}  // namespace prmix
