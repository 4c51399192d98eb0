#include <cmath>
#include <numeric>
#include <vector>

#include "prmix/fredholm.hpp"
#include "prmix/simulation.hpp"
#include "support.hpp"

using namespace prmix;

namespace {

GridPtr atoms(std::vector<double> u) {
    return std::make_shared<const MixingGrid>(MixingGrid::discrete(std::move(u)));
}

double pois(double y, double u) { return std::exp(y * std::log(u) - u - std::lgamma(y + 1.0)); }

}  // namespace

TEST_CASE("known-mixture step against a truncated sum") {
    const MixingDensity prev(atoms({1.0, 2.0}), {0.8, 0.2});
    const DensityFn truth = [](double y) { return 0.5 * pois(y, 1.0) + 0.5 * pois(y, 2.0); };
    const MixingDensity next =
        fredholm_step(prev, Kernel::poisson(), KnownMixtureTarget{truth, YQuadrature::counts(100)});
    double a = 0.0;
    double b = 0.0;
    for (int y = 0; y <= 100; ++y) {
        const double fp = 0.8 * pois(y, 1.0) + 0.2 * pois(y, 2.0);
        a += pois(y, 1.0) * truth(y) / fp;
        b += pois(y, 2.0) * truth(y) / fp;
    }
    const double na = 0.8 * a;
    const double nb = 0.2 * b;
    CHECK(std::abs(next[0] - na / (na + nb)) < 1e-10);
    CHECK(std::abs(next[1] - nb / (na + nb)) < 1e-10);
}

TEST_CASE("fixed point and single-observation step") {
    const MixingDensity p(atoms({1.0, 2.0, 4.0}), {0.5, 0.3, 0.2});
    const DensityFn fp = mixture_evaluator(Kernel::poisson(), p);
    const MixingDensity same =
        fredholm_step(p, Kernel::poisson(), KnownMixtureTarget{fp, YQuadrature::counts(120)});
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(same[j] - p[j]) < 1e-10);

    const std::vector<Observation> one{{3.0, std::nullopt}};
    const MixingDensity bayes = fredholm_step(p, Kernel::poisson(), EmpiricalTarget{one});
    const double f = mixture_density(Kernel::poisson(), p, one[0]);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(bayes[j] == doctest::Approx(pois(3.0, p.grid().node(j)) * p[j] / f).epsilon(1e-12));
    }

    const DensityFn plug = [&](double y) { return fp(y); };
    const MixingDensity via_plug =
        fredholm_step(p, Kernel::poisson(), PlugInTarget{plug, YQuadrature::counts(120)});
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(via_plug[j] - p[j]) < 1e-10);
}

TEST_CASE("zero mixture density") {
    const MixingDensity p(atoms({0.0}), {1.0});
    const std::vector<Observation> data{{1.0, 1}};
    CHECK_ERROR_CODE(fredholm_step(p, Kernel::binomial(), EmpiricalTarget{data}), ErrorCode::zero_predictive);
    CHECK_ERROR_CODE(fredholm_step(p, Kernel::binomial(), EmpiricalTarget{{}}), ErrorCode::shape);
}

TEST_CASE("NPMLE iteration") {
    SimScenario s = find_scenario("poisson-2atom");
    s.n = 300;
    s.seed = 8;
    const auto data = simulate(s);
    const auto g = build_grid(0.0, 25.0, 100);
    const FredholmState st = npmle_fit(data, Kernel::poisson(), MixingDensity::uniform(g),
                                       NpmleOptions{1e-9, 3000});
    CHECK(st.log_likelihood.size() == st.iterations + 1);
    for (std::size_t t = 1; t < st.log_likelihood.size(); ++t) {
        CHECK(st.log_likelihood[t] >= st.log_likelihood[t - 1] - 1e-10);
    }
    CHECK(st.sup_gradient >= 1.0 - 1e-12);
    CHECK(st.sup_gradient <= 1.0 + 1e-3);
    const std::vector<double> grad = npmle_gradient(data, Kernel::poisson(), st.density);
    double weighted = 0.0;
    for (std::size_t j = 0; j < g->size(); ++j) weighted += grad[j] * st.density.mass(j);
    CHECK(weighted == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mixture_log_likelihood(data, Kernel::poisson(), st.density) ==
          doctest::Approx(st.log_likelihood.back()).epsilon(1e-12));

    const FredholmState capped = npmle_fit(data, Kernel::poisson(), MixingDensity::uniform(g),
                                           NpmleOptions{1e-15, 5});
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations == 5);
    CHECK_ERROR_CODE(npmle_fit({}, Kernel::poisson(), MixingDensity::uniform(g)), ErrorCode::shape);
    CHECK_ERROR_CODE(npmle_fit(data, Kernel::poisson(), MixingDensity::uniform(g), NpmleOptions{0.0, 5}),
                     ErrorCode::parameter);
}

TEST_CASE("kernel density estimate integrates to one") {
    const std::vector<double> x{-1.0, 0.0, 0.3, 1.2, 2.0};
    const DensityFn f = gaussian_kde(x);
    const auto q = YQuadrature::trapezoid(-15.0, 15.0, 3000);
    double mass = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) mass += q.weights[i] * f(q.nodes[i]);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_ERROR_CODE(gaussian_kde(std::vector<double>{1.0}), ErrorCode::shape);
}
