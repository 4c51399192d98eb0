#include <cmath>
#include <limits>
#include <vector>

#include "prmix/kernels.hpp"
#include "support.hpp"

using namespace prmix;

namespace {
Observation obs(double y, std::optional<int> n = std::nullopt) { return {y, n}; }
}  // namespace

TEST_CASE("kernel values") {
    CHECK(Kernel::poisson()(obs(0), 1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
    CHECK(Kernel::poisson()(obs(3), 2.0) == doctest::Approx(std::exp(-2.0) * 8.0 / 6.0).epsilon(1e-14));
    CHECK(Kernel::binomial()(obs(2, 3), 0.5) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(Kernel::binomial()(obs(0, 4), 0.0) == 1.0);
    CHECK(Kernel::binomial()(obs(1, 4), 0.0) == 0.0);
    CHECK(Kernel::gaussian(1.0)(obs(2.5), 2.5) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
    CHECK(Kernel::gaussian(2.0)(obs(1.0), 3.0) ==
          doctest::Approx(std::exp(-0.5) / (2.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-14));
    CHECK(Kernel::scale_mixture()(obs(0.0), 2.0) == doctest::Approx(0.3989422804014327 / 2.0));
    CHECK(Kernel::two_groups(0.0, 1.0, 1.0)(obs(0.0), 0.0) == doctest::Approx(0.3989422804014327));
    CHECK(Kernel::two_groups(0.0, 2.0, 1.0)(obs(2.0), 1.0) == doctest::Approx(0.3989422804014327));
    CHECK(twogroups_kernel(0.0, 2.0, 1.0, 2.0, 1.0) == doctest::Approx(0.3989422804014327));
}

TEST_CASE("two-groups null component is the empirical null") {
    const Kernel k = Kernel::two_groups(0.07, 3.0, 0.74);
    for (double y : {-2.0, 0.07, 1.3}) {
        const double expect = std::exp(-0.5 * std::pow((y - 0.07) / 0.74, 2)) /
                              (0.74 * std::sqrt(2.0 * M_PI));
        CHECK(k(obs(y), 0.0) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("log density matches density") {
    const Kernel k = Kernel::poisson();
    CHECK(k.log_density(obs(7), 3.0) == doctest::Approx(std::log(k(obs(7), 3.0))));
    CHECK(Kernel::binomial().log_density(obs(1, 4), 0.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("mixture densities") {
    const auto atoms = std::make_shared<const MixingGrid>(MixingGrid::discrete({1.0, 2.0}));
    const MixingDensity p(atoms, {0.5, 0.5});
    CHECK(mixture_density(Kernel::poisson(), p, obs(0)) ==
          doctest::Approx(0.5 * (std::exp(-1.0) + std::exp(-2.0))).epsilon(1e-14));
    CHECK(mixture_density(Kernel::poisson(), p, obs(0)) == doctest::Approx(0.251607).epsilon(1e-6));
    CHECK(log_mixture_density(Kernel::poisson(), p, obs(0)) ==
          doctest::Approx(std::log(0.2516073622040275)).epsilon(1e-12));

    const auto g = build_grid(5.0, 40.0, 400);
    const MixingDensity flat = MixingDensity::uniform(g);
    CHECK(std::abs(mixture_density(Kernel::gaussian(1.0), flat, obs(22.5)) - 1.0 / 35.0) < 1e-4);

    const MixingDensity pm = MixingDensity::point_mass(g, 100);
    const double u0 = g->node(100);
    CHECK(mixture_density(Kernel::gaussian(1.0), pm, obs(20.0)) ==
          doctest::Approx(Kernel::gaussian(1.0)(obs(20.0), u0)).epsilon(1e-14));

    const DensityFn f = mixture_evaluator(Kernel::gaussian(1.0), flat);
    CHECK(f(22.5) == doctest::Approx(mixture_density(Kernel::gaussian(1.0), flat, obs(22.5))));
    CHECK_ERROR_CODE(mixture_evaluator(Kernel::binomial(), flat), ErrorCode::parameter);
}

TEST_CASE("kernel construction and families") {
    CHECK(parse_family("gauss") == KernelFamily::gaussian);
    CHECK(parse_family("binomial") == KernelFamily::binomial);
    CHECK(to_string(KernelFamily::two_groups) == "twogroups");
    CHECK(theta_size(KernelFamily::two_groups) == 3);
    CHECK(theta_size(KernelFamily::poisson) == 0);
    const std::vector<double> theta{0.5};
    CHECK(Kernel::make(KernelFamily::gaussian, theta).theta()[0] == 0.5);
    CHECK_ERROR_CODE(parse_family("cauchy"), ErrorCode::config);
    CHECK_ERROR_CODE(Kernel::gaussian(0.0), ErrorCode::parameter);
    CHECK_ERROR_CODE(Kernel::gaussian(-1.0), ErrorCode::parameter);
    CHECK_ERROR_CODE(Kernel::two_groups(0.0, 0.0, 1.0), ErrorCode::parameter);
    CHECK_ERROR_CODE(Kernel::make(KernelFamily::gaussian, std::vector<double>{}), ErrorCode::parameter);
    CHECK_ERROR_CODE(Kernel::make(KernelFamily::poisson, theta), ErrorCode::parameter);
}

TEST_CASE("observation domain checks") {
    CHECK_ERROR_CODE(Kernel::poisson().check(obs(-1.0), 4), ErrorCode::domain);
    CHECK_ERROR_CODE(Kernel::poisson().check(obs(1.5)), ErrorCode::domain);
    CHECK_ERROR_CODE(Kernel::binomial().check(obs(2.0)), ErrorCode::domain);
    CHECK_ERROR_CODE(Kernel::binomial().check(obs(5.0, 3)), ErrorCode::domain);
    CHECK_ERROR_CODE(Kernel::gaussian(1.0).check(obs(std::nan(""))), ErrorCode::domain);
    CHECK_NOTHROW(Kernel::binomial().check(obs(3.0, 3)));
    try {
        Kernel::poisson().check(obs(-2.0), 7);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.index() == std::optional<std::size_t>(7));
    }
    const auto g = build_grid(-1.0, 1.0, 10);
    CHECK_ERROR_CODE(Kernel::poisson().check(*g), ErrorCode::domain);
    CHECK_ERROR_CODE(Kernel::binomial().check(*build_grid(0.0, 2.0, 10)), ErrorCode::domain);
}

TEST_CASE("scaled kernel rows") {
    const auto g = build_grid(0.0, 10.0, 20);
    std::vector<double> row(g->size());
    const double lmax = Kernel::poisson().scaled_row(obs(4), *g, row);
    CHECK(*std::max_element(row.begin(), row.end()) == doctest::Approx(1.0));
    for (std::size_t j = 0; j < g->size(); ++j) {
        CHECK(row[j] * std::exp(lmax) == doctest::Approx(Kernel::poisson()(obs(4), g->node(j))));
    }
}
