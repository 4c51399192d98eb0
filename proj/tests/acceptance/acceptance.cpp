// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.  Pass --only N to run a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prmix/copula_predictive.hpp"
#include "prmix/error.hpp"
#include "prmix/fredholm.hpp"
#include "prmix/normal.hpp"
#include "prmix/recursion.hpp"
#include "prmix/robust_regression.hpp"
#include "prmix/semiparametric.hpp"
#include "prmix/simulation.hpp"
#include "prmix/two_groups.hpp"

using namespace prmix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double budget_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// ---------------------------------------------------------------- 1
Outcome dp_correspondence() {
    struct Case {
        const char* name;
        Kernel kernel;
        GridPtr grid;
        Observation obs;
    };
    std::vector<Case> cases{
        {"poisson", Kernel::poisson(), build_grid(0.0, 25.0, 400), {3.0, std::nullopt}},
        {"gaussian", Kernel::gaussian(1.0), build_grid(-4.0, 4.0, 200), {0.7, std::nullopt}},
        {"binomial", Kernel::binomial(), build_grid(0.0, 1.0, 200), {3.0, 10}},
        {"scale", Kernel::scale_mixture(),
         build_grid(0.1, 10.0, 200, QuadratureRule::log_midpoint), {1.5, std::nullopt}},
        {"twogroups", Kernel::two_groups(0.0, 2.0, 1.0), twogroups_grid(200),
         {1.2, std::nullopt}},
    };
    double worst = 0.0;
    for (const auto& c : cases) {
        // A non-uniform prior guess so the check is not trivially symmetric.
        std::vector<double> raw(c.grid->size());
        for (std::size_t j = 0; j < raw.size(); ++j) {
            raw[j] = 1.0 + 0.5 * std::sin(static_cast<double>(j));
        }
        const MixingDensity p0 = normalize(c.grid, raw);
        for (double alpha : {1.0, 2.5, 9.0}) {
            const PRFit fit = pr_fit(std::vector<Observation>{c.obs}, c.kernel, p0,
                                     WeightSchedule{alpha, 1.0});
            double f0 = 0.0;
            for (std::size_t j = 0; j < p0.size(); ++j) {
                f0 += c.kernel(c.obs, c.grid->node(j)) * p0[j] * c.grid->weight(j);
            }
            double scale = 0.0;
            double err = 0.0;
            for (std::size_t j = 0; j < p0.size(); ++j) {
                const double k = c.kernel(c.obs, c.grid->node(j));
                const double post = alpha / (alpha + 1.0) * p0[j] + k * p0[j] / ((alpha + 1.0) * f0);
                scale = std::max(scale, std::abs(post));
                err = std::max(err, std::abs(post - fit.density[j]));
            }
            worst = std::max(worst, err / std::max(1.0, scale));
        }
    }
    return {worst <= 1e-12, "max scaled error " + fmt("%.2e", worst) + " over 5 families x 3 alphas"};
}

// ---------------------------------------------------------------- 2
Outcome hand_oracle_step() {
    const auto grid = std::make_shared<const MixingGrid>(MixingGrid::discrete({1.0, 2.0}));
    const MixingDensity p = normalize(grid, {0.5, 0.5});
    const MixingDensity next = pr_step(p, Observation{0.0, std::nullopt}, Kernel::poisson(), 0.5);
    const double e = std::max(std::abs(next[0] - 0.6156), std::abs(next[1] - 0.3844));
    return {e <= 1e-4, "p1 = (" + fmt("%.6f", next[0]) + ", " + fmt("%.6f", next[1]) + ")"};
}

// ---------------------------------------------------------------- 3
Outcome consistency_trend() {
    SimScenario s = find_scenario("poisson-2atom");
    s.seed = 1000;
    const std::vector<std::size_t> checkpoints{0, 200, 2000};
    const CurveSummary summary = replicate_curves(s, default_estimator(s), checkpoints, 50);
    const double k0 = summary.median_kl[0];
    const double k200 = summary.median_kl[1];
    const double k2000 = summary.median_kl[2];
    return {k2000 < 0.5 * k200 && k2000 < k0,
            "median KL f0 " + fmt("%.4g", k0) + ", n=200 " + fmt("%.4g", k200) + ", n=2000 " +
                fmt("%.4g", k2000)};
}

// ---------------------------------------------------------------- 4
Outcome rate_sanity() {
    SimScenario s = find_scenario("gauss-pointmass");
    s.seed = 2000;
    EstimatorSpec e = default_estimator(s);
    e.schedule = WeightSchedule{1.0, 0.75};
    const std::vector<std::size_t> checkpoints{100, 200, 400, 800, 1600, 3200};
    const CurveSummary summary = replicate_curves(s, e, checkpoints, 50);
    std::vector<CurvePoint> pts;
    for (std::size_t k = 0; k < summary.n.size(); ++k) {
        pts.push_back({summary.n[k], summary.median_kl[k]});
    }
    const double slope = loglog_slope(pts);
    return {slope >= -0.6 && slope <= -0.15, "log-log slope " + fmt("%.3f", slope)};
}

// ---------------------------------------------------------------- 5, 6
struct PoissonComparison {
    double pr_ll = 0.0;
    FredholmState npmle;
    double npmle_ll = 0.0;
};

PoissonComparison& poisson_comparison() {
    static PoissonComparison cmp = [] {
        SimScenario s = find_scenario("poisson-2atom");
        s.n = 600;
        s.seed = 3000;
        const auto data = simulate(s);
        const GridPtr grid = build_grid(s.fit_grid);
        const MixingDensity p0 = MixingDensity::uniform(grid);
        const PRFit pr = pr_fit_averaged(data, Kernel::poisson(), p0, WeightSchedule{1.0, 0.67},
                                         AveragingOptions{25, 3000, 1});
        FredholmState state = npmle_fit(data, Kernel::poisson(), p0);
        PoissonComparison out{mixture_log_likelihood(data, Kernel::poisson(), pr.density),
                              std::move(state), 0.0};
        out.npmle_ll = mixture_log_likelihood(data, Kernel::poisson(), out.npmle.density);
        return out;
    }();
    return cmp;
}

Outcome pr_vs_npmle() {
    const auto& cmp = poisson_comparison();
    const double ratio = std::exp(cmp.pr_ll - cmp.npmle_ll);
    return {ratio >= 0.9 && ratio <= 1.0 + 1e-9,
            "likelihood ratio PR/NPMLE " + fmt("%.4f", ratio) + " (log-lik " +
                fmt("%.3f", cmp.pr_ll) + " vs " + fmt("%.3f", cmp.npmle_ll) +
                "; per-observation ratio " + fmt("%.5f", std::exp((cmp.pr_ll - cmp.npmle_ll) / 600.0)) +
                ")"};
}

Outcome npmle_gradient_check() {
    const auto& cmp = poisson_comparison();
    const auto& st = cmp.npmle;
    double carrying = 0.0;
    for (std::size_t j = 0; j < st.density.size(); ++j) {
        if (st.density.mass(j) > 1e-6) {
            carrying = std::max(carrying, std::abs(st.gradient[j] - 1.0));
        }
    }
    return {st.sup_gradient <= 1.0 + 1e-3 && carrying <= 1e-2,
            "sup gradient " + fmt("%.6f", st.sup_gradient) + ", max |g-1| on support " +
                fmt("%.2e", carrying) + ", " + std::to_string(st.iterations) + " iterations" +
                (st.converged ? "" : " (not converged)")};
}

// ---------------------------------------------------------------- 7
Outcome prml_recovery() {
    SimScenario s = find_scenario("gauss-pointmass");
    const GridPtr grid = build_grid(s.fit_grid);
    const MixingDensity p0 = MixingDensity::uniform(grid);
    const ThetaBox box{{0.3}, {3.0}};
    int inside = 0;
    std::vector<double> hats;
    for (int r = 0; r < 50; ++r) {
        s.seed = 4000 + static_cast<std::uint64_t>(r);
        const auto data = simulate(s);
        PrmlOptions opts;
        opts.permutations = 25;
        opts.seed = s.seed;
        const PrmlResult res = prml_optimize(data, KernelFamily::gaussian, box, p0,
                                             WeightSchedule{1.0, 0.67}, opts);
        hats.push_back(res.theta_hat[0]);
        if (res.theta_hat[0] >= 0.85 && res.theta_hat[0] <= 1.15) ++inside;
    }
    return {inside >= 45, std::to_string(inside) + "/50 in [0.85, 1.15], median sigma-hat " +
                              fmt("%.3f", median(hats))};
}

// ---------------------------------------------------------------- 8
Outcome two_groups_bed() {
    SimScenario s = find_scenario("twogroups");
    int fdp_ok = 0;
    std::vector<double> pis;
    bool fdr_range = true;
    bool pi_first = false;
    for (int r = 0; r < 50; ++r) {
        s.seed = 5000 + static_cast<std::uint64_t>(r);
        const LabelledDraws draws = simulate_labelled(s);
        std::vector<double> z;
        for (const auto& o : draws.data) z.push_back(o.y);
        TwoGroupsOptions opts;
        opts.optimizer.seed = s.seed;
        const TwoGroupsFit fit = twogroups_fit(z, opts);
        pis.push_back(fit.pi_hat);
        if (r == 0) {
            pi_first = fit.pi_hat >= 0.85 && fit.pi_hat <= 0.95;
            for (int k = 0; k < 10000; ++k) {
                const double y = -25.0 + 50.0 * k / 9999.0;
                const double v = local_fdr(fit, y).value;
                if (!(v >= 0.0 && v <= 1.0)) fdr_range = false;
            }
        }
        const FdrDecisions d = fdr_test(fit, z, 0.1);
        std::size_t false_rej = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (d.reject[i] && draws.latent[i] == 0.0) ++false_rej;
        }
        const double fdp = d.rejections ? static_cast<double>(false_rej) / d.rejections : 0.0;
        if (fdp <= 0.15) ++fdp_ok;
    }
    const auto in_range = std::count_if(pis.begin(), pis.end(),
                                        [](double p) { return p >= 0.85 && p <= 0.95; });
    const double med = median(pis);
    return {pi_first && med >= 0.85 && med <= 0.95 && fdr_range && fdp_ok >= 45,
            "pi-hat median " + fmt("%.3f", med) + " (" + std::to_string(in_range) +
                "/50 in [0.85, 0.95]), fdr in [0,1] at 1e4 points: " +
                (fdr_range ? "yes" : "no") + ", FDP <= 0.15 in " + std::to_string(fdp_ok) + "/50"};
}

// ---------------------------------------------------------------- 9
Outcome robust_regression() {
    const std::vector<double> beta{1.0, 2.0, -1.0};
    int wins = 0;
    for (int r = 0; r < 50; ++r) {
        const RegressionBed bed = simulate_regression(200, beta, 1.0, 0.1, 10.0,
                                                      6000 + static_cast<std::uint64_t>(r));
        const Eigen::VectorXd b_ols = ols(bed.X, bed.y);
        const RegressionFit fit = prem_fit(bed.X, bed.y);
        if ((fit.beta - bed.beta).norm() < (b_ols - bed.beta).norm()) ++wins;
    }
    const RegressionBed clean = simulate_regression(50, beta, 0.0, 0.0, 0.0, 6100);
    const RegressionFit exact = prem_fit(clean.X, clean.y);
    const double err = (exact.beta - clean.beta).lpNorm<Eigen::Infinity>();
    return {wins >= 40 && err <= 1e-8, "PR-EM beats OLS in " + std::to_string(wins) +
                                           "/50; zero-noise error " + fmt("%.2e", err)};
}

// ---------------------------------------------------------------- 10
Outcome copula_predictive() {
    const DensityFn std_normal = [](double y) { return normal_pdf(y, 0.0, 1.0); };
    PredictiveState base = make_predictive_state(-8.0, 8.0, 1025, std_normal, 0.0);
    base = copula_update(base, 0.4);
    const PredictiveState same = copula_update(base, -1.3);
    const double identity = max_abs_diff(same.density, base.density);

    const PredictiveState s0 =
        make_predictive_state(-8.0, 8.0, 1025, std_normal, 0.9, WeightSchedule{1.0, 1.0});
    const PredictiveState s1 = copula_update(s0, 0.0);
    const double raw_at_zero = s1.density[512] * s1.raw_mass;

    SimScenario s = find_scenario("gauss-bimodal");
    s.seed = 7000;
    const auto draws = simulate(s);
    std::vector<double> y;
    for (const auto& o : draws) y.push_back(o.y);
    const YGridRange range = auto_ygrid_range(y);
    const PredictiveState init = make_predictive_state(
        range.lower, range.upper, 1024, [](double v) { return normal_pdf(v, 0.0, 3.0); }, 0.9);
    const PredictiveState fit = copula_fit(init, y);
    const TrueMixture truth(s);
    const YQuadrature quad = YQuadrature::trapezoid(range.lower, range.upper, 2000);
    const double kl0 = kl_divergence(truth.evaluator(), init.evaluator(), quad);
    const double kln = kl_divergence(truth.evaluator(), fit.evaluator(), quad);

    return {identity <= 1e-12 && std::abs(raw_at_zero - 0.6571) <= 1e-3 && kln < kl0,
            "rho=0 drift " + fmt("%.1e", identity) + ", raw f1(0) " + fmt("%.5f", raw_at_zero) +
                ", KL " + fmt("%.4f", kl0) + " -> " + fmt("%.4f", kln)};
}

// ---------------------------------------------------------------- 11
Outcome invariant_sweep() {
    std::vector<std::string> broken;

    // Normalisation after every step, across families.
    {
        SimScenario s = find_scenario("poisson-gamma");
        s.n = 300;
        s.seed = 8000;
        const auto data = simulate(s);
        const GridPtr grid = build_grid(s.fit_grid);
        MixingDensity p = MixingDensity::uniform(grid);
        const WeightSchedule w;
        for (std::size_t i = 0; i < data.size(); ++i) {
            p = pr_step(p, data[i], Kernel::poisson(), w(i + 1));
            if (std::abs(integrate(p.grid(), p.values()) - 1.0) > 1e-10) {
                broken.push_back("normalisation");
                break;
            }
        }
    }
    // Support preservation: nodes that start at zero stay exactly zero.
    {
        SimScenario s = find_scenario("gauss-bimodal");
        s.seed = 8001;
        const auto data = simulate(s);
        const GridPtr grid = build_grid(s.fit_grid);
        std::vector<double> raw(grid->size(), 1.0);
        for (std::size_t j = 0; j < raw.size(); j += 3) raw[j] = 0.0;
        const MixingDensity p0 = normalize(grid, raw);
        const PRFit fit = pr_fit(data, Kernel::gaussian(1.0), p0, WeightSchedule{});
        for (std::size_t j = 0; j < raw.size(); ++j) {
            if ((raw[j] == 0.0) != (fit.density[j] == 0.0)) {
                broken.push_back("support");
                break;
            }
        }
    }
    // Exhaustive averaging is exactly order invariant for n <= 5.
    {
        const auto grid = build_grid(0.0, 25.0, 400);
        const MixingDensity p0 = MixingDensity::uniform(grid);
        std::vector<double> y{4.0, 0.0, 7.0, 4.0, 2.0};
        std::mt19937_64 rng(8002);
        const PRFit ref = pr_fit_averaged(make_observations(y), Kernel::poisson(), p0,
                                          WeightSchedule{}, AveragingOptions{120, 1, 1});
        for (int t = 0; t < 10; ++t) {
            std::shuffle(y.begin(), y.end(), rng);
            const PRFit alt = pr_fit_averaged(make_observations(y), Kernel::poisson(), p0,
                                              WeightSchedule{},
                                              AveragingOptions{120, static_cast<std::uint64_t>(t), 1});
            if (!std::equal(ref.density.values().begin(), ref.density.values().end(),
                            alt.density.values().begin())) {
                broken.push_back("permutation invariance");
                break;
            }
        }
    }
    // Rejection sets are nested in the cutoff.
    {
        SimScenario s = find_scenario("twogroups");
        s.n = 1000;
        s.seed = 8003;
        std::vector<double> z;
        for (const auto& o : simulate(s)) z.push_back(o.y);
        const TwoGroupsFit fit = twogroups_fit(z);
        const double cutoffs[] = {0.01, 0.05, 0.1, 0.2, 0.5, 0.9};
        FdrDecisions prev = fdr_test(fit, z, cutoffs[0]);
        for (std::size_t k = 1; k < std::size(cutoffs) && broken.empty(); ++k) {
            const FdrDecisions cur = fdr_test(fit, z, cutoffs[k]);
            for (std::size_t i = 0; i < z.size(); ++i) {
                if (prev.reject[i] && !cur.reject[i]) {
                    broken.push_back("fdr monotonicity");
                    break;
                }
            }
            prev = cur;
        }
    }
    std::string detail = broken.empty() ? "normalisation, support, permutation invariance, "
                                          "fdr monotonicity all hold"
                                        : "violated:";
    for (const auto& b : broken) detail += " " + b;
    return {broken.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--only") only = std::atoi(argv[i + 1]);
    }
    const std::vector<Criterion> criteria{
        {1, "one-step DP correspondence", 1.0, dp_correspondence},
        {2, "hand-oracle Poisson step", 1.0, hand_oracle_step},
        {3, "consistency trend", 60.0, consistency_trend},
        {4, "rate sanity", 120.0, rate_sanity},
        {5, "PR vs NPMLE fit quality", 60.0, pr_vs_npmle},
        {6, "NPMLE gradient criterion", 30.0, npmle_gradient_check},
        {7, "PRML recovery", 300.0, prml_recovery},
        {8, "two-groups bed", 300.0, two_groups_bed},
        {9, "robust regression", 120.0, robust_regression},
        {10, "copula predictive", 30.0, copula_predictive},
        {11, "invariant sweep", 60.0, invariant_sweep},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = out.pass && in_time;
        if (!pass) ++failures;
        std::printf("[%s] %2d %-28s %s; %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id,
                    c.title.c_str(), out.detail.c_str(), secs, c.budget_seconds,
                    in_time ? "" : " OVER BUDGET");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
