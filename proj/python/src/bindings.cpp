#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prmix/app/cli.hpp"
#include "prmix/copula_predictive.hpp"
#include "prmix/error.hpp"
#include "prmix/fredholm.hpp"
#include "prmix/normal.hpp"
#include "prmix/recursion.hpp"
#include "prmix/robust_regression.hpp"
#include "prmix/semiparametric.hpp"
#include "prmix/simulation.hpp"
#include "prmix/two_groups.hpp"

namespace py = pybind11;
using namespace prmix;

namespace {

std::vector<Observation> observations(const std::vector<double>& y,
                                      const std::optional<std::vector<int>>& trials) {
    std::vector<Observation> out;
    out.reserve(y.size());
    if (trials && trials->size() != y.size()) {
        throw Error(ErrorCode::shape, "trials must have the same length as y");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        out.push_back({y[i], trials ? std::optional<int>((*trials)[i]) : std::nullopt});
    }
    return out;
}

GridPtr make_grid(KernelFamily family, const std::vector<double>& y,
                  const std::optional<std::string>& grid, const std::optional<std::string>& rule) {
    const GridSpec spec = grid ? parse_grid_spec(*grid) : app::auto_grid(family, y);
    QuadratureRule r = family == KernelFamily::scale_mixture ? QuadratureRule::log_midpoint
                                                             : QuadratureRule::midpoint;
    if (rule) r = parse_rule(*rule);
    return build_grid(spec, r);
}

std::vector<double> default_theta(KernelFamily family, std::vector<double> theta) {
    if (theta.empty() && family == KernelFamily::gaussian) theta = {1.0};
    return theta;
}

py::dict density_dict(const MixingDensity& p) {
    const auto& g = p.grid();
    std::vector<bool> atom(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) atom[i] = g.is_atom(i);
    py::dict d;
    d["nodes"] = std::vector<double>(g.nodes().begin(), g.nodes().end());
    d["weights"] = std::vector<double>(g.weights().begin(), g.weights().end());
    d["atom"] = atom;
    d["density"] = std::vector<double>(p.values().begin(), p.values().end());
    return d;
}

py::dict fit_dict(const PRFit& fit) {
    py::dict d = density_dict(fit.density);
    d["kernel"] = std::string(to_string(fit.kernel.family()));
    d["theta"] = std::vector<double>(fit.kernel.theta().begin(), fit.kernel.theta().end());
    d["log_likelihood"] = fit.log_likelihood();
    d["log_predictive"] = fit.log_predictive;
    d["permutations"] = fit.permutations_used;
    return d;
}

py::dict fit(const std::vector<double>& y, const std::string& kernel, std::vector<double> theta,
             std::optional<std::string> grid, std::optional<std::string> rule, double gamma, double c,
             std::size_t perms, std::uint64_t seed, std::size_t jobs,
             std::optional<std::vector<int>> trials) {
    const KernelFamily family = parse_family(kernel);
    const auto data = observations(y, trials);
    const Kernel k = Kernel::make(family, default_theta(family, std::move(theta)));
    const GridPtr g = make_grid(family, y, grid, rule);
    const PRFit f = [&] {
        py::gil_scoped_release release;
        return pr_fit_averaged(data, k, MixingDensity::uniform(g), WeightSchedule{c, gamma},
                               AveragingOptions{perms, seed, jobs});
    }();
    return fit_dict(f);
}

py::dict prml(const std::vector<double>& y, const std::string& kernel,
              const std::vector<std::pair<double, double>>& box, std::optional<std::string> grid,
              std::optional<std::string> rule, double gamma, double c, std::size_t perms,
              std::uint64_t seed, std::size_t jobs, std::optional<std::vector<int>> trials) {
    const KernelFamily family = parse_family(kernel);
    const auto data = observations(y, trials);
    ThetaBox b;
    for (const auto& [lo, hi] : box) {
        b.lower.push_back(lo);
        b.upper.push_back(hi);
    }
    const GridPtr g = make_grid(family, y, grid, rule);
    PrmlOptions opts;
    opts.permutations = perms;
    opts.seed = seed;
    opts.jobs = jobs;
    const PrmlResult res =
        prml_optimize(data, family, b, MixingDensity::uniform(g), WeightSchedule{c, gamma}, opts);
    py::dict d = fit_dict(res.fit);
    d["theta_hat"] = res.theta_hat;
    d["prml_log_likelihood"] = res.log_likelihood;
    std::vector<std::vector<double>> trace_theta;
    std::vector<double> trace_value;
    for (const auto& e : res.trace) {
        trace_theta.push_back(e.theta);
        trace_value.push_back(e.value);
    }
    d["trace_theta"] = trace_theta;
    d["trace_value"] = trace_value;
    return d;
}

py::dict twogroups(const std::vector<double>& z, double cutoff, std::size_t grid_nodes,
                   double gamma, double c, std::size_t perms, std::uint64_t seed) {
    TwoGroupsOptions opts;
    opts.grid_nodes = grid_nodes;
    opts.schedule = WeightSchedule{c, gamma};
    opts.optimizer.permutations = perms;
    opts.optimizer.seed = seed;
    const TwoGroupsFit f = twogroups_fit(z, opts);
    const FdrDecisions dec = fdr_test(f, z, cutoff);
    py::dict d = density_dict(f.mixing);
    d["pi_hat"] = f.pi_hat;
    d["mu_hat"] = f.mu_hat;
    d["tau_hat"] = f.tau_hat;
    d["sigma_hat"] = f.sigma_hat;
    d["log_likelihood"] = f.log_likelihood;
    d["fdr"] = dec.fdr;
    d["reject"] = dec.reject;
    d["rejections"] = dec.rejections;
    d["lower_threshold"] = dec.lower_threshold;
    d["upper_threshold"] = dec.upper_threshold;
    return d;
}

py::dict regress(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::optional<std::string> grid,
                 double gamma, double c, std::size_t perms, std::uint64_t seed,
                 std::size_t max_iter) {
    RegressionOptions opts;
    if (grid) opts.scale_grid = build_grid(parse_grid_spec(*grid), QuadratureRule::log_midpoint);
    opts.schedule = WeightSchedule{c, gamma};
    opts.permutations = perms;
    opts.seed = seed;
    opts.max_iterations = max_iter;
    const RegressionFit f = prem_fit(X, y, opts);
    py::dict d = density_dict(f.scale_density);
    d["beta"] = f.beta;
    d["beta_ols"] = ols(X, y);
    d["weights"] = f.weights;
    d["converged"] = f.converged;
    d["iterations"] = f.iterations;
    return d;
}

py::dict npmle(const std::vector<double>& y, const std::string& kernel, std::vector<double> theta,
               std::optional<std::string> grid, std::optional<std::string> rule, double tol,
               std::size_t max_iter, std::optional<std::vector<int>> trials) {
    const KernelFamily family = parse_family(kernel);
    const auto data = observations(y, trials);
    const Kernel k = Kernel::make(family, default_theta(family, std::move(theta)));
    const GridPtr g = make_grid(family, y, grid, rule);
    const FredholmState st = npmle_fit(data, k, MixingDensity::uniform(g), NpmleOptions{tol, max_iter});
    py::dict d = density_dict(st.density);
    d["iterations"] = st.iterations;
    d["converged"] = st.converged;
    d["sup_gradient"] = st.sup_gradient;
    d["gradient"] = st.gradient;
    d["log_likelihood"] = st.log_likelihood.back();
    return d;
}

py::dict predict(const std::vector<double>& y, double rho, std::optional<double> lower,
                 std::optional<double> upper, std::size_t m, std::optional<double> f0_mean,
                 std::optional<double> f0_sd, double gamma, double c, std::size_t perms,
                 std::uint64_t seed) {
    if (y.empty()) throw Error(ErrorCode::shape, "need at least one observation");
    YGridRange range = auto_ygrid_range(y);
    if (lower) range.lower = *lower;
    if (upper) range.upper = *upper;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    const double mu = f0_mean.value_or(mean);
    const double sd = f0_sd.value_or(2.0 * app::robust_sd(y));
    const PredictiveState init = make_predictive_state(
        range.lower, range.upper, m, [=](double v) { return normal_pdf(v, mu, sd); }, rho,
        WeightSchedule{c, gamma});
    const PredictiveState st =
        perms <= 1 ? copula_fit(init, y) : copula_fit_averaged(init, y, perms, seed);
    py::dict d;
    d["y"] = st.y;
    d["density"] = st.density;
    d["cdf"] = st.cdf;
    d["n"] = st.n;
    d["raw_mass"] = st.raw_mass;
    d["clamped"] = st.clamped;
    return d;
}

py::dict simulate_draws(const std::string& name, std::optional<std::size_t> n, std::uint64_t seed) {
    SimScenario s = find_scenario(name);
    s.seed = seed;
    if (n) s.n = *n;
    const LabelledDraws draws = simulate_labelled(s);
    std::vector<double> y;
    std::vector<int> trials;
    for (const auto& o : draws.data) {
        y.push_back(o.y);
        if (o.trials) trials.push_back(*o.trials);
    }
    py::dict d;
    d["y"] = y;
    d["latent"] = draws.latent;
    d["trials"] = trials.empty() ? py::object(py::none()) : py::cast(trials);
    return d;
}

std::vector<std::string> scenarios() {
    std::vector<std::string> out;
    for (auto s : scenario_names()) out.emplace_back(s);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Predictive recursion for nonparametric mixtures";

    static PyObject* error_type = py::exception<Error>(m, "Error", PyExc_ValueError).release().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(py::str(e.what()));
            exc.attr("code") = std::string(to_string(e.code()));
            exc.attr("index") = e.index() ? py::object(py::int_(*e.index())) : py::object(py::none());
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    using py::arg;
    m.def("fit", &fit, arg("y"), arg("kernel") = "gauss", arg("theta") = std::vector<double>{},
          arg("grid") = py::none(), arg("rule") = py::none(), arg("gamma") = 0.67, arg("c") = 1.0,
          arg("perms") = 25, arg("seed") = 0, arg("jobs") = 1, arg("trials") = py::none(),
          "Permutation-averaged PR estimate of the mixing density.");
    m.def("prml", &prml, arg("y"), arg("kernel") = "gauss",
          arg("box") = std::vector<std::pair<double, double>>{{0.3, 3.0}}, arg("grid") = py::none(),
          arg("rule") = py::none(), arg("gamma") = 0.67, arg("c") = 1.0, arg("perms") = 25,
          arg("seed") = 0, arg("jobs") = 1, arg("trials") = py::none(),
          "PR marginal-likelihood estimate of the kernel parameters.");
    m.def("twogroups", &twogroups, arg("z"), arg("cutoff") = 0.1, arg("grid_nodes") = 200,
          arg("gamma") = 0.67, arg("c") = 1.0, arg("perms") = 1, arg("seed") = 0,
          "Two-groups fit with local fdr and decisions at the cutoff.");
    m.def("regress", &regress, arg("X"), arg("y"), arg("grid") = py::none(), arg("gamma") = 0.67,
          arg("c") = 1.0, arg("perms") = 1, arg("seed") = 0, arg("max_iter") = 100,
          "Robust regression with a PR-estimated scale mixture of normal errors.");
    m.def("npmle", &npmle, arg("y"), arg("kernel") = "gauss", arg("theta") = std::vector<double>{},
          arg("grid") = py::none(), arg("rule") = py::none(), arg("tol") = 1e-8,
          arg("max_iter") = 10000, arg("trials") = py::none(),
          "EM iteration towards the nonparametric MLE on a fixed grid.");
    m.def("predict", &predict, arg("y"), arg("rho") = 0.9, arg("lower") = py::none(),
          arg("upper") = py::none(), arg("m") = 1024, arg("f0_mean") = py::none(),
          arg("f0_sd") = py::none(), arg("gamma") = 0.67, arg("c") = 1.0, arg("perms") = 1,
          arg("seed") = 0, "Gaussian-copula recursive predictive density on a y grid.");
    m.def("simulate", &simulate_draws, arg("scenario"), arg("n") = py::none(), arg("seed") = 0,
          "Seeded draws from a registered scenario.");
    m.def("scenarios", &scenarios, "Registered simulation scenarios.");
    m.def("normal_quantile", &normal_quantile, arg("p"));
    m.def("weight", [](std::size_t i, double c, double gamma) { return WeightSchedule{c, gamma}(i); },
          arg("i"), arg("c") = 1.0, arg("gamma") = 0.67);
    m.attr("__version__") = "0.1.0";
}
