#include "prmix/app/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "prmix/app/csv.hpp"
#include "prmix/copula_predictive.hpp"
#include "prmix/error.hpp"
#include "prmix/fredholm.hpp"
#include "prmix/normal.hpp"
#include "prmix/recursion.hpp"
#include "prmix/robust_regression.hpp"
#include "prmix/semiparametric.hpp"
#include "prmix/simulation.hpp"
#include "prmix/two_groups.hpp"

namespace prmix::app {
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string exact(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string grid_text(const GridSpec& spec) {
    std::string s = exact(spec.lower) + ":" + exact(spec.upper) + ":" + std::to_string(spec.m);
    for (std::size_t k = 0; k < spec.atoms.size(); ++k) {
        s += (k == 0 ? "+atom@" : ",") + exact(spec.atoms[k]);
    }
    return s;
}

double parse_double(std::string_view text, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorCode::config,
                    std::string("cannot read ") + what + " from '" + std::string(text) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        out.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// "lo:hi[,lo:hi...]"; a single value "v" fixes the coordinate.
ThetaBox parse_box(const std::string& text) {
    ThetaBox box;
    for (auto part : split(text, ',')) {
        const auto ends = split(part, ':');
        if (ends.size() == 1) {
            const double v = parse_double(ends[0], "theta box");
            box.lower.push_back(v);
            box.upper.push_back(v);
        } else if (ends.size() == 2) {
            box.lower.push_back(parse_double(ends[0], "theta box"));
            box.upper.push_back(parse_double(ends[1], "theta box"));
        } else {
            throw Error(ErrorCode::config, "theta box entries look like lo:hi, got '" +
                                               std::string(part) + "'");
        }
    }
    box.validate();
    return box;
}

std::vector<std::size_t> parse_checkpoints(const std::string& text) {
    std::vector<std::size_t> out;
    for (auto part : split(text, ',')) {
        const double v = parse_double(part, "checkpoint");
        if (v < 0 || v != std::floor(v)) {
            throw Error(ErrorCode::config, "checkpoints must be nonnegative integers");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

QuadratureRule resolve_rule(const RunConfig& cfg, KernelFamily family) {
    if (!cfg.rule.empty()) return parse_rule(cfg.rule);
    return family == KernelFamily::scale_mixture ? QuadratureRule::log_midpoint
                                                 : QuadratureRule::midpoint;
}

std::vector<double> resolve_theta(KernelFamily family, const std::vector<double>& given) {
    if (!given.empty()) return given;
    if (family == KernelFamily::gaussian) return {1.0};
    if (family == KernelFamily::two_groups) {
        throw Error(ErrorCode::config, "the twogroups kernel needs --theta mu,tau,sigma");
    }
    return {};
}

struct Run {
    RunConfig cfg;
    std::ostream& out;
    std::vector<std::size_t>& lines;
    std::vector<std::string> written;

    Ingested ingest(bool with_trials) {
        if (cfg.input.empty()) throw Error(ErrorCode::config, "--input is required");
        ColumnSpec spec;
        spec.y = cfg.column;
        if (with_trials && !cfg.trials_column.empty()) spec.trials = cfg.trials_column;
        spec.predictors = cfg.predictors;
        Ingested d = ingest_csv(cfg.input, spec);
        lines = d.lines;
        cfg.column = d.y_column;
        return d;
    }

    WeightSchedule schedule() const { return WeightSchedule{cfg.c, cfg.gamma}; }

    GridPtr grid_for(KernelFamily family, std::span<const double> y) {
        const QuadratureRule rule = resolve_rule(cfg, family);
        const GridSpec spec = cfg.grid == "auto" ? auto_grid(family, y) : parse_grid_spec(cfg.grid);
        cfg.grid = grid_text(spec);
        cfg.rule = std::string(to_string(rule));
        return build_grid(spec, rule);
    }

    Json header() const {
        Json doc;
        doc["command"] = cfg.command;
        doc["version"] = kVersion;
        doc["seed"] = cfg.seed;
        doc["config"] = cfg.to_json();
        return doc;
    }

    std::optional<fs::path> table_base() const {
        fs::path p;
        if (!cfg.csv.empty()) {
            p = cfg.csv;
        } else if (!cfg.output.empty()) {
            p = cfg.output;
        } else {
            return std::nullopt;
        }
        if (p.has_extension()) p.replace_extension();
        return p;
    }

    void tables(const std::vector<std::pair<std::string, Table>>& named) {
        const auto base = table_base();
        if (!base) return;
        for (const auto& [name, table] : named) {
            fs::path path = *base;
            path += name.empty() ? ".csv" : "_" + name + ".csv";
            write_csv(table, cfg.to_json(), path);
            written.push_back(path.string());
        }
    }

    void finish(Json doc) {
        doc["tables"] = written;
        if (cfg.output.empty()) {
            write_json(doc, out);
        } else {
            write_json(doc, fs::path(cfg.output));
        }
    }
};

Table density_table(const MixingDensity& p) {
    const auto& g = p.grid();
    Table t;
    std::vector<double> atom(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) atom[i] = g.is_atom(i) ? 1.0 : 0.0;
    t.add("u", {g.nodes().begin(), g.nodes().end()});
    t.add("nu_weight", {g.weights().begin(), g.weights().end()});
    t.add("atom", std::move(atom));
    t.add("density", {p.values().begin(), p.values().end()});
    return t;
}

/// Plot-ready mixture curve over the observation space.
std::optional<Table> mixture_table(const Kernel& kernel, const MixingDensity& p,
                                   std::span<const double> y) {
    if (kernel.family() == KernelFamily::binomial) return std::nullopt;
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    std::vector<double> points;
    if (kernel.family() == KernelFamily::poisson) {
        const double top = *hi + std::max(10.0, 3.0 * std::sqrt(*hi));
        for (double v = 0.0; v <= top; v += 1.0) points.push_back(v);
    } else {
        const double pad = 3.0 * robust_sd(y);
        const double a = *lo - pad;
        const double b = *hi + pad;
        for (int k = 0; k < 400; ++k) points.push_back(a + (b - a) * k / 399.0);
    }
    const DensityFn f = mixture_evaluator(kernel, p);
    std::vector<double> values;
    for (double v : points) values.push_back(f(v));
    Table t;
    t.add("y", std::move(points));
    t.add("mixture", std::move(values));
    return t;
}

void fit_document(Json& doc, const PRFit& fit, std::size_t n) {
    doc["n"] = n;
    doc["kernel"] = kernel_json(fit.kernel);
    doc["permutations"] = fit.permutations_used;
    doc["log_likelihood"] = fit.log_likelihood();
    doc["log_predictive"] = fit.log_predictive;
    doc["density"] = density_json(fit.density);
}

void run_fit(Run& r) {
    const KernelFamily family = parse_family(r.cfg.kernel);
    const Ingested d = r.ingest(family == KernelFamily::binomial);
    const auto y = d.y();
    r.cfg.theta = resolve_theta(family, r.cfg.theta);
    const Kernel kernel = Kernel::make(family, r.cfg.theta);
    const GridPtr grid = r.grid_for(family, y);
    r.cfg.perms = r.cfg.perms.value_or(25);
    const PRFit fit = pr_fit_averaged(d.observations, kernel, MixingDensity::uniform(grid),
                                      r.schedule(), AveragingOptions{*r.cfg.perms, r.cfg.seed, r.cfg.jobs});
    std::vector<std::pair<std::string, Table>> named{{"", density_table(fit.density)}};
    if (auto m = mixture_table(kernel, fit.density, y)) named.emplace_back("mixture", *m);
    r.tables(named);
    Json doc = r.header();
    fit_document(doc, fit, d.rows());
    r.finish(std::move(doc));
}

void run_prml(Run& r) {
    const KernelFamily family = parse_family(r.cfg.kernel);
    if (theta_size(family) == 0) {
        throw Error(ErrorCode::config, "kernel '" + r.cfg.kernel + "' has no structural parameter");
    }
    const Ingested d = r.ingest(family == KernelFamily::binomial);
    const auto y = d.y();
    if (r.cfg.theta_box.empty()) {
        r.cfg.theta_box = family == KernelFamily::gaussian ? "0.3:3" : "-1:1,1:10,0.3:3";
    }
    const ThetaBox box = parse_box(r.cfg.theta_box);
    if (box.size() != theta_size(family)) {
        throw Error(ErrorCode::config, "theta box has " + std::to_string(box.size()) +
                                           " coordinates, kernel needs " +
                                           std::to_string(theta_size(family)));
    }
    const GridPtr grid = r.grid_for(family, y);
    PrmlOptions opts;
    r.cfg.perms = r.cfg.perms.value_or(25);
    opts.permutations = *r.cfg.perms;
    opts.seed = r.cfg.seed;
    opts.jobs = r.cfg.jobs;
    const PrmlResult res =
        prml_optimize(d.observations, family, box, MixingDensity::uniform(grid), r.schedule(), opts);

    Table trace;
    for (std::size_t k = 0; k < box.size(); ++k) {
        std::vector<double> col;
        for (const auto& e : res.trace) col.push_back(e.theta[k]);
        trace.add("theta" + std::to_string(k + 1), std::move(col));
    }
    std::vector<double> value;
    std::vector<double> best;
    Json trace_json = Json::array();
    for (const auto& e : res.trace) {
        value.push_back(e.value);
        best.push_back(e.best);
        trace_json.push_back({{"theta", e.theta}, {"value", e.value}, {"best", e.best}});
    }
    trace.add("value", std::move(value));
    trace.add("best", std::move(best));
    std::vector<std::pair<std::string, Table>> named{{"", density_table(res.fit.density)},
                                                     {"trace", trace}};
    if (auto m = mixture_table(res.fit.kernel, res.fit.density, y)) named.emplace_back("mixture", *m);
    r.tables(named);

    Json doc = r.header();
    doc["theta_hat"] = res.theta_hat;
    doc["prml_log_likelihood"] = res.log_likelihood;
    fit_document(doc, res.fit, d.rows());
    doc["trace"] = std::move(trace_json);
    r.finish(std::move(doc));
}

void run_fdr(Run& r) {
    const Ingested d = r.ingest(false);
    const auto z = d.y();
    TwoGroupsOptions opts;
    if (!r.cfg.theta_box.empty()) opts.box = parse_box(r.cfg.theta_box);
    if (opts.box.size() != 3) throw Error(ErrorCode::config, "two-groups box needs mu, tau, sigma");
    if (r.cfg.grid != "auto") {
        const double m = parse_double(r.cfg.grid, "two-groups grid size");
        if (!(m >= 1.0) || m != std::floor(m)) {
            throw Error(ErrorCode::config, "two-groups --grid takes a node count");
        }
        opts.grid_nodes = static_cast<std::size_t>(m);
    }
    r.cfg.grid = std::to_string(opts.grid_nodes);
    r.cfg.kernel = "twogroups";
    opts.schedule = r.schedule();
    r.cfg.perms = r.cfg.perms.value_or(1);
    opts.optimizer.permutations = *r.cfg.perms;
    opts.optimizer.seed = r.cfg.seed;
    opts.optimizer.jobs = r.cfg.jobs;
    const TwoGroupsFit fit = twogroups_fit(z, opts);
    const FdrDecisions dec = fdr_test(fit, z, r.cfg.cutoff);

    Table cases;
    std::vector<double> index(z.size());
    std::iota(index.begin(), index.end(), 0.0);
    std::vector<double> reject;
    for (bool b : dec.reject) reject.push_back(b ? 1.0 : 0.0);
    cases.add("index", std::move(index));
    cases.add("z", z);
    cases.add("fdr", dec.fdr);
    cases.add("reject", std::move(reject));

    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    Table curve;
    const auto rows = fdr_curve(fit, *lo - 1.0, *hi + 1.0, 400);
    std::vector<double> cy, cf, c0, c1, cfdr;
    for (const auto& row : rows) {
        cy.push_back(row.y);
        cf.push_back(row.marginal);
        c0.push_back(row.null_part);
        c1.push_back(row.nonnull_part);
        cfdr.push_back(row.fdr);
    }
    curve.add("y", std::move(cy));
    curve.add("marginal", std::move(cf));
    curve.add("null_part", std::move(c0));
    curve.add("nonnull_part", std::move(c1));
    curve.add("fdr", std::move(cfdr));
    r.tables({{"", cases}, {"curve", curve}, {"mixing", density_table(fit.mixing)}});

    std::size_t underflow = 0;
    for (double v : z) underflow += local_fdr(fit, v).underflow ? 1 : 0;
    Json doc = r.header();
    doc["n"] = z.size();
    doc["pi_hat"] = fit.pi_hat;
    doc["mu_hat"] = fit.mu_hat;
    doc["tau_hat"] = fit.tau_hat;
    doc["sigma_hat"] = fit.sigma_hat;
    doc["log_likelihood"] = fit.log_likelihood;
    doc["cutoff"] = dec.cutoff;
    doc["rejections"] = dec.rejections;
    doc["up"] = dec.up;
    doc["down"] = dec.down;
    doc["lower_threshold"] = dec.lower_threshold ? Json(*dec.lower_threshold) : Json(nullptr);
    doc["upper_threshold"] = dec.upper_threshold ? Json(*dec.upper_threshold) : Json(nullptr);
    doc["fdr_underflow"] = underflow;
    doc["kernel"] = kernel_json(fit.kernel());
    doc["density"] = density_json(fit.mixing);
    r.finish(std::move(doc));
}

void run_regress(Run& r) {
    if (r.cfg.predictors.empty()) throw Error(ErrorCode::config, "--predictors is required");
    if (r.cfg.poly > 0 && r.cfg.predictors.size() != 1) {
        throw Error(ErrorCode::config, "--poly expands exactly one predictor");
    }
    const Ingested d = r.ingest(false);
    const auto yv = d.y();
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));

    Eigen::MatrixXd X;
    std::vector<std::string> names;
    const bool intercept = !r.cfg.no_intercept;
    if (r.cfg.poly > 0) {
        X = polynomial_design(d.predictors.front(), r.cfg.poly, intercept);
        if (intercept) names.push_back("(intercept)");
        for (std::size_t k = 1; k <= r.cfg.poly; ++k) {
            names.push_back(r.cfg.predictors.front() + (k > 1 ? "^" + std::to_string(k) : ""));
        }
    } else {
        const auto n = static_cast<Eigen::Index>(yv.size());
        const auto p = static_cast<Eigen::Index>(d.predictors.size() + (intercept ? 1 : 0));
        X.resize(n, p);
        Eigen::Index col = 0;
        if (intercept) {
            X.col(col++).setOnes();
            names.push_back("(intercept)");
        }
        for (std::size_t k = 0; k < d.predictors.size(); ++k) {
            X.col(col++) = Eigen::Map<const Eigen::VectorXd>(d.predictors[k].data(), n);
            names.push_back(r.cfg.predictors[k]);
        }
    }

    RegressionOptions opts;
    r.cfg.kernel = "scale";
    if (r.cfg.grid != "auto") {
        const QuadratureRule rule = resolve_rule(r.cfg, KernelFamily::scale_mixture);
        opts.scale_grid = build_grid(parse_grid_spec(r.cfg.grid), rule);
        r.cfg.rule = std::string(to_string(rule));
    }
    opts.schedule = r.schedule();
    r.cfg.perms = r.cfg.perms.value_or(1);
    opts.permutations = *r.cfg.perms;
    opts.seed = r.cfg.seed;
    r.cfg.max_iter = r.cfg.max_iter.value_or(100);
    opts.max_iterations = *r.cfg.max_iter;
    const RegressionFit fit = prem_fit(X, y, opts);
    const Eigen::VectorXd b_ols = ols(X, y);

    const Eigen::VectorXd fitted = X * fit.beta;
    const Eigen::VectorXd resid = y - fitted;
    Table rows;
    std::vector<double> index(yv.size());
    std::iota(index.begin(), index.end(), 0.0);
    rows.add("index", std::move(index));
    rows.add("y", yv);
    rows.add("fitted", {fitted.data(), fitted.data() + fitted.size()});
    rows.add("residual", {resid.data(), resid.data() + resid.size()});
    rows.add("weight", {fit.weights.data(), fit.weights.data() + fit.weights.size()});

    Json trace = Json::array();
    for (std::size_t k = 0; k < fit.trace.size(); ++k) {
        const auto& it = fit.trace[k];
        trace.push_back({{"iteration", k},
                         {"objective", it.objective},
                         {"beta", std::vector<double>(it.beta.data(), it.beta.data() + it.beta.size())}});
    }
    r.tables({{"", rows}, {"scale", density_table(fit.scale_density)}});
    Json doc = r.header();
    doc["n"] = yv.size();
    doc["columns"] = names;
    doc["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
    doc["beta_ols"] = std::vector<double>(b_ols.data(), b_ols.data() + b_ols.size());
    doc["converged"] = fit.converged;
    doc["iterations"] = fit.iterations;
    doc["weights"] = std::vector<double>(fit.weights.data(), fit.weights.data() + fit.weights.size());
    doc["scale_density"] = density_json(fit.scale_density);
    doc["trace"] = std::move(trace);
    r.finish(std::move(doc));
}

void run_npmle(Run& r) {
    const KernelFamily family = parse_family(r.cfg.kernel);
    const Ingested d = r.ingest(family == KernelFamily::binomial);
    const auto y = d.y();
    r.cfg.theta = resolve_theta(family, r.cfg.theta);
    const Kernel kernel = Kernel::make(family, r.cfg.theta);
    const GridPtr grid = r.grid_for(family, y);
    r.cfg.max_iter = r.cfg.max_iter.value_or(10000);
    const FredholmState st = npmle_fit(d.observations, kernel, MixingDensity::uniform(grid),
                                       NpmleOptions{r.cfg.tol, *r.cfg.max_iter});
    Table dens = density_table(st.density);
    dens.add("gradient", st.gradient);
    Table ll;
    std::vector<double> iter(st.log_likelihood.size());
    std::iota(iter.begin(), iter.end(), 0.0);
    ll.add("iteration", std::move(iter));
    ll.add("log_likelihood", st.log_likelihood);
    std::vector<std::pair<std::string, Table>> named{{"", dens}, {"loglik", ll}};
    if (auto m = mixture_table(kernel, st.density, y)) named.emplace_back("mixture", *m);
    r.tables(named);

    Json doc = r.header();
    doc["n"] = d.rows();
    doc["kernel"] = kernel_json(kernel);
    doc["iterations"] = st.iterations;
    doc["converged"] = st.converged;
    doc["sup_gradient"] = st.sup_gradient;
    doc["log_likelihood"] = st.log_likelihood.back();
    doc["density"] = density_json(st.density);
    doc["gradient"] = st.gradient;
    r.finish(std::move(doc));
}

void run_predict(Run& r) {
    const Ingested d = r.ingest(false);
    const auto y = d.y();
    YGridRange range{};
    std::size_t nodes = r.cfg.ygrid_nodes;
    if (r.cfg.ygrid == "auto") {
        range = auto_ygrid_range(y);
    } else {
        const auto parts = split(r.cfg.ygrid, ':');
        if (parts.size() != 2 && parts.size() != 3) {
            throw Error(ErrorCode::config, "--ygrid takes auto, lo:hi or lo:hi:m");
        }
        range = {parse_double(parts[0], "y grid"), parse_double(parts[1], "y grid")};
        if (parts.size() == 3) {
            nodes = static_cast<std::size_t>(parse_double(parts[2], "y grid size"));
        }
    }
    r.cfg.ygrid = exact(range.lower) + ":" + exact(range.upper) + ":" + std::to_string(nodes);
    r.cfg.ygrid_nodes = nodes;
    r.cfg.kernel = "copula";

    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    const double sd0 = 2.0 * robust_sd(y);
    const PredictiveState init = make_predictive_state(
        range.lower, range.upper, nodes, [=](double v) { return normal_pdf(v, mean, sd0); },
        r.cfg.rho, r.schedule());
    r.cfg.perms = r.cfg.perms.value_or(1);
    const PredictiveState st = *r.cfg.perms <= 1
                                   ? copula_fit(init, y)
                                   : copula_fit_averaged(init, y, *r.cfg.perms, r.cfg.seed);
    Table t;
    t.add("y", st.y);
    t.add("density", st.density);
    t.add("cdf", st.cdf);
    r.tables({{"", t}});

    Json doc = r.header();
    doc["n"] = st.n;
    doc["rho"] = st.rho;
    doc["f0"] = {{"family", "normal"}, {"mean", mean}, {"sd", sd0}};
    doc["raw_mass"] = st.raw_mass;
    doc["clamped"] = st.clamped;
    doc["y"] = st.y;
    doc["density"] = st.density;
    doc["cdf"] = st.cdf;
    r.finish(std::move(doc));
}

void run_simulate(Run& r) {
    if (r.cfg.list) {
        for (auto name : scenario_names()) {
            const SimScenario s = find_scenario(name);
            r.out << s.name << '\t' << s.description << '\n';
        }
        return;
    }
    if (r.cfg.scenario.empty()) throw Error(ErrorCode::config, "--scenario is required");
    SimScenario s = find_scenario(r.cfg.scenario);
    s.seed = r.cfg.seed;
    if (r.cfg.n) s.n = *r.cfg.n;
    r.cfg.n = s.n;

    Table t;
    if (r.cfg.curve.empty()) {
        const LabelledDraws draws = simulate_labelled(s);
        std::vector<double> y;
        std::vector<double> trials;
        for (const auto& o : draws.data) {
            y.push_back(o.y);
            if (o.trials) trials.push_back(*o.trials);
        }
        t.add("y", std::move(y));
        if (!trials.empty()) t.add("trials", std::move(trials));
        t.add("latent", draws.latent);
    } else {
        EstimatorSpec est = default_estimator(s);
        est.schedule = r.schedule();
        if (r.cfg.grid != "auto") est.grid = parse_grid_spec(r.cfg.grid);
        if (!r.cfg.rule.empty()) est.rule = parse_rule(r.cfg.rule);
        if (!r.cfg.theta.empty()) est.theta = r.cfg.theta;
        r.cfg.grid = grid_text(est.grid);
        r.cfg.rule = std::string(to_string(est.rule));
        const auto checkpoints = parse_checkpoints(r.cfg.curve);
        const CurveSummary sum = replicate_curves(s, est, checkpoints, r.cfg.reps, r.cfg.jobs);
        t.add("n", std::vector<double>(sum.n.begin(), sum.n.end()));
        t.add("median_kl", sum.median_kl);
        for (std::size_t k = 0; k < sum.replicate_kl.size(); ++k) {
            t.add("kl_seed" + std::to_string(s.seed + k), sum.replicate_kl[k]);
        }
    }
    if (r.cfg.output.empty()) {
        write_csv(t, r.cfg.to_json(), r.out);
    } else {
        write_csv(t, r.cfg.to_json(), fs::path(r.cfg.output));
    }
}

void dispatch(Run& r) {
    const std::string& c = r.cfg.command;
    if (c == "fit") return run_fit(r);
    if (c == "prml") return run_prml(r);
    if (c == "fdr") return run_fdr(r);
    if (c == "regress") return run_regress(r);
    if (c == "npmle") return run_npmle(r);
    if (c == "predict") return run_predict(r);
    if (c == "simulate") return run_simulate(r);
    throw Error(ErrorCode::config, "unknown command '" + c + "'");
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::config:
        case ErrorCode::parse:
        case ErrorCode::parameter:
        case ErrorCode::invalid_grid:
        case ErrorCode::invalid_schedule:
            return exit_usage;
        default:
            return exit_numerical;
    }
}

void error_record(std::ostream& err, int status, std::string_view code, const std::string& message,
                  std::optional<std::size_t> index, const std::vector<std::size_t>& lines) {
    Json rec;
    rec["status"] = status;
    rec["code"] = std::string(code);
    rec["message"] = message;
    if (index) {
        rec["index"] = *index;
        rec["row"] = *index + 1;
        if (*index < lines.size()) rec["line"] = lines[*index];
    }
    err << Json{{"error", rec}}.dump() << '\n';
}

void add_common(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--input,-i", cfg.input, "Input CSV file with a header row");
    sub->add_option("--output,-o", cfg.output, "JSON summary path (stdout when omitted)");
    sub->add_option("--csv", cfg.csv, "Base path for CSV tables (default: next to --output)");
    sub->add_option("--column", cfg.column, "Response column (default: first column)");
    sub->add_option("--seed", cfg.seed, "Seed for every random choice");
    sub->add_option("--jobs", cfg.jobs, "Worker threads for permutations/replicates")
        ->check(CLI::PositiveNumber);
    sub->add_option("--gamma", cfg.gamma, "Weight exponent, w_i = (c + i)^-gamma");
    sub->add_option("--c", cfg.c, "Weight offset c > 0");
    sub->add_option("--perms", cfg.perms, "Number of data permutations averaged");
}

void add_kernel(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--kernel,-k", cfg.kernel, "poisson | gauss | binom | scale | twogroups");
    sub->add_option("--theta", cfg.theta, "Kernel parameters (gauss: sigma; twogroups: mu,tau,sigma)")
        ->delimiter(',');
    sub->add_option("--grid", cfg.grid, "Mixing grid lo:hi:m[+atom@x,...] or auto");
    sub->add_option("--rule", cfg.rule, "Quadrature rule: midpoint | trapezoid | log");
    sub->add_option("--trials", cfg.trials_column, "Binomial trial-count column");
}

}  // namespace

double robust_sd(std::span<const double> y) {
    std::vector<double> v(y.begin(), y.end());
    const double center = median(v);
    for (double& x : v) x = std::abs(x - center);
    double s = 1.4826 * median(std::move(v));
    if (!(s > 0.0) && y.size() > 1) {
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        double ss = 0.0;
        for (double x : y) ss += (x - mean) * (x - mean);
        s = std::sqrt(ss / static_cast<double>(y.size() - 1));
    }
    return s > 0.0 ? s : 1.0;
}

GridSpec auto_grid(KernelFamily family, std::span<const double> y) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    switch (family) {
        case KernelFamily::poisson: {
            const double top = std::max(*hi, 1.0);
            return GridSpec{0.0, top + 4.0 * std::sqrt(top), 400, {}};
        }
        case KernelFamily::gaussian:
            if (*lo == *hi) return GridSpec{*lo - 1.0, *hi + 1.0, 400, {}};
            return GridSpec{*lo, *hi, 400, {}};
        case KernelFamily::binomial: return GridSpec{0.0, 1.0, 400, {}};
        case KernelFamily::scale_mixture: {
            const double s = robust_sd(y);
            return GridSpec{0.1 * s, 10.0 * s, 200, {}};
        }
        case KernelFamily::two_groups: return GridSpec{-1.0, 1.0, 200, {0.0}};
    }
    return {};
}

Json RunConfig::to_json() const {
    Json j;
    j["command"] = command;
    j["input"] = input;
    j["output"] = output;
    j["csv"] = csv;
    j["column"] = column;
    j["trials_column"] = trials_column;
    j["predictors"] = predictors;
    j["poly"] = poly;
    j["intercept"] = !no_intercept;
    j["kernel"] = kernel;
    j["theta"] = theta;
    j["grid"] = grid;
    j["rule"] = rule;
    j["gamma"] = gamma;
    j["c"] = c;
    j["perms"] = perms ? Json(*perms) : Json(nullptr);
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["theta_box"] = theta_box;
    j["cutoff"] = cutoff;
    j["tol"] = tol;
    j["max_iter"] = max_iter ? Json(*max_iter) : Json(nullptr);
    j["rho"] = rho;
    j["ygrid"] = ygrid;
    j["ygrid_nodes"] = ygrid_nodes;
    j["scenario"] = scenario;
    j["n"] = n ? Json(*n) : Json(nullptr);
    j["curve"] = curve;
    j["reps"] = reps;
    return j;
}

void execute(RunConfig config, std::ostream& out) {
    std::vector<std::size_t> lines;
    Run r{std::move(config), out, lines, {}};
    dispatch(r);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Predictive recursion for nonparametric mixture estimation", "prmix"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto* fit = app.add_subcommand("fit", "PR estimate of a mixing density");
    add_common(fit, cfg);
    add_kernel(fit, cfg);

    auto* prml = app.add_subcommand("prml", "PR marginal-likelihood estimate of kernel parameters");
    add_common(prml, cfg);
    add_kernel(prml, cfg);
    prml->add_option("--theta-box", cfg.theta_box, "Search box lo:hi[,lo:hi...]");

    auto* fdr = app.add_subcommand("fdr", "Two-groups local fdr and multiple testing");
    add_common(fdr, cfg);
    fdr->add_option("--cutoff", cfg.cutoff, "Reject when fdr <= cutoff")
        ->check(CLI::Range(0.0, 1.0));
    fdr->add_option("--theta-box", cfg.theta_box, "Box for mu,tau,sigma as lo:hi,lo:hi,lo:hi");
    fdr->add_option("--grid", cfg.grid, "Continuous nodes on [-1, 1] (default 200)");

    auto* regress = app.add_subcommand("regress", "Robust regression with scale-mixture errors");
    add_common(regress, cfg);
    regress->add_option("--predictors,-x", cfg.predictors, "Predictor columns")->delimiter(',');
    regress->add_option("--poly", cfg.poly, "Polynomial degree in the single predictor");
    regress->add_flag("--no-intercept", cfg.no_intercept, "Omit the intercept column");
    regress->add_option("--grid", cfg.grid, "Scale grid lo:hi:m or auto");
    regress->add_option("--rule", cfg.rule, "Quadrature rule for the scale grid");
    regress->add_option("--max-iter", cfg.max_iter, "Maximum outer iterations");

    auto* npmle = app.add_subcommand("npmle", "Fredholm/EM iteration to the NPMLE");
    add_common(npmle, cfg);
    add_kernel(npmle, cfg);
    npmle->add_option("--tol", cfg.tol, "Sup-norm change tolerance")->check(CLI::PositiveNumber);
    npmle->add_option("--max-iter", cfg.max_iter, "Maximum iterations");

    auto* predict = app.add_subcommand("predict", "Copula-based recursive predictive density");
    add_common(predict, cfg);
    predict->add_option("--rho", cfg.rho, "Copula correlation in (-1, 1)");
    predict->add_option("--ygrid", cfg.ygrid, "auto, lo:hi or lo:hi:m");
    predict->add_option("--ygrid-nodes", cfg.ygrid_nodes, "Nodes of the automatic y grid");

    auto* simulate = app.add_subcommand("simulate", "Seeded synthetic data and KL curves");
    add_common(simulate, cfg);
    add_kernel(simulate, cfg);
    simulate->add_option("--scenario", cfg.scenario, "Scenario name (see --list)");
    simulate->add_option("--n", cfg.n, "Sample size");
    simulate->add_flag("--list", cfg.list, "List registered scenarios");
    simulate->add_option("--curve", cfg.curve, "Checkpoints n1,n2,... for a KL curve");
    simulate->add_option("--reps", cfg.reps, "Replications for --curve (seeds seed, seed+1, ...)")
        ->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << app.help();
        error_record(err, exit_usage, "usage", e.what(), std::nullopt, {});
        return exit_usage;
    }
    for (const auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
    std::vector<std::size_t> lines;
    try {
        Run r{cfg, out, lines, {}};
        dispatch(r);
        return exit_ok;
    } catch (const Error& e) {
        const int status = status_for(e.code());
        error_record(err, status, to_string(e.code()), e.what(), e.index(), lines);
        return status;
    } catch (const std::exception& e) {
        error_record(err, exit_numerical, "internal", e.what(), std::nullopt, lines);
        return exit_numerical;
    }
}

}  // namespace prmix::app
