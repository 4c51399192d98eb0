#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "prmix/app/artifacts.hpp"
#include "prmix/app/cli.hpp"
#include "prmix/app/csv.hpp"
#include "prmix/recursion.hpp"
#include "prmix/simulation.hpp"

using namespace prmix;
using namespace prmix::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("prmix_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
    std::ostringstream o;
    std::ostringstream e;
    const int status = run(args, o, e);
    if (out) *out = o.str();
    if (status != 0) MESSAGE(e.str());
    return status;
}

Json read_json(const fs::path& p) {
    std::ifstream in(p);
    return Json::parse(in);
}

fs::path data_dir() {
    const char* env = std::getenv("PRMIX_DATA");
    return env ? fs::path(env) : fs::path("data");
}

}  // namespace

TEST_CASE("simulate, fit and reload a Poisson mixture") {
    const fs::path dir = scratch("poisson");
    REQUIRE(cli({"simulate", "--scenario", "poisson-2atom", "--n", "1500", "--seed", "31", "-o",
                 (dir / "draws.csv").string()}) == 0);
    const CsvTable draws = read_csv(dir / "draws.csv");
    CHECK(draws.rows() == 1500);
    CHECK(draws.header == std::vector<std::string>{"y", "latent"});

    REQUIRE(cli({"fit", "-k", "poisson", "-i", (dir / "draws.csv").string(), "--column", "y", "--grid",
                 "0:25:200", "--perms", "5", "-o", (dir / "fit.json").string()}) == 0);
    const LoadedFit fit = load_fit(dir / "fit.json");

    SimScenario s = find_scenario("poisson-2atom");
    const TrueMixture truth(s);
    const DensityFn f_hat = mixture_evaluator(fit.kernel, fit.density);
    const DensityFn f0 = mixture_evaluator(fit.kernel, MixingDensity::uniform(fit.density.grid_ptr()));
    const auto quad = kl_quadrature(s);
    const double kl_hat = kl_divergence(truth.evaluator(), f_hat, quad);
    const double kl_0 = kl_divergence(truth.evaluator(), f0, quad);
    CHECK(kl_hat < 0.02);
    CHECK(kl_hat < kl_0);

    const Json doc = read_json(dir / "fit.json");
    CHECK(doc["config"]["grid"] == "0:25:200");
    CHECK(doc["tables"].size() == 2);
}

TEST_CASE("two-groups pipeline keeps fdr in range and thresholds consistent") {
    const fs::path dir = scratch("fdr");
    REQUIRE(cli({"simulate", "--scenario", "twogroups", "--n", "3000", "--seed", "8", "-o",
                 (dir / "z.csv").string()}) == 0);
    REQUIRE(cli({"fdr", "-i", (dir / "z.csv").string(), "--column", "y", "-o", (dir / "fdr.json").string()}) == 0);
    const Json doc = read_json(dir / "fdr.json");
    CHECK(doc["pi_hat"].get<double>() > 0.75);
    CHECK(doc["pi_hat"].get<double>() <= 0.999);
    const CsvTable cases = read_csv(dir / "fdr.csv");
    const auto& fdr = cases.columns[cases.column("fdr")];
    const auto& z = cases.columns[cases.column("z")];
    const auto& rej = cases.columns[cases.column("reject")];
    std::size_t count = 0;
    for (std::size_t i = 0; i < fdr.size(); ++i) {
        CHECK(fdr[i] >= 0.0);
        CHECK(fdr[i] <= 1.0);
        CHECK((rej[i] == 1.0) == (fdr[i] <= 0.1));
        count += rej[i] == 1.0;
        if (!doc["upper_threshold"].is_null() && z[i] > doc["upper_threshold"].get<double>() + 0.5) {
            CHECK(rej[i] == 1.0);
        }
    }
    CHECK(doc["rejections"] == count);
    const CsvTable curve = read_csv(dir / "fdr_curve.csv");
    CHECK(curve.rows() == 400);
}

TEST_CASE("galaxy: PRML and NPMLE run end to end") {
    const fs::path dir = scratch("galaxy");
    const std::string galaxy = (data_dir() / "galaxy.csv").string();
    REQUIRE(cli({"prml", "-i", galaxy, "--grid", "5:40:200", "--theta-box", "0.3:3", "--perms", "5",
                 "-o", (dir / "prml.json").string()}) == 0);
    const Json prml = read_json(dir / "prml.json");
    const double sigma = prml["theta_hat"][0].get<double>();
    CHECK(sigma >= 0.3);
    CHECK(sigma <= 3.0);
    const LoadedFit fit = load_fit(dir / "prml.json");
    CHECK(fit.kernel.theta()[0] == sigma);

    REQUIRE(cli({"npmle", "-i", galaxy, "--theta", std::to_string(sigma), "--grid", "5:40:200",
                 "--max-iter", "2000", "-o", (dir / "npmle.json").string()}) == 0);
    const Json np = read_json(dir / "npmle.json");
    CHECK(np["log_likelihood"].get<double>() >= prml["log_likelihood"].get<double>() - 1e-9);
}

TEST_CASE("predict and regress pipelines") {
    const fs::path dir = scratch("misc");
    REQUIRE(cli({"simulate", "--scenario", "gauss-bimodal", "--seed", "2", "-o", (dir / "b.csv").string()}) == 0);
    std::string out;
    REQUIRE(cli({"predict", "-i", (dir / "b.csv").string(), "--column", "y", "--rho", "0.9"}, &out) == 0);
    const Json pred = Json::parse(out);
    CHECK(pred["n"] == 500);
    CHECK(pred["cdf"].back().get<double>() == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> beta{1.0, 2.0, -1.0};
    const RegressionBed bed = simulate_regression(150, beta, 1.0, 0.1, 10.0, 44);
    {
        std::ofstream f(dir / "reg.csv");
        f.precision(17);
        f << "y,a,b\n";
        for (Eigen::Index i = 0; i < bed.X.rows(); ++i) f << bed.y[i] << ',' << bed.X(i, 1) << ',' << bed.X(i, 2) << '\n';
    }
    REQUIRE(cli({"regress", "-i", (dir / "reg.csv").string(), "--column", "y", "-x", "a,b"}, &out) == 0);
    const Json reg = Json::parse(out);
    double err_pr = 0.0;
    double err_ols = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        err_pr += std::pow(reg["beta"][k].get<double>() - beta[k], 2);
        err_ols += std::pow(reg["beta_ols"][k].get<double>() - beta[k], 2);
    }
    CHECK(err_pr < err_ols);
    CHECK(reg["columns"][0] == "(intercept)");
}
