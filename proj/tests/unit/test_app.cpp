#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prmix/app/artifacts.hpp"
#include "prmix/app/cli.hpp"
#include "prmix/app/csv.hpp"
#include "prmix/recursion.hpp"
#include "support.hpp"

using namespace prmix;
using namespace prmix::app;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("prmix_unit_" + std::to_string(std::hash<std::string>{}(
                                    doctest::getContextOptions()->currentTest->m_name)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = path / name;
        std::ofstream(p) << text;
        return p;
    }
};

struct Result {
    int status;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int status = run(args, out, err);
    return {status, out.str(), err.str()};
}

Json last_record(const std::string& err) {
    const auto pos = err.rfind("{\"error\"");
    REQUIRE(pos != std::string::npos);
    return Json::parse(err.substr(pos));
}

}  // namespace

TEST_CASE("csv reading") {
    TempDir tmp;
    const auto p = tmp.write("a.csv", "# comment\ny, n\n19,52\n\n2, 3\n\"1\",18\n");
    const CsvTable t = read_csv(p);
    CHECK(t.header == std::vector<std::string>{"y", "n"});
    CHECK(t.rows() == 3);
    CHECK(t.lines == std::vector<std::size_t>{3, 5, 6});
    CHECK(t.columns[1][2] == 18.0);

    const Ingested d = ingest_csv(p, ColumnSpec{"y", std::string("n"), {}});
    REQUIRE(d.rows() == 3);
    CHECK(d.observations[0].y == 19.0);
    CHECK(d.observations[0].trials == std::optional<int>(52));
    CHECK(d.observations[2].trials == std::optional<int>(18));
    CHECK(d.y_column == "y");

    CHECK_ERROR_CODE(ingest_csv(p, ColumnSpec{"missing", std::nullopt, {}}), ErrorCode::config);
    try {
        ingest_csv(p, ColumnSpec{"zzz", std::nullopt, {}});
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("zzz") != std::string::npos);
    }
}

TEST_CASE("csv errors") {
    TempDir tmp;
    CHECK_ERROR_CODE(read_csv(tmp.write("empty.csv", "")), ErrorCode::parse);
    CHECK_ERROR_CODE(read_csv(tmp.write("header.csv", "y\n")), ErrorCode::parse);
    CHECK_ERROR_CODE(read_csv(tmp.write("ragged.csv", "a,b\n1,2\n3\n")), ErrorCode::parse);
    CHECK_ERROR_CODE(read_csv(tmp.path / "absent.csv"), ErrorCode::config);
    try {
        read_csv(tmp.write("text.csv", "y\n1\n2\nabc\n"));
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
        CHECK(e.index() == std::optional<std::size_t>(2));
    }
    CHECK_ERROR_CODE(read_csv(tmp.write("inf.csv", "y\ninf\n")), ErrorCode::parse);
    CHECK_ERROR_CODE(ingest_csv(tmp.write("trials.csv", "y,n\n1,2.5\n"), ColumnSpec{"y", std::string("n"), {}}),
                     ErrorCode::parse);
}

TEST_CASE("fit artifacts round-trip") {
    const auto g = build_grid(0.5, 10.0, 37, QuadratureRule::trapezoid, {2.5});
    std::vector<Observation> data{{1, {}}, {4, {}}, {2, {}}, {7, {}}};
    const PRFit fit = pr_fit(data, Kernel::poisson(), MixingDensity::uniform(g), WeightSchedule{});
    Json doc;
    doc["kernel"] = kernel_json(fit.kernel);
    doc["density"] = density_json(fit.density);
    const Json reparsed = Json::parse(doc.dump());
    const LoadedFit back = load_fit(reparsed);
    CHECK(back.kernel.family() == KernelFamily::poisson);
    REQUIRE(back.density.size() == fit.density.size());
    for (std::size_t j = 0; j < g->size(); ++j) {
        CHECK(std::abs(back.density[j] - fit.density[j]) <= 1e-12);
        CHECK(back.density.grid().node(j) == g->node(j));
        CHECK(back.density.grid().is_atom(j) == g->is_atom(j));
    }
    Json tampered = reparsed;
    tampered["density"]["grid"]["nodes"][3] = 99.0;
    CHECK_ERROR_CODE(load_fit(tampered), ErrorCode::config);
    CHECK_ERROR_CODE(load_fit(Json::parse("{\"kernel\": {}}")), ErrorCode::parse);

    const auto atoms = std::make_shared<const MixingGrid>(MixingGrid::discrete({1.0, 2.0}));
    Json d2;
    d2["kernel"] = kernel_json(Kernel::gaussian(0.5));
    d2["density"] = density_json(MixingDensity(atoms, {0.25, 0.75}));
    const LoadedFit b2 = load_fit(Json::parse(d2.dump()));
    CHECK(b2.kernel.theta()[0] == 0.5);
    CHECK(b2.density[1] == 0.75);
}

TEST_CASE("csv tables") {
    Table t;
    t.add("a", {1.0, 0.1});
    t.add("b", {2.0, -3.5});
    CHECK_ERROR_CODE(t.add("c", {1.0}), ErrorCode::shape);
    std::ostringstream out;
    write_csv(t, Json{{"seed", 3}}, out);
    CHECK(out.str() == "# config: {\"seed\":3}\na,b\n1,2\n0.10000000000000001,-3.5\n");
}

TEST_CASE("cli: fit writes JSON and tables") {
    TempDir tmp;
    const auto in = tmp.write("y.csv", "count\n0\n1\n3\n2\n5\n1\n0\n4\n");
    const auto out = tmp.path / "fit.json";
    const Result r = run_cli({"fit", "--kernel", "poisson", "--input", in.string(), "--output",
                              out.string(), "--perms", "4", "--seed", "12"});
    REQUIRE(r.status == 0);
    std::ifstream f(out);
    const Json doc = Json::parse(f);
    CHECK(doc["command"] == "fit");
    CHECK(doc["seed"] == 12);
    CHECK(doc["config"]["perms"] == 4);
    CHECK(doc["n"] == 8);
    CHECK(doc["log_predictive"].size() == 8);
    CHECK(fs::exists(tmp.path / "fit.csv"));
    CHECK(fs::exists(tmp.path / "fit_mixture.csv"));
    const LoadedFit back = load_fit(out);
    CHECK(back.kernel.family() == KernelFamily::poisson);
    std::ifstream tab(tmp.path / "fit.csv");
    std::string first;
    std::getline(tab, first);
    CHECK(first.rfind("# config: ", 0) == 0);

    const Result again = run_cli({"fit", "--kernel", "poisson", "--input", in.string(), "--perms",
                                  "4", "--seed", "12"});
    REQUIRE(again.status == 0);
    const Json doc2 = Json::parse(again.out);
    CHECK(doc2["density"]["values"] == doc["density"]["values"]);
}

TEST_CASE("cli: exit statuses and error records") {
    TempDir tmp;
    SUBCASE("usage") {
        const Result r = run_cli({"frobnicate"});
        CHECK(r.status == 1);
        CHECK(r.err.find("Usage") != std::string::npos);
        CHECK(last_record(r.err)["error"]["status"] == 1);
        CHECK(run_cli({}).status == 1);
        CHECK(run_cli({"fit", "--gamma", "abc"}).status == 1);
        CHECK(run_cli({"--help"}).status == 0);
    }
    SUBCASE("numerical: negative count cites the row") {
        const auto in = tmp.write("neg.csv", "count\n1\n3\n-2\n4\n");
        const Result r = run_cli({"fit", "-k", "poisson", "-i", in.string()});
        CHECK(r.status == 2);
        const Json rec = last_record(r.err)["error"];
        CHECK(rec["code"] == "domain");
        CHECK(rec["index"] == 2);
        CHECK(rec["row"] == 3);
        CHECK(rec["line"] == 4);
    }
    SUBCASE("configuration problems") {
        const auto in = tmp.write("y.csv", "y\n1\n2\n");
        CHECK(run_cli({"fit", "-i", in.string(), "--column", "nope"}).status == 1);
        CHECK(run_cli({"fit", "-i", in.string(), "--gamma", "0.3"}).status == 1);
        CHECK(run_cli({"fit", "-i", in.string(), "--grid", "1:0:10"}).status == 1);
        CHECK(run_cli({"fit", "-i", (tmp.path / "absent.csv").string()}).status == 1);
        CHECK(run_cli({"fit"}).status == 1);
        CHECK(run_cli({"prml", "-k", "poisson", "-i", in.string()}).status == 1);
        CHECK(run_cli({"simulate", "--scenario", "nope"}).status == 1);
        const Result empty = run_cli({"fit", "-i", tmp.write("e.csv", "").string()});
        CHECK(empty.status == 1);
        CHECK(last_record(empty.err)["error"]["code"] == "parse");
    }
    SUBCASE("range failure is numerical") {
        const auto in = tmp.write("y.csv", "y\n1\n2\n3\n40\n");
        CHECK(run_cli({"predict", "-i", in.string(), "--ygrid", "0:5"}).status == 2);
    }
}

TEST_CASE("cli: simulate then fit binomial data") {
    TempDir tmp;
    const auto sim = tmp.path / "b.csv";
    REQUIRE(run_cli({"simulate", "--scenario", "binomial-beta", "--n", "60", "--seed", "4", "-o",
                     sim.string()})
                .status == 0);
    const Result r = run_cli({"fit", "-k", "binom", "--trials", "trials", "-i", sim.string(),
                              "--column", "y", "--grid", "0:1:50", "--perms", "2"});
    REQUIRE(r.status == 0);
    const Json doc = Json::parse(r.out);
    CHECK(doc["n"] == 60);
    CHECK(doc["kernel"]["family"] == "binom");
}
