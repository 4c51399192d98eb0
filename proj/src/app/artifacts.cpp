#include "prmix/app/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "prmix/error.hpp"

namespace prmix::app {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::config, "cannot write output file '" + path.string() + "'");
    return out;
}

std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Json grid_json(const MixingGrid& grid) {
    Json atoms = Json::array();
    for (std::size_t i : grid.atom_indices()) atoms.push_back(grid.node(i));
    Json j;
    j["lower"] = grid.lower();
    j["upper"] = grid.upper();
    j["m"] = grid.continuous_size();
    j["rule"] = std::string(to_string(grid.rule()));
    j["atoms"] = atoms;
    j["nodes"] = std::vector<double>(grid.nodes().begin(), grid.nodes().end());
    j["weights"] = std::vector<double>(grid.weights().begin(), grid.weights().end());
    return j;
}

Json kernel_json(const Kernel& kernel) {
    Json j;
    j["family"] = std::string(to_string(kernel.family()));
    j["theta"] = std::vector<double>(kernel.theta().begin(), kernel.theta().end());
    return j;
}

Json density_json(const MixingDensity& density) {
    Json j;
    j["grid"] = grid_json(density.grid());
    j["values"] = std::vector<double>(density.values().begin(), density.values().end());
    return j;
}

GridPtr grid_from_json(const Json& j) {
    try {
        const auto m = j.at("m").get<std::size_t>();
        auto atoms = j.at("atoms").get<std::vector<double>>();
        GridPtr grid;
        if (m == 0) {
            grid = std::make_shared<const MixingGrid>(MixingGrid::discrete(std::move(atoms)));
        } else {
            grid = build_grid(j.at("lower").get<double>(), j.at("upper").get<double>(), m,
                              parse_rule(j.at("rule").get<std::string>()), std::move(atoms));
        }
        const auto nodes = j.at("nodes").get<std::vector<double>>();
        const auto weights = j.at("weights").get<std::vector<double>>();
        if (nodes.size() != grid->size() || weights.size() != grid->size()) {
            throw Error(ErrorCode::config, "stored grid does not match its description");
        }
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double tol = 1e-12 * std::max(1.0, std::abs(nodes[i]));
            if (std::abs(nodes[i] - grid->node(i)) > tol ||
                std::abs(weights[i] - grid->weight(i)) > 1e-12 * std::max(1.0, weights[i])) {
                throw Error(ErrorCode::config, "stored grid does not match its description");
            }
        }
        return grid;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed grid record: ") + e.what());
    }
}

Kernel kernel_from_json(const Json& j) {
    try {
        const auto theta = j.at("theta").get<std::vector<double>>();
        return Kernel::make(parse_family(j.at("family").get<std::string>()), theta);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed kernel record: ") + e.what());
    }
}

LoadedFit load_fit(const Json& document) {
    try {
        const Json& d = document.at("density");
        GridPtr grid = grid_from_json(d.at("grid"));
        auto values = d.at("values").get<std::vector<double>>();
        return LoadedFit{kernel_from_json(document.at("kernel")),
                         MixingDensity(std::move(grid), std::move(values))};
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed fit artifact: ") + e.what());
    }
}

LoadedFit load_fit(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config, "cannot read fit file '" + path.string() + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::parse, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return load_fit(doc);
}

void write_json(const Json& document, std::ostream& out) { out << document.dump(2) << '\n'; }

void write_json(const Json& document, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_json(document, out);
}

void Table::add(std::string name, std::vector<double> values) {
    if (!columns.empty() && values.size() != columns.front().size()) {
        throw Error(ErrorCode::shape, "table column '" + name + "' has the wrong length");
    }
    header.push_back(std::move(name));
    columns.push_back(std::move(values));
}

void write_csv(const Table& table, const Json& config, std::ostream& out) {
    out << "# config: " << config.dump() << '\n';
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        out << (k ? "," : "") << table.header[k];
    }
    out << '\n';
    const std::size_t rows = table.columns.empty() ? 0 : table.columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < table.columns.size(); ++k) {
            out << (k ? "," : "") << number(table.columns[k][r]);
        }
        out << '\n';
    }
}

void write_csv(const Table& table, const Json& config, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_csv(table, config, out);
}

}  // namespace prmix::app
