#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prmix/grid.hpp"
#include "prmix/kernels.hpp"

namespace prmix::app {

using Json = nlohmann::ordered_json;

Json grid_json(const MixingGrid& grid);
Json kernel_json(const Kernel& kernel);
/// Grid description plus density values.
Json density_json(const MixingDensity& density);

/// Rebuilds a grid from grid_json output and checks the stored nodes and
/// weights against the rebuilt ones.
GridPtr grid_from_json(const Json& j);
Kernel kernel_from_json(const Json& j);

struct LoadedFit {
    Kernel kernel;
    MixingDensity density;
};

/// Reads the kernel and mixing density out of a `fit` or `prml` artifact.
LoadedFit load_fit(const Json& document);
LoadedFit load_fit(const std::filesystem::path& path);

void write_json(const Json& document, std::ostream& out);
void write_json(const Json& document, const std::filesystem::path& path);

/// Column-major numeric table written as CSV, preceded by a
/// "# config: {...}" line holding the run configuration.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    void add(std::string name, std::vector<double> values);
};

void write_csv(const Table& table, const Json& config, std::ostream& out);
void write_csv(const Table& table, const Json& config, const std::filesystem::path& path);

}  // namespace prmix::app
