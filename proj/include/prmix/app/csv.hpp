#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prmix/kernels.hpp"

namespace prmix::app {

/// Numeric CSV with a header row.  Blank lines and lines starting with '#'
/// are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    std::vector<std::size_t> lines;  ///< 1-based file line of each data row

    std::size_t rows() const { return lines.size(); }
    /// Index of a named column; config error naming the column if absent.
    std::size_t column(const std::string& name) const;
};

/// Parse errors carry the file line and column name of the bad cell.
CsvTable read_csv(const std::filesystem::path& path);

struct ColumnSpec {
    std::string y;                       ///< response column; first column if empty
    std::optional<std::string> trials;   ///< binomial N
    std::vector<std::string> predictors; ///< regression covariates
};

struct Ingested {
    std::vector<Observation> observations;
    std::vector<std::vector<double>> predictors;  ///< one column per predictor
    std::vector<std::size_t> lines;               ///< file line of each observation
    std::string y_column;

    std::vector<double> y() const;
    std::size_t rows() const { return observations.size(); }
};

Ingested ingest_csv(const std::filesystem::path& path, const ColumnSpec& spec = {});

}  // namespace prmix::app
